import numpy as np
import pytest

from ppfa import (
    ConfigError,
    EmConfig,
    GaConfig,
    ModelParams,
    SelectionGrid,
    far,
    fdr,
    inject_step_fault,
    select,
    simulate,
)


class TestRates:
    def test_fdr_values(self):
        assert fdr(9, 1) == pytest.approx(0.9)
        assert fdr(5, 0) == 1.0
        assert fdr(0, 5) == 0.0

    def test_far_values(self):
        assert far(2, 98) == pytest.approx(0.02)
        assert far(0, 10) == 0.0
        assert far(3, 0) == 1.0

    def test_empty_denominators_error(self):
        with pytest.raises(ConfigError):
            fdr(0, 0)
        with pytest.raises(ConfigError):
            far(0, 0)


class TestInjectStepFault:
    def test_adds_step_in_window_only(self):
        X = np.zeros((10, 2))
        out = inject_step_fault(X, np.array([1]), np.array([2.5]), onset=4, end=8)
        assert np.all(out[:4] == 0.0)
        assert np.all(out[8:] == 0.0)
        assert np.all(out[4:8, 1] == 2.5)
        assert np.all(out[4:8, 0] == 0.0)
        assert np.all(X == 0.0)  # input untouched

    def test_window_validation(self):
        with pytest.raises(ConfigError):
            inject_step_fault(np.zeros((10, 2)), np.array([0]), np.array([1.0]), onset=8, end=20)


def small_em(seed=0):
    ga = GaConfig(population_size=30, generations=40, seed=seed)
    return EmConfig(r=1, s=1, max_iterations=5, ga=ga, seed=seed)


@pytest.fixture(scope="module")
def normal_data():
    params = ModelParams.from_dynamics(
        B=np.array([[0.7, 0.5]]),
        H=np.random.default_rng(1).normal(scale=0.8, size=(4, 2)),
        Sigma=np.full(4, 0.3),
    )
    _, X = simulate(params, 1500, seed=2)
    return X


class TestSelect:
    def test_single_pair_grid_returns_that_pair(self, normal_data):
        grid = SelectionGrid(r_candidates=(1,), s_candidates=(1,))
        result = select(normal_data, grid, small_em(), alpha=0.99, seed=3)
        assert (result.r, result.s) == (1, 1)
        assert len(result.scoreboard) == 1

    def test_scoreboard_row_count(self, normal_data):
        grid = SelectionGrid(r_candidates=(1, 2), s_candidates=(1, 2))
        result = select(normal_data, grid, small_em(), alpha=0.99, seed=4)
        assert len(result.scoreboard) == 4
        for row in result.scoreboard:
            if row.skipped is None:
                assert 0.0 <= row.fdr <= 1.0
                assert 0.0 <= row.far <= 1.0

    def test_deterministic_given_seed(self, normal_data):
        grid = SelectionGrid(r_candidates=(1, 2), s_candidates=(1,))
        a = select(normal_data, grid, small_em(), alpha=0.99, seed=5)
        b = select(normal_data, grid, small_em(), alpha=0.99, seed=5)
        assert (a.r, a.s) == (b.r, b.s)
        for ra, rb in zip(a.scoreboard, b.scoreboard):
            assert (ra.fdr, ra.far, ra.loglik) == (rb.fdr, rb.far, rb.loglik)

    def test_selected_entry_is_maximal(self, normal_data):
        grid = SelectionGrid(r_candidates=(1, 2), s_candidates=(1, 2))
        result = select(normal_data, grid, small_em(), alpha=0.99, seed=6)
        scores = {(row.r, row.s): row.fdr - row.far
                  for row in result.scoreboard if row.skipped is None}
        assert scores[(result.r, result.s)] == max(scores.values())

    def test_validation_slice_too_small(self):
        grid = SelectionGrid(r_candidates=(1,), s_candidates=(1,))
        with pytest.raises(ConfigError):
            select(np.zeros((100, 3)), grid, small_em(), alpha=0.99)

    def test_recovers_generating_orders(self):
        # two latents generated with lag order 2 (lag-2 dominated, so a
        # lag-1 model predicts markedly worse); subtle step deviations make
        # detection sensitive to how tight each candidate's limits are
        B = np.array([[0.05, -0.05], [0.9, 0.85]])
        colA = 0.6 * np.array([1, -1, 1, -1, 1, -1.0])
        colB = 0.6 * np.array([1, 1, -1, -1, 1, 1.0])
        true = ModelParams.from_dynamics(
            B=B, H=np.column_stack([colA, colB]), Sigma=np.full(6, 0.02)
        )
        _, X = simulate(true, 4000, seed=42)
        grid = SelectionGrid(
            r_candidates=(1, 2, 3), s_candidates=(1, 2, 3), magnitudes=(0.3, 0.6)
        )
        em = EmConfig(
            r=1, s=1, max_iterations=6,
            ga=GaConfig(population_size=40, generations=60, seed=2), seed=2,
        )
        result = select(X, grid, em, alpha=0.99, seed=11)
        assert result.s >= 2, f"selected lag order {result.s}"
        assert result.r in (2, 3), f"selected latent dimension {result.r}"

    def test_scoreboard_csv(self, tmp_path, normal_data):
        grid = SelectionGrid(r_candidates=(1,), s_candidates=(1,))
        result = select(normal_data, grid, small_em(), alpha=0.99, seed=7)
        path = tmp_path / "scoreboard.csv"
        result.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("r,s,FDR,FAR")
        assert len(lines) == 2


class TestGridValidation:
    def test_empty_candidates(self):
        with pytest.raises(ConfigError):
            SelectionGrid(r_candidates=(), s_candidates=(1,))

    def test_bad_split(self):
        with pytest.raises(ConfigError):
            SelectionGrid(r_candidates=(1,), s_candidates=(1,), split_fraction=1.2)
