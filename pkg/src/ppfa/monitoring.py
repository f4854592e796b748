"""Online monitoring statistics, KDE control limits, and alarm logic.

Three statistics are tracked per sample: the squared norm of the filtered
stacked latent estimate (T2), the squared one-step prediction error of the
measurement (SPE), and the Mahalanobis norm of the latent first difference
under the training-time difference covariance (DI). Control limits are
quantiles of each statistic's training distribution estimated with a
Gaussian-kernel KDE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import ConfigError, NumericsError
from .kalman import AugmentedBelief, backward_smooth, filter_step, forward_filter
from .preprocess import WhiteningTransform, apply_whitening
from .statespace import AugmentedParams, ModelParams, augment

VERDICT_NORMAL = "normal"
VERDICT_DYNAMIC = "dynamic-or-shift"
VERDICT_CORRELATION = "correlation-break"
VERDICT_BOTH = "both"

_MIN_EIGENVALUE = 1e-10


@dataclass(frozen=True)
class DynamicsCovariance:
    """Covariance of the stacked-latent first difference, kept positive
    definite by a small ridge when needed."""

    D: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ConfigError(f"D must be square, got shape {D.shape}")
        if np.max(np.abs(D - D.T)) > 1e-10 * max(1.0, float(np.max(np.abs(D)))):
            raise ConfigError("D must be symmetric")
        object.__setattr__(self, "D", D)
        try:
            chol = scipy.linalg.cho_factor(D, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise NumericsError(f"D is not positive definite: {exc}") from exc
        object.__setattr__(self, "_chol", chol)

    def mahalanobis(self, delta: np.ndarray) -> float:
        delta = np.asarray(delta, dtype=float)
        return float(delta @ scipy.linalg.cho_solve(self._chol, delta))


@dataclass(frozen=True)
class ControlLimits:
    """Alarm thresholds at confidence level alpha, one per statistic."""

    t2: float
    spe: float
    di: float
    alpha: float
    bandwidths: tuple[float, float, float] = (float("nan"),) * 3

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")


def t2_statistic(t_s: np.ndarray) -> float:
    """Squared Euclidean norm of the stacked latent estimate."""
    t_s = np.asarray(t_s, dtype=float)
    return float(t_s @ t_s)


def spe_statistic(innovation: np.ndarray) -> float:
    """Squared norm of the one-step measurement prediction error."""
    innovation = np.asarray(innovation, dtype=float)
    return float(innovation @ innovation)


def di_statistic(t_s_now: np.ndarray, t_s_prev: np.ndarray, dynamics: DynamicsCovariance) -> float:
    """Mahalanobis norm of the latent first difference under D."""
    return dynamics.mahalanobis(np.asarray(t_s_now, dtype=float) - np.asarray(t_s_prev, dtype=float))


def estimate_D(moments) -> DynamicsCovariance:
    """Time-averaged second moment of the stacked-latent first difference.

    Averages E[t_k t_k^T] - E[t_k t_{k-1}^T] - E[t_{k-1} t_k^T]
    + E[t_{k-1} t_{k-1}^T] over the smoothed transition steps, then adds a
    ridge if the smallest eigenvalue is below the positive-definiteness
    threshold (a perfectly static latent leaves a ridge-only matrix).
    """
    T = moments.n_steps
    if T < 2:
        raise ConfigError("need at least two smoothed steps to estimate D")
    d = moments.mean.shape[1]
    acc = np.zeros((d, d))
    for k in range(1, T):
        cross = moments.lag1[k - 1]
        acc += moments.second_moment(k) - cross - cross.T + moments.second_moment(k - 1)
    D = acc / (T - 1)
    D = 0.5 * (D + D.T)
    eigvals = np.linalg.eigvalsh(D)
    if eigvals[0] < _MIN_EIGENVALUE:
        ridge = max(1e-8 * float(np.trace(D)) / d, _MIN_EIGENVALUE)
        ridge += max(-float(eigvals[0]), 0.0)
        D = D + ridge * np.eye(d)
    return DynamicsCovariance(D=D)


def kde_limit(values: np.ndarray, alpha: float) -> tuple[float, float]:
    """Quantile of a Gaussian-kernel KDE fitted to the values.

    The bandwidth follows Silverman's rule; the limit solves
    P(v < psi) = alpha under the KDE cumulative distribution by monotone
    root search to 1e-8.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise ConfigError("values must be a 1-D array")
    n = values.shape[0]
    if n < 100:
        raise ConfigError(f"need at least 100 values for a KDE limit, got {n}")
    if not np.all(np.isfinite(values)):
        raise ConfigError("values must be finite")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    std = float(np.std(values, ddof=1))
    if std == 0.0:
        raise NumericsError("all values identical: KDE bandwidth would be zero")
    iqr = float(np.subtract(*np.percentile(values, [75, 25])))
    scale = min(std, iqr / 1.34) if iqr > 0 else std
    bandwidth = 0.9 * scale * n ** (-0.2)

    def cdf(psi: float) -> float:
        return float(np.mean(ndtr((psi - values) / bandwidth)))

    lo = float(values.min()) - 40.0 * bandwidth
    hi = float(values.max()) + 40.0 * bandwidth
    psi = brentq(lambda p: cdf(p) - alpha, lo, hi, xtol=1e-8)
    return float(psi), bandwidth


class StatisticsStream:
    """Sequential computation of T2, SPE, and DI over whitened samples.

    One instance owns one stream's filter state; the first sample is scored
    against the stacked-state prior and has no first difference, so its DI
    is reported as zero.
    """

    def __init__(self, aug: AugmentedParams, Sigma: np.ndarray, dynamics: DynamicsCovariance):
        self._aug = aug
        self._Sigma = Sigma
        self._dynamics = dynamics
        self._belief: AugmentedBelief | None = None
        self._prev_mu: np.ndarray | None = None
        self.samples_seen = 0

    def step(self, x_whitened: np.ndarray) -> tuple[float, float, float]:
        self._belief, mu, innovation = filter_step(self._aug, self._Sigma, self._belief, x_whitened)
        t2 = t2_statistic(mu)
        spe = spe_statistic(innovation)
        di = 0.0 if self._prev_mu is None else di_statistic(mu, self._prev_mu, self._dynamics)
        self._prev_mu = mu
        self.samples_seen += 1
        return t2, spe, di


@dataclass
class MonitorReport:
    """Per-sample statistics, alarm flags, verdicts, and burn-in marks."""

    t2: np.ndarray
    spe: np.ndarray
    di: np.ndarray
    flag_t2: np.ndarray
    flag_spe: np.ndarray
    flag_di: np.ndarray
    verdict: list[str]
    burn_in: np.ndarray
    start_index: int = 0

    def __len__(self) -> int:
        return self.t2.shape[0]

    @staticmethod
    def concat(reports: list["MonitorReport"]) -> "MonitorReport":
        return MonitorReport(
            t2=np.concatenate([rep.t2 for rep in reports]),
            spe=np.concatenate([rep.spe for rep in reports]),
            di=np.concatenate([rep.di for rep in reports]),
            flag_t2=np.concatenate([rep.flag_t2 for rep in reports]),
            flag_spe=np.concatenate([rep.flag_spe for rep in reports]),
            flag_di=np.concatenate([rep.flag_di for rep in reports]),
            verdict=[v for rep in reports for v in rep.verdict],
            burn_in=np.concatenate([rep.burn_in for rep in reports]),
            start_index=reports[0].start_index if reports else 0,
        )

    def alarm_rates(self, rows: slice | np.ndarray | None = None, skip_burn_in: bool = True):
        """Fraction of rows with each flag raised, optionally restricted to a
        row selection and excluding burn-in rows."""
        mask = np.ones(len(self), dtype=bool)
        if rows is not None:
            selected = np.zeros(len(self), dtype=bool)
            selected[rows] = True
            mask &= selected
        if skip_burn_in:
            mask &= ~self.burn_in
        count = int(mask.sum())
        if count == 0:
            raise ConfigError("no rows selected for alarm-rate computation")
        return {
            "t2": float(self.flag_t2[mask].mean()),
            "spe": float(self.flag_spe[mask].mean()),
            "di": float(self.flag_di[mask].mean()),
            "any": float((self.flag_t2 | self.flag_spe | self.flag_di)[mask].mean()),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("index,T2,SPE,DI,flag_T2,flag_SPE,flag_DI,verdict,burn_in\n")
            for i in range(len(self)):
                fh.write(
                    f"{self.start_index + i},{float(self.t2[i])!r},{float(self.spe[i])!r},"
                    f"{float(self.di[i])!r},"
                    f"{int(self.flag_t2[i])},{int(self.flag_spe[i])},{int(self.flag_di[i])},"
                    f"{self.verdict[i]},{int(self.burn_in[i])}\n"
                )


def _verdict(flag_t2: bool, flag_spe: bool, flag_di: bool) -> str:
    dynamic = flag_t2 or flag_di
    correlation = flag_spe
    if dynamic and correlation:
        return VERDICT_BOTH
    if dynamic:
        return VERDICT_DYNAMIC
    if correlation:
        return VERDICT_CORRELATION
    return VERDICT_NORMAL


class MonitorSession:
    """Stateful scorer for one measurement stream.

    Scoring a series in chunks through one session gives exactly the same
    rows as scoring it in a single call; the filter belief, previous latent
    estimate, and burn-in counter carry across chunks.
    """

    def __init__(
        self,
        params: ModelParams,
        whitening: WhiteningTransform,
        dynamics: DynamicsCovariance,
        limits: ControlLimits,
    ):
        if whitening.n_channels != params.m:
            raise ConfigError(
                f"whitening transform has {whitening.n_channels} channels, model has {params.m}"
            )
        self._params = params
        self._whitening = whitening
        self._limits = limits
        self._stream = StatisticsStream(augment(params), params.Sigma, dynamics)

    def score(self, X_raw: np.ndarray) -> MonitorReport:
        X_raw = np.asarray(X_raw, dtype=float)
        if X_raw.ndim != 2:
            raise ConfigError(f"X must be 2-D, got ndim {X_raw.ndim}")
        if X_raw.shape[1] != self._params.m:
            raise ConfigError(
                f"data has {X_raw.shape[1]} columns, model expects {self._params.m}"
            )
        n = X_raw.shape[0]
        start = self._stream.samples_seen
        X_w = apply_whitening(self._whitening, X_raw)
        t2 = np.empty(n)
        spe = np.empty(n)
        di = np.empty(n)
        burn = np.empty(n, dtype=bool)
        for i in range(n):
            burn[i] = self._stream.samples_seen < self._params.s
            t2[i], spe[i], di[i] = self._stream.step(X_w[i])
        lim = self._limits
        flag_t2 = t2 > lim.t2
        flag_spe = spe > lim.spe
        flag_di = di > lim.di
        verdict = [
            _verdict(bool(flag_t2[i]), bool(flag_spe[i]), bool(flag_di[i])) for i in range(n)
        ]
        return MonitorReport(
            t2=t2, spe=spe, di=di,
            flag_t2=flag_t2, flag_spe=flag_spe, flag_di=flag_di,
            verdict=verdict, burn_in=burn, start_index=start,
        )


def score_stream(
    params: ModelParams,
    whitening: WhiteningTransform,
    dynamics: DynamicsCovariance,
    limits: ControlLimits,
    X_raw: np.ndarray,
) -> MonitorReport:
    """Score a raw measurement series in one pass (whitening applied
    internally with the stored training transform)."""
    return MonitorSession(params, whitening, dynamics, limits).score(X_raw)


def calibrate(
    params: ModelParams,
    X_train: np.ndarray,
    alpha: float,
) -> tuple[ControlLimits, DynamicsCovariance]:
    """Estimate D and the three control limits from whitened training data.

    D comes from the smoothed training moments; the statistic series come
    from replaying the training data through the online filter, so the
    limits match online scoring conditions. The first sample's DI is
    excluded from calibration (it has no first difference).
    """
    X_train = np.asarray(X_train, dtype=float)
    aug = augment(params)
    moments = backward_smooth(aug, forward_filter(aug, params.Sigma, X_train))
    dynamics = estimate_D(moments)

    stream = StatisticsStream(aug, params.Sigma, dynamics)
    n = X_train.shape[0]
    t2 = np.empty(n)
    spe = np.empty(n)
    di = np.empty(n)
    for i in range(n):
        t2[i], spe[i], di[i] = stream.step(X_train[i])

    psi_t2, bw_t2 = kde_limit(t2, alpha)
    psi_spe, bw_spe = kde_limit(spe, alpha)
    psi_di, bw_di = kde_limit(di[1:], alpha)
    for name, psi, series in (("T2", psi_t2, t2), ("SPE", psi_spe, spe), ("DI", psi_di, di[1:])):
        if psi <= float(np.median(series)):
            raise NumericsError(f"{name} control limit fell below the training median")
    limits = ControlLimits(
        t2=psi_t2, spe=psi_spe, di=psi_di, alpha=alpha,
        bandwidths=(bw_t2, bw_spe, bw_di),
    )
    return limits, dynamics
