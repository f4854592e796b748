"""Forward filtering and backward smoothing on the stacked first-order model.

The filter conditions on observations from the point where a full stacked
state exists: for a series of n+s rows the first belief corresponds to row
index s-1 (the s-th sample), initialized from the N(0, I_rs) prior. The
smoother is the fixed-interval backward recursion; it also accumulates the
lag-one cross second moments needed by the trainer and by the dynamics
covariance of the monitoring statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericsError
from .statespace import AugmentedParams

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class AugmentedBelief:
    """Posterior of the stacked state after one measurement update.

    mu and V are the posterior mean/covariance; P is the prediction
    covariance that entered the update (Phi V_prev Phi^T + GammaK, or the
    identity prior at the first step).
    """

    mu: np.ndarray
    V: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class SmoothedMoments:
    """Smoothed posterior moments of the stacked state for every filtered step.

    Attributes
    ----------
    mean : (T, d) array of smoothed means.
    cov : (T, d, d) array of smoothed covariances.
    lag1 : (T-1, d, d) array; lag1[k] = E[t_{k+1} t_k^T] (full second moment,
        mean outer product included).
    r, s : latent dimension and lag order of the underlying model.
    """

    mean: np.ndarray
    cov: np.ndarray
    lag1: np.ndarray
    r: int
    s: int

    @property
    def n_steps(self) -> int:
        return self.mean.shape[0]

    def second_moment(self, k: int) -> np.ndarray:
        """E[t_k t_k^T] of the stacked state at step k."""
        return self.cov[k] + np.outer(self.mean[k], self.mean[k])


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _step(
    aug: AugmentedParams,
    Sigma: np.ndarray,
    belief: AugmentedBelief | None,
    x: np.ndarray,
):
    """Shared predict-and-update core.

    Returns (new_belief, innovation, log_density) where log_density is the
    Gaussian log-density of x under the one-step predictive distribution.
    """
    d = aug.dim
    if belief is None:
        pred_mean = np.zeros(d)
        P = np.eye(d)
    else:
        pred_mean = aug.Phi @ belief.mu
        P = _symmetrize(aug.Phi @ belief.V @ aug.Phi.T + aug.GammaK)

    PHt = P @ aug.Hk.T
    S = _symmetrize(aug.Hk @ PHt) + np.diag(Sigma)
    try:
        chol = scipy.linalg.cho_factor(S, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericsError(f"innovation covariance is not positive definite: {exc}") from exc
    innovation = x - aug.Hk @ pred_mean
    K = scipy.linalg.cho_solve(chol, PHt.T).T
    mu = pred_mean + K @ innovation
    V = _symmetrize(P - K @ PHt.T)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    log_density = -0.5 * (
        x.shape[0] * _LOG_2PI + logdet + innovation @ scipy.linalg.cho_solve(chol, innovation)
    )
    return AugmentedBelief(mu=mu, V=V, P=P), innovation, float(log_density)


def filter_step(
    aug: AugmentedParams,
    Sigma: np.ndarray,
    belief: AugmentedBelief | None,
    x: np.ndarray,
) -> tuple[AugmentedBelief, np.ndarray, np.ndarray]:
    """One predict-and-update step of the forward filter.

    With ``belief=None`` the stacked-state prior N(0, I) is used as the
    prediction, which is exactly the first-step initialization. Returns the
    new belief, the filtered point estimate of the stacked state, and the
    innovation x - Hk Phi mu_prev.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (aug.Hk.shape[0],):
        raise ConfigError(f"observation has shape {x.shape}, expected ({aug.Hk.shape[0]},)")
    new_belief, innovation, _ = _step(aug, Sigma, belief, x)
    return new_belief, new_belief.mu, innovation


def forward_filter(
    aug: AugmentedParams,
    Sigma: np.ndarray,
    X: np.ndarray,
) -> list[AugmentedBelief]:
    """Filter a whitened (n+s, m) series; beliefs start at row index s-1."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ConfigError(f"X must be 2-D, got ndim {X.ndim}")
    if X.shape[0] < aug.s:
        raise ConfigError(f"need at least s={aug.s} rows, got {X.shape[0]}")
    beliefs: list[AugmentedBelief] = []
    belief: AugmentedBelief | None = None
    for x in X[aug.s - 1:]:
        belief, _, _ = filter_step(aug, Sigma, belief, x)
        beliefs.append(belief)
    return beliefs


def backward_smooth(
    aug: AugmentedParams,
    filtered: list[AugmentedBelief],
) -> SmoothedMoments:
    """Fixed-interval smoother over the filtered beliefs.

    Implements mu_hat_k = mu_k + J_k (mu_hat_{k+1} - Phi mu_k) and
    V_hat_k = V_k + J_k (V_hat_{k+1} - P_k) J_k^T with gain
    J_k = V_k Phi^T P_k^{-1}; the last step is the filtered belief itself.
    The lag-one second moment E[t_{k+1} t_k^T] is accumulated as
    V_hat_{k+1} J_k^T + mu_hat_{k+1} mu_hat_k^T.
    """
    T = len(filtered)
    if T == 0:
        raise ConfigError("no filtered beliefs to smooth")
    d = aug.dim
    mean = np.empty((T, d))
    cov = np.empty((T, d, d))
    lag1 = np.empty((max(T - 1, 0), d, d))

    mean[-1] = filtered[-1].mu
    cov[-1] = filtered[-1].V
    for k in range(T - 2, -1, -1):
        V_k = filtered[k].V
        P_next = filtered[k + 1].P  # prediction covariance from step k to k+1
        try:
            # J_k = V_k Phi^T P_next^{-1}, via P_next J^T = Phi V_k.
            J = np.linalg.solve(P_next, aug.Phi @ V_k).T
        except np.linalg.LinAlgError as exc:
            raise NumericsError(
                f"prediction covariance singular at smoothing step {k}: {exc}"
            ) from exc
        mean[k] = filtered[k].mu + J @ (mean[k + 1] - aug.Phi @ filtered[k].mu)
        cov[k] = _symmetrize(V_k + J @ (cov[k + 1] - P_next) @ J.T)
        lag1[k] = cov[k + 1] @ J.T + np.outer(mean[k + 1], mean[k])
    return SmoothedMoments(mean=mean, cov=cov, lag1=lag1, r=aug.r, s=aug.s)


def one_step_predictions(
    aug: AugmentedParams,
    Sigma: np.ndarray,
    X: np.ndarray,
) -> np.ndarray:
    """One-step-ahead observation predictions for rows s-1 .. n+s-1 of X.

    The first prediction is zero (the prior mean); useful for held-out
    prediction-error comparisons between models.
    """
    X = np.asarray(X, dtype=float)
    preds = np.empty((X.shape[0] - aug.s + 1, X.shape[1]))
    belief: AugmentedBelief | None = None
    for idx, x in enumerate(X[aug.s - 1:]):
        pred_mean = np.zeros(aug.dim) if belief is None else aug.Phi @ belief.mu
        preds[idx] = aug.Hk @ pred_mean
        belief, _, _ = filter_step(aug, Sigma, belief, x)
    return preds


def log_likelihood_filter(
    aug: AugmentedParams,
    Sigma: np.ndarray,
    X: np.ndarray,
) -> float:
    """Exact marginal log-likelihood of rows s-1 .. of X under the model,
    accumulated from the filter's prediction-error decomposition."""
    X = np.asarray(X, dtype=float)
    belief: AugmentedBelief | None = None
    total = 0.0
    for x in X[aug.s - 1:]:
        belief, _, log_density = _step(aug, Sigma, belief, x)
        total += log_density
    return total
