"""Shared test utilities: a brute-force joint-Gaussian oracle for the
stacked linear dynamic model, built without any filtering code so it can
arbitrate the recursive implementations."""

from __future__ import annotations

import numpy as np
import pytest

from ppfa import augment


def joint_covariance(aug, Sigma, T):
    """Covariance of (z_1..z_T, x_1..x_T) with z_1 ~ N(0, I) and
    z_{k+1} = Phi z_k + noise, x_k = Hk z_k + eps."""
    d = aug.dim
    m = aug.Hk.shape[0]
    marg = [np.eye(d)]
    for _ in range(T - 1):
        marg.append(aug.Phi @ marg[-1] @ aug.Phi.T + aug.GammaK)
    cross = {}
    for a in range(T):
        cross[(a, a)] = marg[a]
        cur = marg[a]
        for b in range(a + 1, T):
            cur = cur @ aug.Phi.T
            cross[(a, b)] = cur

    def czz(a, b):
        return cross[(a, b)] if a <= b else cross[(b, a)].T

    S = np.zeros((T * d + T * m, T * d + T * m))
    for a in range(T):
        for b in range(T):
            S[a * d:(a + 1) * d, b * d:(b + 1) * d] = czz(a, b)
            block = aug.Hk @ czz(a, b) @ aug.Hk.T
            if a == b:
                block = block + np.diag(Sigma)
            S[T * d + a * m:T * d + (a + 1) * m, T * d + b * m:T * d + (b + 1) * m] = block
            zx = czz(a, b) @ aug.Hk.T
            S[a * d:(a + 1) * d, T * d + b * m:T * d + (b + 1) * m] = zx
            S[T * d + b * m:T * d + (b + 1) * m, a * d:(a + 1) * d] = zx.T
    return S


def condition(S, target_idx, obs_idx, obs_val):
    """Mean and covariance of the target block given observed values
    (zero prior means throughout)."""
    Stt = S[np.ix_(target_idx, target_idx)]
    Sto = S[np.ix_(target_idx, obs_idx)]
    Soo = S[np.ix_(obs_idx, obs_idx)]
    mean = Sto @ np.linalg.solve(Soo, obs_val)
    cov = Stt - Sto @ np.linalg.solve(Soo, Sto.T)
    return mean, cov


class GaussianOracle:
    """Exact conditioning oracle for one model and one observation window."""

    def __init__(self, params, X, T):
        self.aug = augment(params)
        self.params = params
        self.d = self.aug.dim
        self.m = params.m
        self.T = T
        self.S = joint_covariance(self.aug, params.Sigma, T)
        # rows consumed by the filter: index s-1 onward
        self.xs = np.asarray(X, dtype=float)[params.s - 1:params.s - 1 + T].reshape(-1)
        self.x_all = list(range(T * self.d, T * self.d + T * self.m))

    def filtered(self, k):
        """Exact mean/cov of z_k given x_1..x_k (0-based step k)."""
        z_idx = list(range(k * self.d, (k + 1) * self.d))
        x_idx = self.x_all[: (k + 1) * self.m]
        return condition(self.S, z_idx, x_idx, self.xs[: (k + 1) * self.m])

    def smoothed(self, k):
        z_idx = list(range(k * self.d, (k + 1) * self.d))
        return condition(self.S, z_idx, self.x_all, self.xs)

    def smoothed_pair(self, k):
        """Joint smoothed moments of (z_k, z_{k+1}); returns the full
        second moment E[z_{k+1} z_k^T]."""
        z_idx = list(range(k * self.d, (k + 2) * self.d))
        mean, cov = condition(self.S, z_idx, self.x_all, self.xs)
        d = self.d
        return cov[d:, :d] + np.outer(mean[d:], mean[:d])

    def log_likelihood(self):
        Sxx = self.S[np.ix_(self.x_all, self.x_all)]
        sign, logdet = np.linalg.slogdet(Sxx)
        assert sign > 0
        quad = self.xs @ np.linalg.solve(Sxx, self.xs)
        return -0.5 * (len(self.xs) * np.log(2 * np.pi) + logdet + quad)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240801)
