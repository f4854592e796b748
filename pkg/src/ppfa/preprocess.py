"""Whitening of raw measurements.

Training data is centered and rotated/scaled so its sample covariance is the
identity; new samples are always transformed with the training-set transform,
never refit. The transform is invertible, so predictions can be mapped back
to raw measurement units for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericsError

# Eigenvalues below RANK_RTOL * largest are treated as rank deficiency.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class WhiteningTransform:
    """Centering plus eigen-rotation and scaling fitted on training data.

    Attributes
    ----------
    mean : (m,) array
        Per-channel training mean, in raw measurement units.
    eigvecs : (m, m) array
        Orthonormal eigenvectors of the sample covariance, one per column,
        ordered by descending eigenvalue.
    singvals : (m,) array
        Eigenvalues (variances along the eigenvector directions), descending.
    """

    mean: np.ndarray
    eigvecs: np.ndarray
    singvals: np.ndarray

    @property
    def n_channels(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def identity(cls, m: int) -> "WhiteningTransform":
        """Transform that leaves data unchanged (useful for tests and data
        that is already white)."""
        return cls(mean=np.zeros(m), eigvecs=np.eye(m), singvals=np.ones(m))


def fit_whitening(data: np.ndarray) -> WhiteningTransform:
    """Fit a whitening transform to a (rows, m) training matrix.

    Uses the centered sample covariance with 1/(rows-1) normalization.
    Raises NumericsError if the covariance is rank deficient (any eigenvalue
    below ``RANK_RTOL`` times the largest), naming the deficient directions.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DataError(f"expected a 2-D data matrix, got ndim={data.ndim}")
    rows, m = data.shape
    if rows < 2:
        raise DataError(f"need at least 2 rows to fit a whitening transform, got {rows}")
    if not np.all(np.isfinite(data)):
        bad = np.argwhere(~np.isfinite(data))[0]
        raise DataError(f"non-finite value at row {bad[0]}, column {bad[1]}")

    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / (rows - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    # eigh returns ascending; store descending.
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    eigvals = np.clip(eigvals, 0.0, None)

    largest = eigvals[0] if eigvals.size else 0.0
    deficient = np.nonzero(eigvals <= RANK_RTOL * largest)[0] if largest > 0 else np.arange(m)
    if deficient.size:
        raise NumericsError(
            "covariance is rank deficient along eigenvector direction(s) "
            f"{deficient.tolist()}; cannot whiten"
        )
    return WhiteningTransform(mean=mean, eigvecs=eigvecs, singvals=eigvals)


def apply_whitening(transform: WhiteningTransform, x: np.ndarray) -> np.ndarray:
    """Whiten a sample vector or a (rows, m) matrix of samples."""
    x = np.asarray(x, dtype=float)
    m = transform.n_channels
    if x.shape[-1] != m:
        raise ConfigError(f"sample has {x.shape[-1]} channels, transform expects {m}")
    scale = 1.0 / np.sqrt(transform.singvals)
    return ((x - transform.mean) @ transform.eigvecs) * scale


def invert_whitening(transform: WhiteningTransform, z: np.ndarray) -> np.ndarray:
    """Map whitened vectors back to raw measurement units."""
    z = np.asarray(z, dtype=float)
    m = transform.n_channels
    if z.shape[-1] != m:
        raise ConfigError(f"sample has {z.shape[-1]} channels, transform expects {m}")
    return (z * np.sqrt(transform.singvals)) @ transform.eigvecs.T + transform.mean
