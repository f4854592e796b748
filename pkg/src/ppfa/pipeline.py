"""End-to-end training pipeline and self-contained model files.

A trained monitoring model bundles the whitening transform, the dynamic
model parameters, the latent-difference covariance, and the control limits,
so scoring needs no side inputs. The file format is a JSON document with a
fixed key order; floats are written with full round-trip precision, so
identical training runs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .monitoring import ControlLimits, DynamicsCovariance, MonitorReport, calibrate, score_stream
from .preprocess import WhiteningTransform, apply_whitening, fit_whitening
from .statespace import ModelParams
from .training import EmConfig, TrainingTrace, fit

FORMAT_NAME = "ppfa-model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainedModel:
    """Everything needed to score new raw data."""

    params: ModelParams
    whitening: WhiteningTransform
    dynamics: DynamicsCovariance
    limits: ControlLimits

    def score(self, X_raw: np.ndarray) -> MonitorReport:
        return score_stream(self.params, self.whitening, self.dynamics, self.limits, X_raw)


def train_monitoring_model(
    X_raw: np.ndarray,
    cfg: EmConfig,
    alpha: float,
) -> tuple[TrainedModel, TrainingTrace]:
    """Whiten the training data, run EM, and calibrate control limits."""
    whitening = fit_whitening(X_raw)
    X_w = apply_whitening(whitening, X_raw)
    params, trace = fit(X_w, cfg)
    limits, dynamics = calibrate(params, X_w, alpha)
    return TrainedModel(params=params, whitening=whitening, dynamics=dynamics, limits=limits), trace


def _matrix(a: np.ndarray) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.asarray(a)]


def _vector(a: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(a)]


def save_model(model: TrainedModel, path) -> None:
    """Write the model bundle as a JSON document with fixed key order.

    Key order and float formatting are deterministic, so equal models
    serialize to identical bytes. Floats round-trip exactly.
    """
    params = model.params
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "m": params.m,
        "r": params.r,
        "s": params.s,
        "transition": _matrix(params.B),
        "emission": _matrix(params.H),
        "latent_noise_var": _vector(params.Gamma),
        "measurement_noise_var": _vector(params.Sigma),
        "whitening": {
            "mean": _vector(model.whitening.mean),
            "eigvecs": _matrix(model.whitening.eigvecs),
            "singvals": _vector(model.whitening.singvals),
        },
        "dynamics_covariance": _matrix(model.dynamics.D),
        "limits": {
            "alpha": model.limits.alpha,
            "t2": model.limits.t2,
            "spe": model.limits.spe,
            "di": model.limits.di,
            "bandwidths": [float(b) for b in model.limits.bandwidths],
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    """Read a model bundle written by :func:`save_model`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    if doc.get("format") != FORMAT_NAME:
        raise ConfigError(f"{path} is not a {FORMAT_NAME} file")
    if doc.get("version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported model file version {doc.get('version')}")
    try:
        params = ModelParams(
            B=np.asarray(doc["transition"], dtype=float),
            H=np.asarray(doc["emission"], dtype=float),
            Gamma=np.asarray(doc["latent_noise_var"], dtype=float),
            Sigma=np.asarray(doc["measurement_noise_var"], dtype=float),
        )
        whitening = WhiteningTransform(
            mean=np.asarray(doc["whitening"]["mean"], dtype=float),
            eigvecs=np.asarray(doc["whitening"]["eigvecs"], dtype=float),
            singvals=np.asarray(doc["whitening"]["singvals"], dtype=float),
        )
        dynamics = DynamicsCovariance(D=np.asarray(doc["dynamics_covariance"], dtype=float))
        lim = doc["limits"]
        limits = ControlLimits(
            t2=float(lim["t2"]),
            spe=float(lim["spe"]),
            di=float(lim["di"]),
            alpha=float(lim["alpha"]),
            bandwidths=tuple(float(b) for b in lim["bandwidths"]),
        )
    except KeyError as exc:
        raise ConfigError(f"model file {path} is missing field {exc}") from exc
    return TrainedModel(params=params, whitening=whitening, dynamics=dynamics, limits=limits)
