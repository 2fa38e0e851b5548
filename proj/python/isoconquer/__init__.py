"""Divide-and-conquer inference for isotonic regression."""

import json as _json

from ._core import (
    ConfigError,
    PooledEstimate,
    StepEstimate,
    __version__,
    choose_m,
    confidence_interval,
    fit_current_status,
    fit_isotonic,
    kappa_forward,
    kappa_tilde_inverse,
    kde_at_point,
    mfold_quantile,
    pool,
    pool_estimates,
    sample_chernoff,
    sigma_hat,
)
from ._core import run_experiment as _run_experiment


def run_experiment(config_text, experiment=""):
    """Run an experiment described by config text; returns the results as a dict."""
    return _json.loads(_run_experiment(config_text, experiment))


__all__ = [
    "ConfigError",
    "PooledEstimate",
    "StepEstimate",
    "choose_m",
    "confidence_interval",
    "fit_current_status",
    "fit_isotonic",
    "kappa_forward",
    "kappa_tilde_inverse",
    "kde_at_point",
    "mfold_quantile",
    "pool",
    "pool_estimates",
    "run_experiment",
    "sample_chernoff",
    "sigma_hat",
]
