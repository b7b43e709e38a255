"""Python interface to the cross-modal knowledge distillation lab."""

import json

from . import _core
from ._core import (
    ConfigError,
    DataError,
    NumericError,
    adaptive_weights,
    compute_eer,
    compute_min_dcf,
    cosine_margin_from_degrees,
    gradcheck_suite,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "adaptive_weights",
    "compute_eer",
    "compute_min_dcf",
    "cosine_margin_from_degrees",
    "generate",
    "gradcheck_suite",
    "resolve_config",
    "run_distill",
]


def generate(spec=None):
    """Training split of the synthetic paired benchmark as numpy arrays."""
    return _core.generate(json.dumps(spec or {}))


def resolve_config(config=None, overrides=()):
    """Fully expanded experiment config (dict) from a partial dict and dotted overrides."""
    return json.loads(_core.resolve_config(json.dumps(config) if config else "", list(overrides)))


def run_distill(config):
    """Runs teacher pretraining, distillation and evaluation; returns the metrics dict."""
    return json.loads(_core.run_distill(json.dumps(resolve_config(config))))
