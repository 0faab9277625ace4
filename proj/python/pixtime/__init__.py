"""Federated PiXTime forecasting.

Configs are dicts (or JSON paths) with the same keys as the command-line tool;
see schema/experiment_config.schema.json.
"""

from ._core import (
    ConfigError,
    DataError,
    DivergenceError,
    Error,
    FormatError,
    __version__,
    compute_metrics,
    derive_seed,
    generate_synthetic,
    gradcheck,
    load_config,
    load_csv,
    run_experiment,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DivergenceError",
    "Error",
    "FormatError",
    "__version__",
    "compute_metrics",
    "derive_seed",
    "generate_synthetic",
    "gradcheck",
    "load_config",
    "load_csv",
    "run_experiment",
]
