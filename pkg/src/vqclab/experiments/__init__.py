"""Reproducible experiment drivers, result tables and the command line."""
from .config import ConfigError, ExperimentConfig, default_config, experiment_config, parse_observable
from .runners import (
    run_design_diagnostics,
    run_experiment,
    run_fig4,
    run_gradient_scan,
    run_output_concentration,
    run_spread_scan,
    run_tail_probability,
)
from .table import CSV_HEADER, ResultTable, Row, emit_outputs

__all__ = [
    "CSV_HEADER", "ConfigError", "ExperimentConfig", "ResultTable", "Row", "default_config", "emit_outputs",
    "experiment_config", "parse_observable", "run_design_diagnostics", "run_experiment", "run_fig4",
    "run_gradient_scan", "run_output_concentration", "run_spread_scan", "run_tail_probability",
]
