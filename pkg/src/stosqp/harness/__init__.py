"""Configuration, persistence, experiment orchestration, and CLI."""

from stosqp.harness.cli import main
from stosqp.harness.config import (
    SolveConfig,
    load_json_file,
    parse_solve_config,
)
from stosqp.harness.experiment import (
    ExperimentSpec,
    RateReport,
    parse_experiment_spec,
    run_experiment,
)
from stosqp.harness.runio import (
    read_json,
    read_trace_csv,
    write_json_atomic,
    write_trace_csv,
)

__all__ = [
    "main",
    "SolveConfig",
    "load_json_file",
    "parse_solve_config",
    "ExperimentSpec",
    "RateReport",
    "parse_experiment_spec",
    "run_experiment",
    "read_json",
    "read_trace_csv",
    "write_json_atomic",
    "write_trace_csv",
]
