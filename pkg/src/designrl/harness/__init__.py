from .cli import build_parser, main
from .run import (
    RESULTS_HEADER,
    EvalSpec,
    ResultRow,
    RunConfig,
    apply_override,
    cmd_baseline,
    cmd_eval,
    cmd_sweep,
    cmd_train,
    config_hash,
    load_run_config,
    parse_override_arg,
    read_results_csv,
    run_config_from_dict,
    run_config_to_dict,
    write_results_csv,
)

__all__ = [
    "RESULTS_HEADER",
    "EvalSpec",
    "ResultRow",
    "RunConfig",
    "apply_override",
    "build_parser",
    "cmd_baseline",
    "cmd_eval",
    "cmd_sweep",
    "cmd_train",
    "config_hash",
    "load_run_config",
    "main",
    "parse_override_arg",
    "read_results_csv",
    "run_config_from_dict",
    "run_config_to_dict",
    "write_results_csv",
]
