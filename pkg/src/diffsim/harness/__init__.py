from .cli import main
from .config import (ConfigError, SCHEMA, config_hash, parse_config,
                     parse_config_text)
from .experiments import (build_model, run_bench, run_fidelity,
                          run_optimize, run_simulate)

__all__ = [
    "ConfigError", "SCHEMA", "config_hash", "main", "parse_config",
    "parse_config_text", "build_model", "run_bench", "run_fidelity",
    "run_optimize", "run_simulate",
]
