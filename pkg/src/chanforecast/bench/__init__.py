from .config import DATASETS, ExperimentConfig, load_config, parse_config_text, resolve_dataset
from .runner import RunResult, run
from .tables import ResultTable, compare_strategies, improvement

__all__ = [
    "DATASETS",
    "ExperimentConfig",
    "ResultTable",
    "RunResult",
    "compare_strategies",
    "improvement",
    "load_config",
    "parse_config_text",
    "resolve_dataset",
    "run",
]
