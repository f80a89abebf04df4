"""Command-line interface, configuration and reporting."""
from .config import ExperimentConfig, build_config, load_config
from .main import run
from .report import fnv1a64, write_report

__all__ = ["ExperimentConfig", "build_config", "load_config", "run", "fnv1a64", "write_report"]
