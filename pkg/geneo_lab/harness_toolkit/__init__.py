"""Experiment harness toolkit."""
from .hx_config import (
    BLACKBOX_KINDS, DATA_ROLES, MODEL_KINDS, PRESETS, RESCALE_KINDS, BlackBoxSpec, ExperimentConfig, ModelSpec,
    PatternSpec,
)
from .hx_diagrams import (
    OBSERVERS, ModelDiagram, ModelSpaces, classification_observer, model_diagram, model_source, rescale_observer,
)
from .hx_runner import (
    CURVE_COLUMNS, RESULT_COLUMNS, ExperimentRunner, ResultRow, RunReport, cmd_fetch_mnist, cmd_rescaled, cmd_run,
    cmd_sample_patterns, cmd_train_blackbox, load_experiment_data, write_tables,
)
from .hx_verify import SUITES, SuiteResult, run_suite
from .hx_cli import build_parser, main

__all__ = [
    'BLACKBOX_KINDS', 'DATA_ROLES', 'MODEL_KINDS', 'PRESETS', 'RESCALE_KINDS', 'BlackBoxSpec', 'ExperimentConfig',
    'ModelSpec', 'PatternSpec',
    'OBSERVERS', 'ModelDiagram', 'ModelSpaces', 'classification_observer', 'model_diagram', 'model_source',
    'rescale_observer',
    'CURVE_COLUMNS', 'RESULT_COLUMNS', 'ExperimentRunner', 'ResultRow', 'RunReport', 'cmd_fetch_mnist',
    'cmd_rescaled', 'cmd_run', 'cmd_sample_patterns', 'cmd_train_blackbox', 'load_experiment_data',
    'write_tables',
    'SUITES', 'SuiteResult', 'run_suite',
    'build_parser', 'main',
]
