"""Learned differential evolution: an LSTM controller, trained by policy
gradient over a benchmark portfolio, emits per-individual scale factors
and crossover rates each generation; tooling to train it, run it against
fixed-parameter baselines, and compare the outcomes statistically."""

from .benchfn import FunctionInstance, Suite, error_value, make_suite
from .de_core import ParamSheet, Population
from .neural import ControllerWeights, load_weights, save_weights
from .policy import Action, PolicyConfig
from .runner import RunConfig, RunResult, Termination, batch_experiment, run_baseline, run_lde
from .stats import aps_rank, build_comparison, ranksum_test, significance_mark
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "FunctionInstance", "Suite", "error_value", "make_suite",
    "ParamSheet", "Population",
    "ControllerWeights", "load_weights", "save_weights",
    "Action", "PolicyConfig",
    "RunConfig", "RunResult", "Termination",
    "batch_experiment", "run_baseline", "run_lde",
    "aps_rank", "build_comparison", "ranksum_test", "significance_mark",
    "TrainConfig", "train",
    "__version__",
]
