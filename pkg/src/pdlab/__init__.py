"""Laboratory for prediction differences between identically trained model pairs."""

__version__ = "0.1.0"

from .datagen import LinearTruth, QuadraticTruth, load_truth, sample_examples, sample_truth, save_truth
from .estimator import NetworkClassifier
from .harness import ExperimentConfig, run_experiment, sweep, train_pair, train_teacher, warm_start_pair
from .metrics import PairReport, diff_cosine, excess_label_loss, relative_pd
from .nnet import Activation, ArchitectureSpec, Network, backward, build_network, forward
from .optim import OptimizerConfig
from .stream import StreamConfig

__all__ = [
    "Activation",
    "ArchitectureSpec",
    "ExperimentConfig",
    "LinearTruth",
    "Network",
    "NetworkClassifier",
    "OptimizerConfig",
    "PairReport",
    "QuadraticTruth",
    "StreamConfig",
    "backward",
    "build_network",
    "diff_cosine",
    "excess_label_loss",
    "forward",
    "load_truth",
    "relative_pd",
    "run_experiment",
    "sample_examples",
    "sample_truth",
    "save_truth",
    "sweep",
    "train_pair",
    "train_teacher",
    "warm_start_pair",
]
