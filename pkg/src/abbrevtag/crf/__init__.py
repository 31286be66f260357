"""Linear-chain conditional random field."""

from .estimator import LinearChainCRF, TrainConfig, TrainingError, train
from .inference import Lattice, build_lattice, log_partition, marginals, score_sequence, viterbi
from .model import CrfModel
from .objective import CrfObjective, NonFiniteObjectiveError, nll_and_gradient
from .owlqn import OptimizationError, OwlqnResult, minimize_owlqn, pseudo_gradient

__all__ = [
    "CrfModel",
    "CrfObjective",
    "Lattice",
    "LinearChainCRF",
    "NonFiniteObjectiveError",
    "OptimizationError",
    "OwlqnResult",
    "TrainConfig",
    "TrainingError",
    "build_lattice",
    "log_partition",
    "marginals",
    "minimize_owlqn",
    "nll_and_gradient",
    "pseudo_gradient",
    "score_sequence",
    "train",
    "viterbi",
]
