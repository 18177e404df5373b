"""KAN layers whose number of basis functions is learned during training.

Each layer carries a continuous size parameter lambda; a sigmoid window over
basis indices turns it into an integer order K and passes gradients back to
lambda.  Training maximises an ELBO with a Poisson prior on lambda and a
Gaussian prior on the basis coefficients, resizing layers between epochs.
"""

__version__ = "0.1.0"

from .basis import BasisFamily
from .data import Dataset, gen_double_moons, gen_spiral, generate, load_csv
from .errors import (DataError, DivergedError, DomainError, FormatError, InfKanError,
                     NumericError, ShapeError, UnsupportedError, UsageError)
from .kan_layer import KanLayer
from .models import KanModel, MlpModel, Task, build_baseline_mlp, build_kan
from .train import EpochRecord, TrainConfig, evaluate, fit, train
from .variational import Priors, elbo
from .window import WindowParams

__all__ = [
    "BasisFamily", "Dataset", "DataError", "DivergedError", "DomainError", "EpochRecord",
    "FormatError", "InfKanError", "KanLayer", "KanModel", "MlpModel", "NumericError", "Priors",
    "ShapeError", "Task", "TrainConfig", "UnsupportedError", "UsageError", "WindowParams",
    "build_baseline_mlp", "build_kan", "elbo", "evaluate", "fit", "gen_double_moons",
    "gen_spiral", "generate", "load_csv", "train",
]
