"""Deep kernel learning with stacked trainable random Fourier feature layers."""

from .dataio import Dataset, SplitSpec, load_csv, load_libsvm, normalize_minmax, preprocess_pair, split, whiten
from .errors import (
    DataError,
    NumericError,
    ParameterError,
    ParseError,
    RffnetError,
    ShapeError,
    SymmetryError,
)
from .kernel_analysis import (
    KernelMatrix,
    SpectralDensity,
    composed_rbf_oracle,
    empirical_kernel,
    kpca_project,
    omega_histogram,
    rff_approx_error,
    sample_frequencies,
)
from .network import (
    Network,
    accuracy,
    build_network,
    compute_loss,
    backward_full,
    default_layer_count,
    forward_full,
    load_network,
    predict,
    save_network,
)
from .numerics import Rng, gaussian_matrix, matmul, sym_eig_topk
from .optimizer import AdamState, TrainConfig, TrainingLog, adam_step, fit, sgd_step
from .rff_layer import BatchNormState, RffLayer, backward, forward, init_layer

__version__ = "0.1.0"
