"""Numerical laboratory for stochastic heat equations with multiplicative
spatially correlated noise: grid solvers, Feynman-Kac Monte Carlo, kernel
diagnostics, Malliavin positivity checks and Holder-regularity measurement.
"""

__version__ = "0.1.0"

from .analysis import (
    HolderReport,
    holder_exponent_space,
    holder_exponent_time,
    moment_sup,
    predicted_suprema,
    sample_fbm,
)
from .config import ExperimentConfig, load_config, parse_config
from .errors import (
    AllEigenvaluesClipped,
    BoxSizingError,
    ConfigError,
    DegenerateWeights,
    InsufficientLags,
    NoConvergence,
    NonFinite,
    NonFiniteQuadrature,
    OutOfBox,
    SingularPoint,
    SpdelabError,
    TooFewSamples,
)
from .feynman_kac import (
    ConstantCovarianceModel,
    FkEstimate,
    QuenchedModel,
    annealed_constant_mean,
    backward_weight,
    fk_estimate,
    fk_solve_linear,
    h_from_points,
    mollification_study,
    mollified_model,
)
from .field import (
    BrownianPath,
    NoiseLattice,
    interpolate_field,
    sample_brownian_path,
    sample_noise_lattice,
    zero_lattice,
)
from .grids import SpaceGrid, TimeGrid, heat_tail_mass
from .kernels import (
    BifractionalKernel,
    ConstantKernel,
    GaussianKernel,
    GramFactor,
    Kernel,
    WhiteApproxKernel,
    assemble_gram,
    check_growth,
    check_h1a,
    covariance_matrix,
    double_convolution,
    eval_kernel,
    factorize_sqrt,
    make_kernel,
)
from .malliavin import (
    DensityEstimate,
    MalliavinEstimate,
    density_kde,
    estimate_h,
    malliavin_norm,
    nondegeneracy_check,
    silverman_bandwidth,
)
from .registry import Coefficients, NamedFunction, make_coefficients, make_fn
from .solver import FieldSolution, heat_semigroup_apply, picard_solve, solve_ensemble, solve_mild

__all__ = [name for name in dir() if not name.startswith("_")]
