"""Graph learning for continuous non-Gaussian data with triangular transport maps."""
from .basis import BasisSet, UnsupportedDerivativeOrder, eval_basis, total_degree_set
from .datasets import (
    DatasetSpec,
    NumericalBlowup,
    RngStream,
    cdf_transform_inverse,
    gen_butterfly,
    gen_cubic,
    gen_gaussian,
    gen_nonparanormal,
    gen_nonparanormal_graph,
    gen_star_beta2,
    generate,
    lorenz96_rhs,
    lorenz96_trajectory,
    power_transform_inverse,
)
from .graph import (
    DimensionMismatch,
    Ordering,
    UndirectedGraph,
    edge_errors,
    min_degree_elimination,
    relabel,
    reverse_cholesky_ordering,
    sparsity_bound,
)
from .metrics import ErrorSeries, InsufficientData, mean_ci
from .numerics import NotPositiveDefinite, cholesky, gauss_legendre, solve_spd
from .optimize import FitResult, fisher_information, fit_affine_closed_form, fit_component, fit_map
from .oracle import (
    CmiEstimate,
    GaussianDensity,
    check_theorem1_bound,
    gaussian_log_sobolev_constant,
    gaussian_score,
    nested_mc_cmi,
)
from .score import ScoreMatrix, ThresholdedScore, estimate_score, estimate_variances, threshold
from .structure import DegenerateColumn, SingConfig, SingReport, n_sing, sing
from .transport import (
    MapComponent,
    NoConvergence,
    SparsityPattern,
    TriangularMap,
    build_map,
    coeff_gradient_log_pullback,
    evaluate,
    invert,
    log_pullback,
    mixed_log_hessian,
)

__version__ = "0.1.0"
