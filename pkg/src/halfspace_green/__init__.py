"""Fundamental solutions, half-space Green functions and Poisson kernels of
second-order constant complex-coefficient elliptic systems, with a Poisson
convolution solver for the half-space Dirichlet problem.
"""

from .config import DEFAULT_CONFIG, QuadratureConfig
from .dirichlet import (
    BoundaryDatum,
    Solution,
    boundary_trace_check,
    combine,
    constant_datum,
    domination_constant,
    gaussian_datum,
    grid_datum,
    indicator_datum,
    poisson_slice_datum,
    residual_L,
    solve,
    well_posedness_check,
)
from .errors import *  # noqa: F401,F403
from .fundamental import (
    FundamentalEvaluator,
    eval_dE,
    eval_dE_with_error,
    eval_E,
    make_evaluator,
    verify_delta_identity,
)
from .halfspace import (
    GreenSampleSpec,
    HalfSpaceKernels,
    PoissonKernel,
    adn_kernel,
    green,
    green_convolution,
    green_reflection,
    make_kernels,
    poisson_availability,
    poisson_from_green,
    poisson_kernel,
    remainder,
    verify_green_identities,
)
from .nontangential import (
    ConeProbe,
    ExcludedRegion,
    hl_maximal,
    maximal_bracket,
    nt_limit,
    nt_max,
    weighted_norms,
)
from .report import CheckRecord, VerificationReport
from .system import (
    EllipticSystem,
    EllipticityReport,
    builtin,
    classify,
    coupled_pair,
    diag_anisotropic,
    is_reflection_invariant,
    l_d,
    l_lambda,
    lame,
    laplacian,
    reflect,
)

__version__ = "0.1.0"
