"""Kernel max-sliced Wasserstein distances.

Computes the kernel max-sliced (KMS) p-Wasserstein distance between two
empirical distributions: the largest p-Wasserstein distance between their
one-dimensional images under a unit-norm RKHS projector.  The p = 2 case is
solved through a semidefinite relaxation (inexact mirror ascent on the
spectrahedron), post-processed by a rank-reduction sweep, and rounded to a
rank-1 projector; finite-sample two-sample tests come in permutation-bootstrap
and closed-form-threshold flavors.
"""

from .datagen import DatasetSpec, circulant_costs, circulant_instance, generate
from .errors import (
    AssemblyError,
    InputError,
    KmswError,
    PreconditionError,
    SolverError,
)
from .kernels import (
    GramAssembly,
    Kernel,
    PointCloud,
    assemble,
    check_pd,
    dot_product,
    eval_kernel,
    gaussian,
    median_bandwidth,
)
from .kms import (
    KmsResult,
    Projector,
    evaluate_projector,
    kms2,
    ms2,
    projected_wasserstein_p,
    rank1_value,
)
from .rankred import (
    BindingSet,
    ReducedSolution,
    find_binding,
    null_direction,
    numerical_rank,
    rank_bound,
    reduce,
    step_to_boundary,
)
from .sdr import (
    SdrSolution,
    SolverConfig,
    is_spectrahedron_point,
    mirror_step,
    objective_F,
    solve_sdr,
    supgradient,
)
from .stats import (
    CriticalValueParams,
    RateSweepResult,
    TestResult,
    critical_value,
    kernel_bound,
    rate_sweep,
    theorem_test,
    two_sample_test,
)

__version__ = "0.1.0"
