"""Principal tensor block-diagonalization.

Find per-mode orthonormal factors whose aligned column blocks capture as
much of a dense tensor's mass as possible on the block diagonal of its
compression.  Plain alternating polar-factor sweeps and a
subspace-accelerated variant are provided, together with a synthetic
problem generator, file formats, and an experiment harness.
"""

from .blocks import (
    BlockPartition,
    bdiag_embed,
    bdiag_extract,
    core_tensor,
    factor_block,
    identity_factor_tuple,
    reconstruct,
)
from .generator import ProblemInstance, ProblemSpec, generate_problem
from .linalg import (
    PolarResult,
    SvdResult,
    orth_complement_extend,
    orthonormality_defect,
    polar_factor,
    random_orthonormal,
    sin_theta_frob,
    spectral_norm_estimate,
    sym,
    thin_svd,
    trace_norm,
)
from .objective import (
    ProblemBinding,
    contraction,
    kkt_residual_cheap,
    kkt_residual_full,
    locg_residual,
    objective_value,
    partial_gradient,
)
from .solvers import (
    STATUS_CONVERGED,
    STATUS_MAX_ITER,
    STATUS_STALLED,
    DiagnosticsSummary,
    IterationRecord,
    SolveResult,
    SolverConfig,
    SolverError,
    accnpdo_solve,
    diagnostics_series,
    npdo_solve,
    random_factor_tuple,
)
from .storage import (
    DtenFormatError,
    read_tensor,
    read_trace_csv,
    write_tensor,
    write_trace_csv,
)
from .tensors import (
    as_tensor,
    flat_to_subscripts,
    fold,
    frobenius_norm,
    mode_multiply,
    multi_mode_multiply,
    subscripts_to_flat,
    unfold,
)

__version__ = "0.1.0"
