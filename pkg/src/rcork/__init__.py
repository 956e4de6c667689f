"""Compact rational Krylov eigensolver for rational eigenvalue problems
in state-space form R(lambda) = P(lambda) - E (C - lambda D)^{-1} F^T."""

from .errors import (
    BreakdownError,
    BudgetExhausted,
    DimensionError,
    NumericalError,
    ParseError,
    PoleError,
    RankCollapseError,
    RcorkError,
    SingularShiftError,
    SizeCapError,
    ZeroVectorError,
)
from .rep_model import (
    RationalEigenproblem,
    evaluate,
    proper_norm_fro,
    recover_eigenvector,
    relative_residual,
)
from .linearization import (
    BlockVector,
    LinearizationPencil,
    apply_A,
    apply_B,
    assemble_dense,
    make_shift_context,
    solve_M1N1,
    solve_shifted,
    solve_shifted_partial,
)
from .krylov_classic import (
    DenseShiftInvert,
    PencilShiftInvert,
    RationalKrylovState,
    ritz_pairs,
    rk_run,
    rk_step,
)
from .rcork_core import (
    CompactBasis,
    RcorkState,
    eigvec_from_small,
    init,
    rcork_step,
    reconstruct_U,
    ritz_and_eigvecs,
)
from .restart import RestartReport, SchurSelection, restart_compact
from .problems import GeneratedProblem, gen_exp1, gen_exp2
from .driver import (
    SolveConfig,
    SolveResult,
    memory_report,
    solve,
    solve_baseline,
    start_vector,
)

__version__ = "0.1.0"

__all__ = [
    "BreakdownError",
    "BudgetExhausted",
    "DimensionError",
    "NumericalError",
    "ParseError",
    "PoleError",
    "RankCollapseError",
    "RcorkError",
    "SingularShiftError",
    "SizeCapError",
    "ZeroVectorError",
    "RationalEigenproblem",
    "evaluate",
    "proper_norm_fro",
    "recover_eigenvector",
    "relative_residual",
    "BlockVector",
    "LinearizationPencil",
    "apply_A",
    "apply_B",
    "assemble_dense",
    "make_shift_context",
    "solve_M1N1",
    "solve_shifted",
    "solve_shifted_partial",
    "DenseShiftInvert",
    "PencilShiftInvert",
    "RationalKrylovState",
    "ritz_pairs",
    "rk_run",
    "rk_step",
    "CompactBasis",
    "RcorkState",
    "eigvec_from_small",
    "init",
    "rcork_step",
    "reconstruct_U",
    "ritz_and_eigvecs",
    "RestartReport",
    "SchurSelection",
    "restart_compact",
    "GeneratedProblem",
    "gen_exp1",
    "gen_exp2",
    "SolveConfig",
    "SolveResult",
    "memory_report",
    "solve",
    "solve_baseline",
    "start_vector",
    "__version__",
]
