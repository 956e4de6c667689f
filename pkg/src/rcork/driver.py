"""Top-level solve loop: shifts, convergence testing, restarts.

Convergence is always judged on the original problem: a Ritz pair counts
only when the recovered eigenvector's relative residual E(lambda, x) is
below the tolerance.  Because that evaluation touches n-sized data, each
step first looks at the cheap estimate from the small projected pencil,
and full residuals are computed every ``stride`` steps once the estimate
has ever dipped below ``cheap_tol`` (and always when the subspace hits
its cap, right before restarting).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BreakdownError, BudgetExhausted, ZeroVectorError
from .krylov_classic import (
    DenseShiftInvert,
    PencilShiftInvert,
    RationalKrylovState,
    as_shift_schedule,
    ritz_pairs,
    rk_step,
)
from .linearization import BlockVector, LinearizationPencil
from .rcork_core import eigvec_from_small, init, rcork_step
from .rep_model import recover_eigenvector, relative_residual
from .restart import SchurSelection, restart_compact


@dataclass
class SolveConfig:
    """Knobs for a solver run; invariants checked on construction."""

    nev: int
    shifts: object
    m: int = 45
    p: int = 30
    tol: float = 1e-10
    cheap_tol: float = None
    max_restarts: int = 20
    max_iterations: int = 200
    selection: object = "closest-to-target"
    target: complex = 0.0
    stride: int = 5
    seed: int = 0
    start: object = "complex"

    def __post_init__(self):
        if self.nev < 0:
            raise ValueError("nev must be nonnegative")
        if self.nev and not self.nev <= self.p < self.m:
            raise ValueError("need nev <= p < m, got nev=%d p=%d m=%d"
                             % (self.nev, self.p, self.m))
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")
        if self.cheap_tol is None:
            self.cheap_tol = self.tol


@dataclass
class SolveResult:
    """Eigenpairs plus the per-step log of a run."""

    eigenpairs: list
    log: list = field(default_factory=list)
    restarts: int = 0
    iterations: int = 0
    termination: str = ""
    state: object = None

    @property
    def values(self):
        return np.array([lam for lam, _, _ in self.eigenpairs])


def memory_report(state):
    """(rcork_count, classical_count): stored scalars after this state.

    The compact count is the exact container content: Q, the stacked
    coefficients, and the Hessenberg pair.  The classical count is what
    an explicit basis of the same column count would store.
    """
    small = state.H.size + state.K.size
    rcork = state.basis.scalar_count() + small
    classical = state.pencil.N * state.basis.ncols + small
    return rcork, classical


def _selection_key(config):
    if callable(config.selection):
        return lambda lam: float(config.selection(lam))
    if config.selection == "closest-to-target":
        return lambda lam: abs(lam - config.target)
    if config.selection == "largest-negative-imaginary":
        return lambda lam: lam.imag
    raise ValueError("unknown selection %r" % (config.selection,))


def start_vector(pencil, config):
    """Materialize the configured start as an init() input.

    "complex"/"real" draw a random unit vector from the seed; the
    "structured" start uses collinear blocks (one shared n-vector),
    so the compact rank begins at 1.
    """
    start = config.start
    if isinstance(start, (BlockVector, tuple)):
        return start
    if isinstance(start, np.ndarray):
        return pencil.block_vector(start.astype(np.complex128))
    rng = np.random.default_rng(config.seed)
    rep = pencil.rep
    if start == "real":
        data = rng.standard_normal(pencil.N).astype(np.complex128)
        return pencil.block_vector(data / np.linalg.norm(data))
    if start == "complex":
        data = (rng.standard_normal(pencil.N)
                + 1j * rng.standard_normal(pencil.N))
        return pencil.block_vector(data / np.linalg.norm(data))
    if start == "structured":
        x = rng.standard_normal(rep.n) + 1j * rng.standard_normal(rep.n)
        blocks = [x] * rep.d
        u = BlockVector.from_blocks(blocks, tail=np.zeros(rep.s))
        return BlockVector(u.data / u.norm(), rep.n, rep.d, rep.s)
    raise ValueError("unknown start %r" % (start,))


class _Pool:
    """Converged eigenpairs, deduplicated by eigenvalue proximity."""

    def __init__(self):
        self.pairs = []

    def offer(self, lam, x, res):
        for i, (known, _, known_res) in enumerate(self.pairs):
            if abs(lam - known) <= 1e-8 * max(1.0, abs(known)):
                if res < known_res:
                    self.pairs[i] = (lam, x, res)
                return
        self.pairs.append((lam, x, res))

    def values(self):
        return tuple(lam for lam, _, _ in self.pairs)

    def __len__(self):
        return len(self.pairs)


def _full_check(state, pool, config, key, H=None, K=None):
    """Evaluate true residuals of all finite Ritz pairs; feed the pool.

    Returns the largest residual among the nev pairs ranked best by the
    selection key (the distance from being done); unrecoverable
    directions (zero leading block) are skipped.
    """
    H = state.H if H is None else H
    K = state.K if K is None else K
    rep = state.pencil.rep
    ranked = []
    for pair in ritz_pairs(H, K):
        if not np.isfinite(pair.value):
            continue
        try:
            z = eigvec_from_small(state, pair.t, H=H)
            x = recover_eigenvector(z, pair.value)
            res = relative_residual(rep, pair.value, x)
        except ZeroVectorError:
            continue
        ranked.append((key(pair.value), res))
        if res <= config.tol:
            pool.offer(pair.value, x, res)
    ranked.sort(key=lambda item: item[0])
    wanted = ranked[:config.nev]
    return max((res for _, res in wanted), default=np.inf)


def _result(config, pool, log, restarts, iterations, termination, state):
    key = _selection_key(config)
    pairs = sorted(pool.pairs, key=lambda item: key(item[0]))
    return SolveResult(eigenpairs=pairs[:config.nev] if config.nev
                       else pairs,
                       log=log, restarts=restarts, iterations=iterations,
                       termination=termination, state=state)


def solve(rep, config):
    """Run the compact iteration until nev pairs converge.

    Raises BudgetExhausted (carrying the partial result) when iteration
    or restart budgets run out, and re-raises breakdown with whatever
    converged by then if the exact terminal pairs still do not cover nev.
    """
    pencil = LinearizationPencil(rep)
    state = init(pencil, start_vector(pencil, config))
    if config.nev == 0:
        return SolveResult(eigenpairs=[], termination="converged",
                           state=state)

    schedule = as_shift_schedule(config.shifts)
    key = _selection_key(config)
    pool = _Pool()
    log = []
    restarts = 0
    iterations = 0
    sticky = False
    last_max = np.inf

    def log_row():
        rc, cl = memory_report(state)
        log.append({"iteration": iterations, "j": state.steps,
                    "r": state.basis.r, "n_converged": len(pool),
                    "max_residual": last_max,
                    "rcork_mem": rc, "classical_mem": cl})

    while iterations < config.max_iterations:
        if state.steps >= config.m:
            last_max = _full_check(state, pool, config, key)
            if len(pool) >= config.nev:
                return _result(config, pool, log, restarts, iterations,
                               "converged", state)
            if restarts >= config.max_restarts:
                partial = _result(config, pool, log, restarts, iterations,
                                  "max_restarts", state)
                raise BudgetExhausted(
                    "restart budget exhausted with %d of %d converged"
                    % (len(pool), config.nev), result=partial)
            selection = SchurSelection(
                p=config.p, criterion=config.selection,
                target=config.target, must_keep=pool.values())
            state, _ = restart_compact(state, selection)
            restarts += 1

        theta = schedule(iterations)
        try:
            rcork_step(state, theta)
        except BreakdownError as err:
            # harvest the exact terminal pairs before giving up
            H_sq, K_sq = err.result
            last_max = _full_check(state, pool, config, key,
                                   H=H_sq, K=K_sq)
            log_row()
            partial = _result(config, pool, log, restarts, iterations,
                              "breakdown", state)
            if len(pool) >= config.nev:
                partial.termination = "converged"
                return partial
            raise BreakdownError(str(err), result=partial) from err
        iterations += 1

        if not sticky:
            pairs = ritz_pairs(state.H, state.K)
            finite = [p.est for p in pairs if np.isfinite(p.value)]
            if finite and min(finite) <= config.cheap_tol:
                sticky = True
        if sticky and iterations % config.stride == 0:
            last_max = _full_check(state, pool, config, key)
            if len(pool) >= config.nev:
                log_row()
                return _result(config, pool, log, restarts, iterations,
                               "converged", state)
        log_row()

    last_max = _full_check(state, pool, config, key)
    log_row()
    if len(pool) >= config.nev:
        return _result(config, pool, log, restarts, iterations,
                       "converged", state)
    partial = _result(config, pool, log, restarts, iterations,
                      "max_iterations", state)
    raise BudgetExhausted(
        "iteration budget exhausted with %d of %d converged"
        % (len(pool), config.nev), result=partial)


def solve_baseline(rep, config, dense=False):
    """Classical rational Krylov on the linearization, for comparison.

    No restarting: the basis is explicit and grows until the iteration
    budget.  Convergence bookkeeping mirrors solve(); the memory columns
    of the log both report the explicit-basis cost.
    """
    pencil = LinearizationPencil(rep)
    if dense:
        from .linearization import assemble_dense
        A, B = assemble_dense(pencil)
        operator = DenseShiftInvert(A, B)
    else:
        operator = PencilShiftInvert(pencil)
    u1 = start_vector(pencil, config)
    if isinstance(u1, tuple):
        raise ValueError("factored starts make no sense for the baseline")
    state = RationalKrylovState.from_start_vector(u1.data)
    if config.nev == 0:
        return SolveResult(eigenpairs=[], termination="converged",
                           state=state)
    schedule = as_shift_schedule(config.shifts)
    key = _selection_key(config)
    rep_obj = rep
    pool = _Pool()
    log = []
    iterations = 0
    sticky = False
    last_max = np.inf

    def check(H=None, K=None):
        H = state.H if H is None else H
        K = state.K if K is None else K
        ranked = []
        for pair in ritz_pairs(H, K):
            if not np.isfinite(pair.value):
                continue
            z = pencil.block_vector(state.U @ (H @ pair.t))
            try:
                x = recover_eigenvector(z, pair.value)
                res = relative_residual(rep_obj, pair.value, x)
            except ZeroVectorError:
                continue
            ranked.append((key(pair.value), res))
            if res <= config.tol:
                pool.offer(pair.value, x, res)
        ranked.sort(key=lambda item: item[0])
        wanted = ranked[:config.nev]
        return max((res for _, res in wanted), default=np.inf)

    def log_row():
        small = state.H.size + state.K.size
        classical = pencil.N * state.ncols + small
        log.append({"iteration": iterations, "j": state.steps,
                    "r": state.ncols, "n_converged": len(pool),
                    "max_residual": last_max,
                    "rcork_mem": classical, "classical_mem": classical})

    while iterations < config.max_iterations:
        try:
            rk_step(state, schedule(iterations), operator)
        except BreakdownError as err:
            H_sq, K_sq = err.result
            last_max = check(H=H_sq, K=K_sq)
            log_row()
            partial = _result(config, pool, log, 0, iterations,
                              "breakdown", state)
            if len(pool) >= config.nev:
                partial.termination = "converged"
                return partial
            raise BreakdownError(str(err), result=partial) from err
        iterations += 1
        if not sticky:
            pairs = ritz_pairs(state.H, state.K)
            finite = [p.est for p in pairs if np.isfinite(p.value)]
            if finite and min(finite) <= config.cheap_tol:
                sticky = True
        if sticky and iterations % config.stride == 0:
            last_max = check()
            if len(pool) >= config.nev:
                log_row()
                return _result(config, pool, log, 0, iterations,
                               "converged", state)
        log_row()

    last_max = check()
    log_row()
    if len(pool) >= config.nev:
        return _result(config, pool, log, 0, iterations, "converged",
                       state)
    partial = _result(config, pool, log, 0, iterations,
                      "max_iterations", state)
    raise BudgetExhausted(
        "iteration budget exhausted with %d of %d converged"
        % (len(pool), config.nev), result=partial)
