"""Classical rational Krylov iteration with explicitly stored basis vectors.

Production baseline and correctness oracle for the compact iteration: both
build the same Hessenberg pair (H, K), so running them in lockstep on the
same pencil must give entrywise-equal small matrices.

One step at shift theta: solve (A - theta B) u_hat = B u_j, orthogonalize
u_hat against the basis (classical Gram-Schmidt, applied twice), append the
normalized remainder.  The recurrence after j steps is

    A U_{j+1} underline(H)_j = B U_{j+1} underline(K)_j,

with underline(K)_j = underline(H)_j diag(theta_1..theta_j) + I_{(j+1) x j}.
Ritz pairs come from the square parts: K_j t = lambda H_j t.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import BreakdownError, NumericalError, ZeroVectorError
from .linearization import make_shift_context, solve_shifted

BREAKDOWN_TOL = 1e-14


@dataclass
class RationalKrylovState:
    """Explicit basis U (orthonormal columns) plus the Hessenberg pair."""

    U: np.ndarray
    H: np.ndarray
    K: np.ndarray
    shifts: list = field(default_factory=list)

    @classmethod
    def from_start_vector(cls, u1):
        u1 = np.asarray(u1, dtype=np.complex128).ravel()
        norm = np.linalg.norm(u1)
        if norm == 0.0:
            raise ZeroVectorError("start vector is zero")
        U = (u1 / norm).reshape(-1, 1)
        H = np.zeros((1, 0), dtype=np.complex128)
        K = np.zeros((1, 0), dtype=np.complex128)
        return cls(U=U, H=H, K=K)

    @property
    def ncols(self):
        return self.U.shape[1]

    @property
    def steps(self):
        return self.H.shape[1]


@dataclass
class RitzPair:
    """Ritz value with its small eigenvector and cheap residual estimate."""

    value: complex
    t: np.ndarray
    est: float
    converged: bool = False
    x: np.ndarray | None = None


def as_shift_schedule(shifts):
    """Normalize a shift specification to a callable of the step index.

    Accepts a single shift (fixed), a sequence (cycled), or a callable.
    """
    if callable(shifts):
        return shifts
    if np.isscalar(shifts):
        value = complex(shifts)
        return lambda j: value
    values = [complex(t) for t in shifts]
    if not values:
        raise ValueError("empty shift list")
    return lambda j: values[j % len(values)]


def rk_step(state, theta_j, solver, breakdown_tol=BREAKDOWN_TOL):
    """One rational Krylov step: shift-invert, orthogonalize, append.

    ``solver(theta, u)`` must return (A - theta B)^{-1} B u.  Raises
    BreakdownError when the new direction lies in the current subspace
    (h_{j+1,j} <= breakdown_tol * ||u_hat||).
    """
    U = state.U
    u_hat = np.asarray(solver(theta_j, U[:, -1]), dtype=np.complex128).ravel()
    scale = np.linalg.norm(u_hat)

    # CGS twice; the second pass corrects the coefficients as well
    h = U.conj().T @ u_hat
    u_tilde = u_hat - U @ h
    corr = U.conj().T @ u_tilde
    u_tilde = u_tilde - U @ corr
    h = h + corr

    pos = state.ncols - 1  # coefficient of the vector fed to the solver
    ncols = state.ncols

    h_next = np.linalg.norm(u_tilde)
    if h_next <= breakdown_tol * scale:
        # invariant subspace found; the completed square pair is exact,
        # so hand it to the caller on the error
        k = theta_j * h
        k[pos] += 1.0
        H_sq = np.hstack([state.H, h.reshape(-1, 1)])
        K_sq = np.hstack([state.K, k.reshape(-1, 1)])
        raise BreakdownError(
            "rational Krylov breakdown at step %d: |u_tilde| = %.3e"
            % (state.steps + 1, h_next), result=(H_sq, K_sq))

    h_col = np.concatenate([h, [h_next]])
    k_col = theta_j * h_col
    k_col[pos] += 1.0

    state.U = np.hstack([U, (u_tilde / h_next).reshape(-1, 1)])
    H = np.zeros((ncols + 1, state.steps + 1), dtype=np.complex128)
    K = np.zeros_like(H)
    H[:ncols, :-1] = state.H
    K[:ncols, :-1] = state.K
    H[:, -1] = h_col
    K[:, -1] = k_col
    state.H = H
    state.K = K
    state.shifts.append(complex(theta_j))
    return state


def ritz_pairs(H_under, K_under):
    """Ritz pairs of the square pencil (K_j, H_j) by dense QZ.

    Each pair carries the cheap linearized residual estimate
    |h_{j+1,j}| * |last entry of underline(H)_j t| / ||t||, which uses only
    small quantities.  Infinite Ritz values (singular H_j) are kept and
    carry an infinite estimate so selection ranks them last.
    """
    j = H_under.shape[1]
    if j == 0:
        return []
    H = H_under[:j, :]
    K = K_under[:j, :]
    try:
        values, vectors = scipy.linalg.eig(K, H)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError("QZ on the projected pencil failed: %s"
                             % exc) from exc
    sub = abs(H_under[-1, -1])
    pairs = []
    for i in range(j):
        t = vectors[:, i]
        nt = np.linalg.norm(t)
        t = t / nt
        if np.isfinite(values[i]):
            est = sub * abs(H_under[-1, :] @ t)
        else:
            est = np.inf
        pairs.append(RitzPair(value=complex(values[i]), t=t, est=float(est)))
    return pairs


def rk_run(solver, u1, shift_schedule, m, tol=1e-10):
    """Run m rational Krylov steps and report converged Ritz pairs.

    Convergence here is judged by the cheap linearized estimate (this is
    the baseline method; the full rational residual lives in the driver).
    Eigenvectors x = U_{j+1} underline(H)_j t are assembled only for the
    converged pairs.
    """
    state = RationalKrylovState.from_start_vector(u1)
    schedule = as_shift_schedule(shift_schedule)
    for j in range(m):
        rk_step(state, schedule(j), solver)
    pairs = ritz_pairs(state.H, state.K)
    converged = []
    for pair in pairs:
        if pair.est <= tol:
            pair.converged = True
            pair.x = state.U @ (state.H @ pair.t)
            converged.append(pair)
    return state, converged


class DenseShiftInvert:
    """Shift-invert operator on an explicitly assembled pencil.

    Factorizations are cached per exact shift value, so cyclic schedules
    re-use them.  Test/baseline use only: O(N^3) setup per shift.
    """

    def __init__(self, A, B):
        self.A = np.asarray(A, dtype=np.complex128)
        self.B = np.asarray(B, dtype=np.complex128)
        self._lu = {}

    def __call__(self, theta, u):
        theta = complex(theta)
        if theta not in self._lu:
            self._lu[theta] = scipy.linalg.lu_factor(self.A - theta * self.B)
        return scipy.linalg.lu_solve(self._lu[theta], self.B @ u)


class PencilShiftInvert:
    """Shift-invert operator backed by the structured solver.

    Wraps flat vectors into block vectors and routes through the cached
    shift contexts, so the classical iteration can run on the implicit
    pencil at full scale.
    """

    def __init__(self, pencil):
        self.pencil = pencil
        self._ctx = {}

    def context(self, theta):
        theta = complex(theta)
        if theta not in self._ctx:
            self._ctx[theta] = make_shift_context(self.pencil, theta)
        return self._ctx[theta]

    def __call__(self, theta, u):
        ctx = self.context(theta)
        w = self.pencil.block_vector(np.asarray(u, dtype=np.complex128))
        return solve_shifted(ctx, self.pencil, w).data
