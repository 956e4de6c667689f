"""Companion-like linearization of the rational eigenproblem.

The (nd+s) x (nd+s) pencil

    A = [P_{d-1} P_{d-2} ... P_0 | E ]      B = -[P_d           |    ]
        [ -I_n               ... |   ]           [    I_n       |    ]
        [        ...             |   ]           [        ...   |    ]
        [            -I_n        | 0 ]           [          I_n |    ]
        [ ------------------F^T--| C ]           [--------------| -D ]

has the eigenvalues of R(lambda) (poles excluded) and eigenvectors
z = [lambda^{d-1} x; ...; lambda x; x; y] with y = -(C-lambda D)^{-1} F^T x.
The pencil is applied implicitly: it is never assembled in production
(assemble_dense exists as a test oracle only).

Shift-and-invert solves (A - mu B) x = B w go through a block ULP
factorization of the leading nd x nd part: after a block-reversal
permutation the shifted matrix factors into a unit upper triangular factor
involving (A1bar - mu B1bar)(M1 - mu N1)^{-1} and a lower triangular factor
carrying R(mu), so one sparse n x n factorization of R(mu), two small s x s
solves and cheap block recurrences replace a factorization of the full
pencil.
"""

import os

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .errors import DimensionError, SingularShiftError, SizeCapError
from .rep_model import cd_solver, evaluate

DENSE_CAP_DEFAULT = 2000


def dense_cap():
    """Size cap for dense test-oracle assembly; RCORK_DENSE_CAP overrides."""
    return int(os.environ.get("RCORK_DENSE_CAP", DENSE_CAP_DEFAULT))


class BlockVector:
    """A length nd+s vector split into d blocks of size n plus an s-tail.

    Storage is one flat complex array; ``block(i)`` (0-based) and ``tail``
    return views into it.
    """

    __slots__ = ("data", "n", "d", "s")

    def __init__(self, data, n, d, s):
        data = np.asarray(data, dtype=np.complex128).ravel()
        if data.shape[0] != n * d + s:
            raise DimensionError(
                "data has length %d, expected n*d+s = %d" % (data.shape[0], n * d + s))
        self.data = data
        self.n = n
        self.d = d
        self.s = s

    @classmethod
    def from_blocks(cls, blocks, tail=None):
        blocks = [np.asarray(b, dtype=np.complex128).ravel() for b in blocks]
        n = blocks[0].shape[0]
        for b in blocks:
            if b.shape[0] != n:
                raise DimensionError("polynomial blocks must share length n")
        tail = (np.zeros(0, dtype=np.complex128) if tail is None
                else np.asarray(tail, dtype=np.complex128).ravel())
        data = np.concatenate(blocks + [tail])
        return cls(data, n, len(blocks), tail.shape[0])

    @classmethod
    def zeros(cls, n, d, s):
        return cls(np.zeros(n * d + s, dtype=np.complex128), n, d, s)

    def block(self, i):
        return self.data[i * self.n:(i + 1) * self.n]

    @property
    def blocks(self):
        return [self.block(i) for i in range(self.d)]

    @property
    def tail(self):
        return self.data[self.n * self.d:]

    def norm(self):
        return float(np.linalg.norm(self.data))

    def copy(self):
        return BlockVector(self.data.copy(), self.n, self.d, self.s)


class LinearizationPencil:
    """Implicit representation of the pencil (A, B) for one problem."""

    def __init__(self, rep):
        self.rep = rep
        self.N = rep.n * rep.d + rep.s

    def block_vector(self, data):
        return BlockVector(data, self.rep.n, self.rep.d, self.rep.s)


def _check_conformal(pencil, w):
    rep = pencil.rep
    if (w.n, w.d, w.s) != (rep.n, rep.d, rep.s):
        raise DimensionError(
            "block vector (n=%d, d=%d, s=%d) not conformal with problem "
            "(n=%d, d=%d, s=%d)" % (w.n, w.d, w.s, rep.n, rep.d, rep.s))


def apply_B(pencil, w):
    """B w = (-P_d w1, -w2, ..., -wd, D v)."""
    _check_conformal(pencil, w)
    rep = pencil.rep
    blocks = [-(rep.coeffs[rep.d] @ w.block(0))]
    blocks += [-w.block(i) for i in range(1, rep.d)]
    tail = rep.D @ w.tail if rep.s else None
    return BlockVector.from_blocks(blocks, tail)


def apply_A(pencil, w):
    """A w: first block sum_i P_{d-i} w_i + E v; middle blocks -w_{i-1};
    tail F^T w_d + C v."""
    _check_conformal(pencil, w)
    rep = pencil.rep
    d = rep.d
    first = rep.coeffs[d - 1] @ w.block(0)
    for k in range(1, d):
        first += rep.coeffs[d - 1 - k] @ w.block(k)
    if rep.s:
        first += rep.E @ w.tail
        tail = rep.F.T @ w.block(d - 1) + rep.C @ w.tail
    else:
        tail = None
    blocks = [first] + [-w.block(i - 1) for i in range(1, d)]
    return BlockVector.from_blocks(blocks, tail)


def _dense(M):
    return np.asarray(M.todense()) if sparse.issparse(M) else np.asarray(M)


def assemble_dense(pencil):
    """Explicit dense (A, B); test oracle only, capped by RCORK_DENSE_CAP."""
    cap = dense_cap()
    if pencil.N > cap:
        raise SizeCapError("dense assembly of size %d exceeds cap %d"
                           % (pencil.N, cap))
    rep = pencil.rep
    n, d, s, N = rep.n, rep.d, rep.s, pencil.N
    A = np.zeros((N, N), dtype=np.complex128)
    B = np.zeros((N, N), dtype=np.complex128)
    for k in range(d):
        A[:n, k * n:(k + 1) * n] = _dense(rep.coeffs[d - 1 - k])
    for i in range(1, d):
        A[i * n:(i + 1) * n, (i - 1) * n:i * n] = -np.eye(n)
    B[:n, :n] = -_dense(rep.coeffs[d])
    for i in range(1, d):
        B[i * n:(i + 1) * n, i * n:(i + 1) * n] = -np.eye(n)
    if s:
        A[:n, d * n:] = _dense(rep.E)
        A[d * n:, (d - 1) * n:d * n] = _dense(rep.F).T
        A[d * n:, d * n:] = _dense(rep.C)
        B[d * n:, d * n:] = _dense(rep.D)
    return A, B


class OpCounter:
    """Tally of vector operations in the block recurrence solver."""

    __slots__ = ("scalar_mults", "subtractions")

    def __init__(self):
        self.scalar_mults = 0
        self.subtractions = 0


def solve_M1N1(mu, b, counter=None):
    """Solve ((M1 - mu N1) kron I_n) x = b for b given as d-1 blocks.

    The permuted pencil (M1 - mu N1) is anti-triangular, so the solution is
    the two-term recurrence x1 = -b_{d-1}, x_i = mu x_{i-1} - b_{d-i}: one
    scalar-vector multiply and one subtraction per inner block step, 2n(d-2)
    flops after the initial negation.  Nonsingular for every mu by
    construction.
    """
    nb = len(b)
    if nb < 1:
        raise DimensionError("solve_M1N1 requires d >= 2 (at least one block)")
    x = [None] * nb
    x[0] = -b[nb - 1]
    for i in range(1, nb):
        x[i] = mu * x[i - 1] - b[nb - 1 - i]
        if counter is not None:
            counter.scalar_mults += 1
            counter.subtractions += 1
    return x


class ShiftedSolveContext:
    """Cached factorizations for repeated solves at one shift.

    Holds the sparse LU of R(mu) and the factorization of (C - mu D); both
    are computed once and reused by every solve with this context. Immutable.
    """

    __slots__ = ("mu", "rep", "r_solve", "cd_solve")

    def __init__(self, mu, rep, r_solve, cd_solve):
        self.mu = mu
        self.rep = rep
        self.r_solve = r_solve
        self.cd_solve = cd_solve


def make_shift_context(pencil, mu, assemble_r=None):
    """Prepare factorizations for solves (A - mu B) x = B w.

    Parameters
    ----------
    pencil : LinearizationPencil
    mu : complex
        The shift; must be neither a pole nor an eigenvalue.
    assemble_r : callable, optional
        ``assemble_r(mu) -> sparse n x n`` producing R(mu) for problems
        where direct assembly beats the state-space formula.

    Raises
    ------
    PoleError
        If (C - mu D) is singular at mu.
    SingularShiftError
        If R(mu) fails to factorize or is numerically singular: mu is an
        eigenvalue and is reported rather than used.
    """
    rep = pencil.rep
    cd_solve = cd_solver(rep, mu)
    Rmu = assemble_r(mu) if assemble_r is not None else evaluate(rep, mu)
    Rmu = sparse.csc_matrix(Rmu)
    try:
        lu = spla.splu(Rmu)
    except RuntimeError as exc:
        raise SingularShiftError(
            "R(mu) is singular at mu=%s (mu is an eigenvalue): %s"
            % (mu, exc)) from exc
    udiag = np.abs(lu.U.diagonal())
    if udiag.min() <= rep.n * np.finfo(float).eps * udiag.max():
        raise SingularShiftError(
            "R(mu) is numerically singular at mu=%s "
            "(pivot ratio %.3e): mu is an eigenvalue"
            % (mu, udiag.min() / udiag.max()))
    return ShiftedSolveContext(mu, rep, lu.solve, cd_solve)


def _forward_steps(ctx, w):
    """Steps 1-3 of the structured solve; returns (x_d, t_mid).

    x_d is the d-th solution block (the only one R-CORK needs) and t_mid is
    the step-1 middle right-hand side kept for the back substitution.
    """
    rep = ctx.rep
    d = rep.d
    t1 = -(rep.coeffs[d] @ w.block(0))
    if rep.s:
        t1 = t1 - rep.E @ ctx.cd_solve(rep.D @ w.tail)
    t_mid = [-w.block(i) for i in range(1, d)]
    if d >= 2:
        y = solve_M1N1(ctx.mu, t_mid)
        # (A1bar - mu B1bar) = [P_1, ..., P_{d-2}, P_{d-1} + mu P_d]
        acc = (rep.coeffs[d - 1] @ y[d - 2]) + ctx.mu * (rep.coeffs[d] @ y[d - 2])
        for i in range(d - 2):
            acc = acc + rep.coeffs[i + 1] @ y[i]
        t1 = t1 - acc
    return ctx.r_solve(t1), t_mid


def _tail_block(ctx, w, x_d):
    """Step 6: y = (C - mu D)^{-1} (D z - F^T x_d)."""
    rep = ctx.rep
    if rep.s == 0:
        return np.zeros(0, dtype=np.complex128)
    return ctx.cd_solve(rep.D @ w.tail - rep.F.T @ x_d)


def solve_shifted(ctx, pencil, w):
    """Solve (A - mu B) x = B w through the structured factorization.

    Steps: right-hand-side assembly; correction of the first block by the
    upper factor; R(mu) solve (giving the d-th block); back substitution
    via solve_M1N1; block reversal; tail solve.
    """
    _check_conformal(pencil, w)
    rep = pencil.rep
    x_d, t_mid = _forward_steps(ctx, w)
    if rep.d >= 2:
        # (m0 - mu n0) has single entry mu in the last position
        t_mid[-1] = t_mid[-1] - ctx.mu * x_d
        t_back = solve_M1N1(ctx.mu, t_mid)
        blocks = list(reversed(t_back)) + [x_d]
    else:
        blocks = [x_d]
    tail = _tail_block(ctx, w, x_d) if rep.s else None
    return BlockVector.from_blocks(blocks, tail)


def solve_shifted_partial(ctx, pencil, w):
    """The d-th block and tail of solve_shifted, skipping the back
    substitution (saves 2n(d-2) flops; all R-CORK needs per step).

    Returns the pair (u_hat_d, v_hat) with exactly the floating-point values
    of blocks d and tail of the full solve: the code path through the R(mu)
    solve and the tail solve is shared.
    """
    _check_conformal(pencil, w)
    x_d, _ = _forward_steps(ctx, w)
    v_hat = _tail_block(ctx, w, x_d)
    return x_d, v_hat
