"""Compact rational Krylov iteration on the companion-like pencil.

The Krylov basis U_j (columns in C^{nd+s}) is never stored explicitly.
Its polynomial blocks share a common column space of dimension r_j < d + j,
so U_j is kept factored as

    U_j = diag(I_d kron Q_j, I_s) [R^(1); ...; R^(d); V],

with Q_j of size n x r_j (orthonormal) and the stacked coefficient matrix
also orthonormal.  One iteration costs a single structured shifted solve
plus two levels of Gram-Schmidt: first on the n-dimensional block against
Q_j, then on the small stacked coefficients, and the Hessenberg pair
(H, K) is extended exactly as in the classical method.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import BreakdownError, SizeCapError, ZeroVectorError
from .krylov_classic import ritz_pairs
from .linearization import (
    BlockVector,
    dense_cap,
    make_shift_context,
    solve_shifted_partial,
)
from .rep_model import recover_eigenvector, relative_residual

DEFLATION_TOL = 1e-12
BREAKDOWN_TOL = 1e-14


@dataclass
class CompactBasis:
    """Two-level factored Krylov basis: U = diag(I_d kron Q, I_s) R."""

    Q: np.ndarray
    Rblocks: list
    V: np.ndarray

    @property
    def r(self):
        return self.Q.shape[1]

    @property
    def ncols(self):
        return self.V.shape[1]

    def stacked(self):
        """The (d r + s) x j coefficient matrix [R^(1); ..; R^(d); V]."""
        return np.vstack(self.Rblocks + [self.V])

    def scalar_count(self):
        """Stored scalars: n r + (d r + s) j."""
        return (self.Q.size + sum(R.size for R in self.Rblocks)
                + self.V.size)


@dataclass
class RcorkState:
    """Compact basis plus the Hessenberg pair and shift history."""

    pencil: object
    basis: CompactBasis
    H: np.ndarray
    K: np.ndarray
    shifts: list = field(default_factory=list)
    contexts: dict = field(default_factory=dict)

    @property
    def steps(self):
        return self.H.shape[1]

    def context(self, theta):
        theta = complex(theta)
        if theta not in self.contexts:
            self.contexts[theta] = make_shift_context(self.pencil, theta)
        return self.contexts[theta]


def init(pencil, start):
    """Build the rank-revealing compact form of the start vector.

    ``start`` is either a BlockVector (or flat array) u1, whose d polynomial
    blocks are compressed by a column-pivoted QR with drop tolerance, or a
    pair (Q1, R1) giving the factors directly (a structure-emulating start
    with collinear blocks arrives here with r1 = 1).
    """
    rep = pencil.rep
    n, d, s = rep.n, rep.d, rep.s
    if isinstance(start, tuple):
        Q1, R1 = start
        Q1 = np.asarray(Q1, dtype=np.complex128)
        R1 = np.asarray(R1, dtype=np.complex128).ravel()
        r = Q1.shape[1]
        if Q1.shape[0] != n or R1.shape[0] != d * r + s:
            raise ValueError("factored start has nonconformal shapes")
        norm = np.linalg.norm(R1)
        if norm == 0.0:
            raise ZeroVectorError("start vector is zero")
        R1 = (R1 / norm).reshape(-1, 1)
        Rblocks = [R1[i * r:(i + 1) * r] for i in range(d)]
        V = R1[d * r:]
        basis = CompactBasis(Q=Q1, Rblocks=Rblocks, V=V)
    else:
        if not isinstance(start, BlockVector):
            start = pencil.block_vector(np.asarray(start,
                                                   dtype=np.complex128))
        norm = start.norm()
        if norm == 0.0:
            raise ZeroVectorError("start vector is zero")
        u1 = BlockVector(start.data / norm, n, d, s)
        W = np.column_stack([u1.block(i) for i in range(d)])
        Qf, Rf, _ = scipy.linalg.qr(W, mode="economic", pivoting=True)
        diag = np.abs(np.diag(Rf))
        if diag.size and diag[0] > 0.0:
            r = int(np.count_nonzero(diag > max(n, d) * np.finfo(float).eps
                                     * diag[0]))
        else:
            r = 0
        Q1 = Qf[:, :r]
        coeff = Q1.conj().T @ W  # exact coordinates: blocks lie in span(Q1)
        Rblocks = [coeff[:, i].reshape(-1, 1) for i in range(d)]
        V = u1.tail.reshape(-1, 1).copy()
        basis = CompactBasis(Q=Q1, Rblocks=Rblocks, V=V)
    H = np.zeros((1, 0), dtype=np.complex128)
    return RcorkState(pencil=pencil, basis=basis, H=H, K=H.copy())


def assemble_uj(state):
    """Explicit last Krylov vector: one n x r by r x d product plus tail."""
    basis = state.basis
    rep = state.pencil.rep
    last = np.column_stack([R[:, -1] for R in basis.Rblocks])
    P = basis.Q @ last
    blocks = [P[:, i] for i in range(rep.d)]
    return BlockVector.from_blocks(blocks, tail=basis.V[:, -1])


def first_level(Q, u_hat_d, deflation_tol=DEFLATION_TOL):
    """Orthogonalize the new n-block against Q (CGS twice).

    Returns (Q_next, x, alpha): coordinates x = Q* u_hat_d (corrected by
    the second pass), remainder norm alpha.  When the block is already in
    span(Q) up to deflation_tol relative, Q is kept and alpha is exactly 0.
    """
    x = Q.conj().T @ u_hat_d
    q = u_hat_d - Q @ x
    corr = Q.conj().T @ q
    q = q - Q @ corr
    x = x + corr
    alpha = np.linalg.norm(q)
    if alpha > deflation_tol * np.linalg.norm(u_hat_d):
        Q_next = np.hstack([Q, (q / alpha).reshape(-1, 1)])
        return Q_next, x, float(alpha)
    return Q, x, 0.0


def compute_phat(x_j, v_hat, r_col_blocks, theta_j):
    """Coordinates of the new vector's blocks in span(Q_j).

    Backward recurrence: phat^(d) = x_j, phat^(i-1) = theta phat^(i) +
    r^(i), where r^(i) is the i-th block of the last stored R column.
    Returns the stacked (d r + s) vector with tail v_hat.
    """
    d = len(r_col_blocks)
    blocks = [None] * d
    blocks[d - 1] = np.asarray(x_j, dtype=np.complex128)
    for i in range(d - 1, 0, -1):
        blocks[i - 1] = theta_j * blocks[i] + r_col_blocks[i]
    return np.concatenate(blocks + [np.asarray(v_hat,
                                               dtype=np.complex128)])


def second_level(R_stacked, p_hat):
    """Orthogonalize the stacked coordinates against the R columns.

    CGS twice; returns (h, p_tilde) with h corrected by the second pass.
    """
    h = R_stacked.conj().T @ p_hat
    p = p_hat - R_stacked @ h
    corr = R_stacked.conj().T @ p
    p = p - R_stacked @ corr
    h = h + corr
    return h, p


def _alpha_entries(alpha_j, theta_j, d):
    """theta^{d-i} alpha for i = d..1, by repeated multiplication."""
    entries = np.empty(d, dtype=np.complex128)
    value = complex(alpha_j)
    for k in range(d):
        entries[d - 1 - k] = value
        value = value * theta_j
    return entries


def append_column(state, h_small, p_tilde, alpha_j, theta_j, Q_next,
                  breakdown_tol=BREAKDOWN_TOL):
    """Install the new basis column and extend the Hessenberg pair.

    The full new direction, in the coordinates of the (possibly grown)
    Q, interleaves the p_tilde blocks with the entries theta^{d-i} alpha;
    its norm is h_{j+1,j}.  When alpha != 0 the rank grows by one and the
    stored R blocks gain a zero bottom row.
    """
    basis = state.basis
    rep = state.pencil.rep
    d, r = rep.d, basis.r
    j = basis.ncols

    p_blocks = [p_tilde[i * r:(i + 1) * r] for i in range(d)]
    v_tilde = p_tilde[d * r:]
    # |u_hat|^2 = |p_hat|^2 + sum |extras|^2, and the orthogonal split
    # p_hat = R h + p_tilde gives |p_hat|^2 = |h|^2 + |p_tilde|^2
    extra_sq = 0.0
    if alpha_j != 0.0:
        extras = _alpha_entries(alpha_j, theta_j, d)
        extra_sq = float(np.sum(np.abs(extras) ** 2))
        h_next = np.sqrt(np.linalg.norm(p_tilde) ** 2 + extra_sq)
    else:
        h_next = np.linalg.norm(p_tilde)
    u_hat_norm = np.sqrt(np.linalg.norm(h_small) ** 2
                         + np.linalg.norm(p_tilde) ** 2 + extra_sq)
    if h_next <= breakdown_tol * u_hat_norm:
        # invariant subspace found; expose the completed square pair
        k_sq = theta_j * h_small
        k_sq[state.H.shape[0] - 1] += 1.0
        H_sq = np.hstack([state.H, h_small.reshape(-1, 1)])
        K_sq = np.hstack([state.K, k_sq.reshape(-1, 1)])
        raise BreakdownError(
            "compact iteration breakdown at step %d: h = %.3e"
            % (state.steps + 1, h_next), result=(H_sq, K_sq))

    if alpha_j != 0.0:
        zero_row = np.zeros((1, j), dtype=np.complex128)
        new_blocks = []
        for i in range(d):
            col = np.concatenate([p_blocks[i], [extras[i]]]) / h_next
            grown = np.vstack([basis.Rblocks[i], zero_row])
            new_blocks.append(np.hstack([grown, col.reshape(-1, 1)]))
        basis.Rblocks = new_blocks
        basis.Q = Q_next
    else:
        for i in range(d):
            col = (p_blocks[i] / h_next).reshape(-1, 1)
            basis.Rblocks[i] = np.hstack([basis.Rblocks[i], col])
    basis.V = np.hstack([basis.V, (v_tilde / h_next).reshape(-1, 1)])

    h_col = np.concatenate([h_small, [h_next]])
    k_col = theta_j * h_col
    pos = state.H.shape[0] - 1  # coefficient of the vector fed in
    k_col[pos] += 1.0
    rows, cols = state.H.shape
    H = np.zeros((rows + 1, cols + 1), dtype=np.complex128)
    K = np.zeros_like(H)
    H[:rows, :cols] = state.H
    K[:rows, :cols] = state.K
    H[:, -1] = h_col
    K[:, -1] = k_col
    state.H = H
    state.K = K
    state.shifts.append(complex(theta_j))
    return state


def rcork_step(state, theta_j):
    """One compact rational Krylov step at shift theta_j.

    Assembles u_j, runs the structured partial solve (d-th block and tail
    only), then the two orthogonalization levels, and appends the column.
    """
    rep = state.pencil.rep
    ctx = state.context(theta_j)
    u_j = assemble_uj(state)
    u_hat_d, v_hat = solve_shifted_partial(ctx, state.pencil, u_j)

    basis = state.basis
    Q_next, x_j, alpha_j = first_level(basis.Q, u_hat_d)
    r_col = [R[:, -1] for R in basis.Rblocks]
    p_hat = compute_phat(x_j, v_hat, r_col, theta_j)
    h_small, p_tilde = second_level(basis.stacked(), p_hat)
    append_column(state, h_small, p_tilde, alpha_j, theta_j, Q_next)

    r, j = state.basis.r, state.basis.ncols
    assert r < rep.d + j, "rank bound violated: r=%d, d+j=%d" % (r, rep.d + j)
    return state


def reconstruct_U(state):
    """Explicit N x j basis matrix; test oracle only, size-capped."""
    pencil = state.pencil
    if pencil.N > dense_cap():
        raise SizeCapError("explicit basis of height %d exceeds cap %d"
                           % (pencil.N, dense_cap()))
    basis = state.basis
    parts = [basis.Q @ R for R in basis.Rblocks]
    parts.append(basis.V)
    return np.vstack(parts)


def eigvec_from_small(state, t, H=None):
    """Linearization eigenvector z = Q R (H t): small products first."""
    basis = state.basis
    rep = state.pencil.rep
    w = (state.H if H is None else H) @ t
    c = basis.stacked() @ w
    r = basis.r
    coeff = np.column_stack([c[i * r:(i + 1) * r] for i in range(rep.d)])
    P = basis.Q @ coeff
    blocks = [P[:, i] for i in range(rep.d)]
    return BlockVector.from_blocks(blocks, tail=c[rep.d * r:])


def ritz_and_eigvecs(state, which=None, limit=None):
    """Ritz values with recovered eigenvectors and full residuals.

    ``which`` optionally maps a Ritz value to a sort key (smaller first);
    the default orders by the cheap estimate.  Returns a list of
    (value, x, residual) with x a unit n-vector.
    """
    rep = state.pencil.rep
    pairs = [p for p in ritz_pairs(state.H, state.K)
             if np.isfinite(p.value)]
    if which is None:
        pairs.sort(key=lambda p: p.est)
    else:
        pairs.sort(key=lambda p: which(p.value))
    if limit is not None:
        pairs = pairs[:limit]
    out = []
    for pair in pairs:
        z = eigvec_from_small(state, pair.t)
        x = recover_eigenvector(z, pair.value)
        res = relative_residual(rep, pair.value, x)
        out.append((pair.value, x, res))
    return out
