"""Implicit restarting of the compact iteration, Krylov-Schur style.

When the subspace reaches its size cap, the square pencil (K_j, H_j) is
brought to ordered generalized Schur form so the p wanted Ritz values
occupy the leading block.  The basis transforms by Y_1 = diag(Y_p, 1);
in compact storage only the small coefficient matrix is touched, and the
common column space is re-compressed by an SVD of the transformed R
blocks laid side by side, whose rank omega is at most d + p.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError, RankCollapseError


@dataclass
class SchurSelection:
    """Which Ritz values a restart keeps.

    criterion is "closest-to-target", "largest-negative-imaginary", or a
    callable mapping the value array to real keys (smaller = kept first).
    Values listed in must_keep (e.g. already-converged ones) are always
    selected, matched by nearest distance.
    """

    p: int
    criterion: object = "closest-to-target"
    target: complex = 0.0
    must_keep: tuple = ()

    def keys(self, values):
        values = np.asarray(values, dtype=np.complex128)
        if callable(self.criterion):
            keys = np.asarray(self.criterion(values), dtype=float)
        elif self.criterion == "closest-to-target":
            keys = np.abs(values - self.target)
        elif self.criterion == "largest-negative-imaginary":
            keys = values.imag
        else:
            raise ValueError("unknown selection criterion %r"
                             % (self.criterion,))
        keys = np.where(np.isfinite(values), keys, np.inf)
        keys = np.where(np.isnan(keys), np.inf, keys)
        for wanted in self.must_keep:
            gaps = np.abs(values - wanted)
            gaps = np.where(np.isnan(gaps), np.inf, gaps)
            keys[int(np.argmin(gaps))] = -np.inf
        return keys

    def mask(self, values):
        """Boolean mask keeping exactly min(p, len) values."""
        keys = self.keys(values)
        order = np.argsort(keys, kind="stable")
        mask = np.zeros(len(keys), dtype=bool)
        mask[order[:self.p]] = True
        return mask


@dataclass
class RestartReport:
    """What a restart did: compression rank, dropped spectrum, kept values."""

    omega: int
    dropped: np.ndarray
    kept: np.ndarray


def ordered_schur_pair(H_j, K_j, selection):
    """Generalized Schur form of (H_j, K_j) with wanted values leading.

    Returns (Y, Z, T_H, T_K) with H_j = Y T_H Z*, K_j = Y T_K Z*, both T
    upper triangular (complex arithmetic throughout), and the leading
    selection.p diagonal ratios equal to the selected Ritz values.
    """
    j = H_j.shape[0]
    if H_j.shape != (j, j) or K_j.shape != (j, j):
        raise ValueError("square matrices required")

    def sort(alpha, beta):
        with np.errstate(divide="ignore", invalid="ignore"):
            values = alpha / beta
        return selection.mask(values)

    try:
        T_K, T_H, alpha, beta, Y, Z = scipy.linalg.ordqz(
            K_j, H_j, sort=sort, output="complex")
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError("Schur reordering failed: %s" % exc) from exc
    return Y, Z, T_H, T_K


def restart_compact(state, selection):
    """Shrink the compact subspace to selection.p columns in place.

    Implements the transform U+ = U_{j+1} diag(Y_p, 1) purely on the
    small factors: the stacked coefficients are multiplied by Y_1, the
    transformed R blocks are re-compressed by an economy SVD (rank
    omega <= d + p), Q+ = Q U_svd, and the new coefficient matrix is
    re-orthonormalized by a thin QR whose triangular factor is folded
    into the restarted Hessenberg pair.
    """
    j = state.steps
    p = selection.p
    if not 1 <= p < j:
        raise ValueError("keep count p=%d must satisfy 1 <= p < j=%d"
                         % (p, j))
    basis = state.basis
    rep = state.pencil.rep
    d, s, r = rep.d, rep.s, basis.r

    H_j = state.H[:j, :]
    K_j = state.K[:j, :]
    Y, Z, T_H, T_K = ordered_schur_pair(H_j, K_j, selection)
    with np.errstate(divide="ignore", invalid="ignore"):
        kept = np.diag(T_K)[:p] / np.diag(T_H)[:p]

    h_last = state.H[-1, -1]
    k_last = state.K[-1, -1]
    z_row = Z[-1, :p]
    H_plus = np.vstack([T_H[:p, :p], h_last * z_row])
    K_plus = np.vstack([T_K[:p, :p], k_last * z_row])

    Y1 = np.zeros((j + 1, p + 1), dtype=np.complex128)
    Y1[:j, :p] = Y[:, :p]
    Y1[j, p] = 1.0

    W_blocks = [R @ Y1 for R in basis.Rblocks]
    V_plus = basis.V @ Y1
    W_cat = np.hstack(W_blocks) if r else np.zeros((0, d * (p + 1)))
    U_svd, sigma, Vh = scipy.linalg.svd(W_cat, full_matrices=False)
    if sigma.size:
        tol = max(d * r, p + 1) * np.finfo(float).eps * sigma[0]
        omega = int(np.count_nonzero(sigma > tol))
    else:
        omega = 0
    if omega == 0:
        raise RankCollapseError(
            "restart compression found empty polynomial block space")
    dropped = sigma[omega:]

    Q_plus = basis.Q @ U_svd[:, :omega]
    SV = sigma[:omega, None] * Vh[:omega, :]
    new_blocks = [SV[:, i * (p + 1):(i + 1) * (p + 1)] for i in range(d)]

    stacked = np.vstack(new_blocks + [V_plus])
    Q_small, T_small = scipy.linalg.qr(stacked, mode="economic")
    H_plus = T_small @ H_plus
    K_plus = T_small @ K_plus

    basis.Q = Q_plus
    basis.Rblocks = [Q_small[i * omega:(i + 1) * omega] for i in range(d)]
    basis.V = Q_small[d * omega:]
    state.H = H_plus
    state.K = K_plus
    return state, RestartReport(omega=omega, dropped=dropped,
                                kept=np.asarray(kept))
