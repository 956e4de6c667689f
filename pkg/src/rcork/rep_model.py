"""Rational eigenproblem in state-space form.

The problem is R(lambda) x = 0 with

    R(lambda) = P(lambda) - E (C - lambda D)^{-1} F^T,

where P(lambda) = sum_i lambda^i P_i is an n x n matrix polynomial of degree d
with sparse coefficients, E and F are n x s and the pencil (C, D) is s x s
with D nonsingular.  s = 0 degenerates to a plain polynomial eigenproblem.
All arithmetic is complex, even for real input data: shifts and eigenvalues
are generically complex.
"""

import warnings

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .errors import DimensionError, PoleError, ZeroVectorError

# Condition estimates of (C - lambda*D) beyond this bound count as a pole.
POLE_COND_BOUND = 1.0 / np.finfo(float).eps

# (C - mu*D) is factorized densely up to this order, sparsely above.
DENSE_CD_CAP = 512


def _to_sparse(M, name):
    if M is None:
        raise DimensionError("matrix %r is missing" % name)
    if sparse.issparse(M):
        return M.tocsc().astype(np.complex128)
    return sparse.csc_matrix(np.asarray(M, dtype=np.complex128))


class RationalEigenproblem:
    """Container for the state-space data (P_0..P_d, E, F, C, D).

    Parameters
    ----------
    coeffs : sequence of (n, n) matrices
        Polynomial coefficients P_0, ..., P_d in increasing degree order,
        dense or sparse; stored as sparse CSC complex.
    E, F : (n, s) matrices, optional
        Factors of the strictly proper part.  Omit all four of E, F, C, D
        for a polynomial problem (s = 0).
    C, D : (s, s) matrices, optional
        Pole pencil of the proper part; D must be nonsingular.

    Notes
    -----
    The instance is immutable after construction.  Coefficient Frobenius
    norms and the small Gram matrices E*E and F^T conj(F) used by the
    residual formula are precomputed here: they are needed repeatedly and
    are inexpensive.
    """

    def __init__(self, coeffs, E=None, F=None, C=None, D=None):
        coeffs = list(coeffs)
        if len(coeffs) < 2:
            raise DimensionError("need at least P_0 and P_1 (degree >= 1)")
        self.coeffs = [_to_sparse(P, "P_%d" % i) for i, P in enumerate(coeffs)]
        self.d = len(self.coeffs) - 1
        n = self.coeffs[0].shape[0]
        for i, P in enumerate(self.coeffs):
            if P.shape != (n, n):
                raise DimensionError(
                    "P_%d has shape %s, expected (%d, %d)" % (i, P.shape, n, n))
        self.n = n

        proper = [E, F, C, D]
        if all(M is None for M in proper):
            self.s = 0
            self.E = sparse.csc_matrix((n, 0), dtype=np.complex128)
            self.F = sparse.csc_matrix((n, 0), dtype=np.complex128)
            self.C = np.zeros((0, 0), dtype=np.complex128)
            self.D = np.zeros((0, 0), dtype=np.complex128)
        else:
            if any(M is None for M in proper):
                raise DimensionError("E, F, C, D must be given together")
            self.E = _to_sparse(E, "E")
            self.F = _to_sparse(F, "F")
            s = self.E.shape[1]
            if self.E.shape[0] != n or self.F.shape != (n, s):
                raise DimensionError(
                    "E has shape %s, F has shape %s, expected (%d, s) both"
                    % (self.E.shape, self.F.shape, n))
            self.C = self._square_small(C, s, "C")
            self.D = self._square_small(D, s, "D")
            self.s = s

        # Cached quantities for the residual denominator and trace identity.
        self.coeff_norms = np.array(
            [spla.norm(P, "fro") for P in self.coeffs])
        if self.s:
            self.gram_e = np.asarray(
                (self.E.conj().T @ self.E).todense())   # E* E
            self.gram_f = np.asarray(
                (self.F.T @ self.F.conj()).todense())   # F^T conj(F)
            self._check_d_nonsingular()
        else:
            self.gram_e = np.zeros((0, 0), dtype=np.complex128)
            self.gram_f = np.zeros((0, 0), dtype=np.complex128)

    @staticmethod
    def _square_small(M, s, name):
        if M is None:
            raise DimensionError("matrix %r is missing" % name)
        if sparse.issparse(M):
            M = M.tocsc().astype(np.complex128)
            if M.shape != (s, s):
                raise DimensionError(
                    "%s has shape %s, expected (%d, %d)" % (name, M.shape, s, s))
            return M if s > DENSE_CD_CAP else np.asarray(M.todense())
        M = np.asarray(M, dtype=np.complex128)
        if M.shape != (s, s):
            raise DimensionError(
                "%s has shape %s, expected (%d, %d)" % (name, M.shape, s, s))
        return M

    def _check_d_nonsingular(self):
        if sparse.issparse(self.D):
            try:
                spla.splu(self.D.tocsc())
            except RuntimeError as exc:
                raise ValueError("D must be nonsingular: %s" % exc) from exc
            return
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lu, _ = scipy.linalg.lu_factor(self.D)
        diag = np.abs(np.diag(lu))
        if diag.min() <= self.s * np.finfo(float).eps * max(diag.max(), 1.0):
            raise ValueError("D must be nonsingular (factorization produced "
                             "a numerically zero pivot)")

    @property
    def shape(self):
        return (self.n, self.n)


def cd_solver(rep, mu, cond_bound=POLE_COND_BOUND):
    """Factorize (C - mu*D) and return a solve callable.

    Raises PoleError if the factorization fails or the condition estimate
    exceeds `cond_bound`: silent near-singular solves would poison the
    Krylov basis.  For s = 0 returns a callable mapping empty to empty.
    """
    if rep.s == 0:
        return lambda rhs: rhs
    CD = rep.C - mu * rep.D
    if sparse.issparse(CD):
        try:
            lu = spla.splu(CD.tocsc())
        except RuntimeError as exc:
            raise PoleError("(C - mu*D) is singular at mu=%s: %s"
                            % (mu, exc)) from exc
        diag = np.abs(lu.U.diagonal())
        if diag.min() <= rep.s * np.finfo(float).eps * diag.max():
            raise PoleError("(C - mu*D) is numerically singular at mu=%s" % mu)
        return lu.solve
    cond = np.linalg.cond(CD)
    if not np.isfinite(cond) or cond > cond_bound:
        raise PoleError(
            "mu=%s is (numerically) a pole: cond(C - mu*D) = %.3e" % (mu, cond))
    lu_piv = scipy.linalg.lu_factor(CD)
    return lambda rhs: scipy.linalg.lu_solve(lu_piv, rhs)


def _cd_inverse(rep, mu):
    solve = cd_solver(rep, mu)
    return solve(np.eye(rep.s, dtype=np.complex128))


def evaluate(rep, mu):
    """Evaluate R(mu) as a sparse CSC matrix.

    P(mu) uses Horner's scheme on the coefficient matrices; the proper part
    is assembled as the sparse triple product E (C - mu*D)^{-1} F^T so the
    result stays sparse when E, F are sparse and s is small.

    Raises PoleError when mu is a pole.
    """
    R = rep.coeffs[rep.d].copy()
    for i in range(rep.d - 1, -1, -1):
        R = R * mu + rep.coeffs[i]
    if rep.s:
        G = _cd_inverse(rep, mu)
        R = R - rep.E @ sparse.csc_matrix(G) @ rep.F.T
    return R.tocsc()


def proper_norm_fro(rep, lam):
    """Frobenius norm of the proper part E (C - lam*D)^{-1} F^T.

    Computed through the s x s trace identity

        ||E (C-lam D)^{-1} F^T||_F^2
            = trace( (E*E) (C-lam D)^{-1} (F^T conj(F)) (C-lam D)^{-*} ),

    so no n x n quantity is ever formed.
    """
    if rep.s == 0:
        return 0.0
    G = _cd_inverse(rep, lam)
    val = np.trace(rep.gram_e @ G @ rep.gram_f @ G.conj().T)
    # roundoff can leave a tiny negative real part
    return float(np.sqrt(max(val.real, 0.0)))


def relative_residual(rep, lam, x):
    """Relative residual E(lam, x) of an approximate eigenpair.

    E(lam,x) = ||R(lam) x||_2 /
               ((sum_i |lam|^i ||P_i||_F + ||E (C-lam D)^{-1} F^T||_F) ||x||_2)

    Invariant under nonzero scaling of x.
    """
    x = np.asarray(x, dtype=np.complex128).ravel()
    if x.shape[0] != rep.n:
        raise DimensionError("x has length %d, expected %d" % (x.shape[0], rep.n))
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise ZeroVectorError("residual of the zero vector is undefined")
    num = np.linalg.norm(evaluate(rep, lam) @ x)
    scale = 0.0
    power = 1.0
    for i in range(rep.d + 1):
        scale += power * rep.coeff_norms[i]
        power *= abs(lam)
    scale += proper_norm_fro(rep, lam)
    return float(num / (scale * nx))


def recover_eigenvector(z, lam):
    """Extract the REP eigenvector from a linearization eigenvector.

    The linearization eigenvector is z = [lam^{d-1} x; ...; lam x; x; y], so
    block d always carries x; for |lam| > 1 the first block carries the same
    direction with a better scale.  Returns the chosen block normalized to
    unit 2-norm.
    """
    blocks = z.blocks
    pick = blocks[0] if abs(lam) > 1.0 else blocks[-1]
    total = z.norm()
    nb = np.linalg.norm(pick)
    if nb <= pick.shape[0] * np.finfo(float).eps * total:
        raise ZeroVectorError(
            "selected eigenvector block is numerically zero "
            "(|block| = %.3e, |z| = %.3e)" % (nb, total))
    return pick / nb
