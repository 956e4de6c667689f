"""Benchmark problem generators with prescribed eigenvalues.

Both families start from a diagonal core whose scalar sub-problems have
chosen roots, then conjugate by fixed banded matrices so the assembled
problem is genuinely sparse-banded while the spectrum stays put.  Since
the proper part either touches a single diagonal entry (family 1) or
sits strictly in the upper-right corner (family 2), the determinant is
the product of the scalar sub-problems and the prescribed values are
exact eigenvalues, which makes these generators usable as ground truth.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .errors import DimensionError, NumericalError
from .rep_model import RationalEigenproblem


@dataclass
class GeneratedProblem:
    """A problem instance, its guaranteed eigenvalues, and run hints."""

    rep: RationalEigenproblem
    prescribed: np.ndarray
    targets: np.ndarray
    meta: dict


def _assert_invertible(M, name):
    """Bandwidth-2 factorization guard; dominance does not always hold."""
    lu = spla.splu(M.tocsc(), permc_spec="NATURAL")
    diag = np.abs(lu.U.diagonal())
    if diag.min() <= M.shape[0] * np.finfo(float).eps * diag.max():
        raise NumericalError("conjugation matrix %s is numerically singular"
                             % name)


def gen_exp1(n, seed=0, k_eigs=10):
    """Damped-vibration style problem: quadratic plus one real pole.

    Core rows are decoupled quadratics a2 lam^2 + a0 with roots +-i omega;
    k_eigs rows get omega in (2, 3) (the targets, eigenvalues with the
    most negative imaginary parts), the rest omega in (0.1, 1).  The last
    row carries the rank-one proper term with pole at lambda = 1.  The
    core is conjugated as P R1(lam) P^T with the fixed tridiagonal P
    (unit diagonal, superdiagonal 1/2, subdiagonal 1/3), so the mass and
    stiffness matrices are symmetric positive definite pentadiagonal and
    the proper vector is the last column of P.
    """
    if n < 4:
        raise DimensionError("n must be at least 4, got %d" % n)
    if not 1 <= k_eigs <= n - 2:
        raise DimensionError("k_eigs must lie in [1, n-2], got %d" % k_eigs)
    rng = np.random.default_rng(seed)

    omega_t = 2.0 + (np.arange(k_eigs) + 0.5) / k_eigs
    omega_rest = rng.uniform(0.1, 1.0, n - 1 - k_eigs)
    a2 = np.empty(n)
    a0 = np.empty(n)
    a2[:k_eigs] = 1.0
    a0[:k_eigs] = omega_t ** 2
    a2[k_eigs:n - 1] = rng.uniform(0.5, 2.0, n - 1 - k_eigs)
    a0[k_eigs:n - 1] = a2[k_eigs:n - 1] * omega_rest ** 2
    a2[n - 1] = 1.0
    a0[n - 1] = rng.uniform(0.1, 1.0) ** 2

    P = sparse.diags([np.full(n - 1, 1.0 / 3.0), np.ones(n),
                      np.full(n - 1, 0.5)], [-1, 0, 1], format="csr")
    A2 = sparse.diags(a2, format="csr")
    A0 = sparse.diags(a0, format="csr")
    M = (P @ A2 @ P.T).tocsc()
    K = (P @ A0 @ P.T).tocsc()
    p_last = P[:, [n - 1]].toarray()

    zero = sparse.csc_matrix((n, n))
    rep = RationalEigenproblem(
        [K, zero, M],
        E=p_last, F=p_last,
        C=np.array([[1.0]]), D=np.array([[1.0]]))

    targets = -1j * omega_t
    prescribed = np.concatenate([targets, np.conj(targets)])
    shifts = [0.2 - 2.25j, 0.2 - 2.5j, 0.2 - 2.75j]
    meta = {"experiment": "exp1", "n": n, "seed": seed, "k_eigs": k_eigs,
            "shifts": shifts, "selection": "largest-negative-imaginary",
            "target": None, "poles": [1.0], "start": "real"}
    return GeneratedProblem(rep=rep, prescribed=prescribed,
                            targets=targets, meta=meta)


def _cubic_from_roots(r1, r2, r3):
    """Monic cubic coefficients (c0, c1, c2) with the given roots.

    Roots are real or a conjugate pair plus a real, so the symmetric
    functions are real up to roundoff.
    """
    e1 = r1 + r2 + r3
    e2 = r1 * r2 + r1 * r3 + r2 * r3
    e3 = r1 * r2 * r3
    return -np.real(e3), np.real(e2), -np.real(e1)


def gen_exp2(n, seed=0, k_eigs=10):
    """Cubic academic problem with a two-column proper part.

    Core rows are monic cubics; target rows place conjugate pairs (plus
    one real root when k_eigs is odd) inside the unit-ish disk, all other
    roots sit far away in (40, 80), and the state-space part uses
    E0 = [e1+e2, e5+e6], F0 = [e_{n-3}+e_{n-2}, e_{n-1}+e_n],
    C = diag(105, -105), D = I2 (poles at +-105).  The assembled problem
    is P R2(lam) Q with the fixed bandwidth-2 P and tridiagonal Q; the
    corner placement of the proper block keeps the prescribed roots
    exact (it never meets the diagonal for n >= 10).
    """
    if n < 8:
        raise DimensionError("n must be at least 8, got %d" % n)
    k_pairs, odd = divmod(k_eigs, 2)
    rows_needed = k_pairs + odd
    if not 1 <= k_eigs <= 2 * (n - 1):
        raise DimensionError("k_eigs must lie in [1, 2(n-1)], got %d"
                             % k_eigs)
    rng = np.random.default_rng(seed)

    values = []
    c0 = np.empty(n)
    c1 = np.empty(n)
    c2 = np.empty(n)
    far = rng.uniform(40.0, 80.0, (n, 2))
    for i in range(k_pairs):
        rho = 0.3 + 0.9 * (i + 0.5) / max(k_pairs, 1)
        phi = np.pi * rng.uniform(0.2, 0.8)
        z = rho * np.exp(1j * phi)
        c0[i], c1[i], c2[i] = _cubic_from_roots(z, np.conj(z), far[i, 0])
        values.extend([z, np.conj(z)])
    if odd:
        i = k_pairs
        t = -rng.uniform(0.2, 1.0)
        c0[i], c1[i], c2[i] = _cubic_from_roots(t, far[i, 0], far[i, 1])
        values.append(t + 0j)
    extra = rng.uniform(40.0, 80.0, n)
    for i in range(rows_needed, n):
        c0[i], c1[i], c2[i] = _cubic_from_roots(far[i, 0], far[i, 1],
                                                extra[i])

    P = sparse.diags(
        [np.full(n - 2, -0.2), np.full(n - 1, -0.25), np.ones(n),
         np.full(n - 1, 0.5), np.full(n - 2, 1.0 / 3.0)],
        [-2, -1, 0, 1, 2], format="csr")
    Q = sparse.diags([np.full(n - 1, 0.5), -np.ones(n),
                      np.full(n - 1, -1.0 / 3.0)], [-1, 0, 1], format="csr")
    _assert_invertible(P, "P")
    _assert_invertible(Q, "Q")

    coeffs = [(P @ sparse.diags(c) @ Q).tocsc() for c in (c0, c1, c2)]
    coeffs.append((P @ Q).tocsc())

    E0 = np.zeros((n, 2))
    E0[0, 0] = E0[1, 0] = 1.0
    E0[4, 1] = E0[5, 1] = 1.0
    F0 = np.zeros((n, 2))
    F0[n - 4, 0] = F0[n - 3, 0] = 1.0
    F0[n - 2, 1] = F0[n - 1, 1] = 1.0
    E = P @ E0
    F = Q.T @ F0

    rep = RationalEigenproblem(
        coeffs, E=E, F=F,
        C=np.diag([105.0, -105.0]), D=np.eye(2))

    prescribed = np.asarray(values, dtype=np.complex128)
    meta = {"experiment": "exp2", "n": n, "seed": seed, "k_eigs": k_eigs,
            "shifts": [0.0 + 0.0j], "selection": "closest-to-target",
            "target": 0.0 + 0.0j, "poles": [105.0, -105.0],
            "start": "complex"}
    return GeneratedProblem(rep=rep, prescribed=prescribed,
                            targets=prescribed.copy(), meta=meta)
