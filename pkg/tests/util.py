"""Shared helpers for the test suite: random instances and dense oracles."""

import numpy as np
import scipy.sparse as sparse

from rcork import RationalEigenproblem


def random_problem(rng, n, d, s, density=0.4):
    """A random well-conditioned state-space problem.

    Coefficients are sparse with a diagonal boost so that P_d and shifted
    evaluations stay comfortably nonsingular; (C, D) get the same treatment.
    """
    coeffs = []
    for i in range(d + 1):
        P = sparse.random(n, n, density=density, random_state=rng,
                          dtype=float)
        P = P + 1j * sparse.random(n, n, density=density, random_state=rng,
                                   dtype=float)
        P = P + (2.0 + 0.5j * i) * sparse.eye(n)
        coeffs.append(P.tocsc())
    if s == 0:
        return RationalEigenproblem(coeffs)
    E = rng.standard_normal((n, s)) + 1j * rng.standard_normal((n, s))
    F = rng.standard_normal((n, s)) + 1j * rng.standard_normal((n, s))
    C = rng.standard_normal((s, s)) + 1j * rng.standard_normal((s, s))
    C = C + 3.0 * np.eye(s)
    D = np.eye(s) + 0.1 * (rng.standard_normal((s, s))
                           + 1j * rng.standard_normal((s, s)))
    return RationalEigenproblem(coeffs, E=E, F=F, C=C, D=D)


def dense_R(rep, mu):
    """Independent dense evaluation of R(mu): explicit powers, dense solve."""
    R = np.zeros((rep.n, rep.n), dtype=np.complex128)
    for i in range(rep.d + 1):
        R += (mu ** i) * np.asarray(rep.coeffs[i].todense())
    if rep.s:
        E = np.asarray(rep.E.todense())
        F = np.asarray(rep.F.todense())
        CD = np.asarray(rep.C) - mu * np.asarray(rep.D)
        R -= E @ np.linalg.solve(CD, F.T)
    return R


def dense_proper_norm(rep, lam):
    """Frobenius norm of the proper part by explicit n x n assembly."""
    if rep.s == 0:
        return 0.0
    E = np.asarray(rep.E.todense())
    F = np.asarray(rep.F.todense())
    CD = np.asarray(rep.C) - lam * np.asarray(rep.D)
    return float(np.linalg.norm(E @ np.linalg.solve(CD, F.T), "fro"))
