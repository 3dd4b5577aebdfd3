"""Spectral primitives for Metzler and nonnegative matrices.

Contents:

* ``expm`` — matrix exponential (thin wrapper over scipy).
* ``perron_positive`` — dominant eigenpair of an entrywise-positive matrix by
  power iteration, with a dense-eigensolver fallback.
* ``perron_frobenius_metzler`` — spectral abscissa and positive right
  eigenvector of an irreducible Metzler matrix via a diagonal shift.
* ``spectral_abscissa`` — max real part of the spectrum, any square matrix.
* ``kernel_vector`` — the positive kernel direction of an irreducible
  zero-column-sum Metzler matrix, from the cofactor formula.
* ``is_irreducible`` — strong connectivity of the positive off-diagonal graph.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.csgraph import connected_components

POWER_TOL = 1e-12
POWER_MAXITER = 100_000
# if the residual has not dropped below sqrt(tol) by here, the spectral gap is
# tiny and a dense solve is cheaper than grinding out the remaining iterations
_POWER_STALL = 200


def expm(A: np.ndarray) -> np.ndarray:
    """Matrix exponential e^A."""
    return scipy.linalg.expm(np.asarray(A, dtype=float))


def is_irreducible(A: np.ndarray, tol: float = 1e-14) -> bool:
    """True iff the graph of off-diagonal entries > tol is strongly connected."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    adj = (np.abs(A) > tol) & ~np.eye(n, dtype=bool)
    ncomp, _ = connected_components(scipy.sparse.csr_matrix(adj),
                                    directed=True, connection="strong")
    return ncomp == 1


def _dense_dominant(A: np.ndarray) -> tuple[float, np.ndarray]:
    w, V = np.linalg.eig(A)
    k = int(np.argmax(w.real))
    v = V[:, k].real
    v = np.abs(v)
    return float(w[k].real), v / v.sum()


def perron_positive(A: np.ndarray, tol: float = POWER_TOL,
                    maxiter: int = POWER_MAXITER) -> tuple[float, np.ndarray]:
    """Dominant eigenvalue and unit-sum positive eigenvector of A > 0.

    Power iteration; falls back to a dense eigensolve if convergence stalls
    (near-degenerate dominant pair) or the iteration budget runs out.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    v = np.full(n, 1.0 / n)
    lam = 0.0
    prev_res = np.inf
    for it in range(maxiter):
        w = A @ v
        lam = w.sum()
        if lam <= 0.0:
            return _dense_dominant(A)
        w /= lam
        res = np.abs(w - v).max()
        v = w
        # once under tol, keep going while the residual still shrinks: the
        # eigenvalue error tracks the residual, so ride it to the floor
        if res < tol and (res == 0.0 or res >= prev_res):
            return float(lam), v
        if it == _POWER_STALL and res > np.sqrt(tol):
            return _dense_dominant(A)
        prev_res = res
    return _dense_dominant(A)


def perron_frobenius_metzler(A: np.ndarray) -> tuple[float, np.ndarray]:
    """Spectral abscissa and positive eigenvector of an irreducible Metzler A.

    Shifts by r = max |a_ii| + 1 so A + rI is nonnegative with positive
    diagonal, hence primitive, and the shifted power iteration converges.
    """
    A = np.asarray(A, dtype=float)
    r = np.abs(np.diag(A)).max() + 1.0
    B = A + r * np.eye(A.shape[0])
    if np.all(B >= 0.0) and is_irreducible(A):
        # B is primitive (irreducible, positive diagonal): power iteration works
        lam, v = perron_positive(B)
        return lam - r, v
    lam, v = _dense_dominant(B)
    return lam - r, v


def spectral_abscissa(A: np.ndarray) -> float:
    """max Re(eig(A)) for an arbitrary square matrix."""
    return float(np.linalg.eigvals(np.asarray(A, dtype=float)).real.max())


def kernel_vector(L: np.ndarray) -> np.ndarray:
    """Positive unit-sum kernel vector of an irreducible Metzler matrix with
    zero column sums, via the all-minors cofactor formula.

    The i-th component is proportional to the determinant of L with row and
    column i deleted, up to the sign (-1)^(n-1); for an irreducible
    zero-column-sum Metzler matrix these are all strictly positive.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    sign = (-1.0) ** (n - 1)
    d = np.empty(n)
    idx = np.arange(n)
    for i in range(n):
        keep = idx != i
        d[i] = sign * np.linalg.det(L[np.ix_(keep, keep)])
    total = d.sum()
    if total <= 0.0 or np.any(d <= 0.0):
        raise ValueError("kernel_vector needs an irreducible zero-column-sum "
                         "Metzler matrix")
    return d / total
