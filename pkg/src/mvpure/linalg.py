"""Dense real matrix kernels: symmetric eigendecomposition and SPD inversion.

Matrices are plain two-dimensional ``numpy.ndarray`` objects of dtype
``float64``. All functions are pure and never modify their arguments.
"""

from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .exceptions import InvalidInput, NotPositiveDefinite, NumericalFailure

SYMMETRY_TOL = 1e-10
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class EigenDecomposition(NamedTuple):
    """Eigenvalues in ascending order and the matching unit eigenvectors.

    ``vectors[:, j]`` is the eigenvector of ``values[j]``.
    """

    values: np.ndarray
    vectors: np.ndarray


def as_matrix(a, name="matrix", square=False):
    """Convert ``a`` to a finite 2-D float array, raising InvalidInput otherwise."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidInput(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return arr


def is_symmetric(S, tol=SYMMETRY_TOL):
    S = np.asarray(S)
    scale = np.max(np.abs(S)) if S.size else 0.0
    return bool(np.max(np.abs(S - S.T), initial=0.0) <= tol * scale)


def _check_symmetric(S, name):
    S = as_matrix(S, name, square=True)
    if not is_symmetric(S):
        raise InvalidInput(f"{name} is not symmetric")
    return 0.5 * (S + S.T)


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sym_eig(S):
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi sweeps.

    Parameters
    ----------
    S : array_like, shape (m, m)
        Symmetric matrix. Asymmetry above ``1e-10 * max|S|`` is rejected.

    Returns
    -------
    EigenDecomposition
        ``values`` sorted ascending (ties keep the order in which the sweep
        left them), ``vectors`` orthonormal with the largest-magnitude entry
        of every column made positive.

    Raises
    ------
    InvalidInput
        Non-square, non-finite or asymmetric input.
    NumericalFailure
        The off-diagonal mass did not drop below ``1e-12 * ||S||_F`` within
        100 sweeps.
    """
    A = _check_symmetric(S, "S").copy()
    m = A.shape[0]
    V = np.eye(m)
    target = JACOBI_TOL * np.linalg.norm(A)

    def off_norm(A):
        return np.linalg.norm(A - np.diag(np.diag(A)))

    for _ in range(JACOBI_MAX_SWEEPS):
        if off_norm(A) <= target:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                # negligible against both diagonal entries: drop it
                if abs(A[p, p]) + 1e-3 * abs(apq) == abs(A[p, p]) and abs(A[q, q]) + 1e-3 * abs(apq) == abs(A[q, q]):
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = A[:, p].copy()
                col_q = A[:, q]
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :]
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0

                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        if off_norm(A) > target:
            raise NumericalFailure("Jacobi eigensolver did not converge in 100 sweeps")

    values = np.diag(A).copy()
    order = np.argsort(values, kind="stable")
    return EigenDecomposition(values[order], _fix_signs(V[:, order]))


def sym_eigvals(S):
    """Ascending eigenvalues of a symmetric matrix."""
    return sym_eig(S).values


def _cholesky(S, name):
    S = as_matrix(S, name, square=True)
    try:
        c, lower = cho_factor(S, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} is not positive definite") from exc
    return c, lower


def spd_inverse(S):
    """Inverse of a symmetric positive definite matrix via Cholesky factors.

    The result is explicitly symmetrized.

    Raises
    ------
    NotPositiveDefinite
        The factorization met a nonpositive pivot.
    """
    c, _ = _cholesky(S, "S")
    L = np.tril(c)
    Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)
    inv = Linv.T @ Linv
    return 0.5 * (inv + inv.T)


def spd_solve(S, B):
    """Solve ``S X = B`` for symmetric positive definite ``S``."""
    factor = _cholesky(S, "S")
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] != factor[0].shape[0]:
        raise InvalidInput(f"right-hand side has {B.shape[0]} rows, expected {factor[0].shape[0]}")
    return cho_solve(factor, B, check_finite=False)


def gram_inverse(H, S):
    """Return ``(H^t S^{-1} H)^{-1}`` for SPD ``S`` and full-column-rank ``H``."""
    G = H.T @ spd_solve(S, H)
    return spd_inverse(0.5 * (G + G.T))


def is_spd(S):
    try:
        _cholesky(S, "S")
    except (NotPositiveDefinite, InvalidInput):
        return False
    return is_symmetric(S)
