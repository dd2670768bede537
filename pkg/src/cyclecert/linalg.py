"""Dense numerics for small matrices: symmetric eigendecomposition, operator
norms and determinants.

Everything here targets matrices of dimension <= ~10, so simplicity wins over
asymptotic speed: the symmetric eigensolver is a cyclic Jacobi sweep, the
spectral norm goes through the eigenvalues of B'B, and the determinant is a
pivoted elimination.
"""

from dataclasses import dataclass

import numpy as np


class AsymmetricMatrixError(ValueError):
    """Raised when an operation requires a symmetric matrix and gets another."""

    def __init__(self, asymmetry):
        self.asymmetry = asymmetry
        super().__init__(
            f"matrix is not symmetric (relative asymmetry {asymmetry:.3e})"
        )


def as_square(B):
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {B.shape}")
    if not np.all(np.isfinite(B)):
        raise ValueError("matrix has non-finite entries")
    return B


def asymmetry(A):
    """Relative asymmetry measure ||A - A'|| / (1 + ||A||), max-norm based."""
    A = np.asarray(A, dtype=float)
    return np.abs(A - A.T).max() / (1.0 + np.abs(A).max())


def check_symmetric(A, rtol=1e-12):
    A = as_square(A)
    a = asymmetry(A)
    if a > rtol:
        raise AsymmetricMatrixError(a)
    return A


@dataclass(frozen=True)
class SymSpectrum:
    """Eigendecomposition of a symmetric matrix.

    eigenvalues are ascending; eigenvectors are the columns of an orthogonal
    matrix, ordered to match. Equal eigenvalues keep the order in which the
    Jacobi iteration produced them (coordinate order for diagonal input), so
    projector construction is deterministic.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def projector(self, indices):
        """Orthogonal projector onto the span of the selected eigenvectors."""
        V = self.eigenvectors[:, list(indices)]
        return V @ V.T


def sym_eigen(A, rtol=1e-12):
    """Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations."""
    A = check_symmetric(A, rtol=rtol)
    n = A.shape[0]
    a = 0.5 * (A + A.T)  # symmetrize exactly before iterating
    V = np.eye(n)
    scale = np.abs(a).max() or 1.0
    for _ in range(60):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= 1e-15 * n * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                V = V @ rot
    lam = np.diag(a).copy()
    order = np.argsort(lam, kind="stable")
    return SymSpectrum(eigenvalues=lam[order], eigenvectors=V[:, order])


def norm_1(B):
    """Operator norm on l1: maximum absolute column sum."""
    B = as_square(B)
    return float(np.abs(B).sum(axis=0).max())


def norm_inf(B):
    """Operator norm on l-infinity: maximum absolute row sum."""
    B = as_square(B)
    return float(np.abs(B).sum(axis=1).max())


def norm_2(B):
    """Spectral norm (largest singular value), via eigenvalues of B'B."""
    B = as_square(B)
    scale = np.abs(B).max()
    if scale == 0.0:
        return 0.0
    Bs = B / scale
    spec = sym_eigen(Bs.T @ Bs, rtol=np.inf)
    return float(scale * np.sqrt(max(spec.eigenvalues[-1], 0.0)))


def det(B):
    """Determinant via Gaussian elimination with partial pivoting."""
    B = as_square(B).copy()
    n = B.shape[0]
    sign = 1.0
    for j in range(n):
        piv = j + np.argmax(np.abs(B[j:, j]))
        if B[piv, j] == 0.0:
            return 0.0
        if piv != j:
            B[[j, piv]] = B[[piv, j]]
            sign = -sign
        B[j + 1 :] -= np.outer(B[j + 1 :, j] / B[j, j], B[j])
    return float(sign * np.prod(np.diag(B)))
