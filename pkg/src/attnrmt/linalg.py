"""Dense spectral primitives.

Matrices are plain ``numpy.ndarray`` objects of dtype float64; ``as_matrix``
is the single gate that validates shape and finiteness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeError

SVD_RECONSTRUCTION_RTOL = 1e-9


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    if a.size == 0:
        raise InvalidInputError("empty matrix")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class Spectrum:
    singular_values: np.ndarray
    eigenvalues: np.ndarray | None = None

    @property
    def s1(self) -> float:
        return float(self.singular_values[0])

    @property
    def s2(self) -> float:
        return float(self.singular_values[1]) if len(self.singular_values) > 1 else 0.0

    def __len__(self):
        return len(self.singular_values)


def _sort_eigenvalues(ev: np.ndarray) -> np.ndarray:
    # descending modulus, ties by descending real then descending imaginary part
    order = np.lexsort((-ev.imag, -ev.real, -np.abs(ev)))
    return ev[order]


def singular_values(m) -> Spectrum:
    a = as_matrix(m)
    s = np.linalg.svd(a, compute_uv=False)
    s = np.sort(np.clip(s, 0.0, None))[::-1]
    # eigenvalues are filled only by eigenvalues(); the nonsymmetric solve is
    # the expensive half at T=2000
    return Spectrum(singular_values=s)


def svd_residual(m) -> float:
    """Relative Frobenius residual of the full SVD reconstruction."""
    a = as_matrix(m)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm((u * s) @ vt - a) / norm)


def eigenvalues(m) -> Spectrum:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"eigenvalues need a square matrix, got {a.shape}")
    ev = _sort_eigenvalues(np.linalg.eigvals(a).astype(np.complex128))
    s = np.sort(np.linalg.svd(a, compute_uv=False))[::-1]
    return Spectrum(singular_values=s, eigenvalues=ev)


def frobenius_norm_sq(m) -> float:
    a = as_matrix(m)
    return float(np.sum(a * a))


def trace_power(m, k: int) -> float:
    """Return tr((m m^T)^k) using the smaller Gram matrix."""
    if int(k) != k or k < 1:
        raise InvalidInputError(f"k must be a positive integer, got {k}")
    a = as_matrix(m)
    gram = a @ a.T if a.shape[0] <= a.shape[1] else a.T @ a
    return float(np.trace(np.linalg.matrix_power(gram, int(k))))
