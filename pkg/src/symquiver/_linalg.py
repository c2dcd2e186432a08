"""Small dense linear-algebra helpers shared across modules.

Subspaces are always carried as matrices with orthonormal columns.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

RANK_RTOL = 1e-9


def empty(n: int, k: int = 0) -> np.ndarray:
    return np.zeros((n, k), dtype=complex)


def orth(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the column span of ``a``."""
    n = a.shape[0]
    if a.size == 0:
        return empty(n)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return empty(n)
    rank = int(np.sum(s > rtol * max(s[0], 1.0)))
    return u[:, :rank]


def null_space(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the right kernel of ``a`` (complex aware)."""
    n = a.shape[1]
    if a.shape[0] == 0 or n == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    scale = max(s[0], 1.0) if s.size else 1.0
    rank = int(np.sum(s > rtol * scale))
    return vh[rank:].conj().T


def projector(u: np.ndarray) -> np.ndarray:
    return u @ u.conj().T


def intersect(u: np.ndarray, v: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of span(u) ∩ span(v)."""
    n = u.shape[0]
    if u.shape[1] == 0 or v.shape[1] == 0:
        return empty(n)
    k = null_space(np.hstack([u, -v]), rtol)
    if k.shape[1] == 0:
        return empty(n)
    return orth(u @ k[: u.shape[1]], rtol)


def span_sum(u: np.ndarray, v: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    return orth(np.hstack([u, v]), rtol)


def same_subspace(u: np.ndarray, v: np.ndarray, tol: float = 1e-8) -> bool:
    """Equality of spans for orthonormal bases u, v.

    ``||u - v v^* u||_F`` bounds the sine of the largest principal angle, so
    this is never looser than comparing angles, and costs one product.
    """
    if u.shape != v.shape:
        return False
    if u.shape[1] == 0:
        return True
    return float(np.linalg.norm(u - v @ (v.conj().T @ u))) < tol


def max_principal_angle(u: np.ndarray, v: np.ndarray) -> float:
    if u.shape[1] != v.shape[1]:
        return float(np.pi / 2)
    if u.shape[1] == 0:
        return 0.0
    return float(np.max(sla.subspace_angles(u, v)))


def expm_hermitian(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(t*h) for hermitian ``h`` via its eigendecomposition."""
    if h.size == 0:
        return h.astype(complex)
    w, q = np.linalg.eigh(h)
    return (q * np.exp(t * w)) @ q.conj().T


def twist_slices(phi: np.ndarray, m: int) -> list[np.ndarray]:
    """Split an n_h x (n_t*m) matrix into its m untwisted n_h x n_t slices."""
    return [phi[:, j::m] for j in range(m)]


def from_slices(slices: list[np.ndarray]) -> np.ndarray:
    m = len(slices)
    nh, nt = slices[0].shape
    out = np.zeros((nh, nt * m), dtype=complex)
    for j, s in enumerate(slices):
        out[:, j::m] = s
    return out
