"""Small dense matrix kernels shared by the solvers.

Everything here is a thin, explicitly-contracted layer over numpy's LAPACK
bindings: thin SVD, polar factors, trace norms, Hermitian parts, subspace
extension, norm estimation, and principal-angle distances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SvdResult",
    "PolarResult",
    "thin_svd",
    "polar_factor",
    "trace_norm",
    "sym",
    "orth_complement_extend",
    "spectral_norm_estimate",
    "sin_theta_frob",
    "orthonormality_defect",
    "random_orthonormal",
]

_EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``a == u @ diag(s) @ vh`` with ``s`` nonincreasing."""

    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray


@dataclass(frozen=True)
class PolarResult:
    """Polar decomposition ``a == q @ h`` with orthonormal ``q`` and
    Hermitian positive semidefinite ``h``."""

    q: np.ndarray
    h: np.ndarray


def thin_svd(a: np.ndarray) -> SvdResult:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError("thin_svd expects a matrix")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return SvdResult(u, s, vh)


def polar_factor(a: np.ndarray) -> PolarResult:
    """Orthonormal polar factor of a tall matrix via its thin SVD.

    Among all orthonormal ``x`` of the same shape, ``q`` maximizes
    ``Re trace(x^H a)``, with maximum value ``trace_norm(a)``.  For
    rank-deficient ``a`` the factor is one valid choice, not unique.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ValueError(f"polar_factor expects n >= k, got shape {a.shape}")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    q = u @ vh
    h = (vh.conj().T * s) @ vh
    h = (h + h.conj().T) / 2.0
    return PolarResult(q, h)


def trace_norm(a: np.ndarray) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(np.asarray(a), compute_uv=False).sum())


def sym(a: np.ndarray) -> np.ndarray:
    """Hermitian part ``(a + a^H) / 2``."""
    a = np.asarray(a)
    return (a + a.conj().T) / 2.0


def _orth_columns(a: np.ndarray, floor: float) -> np.ndarray:
    """Orthonormal basis of range(a); singular values <= floor are noise."""
    if a.shape[1] == 0:
        return a
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    keep = int(np.count_nonzero(s > floor))
    return u[:, :keep]


def orth_complement_extend(p: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Extend orthonormal ``p`` with an orthonormal basis of the part of
    ``s`` outside range(p); returns ``[p, extension]``.

    Two rounds of projection plus re-orthonormalization keep the result
    orthonormal to working precision.  Directions of ``s`` that collapse
    into range(p) are dropped, so the extension may be narrower than ``s``;
    the first columns of the output are ``p`` itself, bit for bit.
    """
    p = np.asarray(p)
    s = np.asarray(s)
    if s.ndim != 2 or s.shape[0] != p.shape[0]:
        raise ValueError("s must be a matrix with the same row count as p")
    if s.shape[1] == 0:
        return p.copy()
    # Rank decisions are scaled to the original s, so inputs that lie in
    # range(p) up to rounding produce an empty extension.
    floor = max(p.shape[0], s.shape[1]) * _EPS * max(float(np.linalg.norm(s)), _EPS)
    work = s.astype(np.result_type(p.dtype, s.dtype, np.float64), copy=True)
    for _ in range(2):
        work = work - p @ (p.conj().T @ work)
        work = _orth_columns(work, floor)
        if work.shape[1] == 0:
            return p.copy()
        # After the first orthonormalization the columns have unit norm, so
        # later rank decisions use the unit scale.
        floor = max(p.shape[0], work.shape[1]) * _EPS
    return np.hstack([p, work])


def spectral_norm_estimate(a: np.ndarray, max_iters: int = 30) -> float:
    """Cheap 2-norm estimate used only to scale residuals.

    Runs power iteration on the Gram matrix of the short side until the
    value stabilizes; if the cap is hit first, falls back to the
    ``sqrt(norm1 * norminf)`` upper bound.  Never exceeds that bound.
    """
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError("spectral_norm_estimate expects a matrix")
    if a.size == 0:
        return 0.0
    norm_1 = float(np.max(np.abs(a).sum(axis=0)))
    norm_inf = float(np.max(np.abs(a).sum(axis=1)))
    bound = float(np.sqrt(norm_1 * norm_inf))
    if bound == 0.0:
        return 0.0
    if a.shape[0] > a.shape[1]:
        a = a.conj().T
    x = np.full(a.shape[0], 1.0 / np.sqrt(a.shape[0]), dtype=a.dtype)
    estimate = 0.0
    converged = False
    for _ in range(max_iters):
        y = a @ (a.conj().T @ x)
        norm_y = float(np.linalg.norm(y))
        if norm_y == 0.0:
            return 0.0
        new_estimate = float(np.sqrt(norm_y))
        x = y / norm_y
        # The stated use only needs three digits, but the successive-change
        # test is tightened so that clean gaps converge to full precision
        # within the cap instead of stopping at the first slow digit.
        if abs(new_estimate - estimate) <= 1e-9 * new_estimate:
            estimate = new_estimate
            converged = True
            break
        estimate = new_estimate
    if not converged:
        return bound
    return min(estimate, bound)


def sin_theta_frob(p1: np.ndarray, p2: np.ndarray) -> float:
    """Frobenius norm of the sines of the principal angles between the
    ranges of two orthonormal matrices of equal shape."""
    p1 = np.asarray(p1)
    p2 = np.asarray(p2)
    if p1.shape != p2.shape:
        raise ValueError("column spaces must have equal dimensions")
    k = p1.shape[1]
    overlap = float(np.linalg.norm(p1.conj().T @ p2) ** 2)
    return float(np.sqrt(max(k - overlap, 0.0)))


def orthonormality_defect(p: np.ndarray) -> float:
    p = np.asarray(p)
    gram = p.conj().T @ p
    return float(np.linalg.norm(gram - np.eye(p.shape[1])))


def random_orthonormal(
    n: int, k: int, rng: np.random.Generator, field: str = "real"
) -> np.ndarray:
    """Orthonormal n x k factor drawn by taking the polar factor of a
    standard Gaussian matrix (rotation-invariant distribution)."""
    if field == "real":
        g = rng.standard_normal((n, k))
    elif field == "complex":
        g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    else:
        raise ValueError(f"unknown field {field!r}")
    return polar_factor(g).q
