"""Dense m-mode tensor primitives: norms, unfoldings, mode products.

Tensors are plain numpy arrays (float64 or complex128) with at least two
modes.  The flat storage convention used throughout, including the file
format and every unfolding, is colexicographic: the first subscript varies
fastest.  That is numpy's Fortran ravel order, so a flat buffer ``v`` and
the tensor are related by ``v = tensor.ravel(order="F")``.
"""

from __future__ import annotations

from typing import Iterable, Sequence, Tuple

import numpy as np

__all__ = [
    "as_tensor",
    "frobenius_norm",
    "flat_to_subscripts",
    "subscripts_to_flat",
    "unfold",
    "fold",
    "mode_multiply",
    "multi_mode_multiply",
]

REAL_DTYPE = np.dtype(np.float64)
COMPLEX_DTYPE = np.dtype(np.complex128)


def as_tensor(data, field: str | None = None) -> np.ndarray:
    """Coerce ``data`` to a float64 or complex128 array with >= 2 modes.

    ``field`` forces ``"real"`` or ``"complex"`` storage; coercing complex
    data to real raises instead of silently dropping imaginary parts.
    """
    arr = np.asarray(data)
    if arr.ndim < 2:
        raise ValueError(f"tensor must have at least 2 modes, got shape {arr.shape}")
    if field is None:
        target = COMPLEX_DTYPE if np.iscomplexobj(arr) else REAL_DTYPE
    elif field == "real":
        if np.iscomplexobj(arr):
            raise ValueError("complex data cannot be stored in a real tensor")
        target = REAL_DTYPE
    elif field == "complex":
        target = COMPLEX_DTYPE
    else:
        raise ValueError(f"unknown field {field!r}, expected 'real' or 'complex'")
    return arr.astype(target, copy=False)


def field_of(arr: np.ndarray) -> str:
    return "complex" if np.iscomplexobj(arr) else "real"


def frobenius_norm(tensor: np.ndarray) -> float:
    """Square root of the sum of squared entry magnitudes."""
    return float(np.linalg.norm(np.asarray(tensor).ravel()))


def flat_to_subscripts(index: int, dims: Sequence[int]) -> Tuple[int, ...]:
    """Subscripts of a colexicographic flat index (first subscript fastest)."""
    return tuple(int(i) for i in np.unravel_index(index, tuple(dims), order="F"))


def subscripts_to_flat(subscripts: Sequence[int], dims: Sequence[int]) -> int:
    """Colexicographic flat index of a subscript tuple."""
    return int(np.ravel_multi_index(tuple(subscripts), tuple(dims), order="F"))


def _check_mode(tensor: np.ndarray, mode: int) -> None:
    if not 0 <= mode < tensor.ndim:
        raise ValueError(f"mode {mode} out of range for a {tensor.ndim}-mode tensor")


def unfold(tensor: np.ndarray, mode: int) -> np.ndarray:
    """Mode unfolding: rows are indexed by ``mode``, columns are its fibers.

    Columns are ordered colexicographically over the remaining subscripts,
    with the first remaining subscript varying fastest.
    """
    tensor = np.asarray(tensor)
    _check_mode(tensor, mode)
    return np.moveaxis(tensor, mode, 0).reshape(
        (tensor.shape[mode], -1), order="F"
    )


def fold(matrix: np.ndarray, mode: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold` for the given full tensor shape."""
    dims = tuple(dims)
    if not 0 <= mode < len(dims):
        raise ValueError(f"mode {mode} out of range for shape {dims}")
    lead = (dims[mode],) + dims[:mode] + dims[mode + 1 :]
    return np.moveaxis(np.reshape(matrix, lead, order="F"), 0, mode)


def mode_multiply(tensor: np.ndarray, matrix: np.ndarray, mode: int) -> np.ndarray:
    """Contract ``matrix`` (k x n_mode) against the given mode.

    Satisfies ``unfold(mode_multiply(B, X, mode), mode) == X @ unfold(B, mode)``.
    """
    tensor = np.asarray(tensor)
    matrix = np.asarray(matrix)
    _check_mode(tensor, mode)
    if matrix.ndim != 2:
        raise ValueError("mode_multiply expects a 2-d matrix")
    if matrix.shape[1] != tensor.shape[mode]:
        raise ValueError(
            f"matrix has {matrix.shape[1]} columns but mode {mode} has size "
            f"{tensor.shape[mode]}"
        )
    return np.moveaxis(np.tensordot(matrix, tensor, axes=(1, mode)), 0, mode)


def multi_mode_multiply(
    tensor: np.ndarray, factors: Iterable[tuple[np.ndarray, int]]
) -> np.ndarray:
    """Apply several mode products at distinct modes.

    ``factors`` is an iterable of ``(matrix, mode)`` pairs.  Results do not
    depend on the order of the pairs; an empty iterable returns the input.
    """
    seen: set[int] = set()
    out = np.asarray(tensor)
    for matrix, mode in factors:
        if mode in seen:
            raise ValueError(f"mode {mode} appears more than once")
        seen.add(mode)
        out = mode_multiply(out, matrix, mode)
    return out
