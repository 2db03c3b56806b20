"""Block-diagonal mass objective, partial gradients, and stationarity
residuals.

For factors ``P_ell`` with columns split by a :class:`BlockPartition`, the
objective is the squared Frobenius mass the compressed tensor keeps on its
aligned diagonal blocks,

    f(P_1, ..., P_m) = sum_i || B x_1 P_{1i}^H ... x_m P_{mi}^H ||_F^2.

The partial gradient at one mode stacks, block by block, the unfolded
contraction times its Gram action on the current columns; it is half the
Euclidean gradient under the real inner product Re trace(Y^H X).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .blocks import BlockPartition, factor_block
from .linalg import spectral_norm_estimate, sym
from .tensors import frobenius_norm, mode_multiply, unfold

__all__ = [
    "ProblemBinding",
    "contraction",
    "objective_value",
    "partial_gradient",
    "locg_residual",
    "kkt_residual_full",
    "kkt_residual_cheap",
]


@dataclass(frozen=True)
class ProblemBinding:
    """A tensor paired with a partition, plus cached norm scales.

    ``unfold_norms`` holds a 2-norm estimate of each mode unfolding; the
    estimates only scale stationarity residuals, so estimator accuracy is
    not critical.
    """

    tensor: np.ndarray
    partition: BlockPartition
    norm: float
    unfold_norms: tuple[float, ...]

    @classmethod
    def bind(cls, tensor: np.ndarray, partition: BlockPartition) -> "ProblemBinding":
        tensor = np.asarray(tensor)
        partition.validate_dims(tensor.shape)
        norms = tuple(
            spectral_norm_estimate(unfold(tensor, mode))
            for mode in range(tensor.ndim)
        )
        return cls(tensor, partition, frobenius_norm(tensor), norms)

    @property
    def num_modes(self) -> int:
        return self.tensor.ndim

    @property
    def dims(self) -> tuple[int, ...]:
        return self.tensor.shape


def _contract_other_modes(
    tensor: np.ndarray,
    partition: BlockPartition,
    factors: Sequence[np.ndarray],
    mode: int | None,
    block: int,
) -> np.ndarray:
    """Contract every mode except ``mode`` (all modes when ``mode`` is
    None) with the block's conjugated factor columns."""
    out = tensor
    for i, factor in enumerate(factors):
        if i == mode:
            continue
        out = mode_multiply(
            out, factor_block(factor, partition, i, block).conj().T, i
        )
    return out


def contraction(
    binding: ProblemBinding,
    factors: Sequence[np.ndarray],
    mode: int,
    block: int,
) -> np.ndarray:
    """Unfolded contraction of the tensor with every other mode's block
    columns; shape (n_mode, prod of other block sizes)."""
    reduced = _contract_other_modes(
        binding.tensor, binding.partition, factors, mode, block
    )
    return unfold(reduced, mode)


def objective_value(
    binding: ProblemBinding, factors: Sequence[np.ndarray]
) -> float:
    """Block-diagonal mass of the compressed tensor.

    The formula is evaluated per block, so the factors are not required to
    be orthonormal here; only the solver entry points insist on that.
    """
    total = 0.0
    for i in range(binding.partition.num_blocks):
        piece = _contract_other_modes(
            binding.tensor, binding.partition, factors, mode=None, block=i
        )
        total += frobenius_norm(piece) ** 2
    return total


def _gradient_blocks(
    binding: ProblemBinding,
    factors: Sequence[np.ndarray],
    mode: int,
) -> tuple[List[np.ndarray], List[np.ndarray]]:
    """Per-block contractions C_i and gradient columns C_i (C_i^H P_i)."""
    contractions = []
    grads = []
    for i in range(binding.partition.num_blocks):
        c = contraction(binding, factors, mode, i)
        p_cols = factor_block(factors[mode], binding.partition, mode, i)
        contractions.append(c)
        grads.append(c @ (c.conj().T @ p_cols))
    return contractions, grads


def partial_gradient(
    binding: ProblemBinding,
    factors: Sequence[np.ndarray],
    mode: int,
) -> np.ndarray:
    """Half the Euclidean gradient of the objective at one mode.

    Stacks ``C_i (C_i^H P_i)`` over blocks without forming the n x n Gram
    matrices.  Positive rescaling does not change its polar factor, which
    is all the sweep updates use.
    """
    _, grads = _gradient_blocks(binding, factors, mode)
    return np.hstack(grads)


def locg_residual(
    binding: ProblemBinding,
    factors: Sequence[np.ndarray],
    mode: int,
    gradient: np.ndarray | None = None,
) -> np.ndarray:
    """Stationarity residual ``G - P sym(P^H G)`` at one mode.

    For orthonormal ``P`` the projection ``P^H residual`` is exactly the
    skew-Hermitian part of ``P^H G``.
    """
    if gradient is None:
        gradient = partial_gradient(binding, factors, mode)
    p = factors[mode]
    return gradient - p @ sym(p.conj().T @ gradient)


def _residual_term(
    binding: ProblemBinding,
    mode: int,
    gradient: np.ndarray,
    factor: np.ndarray,
) -> float:
    """One mode's normalized residual; zero tensors contribute zero."""
    scale = binding.norm * binding.unfold_norms[mode]
    if scale == 0.0:
        return 0.0
    residual = gradient - factor @ sym(factor.conj().T @ gradient)
    return float(np.linalg.norm(residual)) / scale


def kkt_residual_full(
    binding: ProblemBinding, factors: Sequence[np.ndarray]
) -> float:
    """Sum over modes of the normalized stationarity residuals, with every
    gradient taken at the same factor tuple."""
    total = 0.0
    for mode in range(binding.num_modes):
        grad = partial_gradient(binding, factors, mode)
        total += _residual_term(binding, mode, grad, factors[mode])
    return total


def kkt_residual_cheap(
    binding: ProblemBinding,
    old_factors: Sequence[np.ndarray],
    new_factors: Sequence[np.ndarray],
) -> float:
    """Staggered-tuple residual matching what one alternating sweep sees.

    The mode-``ell`` term evaluates the gradient at
    ``(new_1, ..., new_{ell-1}, old_ell, ..., old_m)`` against ``old_ell``.
    Inside a sweep these gradients are the ones already computed for the
    polar updates; this standalone form re-evaluates them for testing and
    post-hoc diagnostics.
    """
    total = 0.0
    for mode in range(binding.num_modes):
        staggered = list(new_factors[:mode]) + list(old_factors[mode:])
        grad = partial_gradient(binding, staggered, mode)
        total += _residual_term(binding, mode, grad, old_factors[mode])
    return total
