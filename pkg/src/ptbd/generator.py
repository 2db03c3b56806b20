"""Synthetic problem instances with a planted block-diagonal structure.

An instance is built as ``B = (T + eta * E) x_1 Q_1 ... x_m Q_m`` where T
is zero outside its leading diagonal blocks, E is dense Gaussian noise,
and the Q_ell are random orthogonal (or unitary) rotations.  At eta = 0
the leading k_ell columns of each Q_ell recover exactly
``sum_i ||T_i||_F^2`` of block-diagonal mass, which is the global maximum.

Randomness comes from ``numpy.random.default_rng`` (PCG64) seeded with the
instance seed.  All normal variates are drawn as flat arrays and reshaped
in colexicographic order, in a fixed sequence: the core blocks in block
order, then the noise tensor, then one square matrix per mode for the
rotations (complex instances draw the real part of each array before the
imaginary part).  The same seed therefore yields the same T, E, and Q
regardless of eta, so an eta sweep over one seed shares its base draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .blocks import BlockPartition, bdiag_embed
from .linalg import polar_factor
from .tensors import frobenius_norm, multi_mode_multiply

__all__ = ["ProblemSpec", "ProblemInstance", "generate_problem"]


@dataclass(frozen=True)
class ProblemSpec:
    dims: tuple[int, ...]
    partition: BlockPartition
    eta: float
    field: str = "real"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        self.partition.validate_dims(self.dims)
        if self.eta < 0.0:
            raise ValueError("eta must be nonnegative")
        if self.field not in ("real", "complex"):
            raise ValueError(f"unknown field {self.field!r}")


@dataclass(frozen=True)
class ProblemInstance:
    tensor: np.ndarray
    spec: ProblemSpec
    core_blocks: List[np.ndarray]
    rotations: List[np.ndarray]
    noise_norm: float

    @property
    def planted_factors(self) -> List[np.ndarray]:
        """Leading rotation columns; the exact maximizer at eta = 0."""
        return [
            q[:, :k] for q, k in zip(self.rotations, self.spec.partition.ranks)
        ]

    @property
    def planted_objective(self) -> float:
        """Block mass of the noise-free instance, an upper bound at eta=0."""
        return float(sum(frobenius_norm(b) ** 2 for b in self.core_blocks))


def _draw(rng: np.random.Generator, shape: Sequence[int], field: str) -> np.ndarray:
    """Standard normal array filled in colexicographic entry order."""
    size = int(np.prod(shape))
    flat = rng.standard_normal(size)
    if field == "complex":
        flat = flat + 1j * rng.standard_normal(size)
    return flat.reshape(tuple(shape), order="F")


def generate_problem(spec: ProblemSpec) -> ProblemInstance:
    rng = np.random.default_rng(spec.seed)
    partition = spec.partition
    blocks = [
        _draw(rng, partition.block_dims(i), spec.field)
        for i in range(partition.num_blocks)
    ]
    noise = _draw(rng, spec.dims, spec.field)
    rotations = [
        polar_factor(_draw(rng, (n, n), spec.field)).q for n in spec.dims
    ]
    dtype = np.complex128 if spec.field == "complex" else np.float64
    planted = np.zeros(spec.dims, dtype=dtype)
    corner = tuple(slice(0, k) for k in partition.ranks)
    planted[corner] = bdiag_embed(blocks, partition)
    mixed = planted + spec.eta * noise
    tensor = multi_mode_multiply(
        mixed, [(q, mode) for mode, q in enumerate(rotations)]
    )
    return ProblemInstance(
        tensor=tensor,
        spec=spec,
        core_blocks=blocks,
        rotations=rotations,
        noise_norm=frobenius_norm(noise),
    )
