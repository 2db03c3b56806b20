"""Block partitions of factor columns and block-diagonal core handling.

A partition assigns every mode the same number ``t`` of diagonal blocks;
mode ``ell`` splits its ``k_ell`` factor columns into runs of sizes
``per_mode[ell]``.  The block-diagonal part of a core tensor keeps, for
each block index ``i``, the aligned sub-box formed by the i-th run in
every mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .tensors import mode_multiply, multi_mode_multiply

__all__ = [
    "BlockPartition",
    "factor_block",
    "bdiag_extract",
    "bdiag_embed",
    "core_tensor",
    "reconstruct",
    "identity_factor_tuple",
]


@dataclass(frozen=True)
class BlockPartition:
    """Per-mode block sizes; every mode carries the same block count."""

    per_mode: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        per_mode = tuple(tuple(int(s) for s in sizes) for sizes in self.per_mode)
        object.__setattr__(self, "per_mode", per_mode)
        if len(per_mode) < 2:
            raise ValueError("a partition needs at least 2 modes")
        counts = {len(sizes) for sizes in per_mode}
        if counts != {len(per_mode[0])} or len(per_mode[0]) == 0:
            raise ValueError("every mode must have the same nonzero block count")
        if any(s < 1 for sizes in per_mode for s in sizes):
            raise ValueError("block sizes must be positive")

    @property
    def num_modes(self) -> int:
        return len(self.per_mode)

    @property
    def num_blocks(self) -> int:
        return len(self.per_mode[0])

    @property
    def ranks(self) -> tuple[int, ...]:
        """Total factor width k_ell per mode."""
        return tuple(sum(sizes) for sizes in self.per_mode)

    def offsets(self, mode: int) -> tuple[int, ...]:
        """Prefix sums of the block sizes at ``mode`` (length t + 1)."""
        return tuple(np.concatenate(([0], np.cumsum(self.per_mode[mode]))).tolist())

    def block_slice(self, mode: int, block: int) -> slice:
        off = self.offsets(mode)
        return slice(off[block], off[block + 1])

    def block_dims(self, block: int) -> tuple[int, ...]:
        return tuple(sizes[block] for sizes in self.per_mode)

    def validate_dims(self, dims: Sequence[int]) -> None:
        if len(dims) != self.num_modes:
            raise ValueError(
                f"partition has {self.num_modes} modes but tensor has {len(dims)}"
            )
        for n, k in zip(dims, self.ranks):
            if k > n:
                raise ValueError(f"total block size {k} exceeds mode size {n}")

    @classmethod
    def parse(cls, text: str) -> "BlockPartition":
        """Parse a literal like ``"2,3,2x2,3,2x2,3,2"`` (modes split by x)."""
        try:
            per_mode = tuple(
                tuple(int(tok) for tok in part.split(","))
                for part in text.strip().split("x")
            )
        except ValueError as exc:
            raise ValueError(f"cannot parse partition literal {text!r}") from exc
        return cls(per_mode)

    def literal(self) -> str:
        return "x".join(",".join(str(s) for s in sizes) for sizes in self.per_mode)


def factor_block(
    factor: np.ndarray, partition: BlockPartition, mode: int, block: int
) -> np.ndarray:
    """Column slice of a factor belonging to one diagonal block."""
    return factor[:, partition.block_slice(mode, block)]


def bdiag_extract(core: np.ndarray, partition: BlockPartition) -> List[np.ndarray]:
    """Diagonal blocks of a core tensor whose dims equal the partition ranks."""
    core = np.asarray(core)
    if core.shape != partition.ranks:
        raise ValueError(
            f"core shape {core.shape} does not match partition ranks {partition.ranks}"
        )
    blocks = []
    for i in range(partition.num_blocks):
        idx = tuple(
            partition.block_slice(mode, i) for mode in range(partition.num_modes)
        )
        blocks.append(core[idx].copy())
    return blocks


def bdiag_embed(blocks: Sequence[np.ndarray], partition: BlockPartition) -> np.ndarray:
    """Place diagonal blocks into a zero core of the partition's full size."""
    if len(blocks) != partition.num_blocks:
        raise ValueError(
            f"expected {partition.num_blocks} blocks, got {len(blocks)}"
        )
    dtype = np.result_type(*(np.asarray(b).dtype for b in blocks))
    core = np.zeros(partition.ranks, dtype=dtype)
    for i, block in enumerate(blocks):
        block = np.asarray(block)
        if block.shape != partition.block_dims(i):
            raise ValueError(
                f"block {i} has shape {block.shape}, expected {partition.block_dims(i)}"
            )
        idx = tuple(
            partition.block_slice(mode, i) for mode in range(partition.num_modes)
        )
        core[idx] = block
    return core


def core_tensor(tensor: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Compress the tensor by the conjugate transpose of every factor."""
    return multi_mode_multiply(
        tensor, [(P.conj().T, mode) for mode, P in enumerate(factors)]
    )


def reconstruct(
    blocks: Sequence[np.ndarray],
    factors: Sequence[np.ndarray],
    partition: BlockPartition,
) -> np.ndarray:
    """Expand diagonal blocks back to the ambient space: sum of per-block
    products with the matching factor column runs."""
    out = None
    for i, block in enumerate(blocks):
        piece = np.asarray(block)
        for mode, factor in enumerate(factors):
            piece = mode_multiply(piece, factor_block(factor, partition, mode, i), mode)
        out = piece if out is None else out + piece
    return out


def identity_factor_tuple(
    dims: Sequence[int], partition: BlockPartition, dtype=np.float64
) -> List[np.ndarray]:
    """Leading identity columns per mode; a deterministic orthonormal init."""
    partition.validate_dims(dims)
    return [
        np.eye(n, k, dtype=dtype) for n, k in zip(dims, partition.ranks)
    ]
