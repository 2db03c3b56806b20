"""On-disk formats: DTEN1 tensors, iteration-trace CSV, run-summary JSON.

A DTEN1 file is one ASCII header line

    DTEN1 <field:r|c> <m> <n_1> ... <n_m>\n

followed by the entries as little-endian float64 in colexicographic order
(first subscript fastest).  Complex entries interleave real and imaginary
parts.  The payload length must match the header exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .solvers import IterationRecord, SolveResult

__all__ = [
    "DtenFormatError",
    "write_tensor",
    "read_tensor",
    "write_factors",
    "TRACE_COLUMNS",
    "write_trace_csv",
    "read_trace_csv",
    "solve_summary",
    "write_summary_json",
    "read_summary_json",
]

_MAGIC = "DTEN1"
TRACE_COLUMNS = (
    "iter",
    "objective",
    "kkt_cheap",
    "kkt_full",
    "elapsed_seconds",
    "inner_iters",
)


class DtenFormatError(ValueError):
    """Malformed DTEN1 header or payload."""


def write_tensor(path, tensor: np.ndarray) -> None:
    tensor = np.asarray(tensor)
    if tensor.ndim < 2:
        raise DtenFormatError("tensors must have at least 2 modes")
    complex_field = np.iscomplexobj(tensor)
    tag = "c" if complex_field else "r"
    dims = " ".join(str(n) for n in tensor.shape)
    header = f"{_MAGIC} {tag} {tensor.ndim} {dims}\n".encode("ascii")
    flat = tensor.ravel(order="F")
    payload = flat.astype("<c16" if complex_field else "<f8").tobytes()
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(payload)


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as handle:
        header = handle.readline()
        payload = handle.read()
    try:
        tokens = header.decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise DtenFormatError("header is not ascii") from exc
    if len(tokens) < 4 or tokens[0] != _MAGIC:
        raise DtenFormatError(f"not a {_MAGIC} header: {header!r}")
    tag = tokens[1]
    if tag not in ("r", "c"):
        raise DtenFormatError(f"unknown field tag {tag!r}")
    try:
        m = int(tokens[2])
        dims = tuple(int(t) for t in tokens[3:])
    except ValueError as exc:
        raise DtenFormatError(f"bad header numbers: {header!r}") from exc
    if m < 2:
        raise DtenFormatError("tensors must have at least 2 modes")
    if len(dims) != m or any(n < 1 for n in dims):
        raise DtenFormatError(
            f"header declares {m} modes but lists dims {dims}"
        )
    count = int(np.prod(dims))
    itemsize = 16 if tag == "c" else 8
    if len(payload) != count * itemsize:
        raise DtenFormatError(
            f"payload has {len(payload)} bytes, expected {count * itemsize}"
        )
    dtype = "<c16" if tag == "c" else "<f8"
    flat = np.frombuffer(payload, dtype=dtype).astype(
        np.complex128 if tag == "c" else np.float64
    )
    return flat.reshape(dims, order="F")


def write_factors(directory, factors: Sequence[np.ndarray]) -> List[Path]:
    """One DTEN1 file per factor matrix, named by mode."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for mode, factor in enumerate(factors):
        path = directory / f"factor_mode{mode}.dten"
        write_tensor(path, np.asarray(factor))
        paths.append(path)
    return paths


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        # plain-float repr round trips exactly; numpy scalars do not
        return repr(float(value))
    return str(value)


def write_trace_csv(path, trace: Sequence[IterationRecord]) -> None:
    """One row per outer iteration; optional fields are left empty."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for record in trace:
            writer.writerow(
                [
                    record.outer_index,
                    _cell(record.objective),
                    _cell(record.kkt_cheap),
                    _cell(record.kkt_full),
                    _cell(record.elapsed_seconds),
                    _cell(record.inner_iterations),
                ]
            )


def read_trace_csv(path) -> List[dict]:
    """Rows as dicts; empty cells come back as None."""
    rows = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(
                f"unexpected trace columns {reader.fieldnames} in {path}"
            )
        for raw in reader:
            rows.append(
                {
                    "iter": int(raw["iter"]),
                    "objective": float(raw["objective"]),
                    "kkt_cheap": float(raw["kkt_cheap"]),
                    "kkt_full": float(raw["kkt_full"]) if raw["kkt_full"] else None,
                    "elapsed_seconds": float(raw["elapsed_seconds"]),
                    "inner_iters": int(raw["inner_iters"])
                    if raw["inner_iters"]
                    else None,
                }
            )
    return rows


def solve_summary(result: SolveResult, **extra) -> dict:
    """JSON-ready description of one solve; extras override nothing."""
    summary = {
        "status": result.status,
        "iterations": result.iterations,
        "final_objective": result.final_objective,
        "final_kkt": result.final_kkt,
        "elapsed_seconds": result.elapsed_seconds,
        "factor_shapes": [list(p.shape) for p in result.factors],
    }
    for key, value in extra.items():
        if key in summary:
            raise ValueError(f"duplicate summary key {key!r}")
        summary[key] = value
    return summary


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_summary_json(path) -> dict:
    with open(path) as handle:
        return json.load(handle)
