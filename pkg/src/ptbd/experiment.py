"""Batch experiment driver: generate, solve, and persist run artifacts.

Each run produces a per-iteration trace CSV and a summary JSON; when an
output directory is given an aggregate ``runs.csv`` and, unless disabled,
convergence figures are written next to them.  Runs are independent, so
they may execute concurrently: the ``PTBD_THREADS`` environment variable
caps the worker count and the default of one worker keeps execution
sequential and deterministic.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .generator import ProblemSpec, generate_problem
from .objective import ProblemBinding
from .blocks import BlockPartition, identity_factor_tuple, reconstruct
from .solvers import (
    SolveResult,
    SolverConfig,
    accnpdo_solve,
    npdo_solve,
    random_factor_tuple,
)
from .storage import solve_summary, write_summary_json, write_trace_csv
from .tensors import frobenius_norm

__all__ = ["RunResult", "run_experiment", "reconstruction_error", "worker_count"]

METHODS = ("npdo", "accnpdo")


@dataclass
class RunResult:
    spec: ProblemSpec
    method: str
    label: str
    status: Optional[str] = None
    iterations: Optional[int] = None
    final_objective: Optional[float] = None
    final_kkt: Optional[float] = None
    recon_error: Optional[float] = None
    elapsed_seconds: Optional[float] = None
    error: Optional[str] = None
    result: Optional[SolveResult] = None
    trace_path: Optional[Path] = None
    summary_path: Optional[Path] = None


def worker_count() -> int:
    """Parallel width from PTBD_THREADS; absent or invalid means 1."""
    raw = os.environ.get("PTBD_THREADS", "")
    try:
        return max(int(raw), 1)
    except ValueError:
        return 1


def reconstruction_error(tensor: np.ndarray, result: SolveResult) -> float:
    """Relative distance between the tensor and its block expansion."""
    scale = frobenius_norm(tensor)
    if scale == 0.0:
        return 0.0
    # The partition is implied by the block shapes.
    per_mode = tuple(
        tuple(np.asarray(b).shape[mode] for b in result.blocks)
        for mode in range(result.core.ndim)
    )
    partition = BlockPartition(per_mode)
    approx = reconstruct(result.blocks, result.factors, partition)
    return frobenius_norm(tensor - approx) / scale


def _run_label(spec: ProblemSpec, method: str, index: int) -> str:
    dims = "x".join(str(n) for n in spec.dims)
    return f"run{index:03d}_{method}_{dims}_eta{spec.eta:.6g}_seed{spec.seed}"


def _execute(
    spec: ProblemSpec,
    method: str,
    config: SolverConfig,
    init_kind: str,
) -> tuple[SolveResult, float]:
    instance = generate_problem(spec)
    binding = ProblemBinding.bind(instance.tensor, spec.partition)
    if init_kind == "identity":
        init = identity_factor_tuple(spec.dims, spec.partition)
    elif init_kind == "random":
        rng = np.random.default_rng(spec.seed + 1)
        init = random_factor_tuple(spec.dims, spec.partition, rng, spec.field)
    else:
        raise ValueError(f"unknown init {init_kind!r}")
    solve = npdo_solve if method == "npdo" else accnpdo_solve
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    result = solve(binding, init, config)
    return result, reconstruction_error(instance.tensor, result)


def _run_one(
    spec: ProblemSpec,
    method: str,
    config: SolverConfig,
    init_kind: str,
    label: str,
    out_dir: Optional[Path],
) -> RunResult:
    run = RunResult(spec=spec, method=method, label=label)
    try:
        result, recon = _execute(spec, method, config, init_kind)
    except Exception as exc:  # noqa: BLE001  (runs must not kill the batch)
        run.error = f"{type(exc).__name__}: {exc}"
        return run
    run.result = result
    run.status = result.status
    run.iterations = result.iterations
    run.final_objective = result.final_objective
    run.final_kkt = result.final_kkt
    run.recon_error = recon
    run.elapsed_seconds = result.elapsed_seconds
    if out_dir is not None:
        run.trace_path = out_dir / f"{label}_trace.csv"
        write_trace_csv(run.trace_path, result.trace)
        run.summary_path = out_dir / f"{label}_summary.json"
        write_summary_json(
            run.summary_path,
            solve_summary(
                result,
                method=method,
                dims=list(spec.dims),
                blocks=spec.partition.literal(),
                eta=spec.eta,
                field=spec.field,
                seed=spec.seed,
                reconstruction_error=recon,
                tol_kkt=config.tol_kkt,
                max_outer=config.max_outer,
            ),
        )
    return run


def run_experiment(
    specs: Sequence[ProblemSpec],
    method: str,
    config: SolverConfig | None = None,
    out_dir=None,
    init_kind: str = "random",
    render_plots: bool = True,
) -> List[RunResult]:
    """Solve every spec with one method, writing artifacts per run.

    Failures of individual runs are recorded on their RunResult instead of
    aborting the batch.  Results come back in spec order regardless of the
    worker count.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    config = config or SolverConfig()
    out_path: Optional[Path] = None
    if out_dir is not None:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
    jobs = [
        (spec, _run_label(spec, method, i)) for i, spec in enumerate(specs)
    ]
    workers = worker_count()
    if workers == 1:
        runs = [
            _run_one(spec, method, config, init_kind, label, out_path)
            for spec, label in jobs
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _run_one, spec, method, config, init_kind, label, out_path
                )
                for spec, label in jobs
            ]
            runs = [f.result() for f in futures]
    if out_path is not None:
        # matplotlib is not thread safe, so figures render after the pool
        if render_plots:
            from .figures import render_trace_figure

            for run in runs:
                if run.result is not None and run.result.trace:
                    render_trace_figure(
                        run.result.trace,
                        out_path / f"{run.label}_trace.png",
                        title=run.label,
                    )
        append_runs_csv(out_path / "runs.csv", runs)
    return runs


RUNS_COLUMNS = (
    "label",
    "method",
    "dims",
    "blocks",
    "eta",
    "field",
    "seed",
    "status",
    "iterations",
    "final_objective",
    "final_kkt",
    "recon_error",
    "elapsed_seconds",
    "error",
)


def append_runs_csv(path, runs: Sequence[RunResult]) -> None:
    path = Path(path)
    fresh = not path.exists()
    with open(path, "a", newline="") as handle:
        writer = csv.writer(handle)
        if fresh:
            writer.writerow(RUNS_COLUMNS)
        for run in runs:
            writer.writerow(
                [
                    run.label,
                    run.method,
                    "x".join(str(n) for n in run.spec.dims),
                    run.spec.partition.literal(),
                    repr(run.spec.eta),
                    run.spec.field,
                    run.spec.seed,
                    run.status or "",
                    run.iterations if run.iterations is not None else "",
                    repr(run.final_objective)
                    if run.final_objective is not None
                    else "",
                    repr(run.final_kkt) if run.final_kkt is not None else "",
                    repr(run.recon_error) if run.recon_error is not None else "",
                    repr(run.elapsed_seconds)
                    if run.elapsed_seconds is not None
                    else "",
                    run.error or "",
                ]
            )
