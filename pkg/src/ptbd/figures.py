"""Matplotlib renderings of solver traces and sweep aggregates.

Everything draws onto the Agg backend and writes PNG files next to the
CSV output, so the report path works without a display.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiment import RunResult
from .solvers import IterationRecord

__all__ = [
    "render_trace_figure",
    "render_eta_figures",
    "render_scaling_figure",
]


def render_trace_figure(
    trace: Sequence[IterationRecord], path, title: str = ""
) -> Path:
    """Residual decay and objective growth over one solve."""
    iters = [r.outer_index for r in trace]
    kkt = [max(r.kkt_cheap, 1e-300) for r in trace]
    obj = [r.objective for r in trace]
    fig, (ax_kkt, ax_obj) = plt.subplots(1, 2, figsize=(9.5, 3.6))
    ax_kkt.semilogy(iters, kkt, "-", color="tab:blue", lw=1.2)
    full = [
        (r.outer_index, r.kkt_full) for r in trace if r.kkt_full is not None
    ]
    if full:
        ax_kkt.semilogy(
            [i for i, _ in full],
            [max(v, 1e-300) for _, v in full],
            "o",
            color="tab:red",
            ms=3,
            label="full residual",
        )
        ax_kkt.legend(fontsize=8)
    ax_kkt.set_xlabel("outer iteration")
    ax_kkt.set_ylabel("normalized KKT residual")
    ax_kkt.grid(True, which="both", alpha=0.3)
    ax_obj.plot(iters, obj, "-", color="tab:green", lw=1.2)
    ax_obj.set_xlabel("outer iteration")
    ax_obj.set_ylabel("objective")
    ax_obj.grid(True, alpha=0.3)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def _successful(runs: Sequence[RunResult]) -> List[RunResult]:
    return [r for r in runs if r.error is None and r.iterations is not None]


def render_eta_figures(runs: Sequence[RunResult], out_dir) -> List[Path]:
    """Iteration counts and wall time against noise level, per method."""
    out_dir = Path(out_dir)
    runs = _successful(runs)
    if not runs:
        return []
    methods = sorted({r.method for r in runs})
    written = []
    fig, (ax_it, ax_t) = plt.subplots(1, 2, figsize=(9.5, 3.6))
    for method in methods:
        rows = sorted(
            (r.spec.eta, r.iterations, r.elapsed_seconds)
            for r in runs
            if r.method == method
        )
        etas = sorted({eta for eta, _, _ in rows})
        med_it = [
            float(np.median([it for eta, it, _ in rows if eta == e]))
            for e in etas
        ]
        med_t = [
            float(np.median([t for eta, _, t in rows if eta == e]))
            for e in etas
        ]
        ax_it.loglog(etas, med_it, "o-", base=2, label=method)
        ax_t.loglog(etas, med_t, "o-", base=2, label=method)
    for ax, ylabel in ((ax_it, "median iterations"), (ax_t, "median seconds")):
        ax.set_xlabel("noise level")
        ax.set_ylabel(ylabel)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "eta_sweep.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)
    return written


def render_scaling_figure(runs: Sequence[RunResult], out_dir) -> List[Path]:
    """Wall time against problem volume, drawn when sizes vary."""
    out_dir = Path(out_dir)
    runs = _successful(runs)
    volumes = sorted({int(np.prod(r.spec.dims)) for r in runs})
    if len(volumes) < 2:
        return []
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    for method in sorted({r.method for r in runs}):
        med = [
            float(
                np.median(
                    [
                        r.elapsed_seconds
                        for r in runs
                        if r.method == method
                        and int(np.prod(r.spec.dims)) == v
                    ]
                )
            )
            for v in volumes
        ]
        ax.loglog(volumes, med, "o-", label=method)
    ax.set_xlabel("tensor volume")
    ax.set_ylabel("median seconds")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "size_scaling.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]
