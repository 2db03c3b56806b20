"""Command-line entry points: generate, solve, bench.

Exit codes for ``solve``: 0 when the run converged, 2 when it stopped at
the iteration cap, 3 when it stalled, and 1 for usage or I/O problems.
``bench`` sweeps noise levels and sizes, writing traces, summaries, and
figures into a report directory.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .blocks import BlockPartition, identity_factor_tuple
from .experiment import run_experiment
from .generator import ProblemSpec, generate_problem
from .objective import ProblemBinding
from .solvers import (
    STATUS_CONVERGED,
    STATUS_MAX_ITER,
    STATUS_STALLED,
    SolverConfig,
    accnpdo_solve,
    npdo_solve,
    random_factor_tuple,
)
from .storage import (
    DtenFormatError,
    read_tensor,
    solve_summary,
    write_factors,
    write_summary_json,
    write_tensor,
    write_trace_csv,
)

__all__ = ["main"]

_STATUS_EXIT = {STATUS_CONVERGED: 0, STATUS_MAX_ITER: 2, STATUS_STALLED: 3}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage failures exit with code 1."""

    def error(self, message):
        raise _UsageError(message)


def parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise _UsageError(f"cannot parse dims {text!r}") from exc
    if len(dims) < 2 or any(n < 1 for n in dims):
        raise _UsageError(f"dims must be >= 2 positive sizes, got {text!r}")
    return dims


def parse_eta(text: str) -> float:
    """Accept plain floats and power literals like 2^-8."""
    text = text.strip()
    if "^" in text:
        base, _, exponent = text.partition("^")
        try:
            return float(base) ** float(exponent)
        except ValueError as exc:
            raise _UsageError(f"cannot parse noise level {text!r}") from exc
    try:
        return float(text)
    except ValueError as exc:
        raise _UsageError(f"cannot parse noise level {text!r}") from exc


def parse_sizes(text: str) -> tuple[int, ...]:
    """Accept "1..8", comma lists, or a single multiplier."""
    text = text.strip()
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            lo_i, hi_i = int(lo), int(hi)
        except ValueError as exc:
            raise _UsageError(f"cannot parse sizes {text!r}") from exc
        if lo_i < 1 or hi_i < lo_i:
            raise _UsageError(f"bad size range {text!r}")
        return tuple(range(lo_i, hi_i + 1))
    try:
        sizes = tuple(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise _UsageError(f"cannot parse sizes {text!r}") from exc
    if any(s < 1 for s in sizes):
        raise _UsageError("size multipliers must be positive")
    return sizes


def _partition(text: str) -> BlockPartition:
    try:
        return BlockPartition.parse(text)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _solver_config(args) -> SolverConfig:
    try:
        return SolverConfig(
            tol_obj=args.tol_obj,
            tol_kkt=args.tol_kkt,
            max_outer=args.max_outer,
            inner_fraction=args.inner_fraction,
            max_inner=args.max_inner,
            use_obj_stop=args.obj_stop,
            record_diagnostics=not args.no_diagnostics,
            seed=args.seed,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol-kkt", type=float, default=1e-9)
    parser.add_argument("--tol-obj", type=float, default=1e-12)
    parser.add_argument("--max-outer", type=int, default=2000)
    parser.add_argument("--max-inner", type=int, default=50)
    parser.add_argument("--inner-fraction", type=float, default=0.125)
    parser.add_argument(
        "--obj-stop",
        action="store_true",
        help="additionally require a small relative objective change",
    )
    parser.add_argument(
        "--no-diagnostics",
        action="store_true",
        help="skip per-mode series diagnostics while iterating",
    )


def _cmd_generate(args) -> int:
    partition = _partition(args.blocks)
    spec = ProblemSpec(
        dims=parse_dims(args.dims),
        partition=partition,
        eta=parse_eta(args.eta),
        field=args.field,
        seed=args.seed,
    )
    instance = generate_problem(spec)
    write_tensor(args.out, instance.tensor)
    print(
        f"wrote {args.out}: dims {spec.dims}, blocks {partition.literal()}, "
        f"eta {spec.eta:g}, field {spec.field}, seed {spec.seed}"
    )
    return 0


def _cmd_solve(args) -> int:
    tensor = read_tensor(args.input)
    partition = _partition(args.blocks)
    try:
        binding = ProblemBinding.bind(tensor, partition)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    config = _solver_config(args)
    if args.init == "identity":
        init = identity_factor_tuple(tensor.shape, partition, dtype=tensor.dtype)
    else:
        rng = np.random.default_rng(config.seed)
        field = "complex" if np.iscomplexobj(tensor) else "real"
        init = random_factor_tuple(tensor.shape, partition, rng, field)
    solve = npdo_solve if args.method == "npdo" else accnpdo_solve
    result = solve(binding, init, config)
    print(
        f"{args.method}: status {result.status}, iterations {result.iterations}, "
        f"objective {result.final_objective:.12e}, "
        f"kkt residual {result.final_kkt:.3e}, "
        f"{result.elapsed_seconds:.2f}s"
    )
    if args.trace:
        write_trace_csv(args.trace, result.trace)
    if args.summary:
        write_summary_json(
            args.summary,
            solve_summary(
                result,
                method=args.method,
                dims=list(tensor.shape),
                blocks=partition.literal(),
                input=str(args.input),
                tol_kkt=config.tol_kkt,
                max_outer=config.max_outer,
                seed=config.seed,
            ),
        )
    if args.factors_out:
        write_factors(args.factors_out, result.factors)
    if args.plots:
        from .figures import render_trace_figure

        base = Path(args.trace) if args.trace else Path("trace.csv")
        render_trace_figure(
            result.trace, base.with_suffix(".png"), title=Path(args.input).name
        )
    return _STATUS_EXIT[result.status]


def _cmd_bench(args) -> int:
    partition = _partition(args.blocks)
    base_dims = parse_dims(args.base_dims)
    sizes = parse_sizes(args.sizes)
    lo = parse_eta(args.eta_from)
    hi = parse_eta(args.eta_to)
    if lo <= 0 or hi < lo:
        raise _UsageError("need 0 < eta-from <= eta-to")
    etas = []
    eta = lo
    while eta <= hi * (1 + 1e-12):
        etas.append(eta)
        eta *= 2.0
    methods = ("npdo", "accnpdo") if args.method == "both" else (args.method,)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _solver_config(args)
    all_runs = []
    for method in methods:
        specs = []
        for size in sizes:
            dims = tuple(size * n for n in base_dims)
            for repeat in range(args.repeats):
                # Shared-base sweeps: one seed fixes {blocks, noise,
                # rotations}, so every eta below reuses the same draws.
                base_seed = args.seed + 1000 * size + repeat
                for eta_index, eta_value in enumerate(etas):
                    seed = base_seed
                    if args.independent_draws:
                        seed = base_seed + 7919 * (eta_index + 1)
                    specs.append(
                        ProblemSpec(
                            dims=dims,
                            partition=partition,
                            eta=eta_value,
                            field=args.field,
                            seed=seed,
                        )
                    )
        runs = run_experiment(
            specs,
            method,
            config,
            out_dir=out_dir,
            init_kind=args.init,
            render_plots=not args.no_plots,
        )
        all_runs.extend(runs)
    failures = [r for r in all_runs if r.error]
    converged = [r for r in all_runs if r.status == STATUS_CONVERGED]
    print(
        f"bench: {len(all_runs)} runs, {len(converged)} converged, "
        f"{len(failures)} failed; report in {out_dir}"
    )
    for run in failures:
        print(f"  failed {run.label}: {run.error}", file=sys.stderr)
    if not args.no_plots:
        from .figures import render_eta_figures, render_scaling_figure

        render_eta_figures(all_runs, out_dir)
        render_scaling_figure(all_runs, out_dir)
    return 0 if not failures else 1


def build_parser() -> _Parser:
    parser = _Parser(prog="ptbd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic instance")
    gen.add_argument("--dims", required=True, help="e.g. 60,55,50")
    gen.add_argument("--blocks", required=True, help='e.g. "2,3,2x2,3,2x2,3,2"')
    gen.add_argument("--eta", default="0", help="noise level, e.g. 2^-8 or 0.01")
    gen.add_argument("--field", choices=("real", "complex"), default="real")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output .dten path")
    gen.set_defaults(func=_cmd_generate)

    sol = sub.add_parser("solve", help="block-diagonalize a stored tensor")
    sol.add_argument("--input", required=True, help="input .dten path")
    sol.add_argument("--blocks", required=True)
    sol.add_argument("--method", choices=("npdo", "accnpdo"), default="npdo")
    sol.add_argument("--init", choices=("random", "identity"), default="random")
    sol.add_argument("--seed", type=int, default=0)
    _add_solver_flags(sol)
    sol.add_argument("--trace", help="write per-iteration CSV here")
    sol.add_argument("--summary", help="write run summary JSON here")
    sol.add_argument("--factors-out", help="write factor matrices here")
    sol.add_argument(
        "--plots", action="store_true", help="render the trace figure"
    )
    sol.set_defaults(func=_cmd_solve)

    ben = sub.add_parser("bench", help="noise and size sweeps with a report")
    ben.add_argument("--eta-from", default="2^-8")
    ben.add_argument("--eta-to", default="2^-3")
    ben.add_argument("--sizes", default="1", help='multipliers, e.g. "1..8"')
    ben.add_argument("--base-dims", default="100,110,120")
    ben.add_argument(
        "--blocks", default="2,3,2x2,3,2x2,3,2", help="partition literal"
    )
    ben.add_argument("--repeats", type=int, default=1)
    ben.add_argument(
        "--method", choices=("npdo", "accnpdo", "both"), default="both"
    )
    ben.add_argument("--field", choices=("real", "complex"), default="real")
    ben.add_argument("--init", choices=("random", "identity"), default="random")
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument(
        "--independent-draws",
        action="store_true",
        help="fresh base draws per eta instead of a shared base",
    )
    ben.add_argument("--no-plots", action="store_true")
    _add_solver_flags(ben)
    ben.add_argument("--out", required=True, help="report directory")
    ben.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DtenFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
