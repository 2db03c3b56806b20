"""Figure rendering smoke tests: files exist and are non-trivial PNGs."""

import numpy as np

from ptbd import BlockPartition, ProblemBinding, ProblemSpec
from ptbd.experiment import RunResult
from ptbd.figures import (
    render_eta_figures,
    render_scaling_figure,
    render_trace_figure,
)
from ptbd.generator import generate_problem
from ptbd.solvers import SolverConfig, npdo_solve, random_factor_tuple

PART = BlockPartition(((1, 1), (1, 1), (1, 1)))


def small_result(seed=1):
    spec = ProblemSpec(dims=(5, 4, 4), partition=PART, eta=0.1, seed=seed)
    inst = generate_problem(spec)
    binding = ProblemBinding.bind(inst.tensor, PART)
    init = random_factor_tuple((5, 4, 4), PART, np.random.default_rng(seed))
    return spec, npdo_solve(binding, init, SolverConfig(tol_kkt=1e-8))


def fake_run(spec, result, method="npdo"):
    return RunResult(
        spec=spec,
        method=method,
        label=f"{method}_{spec.seed}",
        status=result.status,
        iterations=result.iterations,
        final_objective=result.final_objective,
        final_kkt=result.final_kkt,
        elapsed_seconds=result.elapsed_seconds,
        result=result,
    )


def assert_png(path):
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 1000


def test_render_trace_figure(tmp_path):
    _, result = small_result()
    out = render_trace_figure(result.trace, tmp_path / "t.png", title="demo")
    assert_png(out)


def test_render_eta_figures_groups_by_method(tmp_path):
    runs = []
    for seed in (1, 2):
        spec, result = small_result(seed)
        for method in ("npdo", "accnpdo"):
            runs.append(fake_run(spec, result, method))
    # failed runs are ignored rather than breaking the aggregate
    runs.append(RunResult(spec=runs[0].spec, method="npdo", label="bad", error="x"))
    written = render_eta_figures(runs, tmp_path)
    assert [p.name for p in written] == ["eta_sweep.png"]
    assert_png(written[0])
    assert render_eta_figures([], tmp_path / "empty") == []


def test_render_scaling_figure_needs_two_volumes(tmp_path):
    spec_small, result = small_result()
    assert render_scaling_figure([fake_run(spec_small, result)], tmp_path) == []
    spec_large = ProblemSpec(dims=(10, 8, 8), partition=PART, eta=0.1, seed=3)
    inst = generate_problem(spec_large)
    binding = ProblemBinding.bind(inst.tensor, PART)
    init = random_factor_tuple((10, 8, 8), PART, np.random.default_rng(3))
    large = npdo_solve(binding, init, SolverConfig(tol_kkt=1e-8))
    runs = [fake_run(spec_small, result), fake_run(spec_large, large)]
    written = render_scaling_figure(runs, tmp_path)
    assert [p.name for p in written] == ["size_scaling.png"]
    assert_png(written[0])
