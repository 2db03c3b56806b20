"""Alternating polar-factor solvers for the block-diagonal mass objective.

``npdo_solve`` runs Gauss-Seidel sweeps: each mode's factor is replaced by
the orthonormal polar factor of its partial gradient, which never
decreases the objective.  ``accnpdo_solve`` wraps the same sweeps in a
subspace acceleration: every outer step collects the current factors,
their stationarity residuals, and the previous factors into a slim
orthonormal basis per mode, compresses the tensor onto those bases, solves
the small problem with plain sweeps, and lifts the result back.

Stopping is governed by a normalized stationarity residual; a staggered
variant is accumulated for free during a sweep, while the plain variant is
evaluated on demand at checkpoint sweeps and at the final iterate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .blocks import (
    BlockPartition,
    bdiag_extract,
    core_tensor,
    factor_block,
    identity_factor_tuple,
)
from .linalg import orthonormality_defect, orth_complement_extend, polar_factor, sym
from .objective import ProblemBinding, _residual_term, partial_gradient
from .tensors import mode_multiply, multi_mode_multiply, unfold

__all__ = [
    "SolverError",
    "SolverConfig",
    "IterationRecord",
    "SolveResult",
    "DiagnosticsSummary",
    "npdo_solve",
    "accnpdo_solve",
    "diagnostics_series",
    "random_factor_tuple",
    "STATUS_CONVERGED",
    "STATUS_MAX_ITER",
    "STATUS_STALLED",
]

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max_iter"
STATUS_STALLED = "stalled"

_TINY = float(np.finfo(np.float64).tiny)
_INNER_TOL_FLOOR = 1e-15
# Sweeps whose relative objective change stays below this for ten
# consecutive rounds while the residual is still above tolerance are
# reported as stalled rather than spun until max_outer.
_STALL_REL_CHANGE = 1e-15
_STALL_ROUNDS = 10
_FULL_RESIDUAL_EVERY = 25
# One-step gains smaller than this multiple of ||B||_F^2 sit below the
# rounding noise of the polar factor itself (its orthonormality defect
# couples to ||G||_F), so gain ratios against them carry no information.
_RATIO_RESOLUTION = 128.0 * float(np.finfo(np.float64).eps)


class SolverError(RuntimeError):
    """A numerical kernel failed inside a solve; carries sweep context."""


@dataclass
class SolverConfig:
    """Knobs shared by both solvers.

    ``tol_kkt`` bounds the normalized stationarity residual;
    ``tol_obj`` additionally bounds the relative objective change when
    ``use_obj_stop`` is set (both criteria must then hold).
    ``inner_fraction`` scales the outer residual into the tolerance handed
    to the compressed inner solves; ``max_inner`` caps their sweeps.
    """

    tol_obj: float = 1e-12
    tol_kkt: float = 1e-9
    max_outer: int = 2000
    inner_fraction: float = 0.125
    max_inner: int = 50
    use_obj_stop: bool = False
    record_diagnostics: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.max_inner < 1:
            raise ValueError("max_inner must be at least 1")
        if not 0.0 < self.inner_fraction < 1.0:
            raise ValueError("inner_fraction must lie strictly between 0 and 1")
        if self.tol_kkt <= 0.0 or self.tol_obj <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass
class IterationRecord:
    """One outer iteration: a full sweep (npdo) or one subspace step
    (accnpdo).

    ``kkt_cheap`` is the residual that drove the stopping test.  For
    sweeps it is the staggered accumulation measured against the
    pre-update factors; for subspace steps the plain residual at the new
    tuple is recorded in both fields.  Diagnostics lists hold one entry
    per mode and are None when recording is off.
    """

    outer_index: int
    objective: float
    kkt_cheap: float
    kkt_full: Optional[float] = None
    step_gains: Optional[List[float]] = None
    sin_theta_sq: Optional[List[float]] = None
    sigma_min: Optional[List[float]] = None
    proj_residual_sq: Optional[List[float]] = None
    inner_iterations: Optional[int] = None
    gain_ratio: Optional[float] = None
    elapsed_seconds: float = 0.0


@dataclass
class SolveResult:
    """Factors, block payload, and run bookkeeping for one solve.

    ``objective_gain`` is the total objective increase accumulated from the
    individual update steps in a cancellation-free form; unlike a direct
    difference of near-equal objective values it keeps relative accuracy
    down to the last iterations.
    """

    factors: List[np.ndarray]
    core: np.ndarray
    blocks: List[np.ndarray]
    multipliers: List[np.ndarray]
    trace: List[IterationRecord]
    status: str
    iterations: int
    final_objective: float
    final_kkt: float
    elapsed_seconds: float
    objective_gain: float = 0.0


def random_factor_tuple(
    dims: Sequence[int],
    partition: BlockPartition,
    rng: np.random.Generator,
    field: str = "real",
) -> List[np.ndarray]:
    """Independent random orthonormal factors, one per mode."""
    from .linalg import random_orthonormal

    partition.validate_dims(dims)
    return [
        random_orthonormal(n, k, rng, field)
        for n, k in zip(dims, partition.ranks)
    ]


def _validated_copy(
    init: Sequence[np.ndarray], binding: ProblemBinding
) -> List[np.ndarray]:
    if len(init) != binding.num_modes:
        raise ValueError(
            f"expected {binding.num_modes} factors, got {len(init)}"
        )
    ranks = binding.partition.ranks
    factors = []
    for mode, p in enumerate(init):
        p = np.array(p)
        expected = (binding.dims[mode], ranks[mode])
        if p.shape != expected:
            raise ValueError(
                f"factor {mode} has shape {p.shape}, expected {expected}"
            )
        if orthonormality_defect(p) > 1e-8:
            raise ValueError(f"factor {mode} is not orthonormal")
        factors.append(p)
    return factors


def _cached_gradient_blocks(binding, factors, versions, cache, mode):
    """Per-block contractions and gradient columns at one mode.

    First-level mode products of the full tensor are the expensive step,
    so they are cached keyed by (mode, block) with the producing factor's
    version; a stale version simply misses.  New entries contract by the
    most recently updated factor, which stays valid the longest."""
    part = binding.partition
    m = binding.num_modes
    contractions = []
    grads = []
    for blk in range(part.num_blocks):
        base = None
        used = None
        for i in range(m):
            if i == mode:
                continue
            entry = cache.get((i, blk))
            if entry is not None and entry[0] == versions[i]:
                base, used = entry[1], i
                break
        if base is None:
            used = (mode - 1) % m
            x = factor_block(factors[used], part, used, blk).conj().T
            base = mode_multiply(binding.tensor, x, used)
            cache[(used, blk)] = (versions[used], base)
        out = base
        for i in range(m):
            if i == mode or i == used:
                continue
            x = factor_block(factors[i], part, i, blk).conj().T
            out = mode_multiply(out, x, i)
        c = unfold(out, mode)
        p_cols = factor_block(factors[mode], part, mode, blk)
        contractions.append(c)
        grads.append(c @ (c.conj().T @ p_cols))
    return contractions, grads


def _full_gradients(binding, factors, versions=None, cache=None):
    """Gradients of every mode at one common tuple."""
    if versions is None:
        return [
            partial_gradient(binding, factors, mode)
            for mode in range(binding.num_modes)
        ]
    grads = []
    for mode in range(binding.num_modes):
        _, blocks = _cached_gradient_blocks(binding, factors, versions, cache, mode)
        grads.append(np.hstack(blocks))
    return grads


def _finalize(binding, factors, grads, trace, status, final_objective, start,
              objective_gain=0.0):
    """Assemble the result payload at the final tuple."""
    multipliers = [
        sym(p.conj().T @ g) for p, g in zip(factors, grads)
    ]
    final_kkt = sum(
        _residual_term(binding, mode, g, factors[mode])
        for mode, g in enumerate(grads)
    )
    if trace and trace[-1].kkt_full is None:
        trace[-1].kkt_full = final_kkt
    core = core_tensor(binding.tensor, factors)
    blocks = bdiag_extract(core, binding.partition)
    return SolveResult(
        factors=factors,
        core=core,
        blocks=blocks,
        multipliers=multipliers,
        trace=trace,
        status=status,
        iterations=len(trace),
        final_objective=final_objective,
        final_kkt=final_kkt,
        elapsed_seconds=time.perf_counter() - start,
        objective_gain=objective_gain,
    )


def npdo_solve(
    binding: ProblemBinding,
    init: Sequence[np.ndarray],
    config: SolverConfig | None = None,
) -> SolveResult:
    """Alternating polar-factor sweeps until the staggered residual passes
    the tolerance.

    Each sweep visits the modes in order, measures the residual term and
    the one-step gain against the pre-update factor, then replaces it with
    the polar factor of the partial gradient.  The objective after the
    sweep falls out of the last mode's contractions for free.
    """
    config = config or SolverConfig()
    m = binding.num_modes
    part = binding.partition
    factors = _validated_copy(init, binding)
    versions = [0] * m
    cache: dict = {}
    trace: List[IterationRecord] = []
    status = STATUS_MAX_ITER
    f_prev = None
    f_new = 0.0
    objective_gain = 0.0
    stall = 0
    start = time.perf_counter()
    for j in range(1, config.max_outer + 1):
        eps = 0.0
        gains: List[float] = []
        sins = [] if config.record_diagnostics else None
        sigs = [] if config.record_diagnostics else None
        projs = [] if config.record_diagnostics else None
        for mode in range(m):
            contractions, grad_blocks = _cached_gradient_blocks(
                binding, factors, versions, cache, mode
            )
            grad = np.hstack(grad_blocks)
            p_old = factors[mode]
            try:
                u, s, vh = np.linalg.svd(grad, full_matrices=False)
            except np.linalg.LinAlgError as exc:
                raise SolverError(
                    f"svd of the mode-{mode} gradient failed at sweep {j}"
                ) from exc
            q = u @ vh
            if orthonormality_defect(q) > 1e-12:
                q = polar_factor(q).q
            eps += _residual_term(binding, mode, grad, p_old)
            # The one-step gain trace_norm(G) - Re tr(P^H G) cancels
            # catastrophically near convergence; tr(Q^H G) equals the trace
            # norm exactly, so the difference form stays accurate.
            step = q - p_old
            gains.append(float(np.real(np.vdot(step, grad))))
            off = part.offsets(mode)
            exact = 2.0 * gains[-1]
            for blk, c in enumerate(contractions):
                d_cols = step[:, off[blk] : off[blk + 1]]
                exact += float(np.linalg.norm(c.conj().T @ d_cols) ** 2)
            objective_gain += exact
            if config.record_diagnostics:
                k = p_old.shape[1]
                overlap = float(np.linalg.norm(q.conj().T @ p_old) ** 2)
                sins.append(max(k - overlap, 0.0))
                sigs.append(float(s[-1]))
                g_sq = float(np.linalg.norm(grad) ** 2)
                if g_sq == 0.0:
                    projs.append(0.0)
                else:
                    proj = grad - p_old @ (p_old.conj().T @ grad)
                    projs.append(float(np.linalg.norm(proj) ** 2) / g_sq)
            factors[mode] = q
            versions[mode] += 1
            if mode == m - 1:
                f_new = 0.0
                for blk, c in enumerate(contractions):
                    cols = q[:, off[blk] : off[blk + 1]]
                    f_new += float(np.linalg.norm(c.conj().T @ cols) ** 2)
        if f_prev is None:
            rel_change = None
        else:
            rel_change = abs(f_new - f_prev) / max(abs(f_new), _TINY)
        converged = eps <= config.tol_kkt and (
            not config.use_obj_stop
            or (rel_change is not None and rel_change <= config.tol_obj)
        )
        if rel_change is not None and rel_change < _STALL_REL_CHANGE:
            stall += 1
        else:
            stall = 0
        stalled = (
            not converged and eps > config.tol_kkt and stall >= _STALL_ROUNDS
        )
        record = IterationRecord(
            outer_index=j,
            objective=f_new,
            kkt_cheap=eps,
            step_gains=gains,
            sin_theta_sq=sins,
            sigma_min=sigs,
            proj_residual_sq=projs,
            elapsed_seconds=time.perf_counter() - start,
        )
        trace.append(record)
        if converged:
            status = STATUS_CONVERGED
            break
        if stalled:
            status = STATUS_STALLED
            break
        if config.record_diagnostics and j % _FULL_RESIDUAL_EVERY == 0:
            grads = _full_gradients(binding, factors, versions, cache)
            record.kkt_full = sum(
                _residual_term(binding, mode, g, factors[mode])
                for mode, g in enumerate(grads)
            )
        f_prev = f_new
    grads = _full_gradients(binding, factors, versions, cache)
    return _finalize(
        binding, factors, grads, trace, status, f_new, start, objective_gain
    )


@dataclass
class _OuterState:
    """Gradients and derived quantities at one full factor tuple."""

    grads: List[np.ndarray]
    residuals: List[np.ndarray]
    eps: float
    objective: float
    gains: List[float]
    sigma_min: List[float]
    sin_theta_sq: List[float]
    proj_residual_sq: List[float]


def _outer_state(binding: ProblemBinding, factors) -> _OuterState:
    grads = _full_gradients(binding, factors)
    residuals = []
    gains = []
    sigs = []
    sins = []
    projs = []
    eps = 0.0
    objective = None
    for mode, g in enumerate(grads):
        p = factors[mode]
        overlap = p.conj().T @ g
        if objective is None:
            # With gradient and factor at the same tuple the objective is
            # exactly the real trace of P^H G.
            objective = float(np.real(np.trace(overlap)))
        residual = g - p @ sym(overlap)
        residuals.append(residual)
        eps += _residual_term(binding, mode, g, p)
        try:
            u, s, vh = np.linalg.svd(g, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"svd of the mode-{mode} gradient failed") from exc
        # One-step gain of the polar update at this mode.  tr(Q^H G) equals
        # sum(s) exactly for Q = U V^H, so the difference form below avoids
        # the cancellation of sum(s) - tr(P^H G) once both are large and
        # nearly equal near a stationary point.
        q = u @ vh
        gains.append(float(np.real(np.vdot(q - p, g))))
        sigs.append(float(s[-1]))
        k = p.shape[1]
        sins.append(max(k - float(np.linalg.norm(u.conj().T @ p) ** 2), 0.0))
        g_sq = float(np.linalg.norm(g) ** 2)
        if g_sq == 0.0:
            projs.append(0.0)
        else:
            proj = g - p @ (p.conj().T @ g)
            projs.append(float(np.linalg.norm(proj) ** 2) / g_sq)
    return _OuterState(grads, residuals, eps, objective, gains, sigs, sins, projs)


def accnpdo_solve(
    binding: ProblemBinding,
    init: Sequence[np.ndarray],
    config: SolverConfig | None = None,
) -> SolveResult:
    """Subspace-accelerated variant of :func:`npdo_solve`.

    Per outer iteration the search space at each mode is the span of the
    current factor, its stationarity residual, and the previous factor
    (giving a width of at most 3k, or 2k on the first iteration).  The
    tensor compressed onto those bases is solved by plain sweeps, started
    from identity columns so the compressed initial objective equals the
    current one, which keeps the outer objective monotone.  The inner
    tolerance is ``inner_fraction`` times the current outer residual.
    """
    config = config or SolverConfig()
    part = binding.partition
    factors = _validated_copy(init, binding)
    trace: List[IterationRecord] = []
    status = STATUS_MAX_ITER
    prev_factors: Optional[List[np.ndarray]] = None
    f_prev = None
    stall = 0
    objective_gain = 0.0
    start = time.perf_counter()
    state = _outer_state(binding, factors)
    for j in range(1, config.max_outer + 1):
        if f_prev is None:
            rel_change = None
        else:
            rel_change = abs(state.objective - f_prev) / max(
                abs(state.objective), _TINY
            )
        converged = state.eps <= config.tol_kkt and (
            not config.use_obj_stop
            or (rel_change is not None and rel_change <= config.tol_obj)
        )
        if converged:
            status = STATUS_CONVERGED
            break
        if rel_change is not None and rel_change < _STALL_REL_CHANGE:
            stall += 1
        else:
            stall = 0
        if stall >= _STALL_ROUNDS:
            status = STATUS_STALLED
            break
        bases = []
        for mode in range(binding.num_modes):
            extra = state.residuals[mode]
            if prev_factors is not None:
                extra = np.hstack([extra, prev_factors[mode]])
            bases.append(orth_complement_extend(factors[mode], extra))
        reduced = multi_mode_multiply(
            binding.tensor, [(b.conj().T, mode) for mode, b in enumerate(bases)]
        )
        inner_binding = ProblemBinding.bind(reduced, part)
        inner_config = replace(
            config,
            tol_kkt=max(state.eps * config.inner_fraction, _INNER_TOL_FLOOR),
            max_outer=config.max_inner,
            use_obj_stop=False,
            record_diagnostics=False,
        )
        y0 = identity_factor_tuple(reduced.shape, part, dtype=reduced.dtype)
        inner = npdo_solve(inner_binding, y0, inner_config)
        lifted = []
        for b, y in zip(bases, inner.factors):
            p = b @ y
            if orthonormality_defect(p) > 1e-12:
                p = polar_factor(p).q
            lifted.append(p)
        prev_factors = factors
        factors = lifted
        new_state = _outer_state(binding, factors)
        # The compressed problem preserves objective differences under the
        # lift, so the inner run's accumulated gain is the outer gain in a
        # form that does not cancel near convergence.
        gain = inner.objective_gain
        objective_gain += gain
        eta_star = max(state.gains)
        resolvable = eta_star > _RATIO_RESOLUTION * binding.norm ** 2
        ratio = gain / eta_star if resolvable else None
        diag = config.record_diagnostics
        trace.append(
            IterationRecord(
                outer_index=j,
                objective=new_state.objective,
                kkt_cheap=new_state.eps,
                kkt_full=new_state.eps,
                step_gains=state.gains,
                sin_theta_sq=state.sin_theta_sq if diag else None,
                sigma_min=state.sigma_min if diag else None,
                proj_residual_sq=state.proj_residual_sq if diag else None,
                inner_iterations=inner.iterations,
                gain_ratio=ratio,
                elapsed_seconds=time.perf_counter() - start,
            )
        )
        f_prev = state.objective
        state = new_state
    return _finalize(
        binding, factors, state.grads, trace, status, state.objective, start,
        objective_gain,
    )


@dataclass
class DiagnosticsSummary:
    """Cumulative series certifying sweep convergence.

    ``angle_terms`` holds sigma_min times the squared subspace angle moved
    per iteration and mode; ``residual_terms`` holds sigma_min times the
    normalized squared projection residual.  Both series have bounded sums
    for a convergent run, so their cumulative rows flatten out.
    """

    angle_terms: np.ndarray
    residual_terms: np.ndarray
    angle_cumulative: np.ndarray
    residual_cumulative: np.ndarray
    proj_residuals: np.ndarray

    def totals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.angle_cumulative[-1], self.residual_cumulative[-1]

    def last_quarter_fraction(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-mode share of each series accumulated in the last quarter
        of the iterations; small values mean the series has flattened."""
        n = self.angle_terms.shape[0]
        tail = max(n // 4, 1)
        fractions = []
        for terms, total in zip(
            (self.angle_terms, self.residual_terms), self.totals()
        ):
            tail_sum = terms[n - tail :].sum(axis=0)
            with np.errstate(invalid="ignore", divide="ignore"):
                frac = np.where(total > 0.0, tail_sum / np.maximum(total, _TINY), 0.0)
            fractions.append(frac)
        return fractions[0], fractions[1]


def diagnostics_series(trace: Sequence[IterationRecord]) -> DiagnosticsSummary:
    """Build the per-mode convergence series from a diagnostic trace."""
    if not trace:
        raise ValueError("empty trace")
    for r in trace:
        if r.sigma_min is None or r.sin_theta_sq is None or r.proj_residual_sq is None:
            raise ValueError(
                "trace lacks diagnostics; solve with record_diagnostics=True"
            )
    sigma = np.array([r.sigma_min for r in trace])
    sines = np.array([r.sin_theta_sq for r in trace])
    projs = np.array([r.proj_residual_sq for r in trace])
    angle_terms = sigma * sines
    residual_terms = sigma * projs
    if not (np.all(np.isfinite(angle_terms)) and np.all(np.isfinite(residual_terms))):
        raise ValueError("diagnostic series contain non-finite terms")
    return DiagnosticsSummary(
        angle_terms=angle_terms,
        residual_terms=residual_terms,
        angle_cumulative=np.cumsum(angle_terms, axis=0),
        residual_cumulative=np.cumsum(residual_terms, axis=0),
        proj_residuals=projs,
    )
