"""Bitrate planning over a throughput trace.

Four planners share one evaluation path (the fluid simulator):

* ``optimal_plan`` — exhaustive search over plans that are non-decreasing
  inside each buffering cycle, for every admissible choice of cycle
  boundaries and up to the stall budget.
* ``maestro`` — fast one-cycle heuristic: fix a base level, then greedily
  raise levels from the back of the window while the window still streams
  without stalls.
* ``castle`` — multi-cycle heuristic: start from the zero-stall one-cycle
  solution and greedily insert stall boundaries while the full-session
  score strictly improves.
* ``brute_force_plan`` — every plan in the cross product, as a test oracle.

A planner's "enforced stall" is a search construct: it decides where a
candidate plan's cycle boundaries go.  Whether a stall actually happens is
always decided by simulating the stitched plan, and all cross-candidate
comparisons use that simulated truth.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import InfeasibleError, SearchSpaceError, ValidationError
from .metrics import (
    Metrics,
    metrics_from_parts,
    qoe_score,
    switch_fraction,
    validate_weights,
)
from .playback import BitratePlan, SessionConfig, _stall_positions, _stream
from .trace import ThroughputTrace


@dataclass(frozen=True)
class CycleWindow:
    """A contiguous run of segments planned as one buffering cycle.

    ``start_time`` is the wall-clock second at which the window's first
    download begins; the throughput trace is always indexed from absolute
    time zero.  A cycle starts with an empty buffer.
    """

    first_segment: int
    last_segment: int
    start_time: float = 0.0
    initial_buffer: float = 0.0

    def __post_init__(self):
        if not (1 <= self.first_segment <= self.last_segment):
            raise ValidationError("window bounds must satisfy 1 <= first <= last")
        if not (self.start_time >= 0.0 and math.isfinite(self.start_time)):
            raise ValidationError("window start_time must be finite and non-negative")
        if self.initial_buffer != 0.0:
            raise ValidationError("cycles start with an empty buffer")

    @property
    def num_segments(self) -> int:
        return self.last_segment - self.first_segment + 1

    def start_slot(self, slot_duration: float = 1.0) -> int:
        return int(self.start_time / slot_duration)


@dataclass(frozen=True)
class PlanResult:
    plan: BitratePlan
    metrics: Metrics
    qoe: float
    stall_positions: tuple[int, ...]


def enumerate_ascending_plans(cfg: SessionConfig, window: CycleWindow | None = None):
    """Yield every non-decreasing ladder assignment for the window, once each.

    The count is C(L + n - 1, n) for n segments and L ladder levels; plans
    come out in lexicographic order.
    """
    length = cfg.num_segments if window is None else window.num_segments
    for combo in itertools.combinations_with_replacement(
            range(1, cfg.num_levels + 1), length):
        yield BitratePlan(combo)


def _levels_to_bitrates(levels, cfg):
    return tuple(cfg.ladder[l - 1] for l in levels)


def _evaluate_levels(levels, trace, cfg, weights, max_stalls):
    """Simulate a full-session plan; None if it misses the trace or budget."""
    bit = _levels_to_bitrates(levels, cfg)
    ev = _stream(bit, cfg.segment_duration, trace.values, trace.slot_duration,
                 cfg.prefetch_segments)
    if not ev.complete or len(ev.stall_times) > max_stalls:
        return None
    m = metrics_from_parts(bit, levels, ev.baw_durations, len(ev.stall_times),
                           cfg.video_length)
    return PlanResult(
        plan=BitratePlan(tuple(levels)),
        metrics=m,
        qoe=qoe_score(m, weights),
        stall_positions=tuple(_stall_positions(ev.stall_contents, cfg.segment_duration)),
    )


def evaluate_plan(plan: BitratePlan, trace: ThroughputTrace, cfg: SessionConfig,
                  weights) -> PlanResult:
    """Score an arbitrary plan by simulation, regardless of stall budget."""
    plan.validate_against(cfg)
    result = _evaluate_levels(plan.levels, trace, cfg, validate_weights(weights),
                              math.inf)
    if result is None:
        raise InfeasibleError("the download does not finish within the trace")
    return result


def _better(candidate: PlanResult, incumbent: PlanResult | None) -> bool:
    if incumbent is None:
        return True
    if candidate.qoe != incumbent.qoe:
        return candidate.qoe > incumbent.qoe
    return candidate.plan.levels < incumbent.plan.levels


def optimal_plan(trace: ThroughputTrace, cfg: SessionConfig, weights,
                 max_stalls: int | None = None) -> PlanResult:
    """Best plan that is non-decreasing within each buffering cycle.

    Cycle boundaries are searched exhaustively: every set of at most
    ``max_stalls`` boundary segments in {2..S}, and for each partition every
    combination of per-cycle non-decreasing assignments.  Each candidate is
    simulated as-is and must finish within the trace with no more than
    ``max_stalls`` actual stalls.  Ties fall to the lexicographically
    smallest plan.  Cost grows combinatorially with segments and budget;
    intended for short sessions and as a reference for the heuristics.
    """
    W = validate_weights(weights)
    p = cfg.max_stalls if max_stalls is None else int(max_stalls)
    if p < 0:
        raise ValidationError("max_stalls must be non-negative")
    S = cfg.num_segments
    ascending_cache: dict[int, list[tuple[int, ...]]] = {}

    def ascending(length):
        plans = ascending_cache.get(length)
        if plans is None:
            plans = list(itertools.combinations_with_replacement(
                range(1, cfg.num_levels + 1), length))
            ascending_cache[length] = plans
        return plans

    best: PlanResult | None = None
    for q in range(p + 1):
        for breaks in itertools.combinations(range(2, S + 1), q):
            bounds = (1,) + breaks + (S + 1,)
            parts = [ascending(bounds[i + 1] - bounds[i])
                     for i in range(len(bounds) - 1)]
            for combo in itertools.product(*parts):
                levels = tuple(itertools.chain.from_iterable(combo))
                # Evaluate a plan only in the family whose boundary set
                # matches its actual descents, so each plan runs once.
                seen = 0
                ok = True
                for idx in range(1, S):
                    if levels[idx] < levels[idx - 1]:
                        if seen >= q or breaks[seen] != idx + 1:
                            ok = False
                            break
                        seen += 1
                if not ok or seen != q:
                    continue
                result = _evaluate_levels(levels, trace, cfg, W, p)
                if result is not None and _better(result, best):
                    best = result
    if best is None:
        raise InfeasibleError(
            "no cycle-ascending plan finishes within the trace and stall budget"
        )
    return best


@dataclass
class _WindowPlan:
    levels: tuple[int, ...]
    row: tuple[float, float, float]
    startup: float
    playback_end: float


def _window_clean(levels, window, trace, cfg, stop_on_stall=True):
    """Stream the window's segments from its start; clean = done, no stalls."""
    ev = _stream(_levels_to_bitrates(levels, cfg), cfg.segment_duration,
                 trace.values, trace.slot_duration, cfg.prefetch_segments,
                 start_time=window.start_time, stop_on_stall=stop_on_stall)
    return (ev.complete and not ev.stall_times), ev


def _maestro_window(trace, cfg, weights3, window) -> _WindowPlan | None:
    """One-cycle heuristic over a window; None if nothing streams cleanly.

    For each base level the window is first set to that level throughout
    its play-while-downloading part; if that streams without stalls, the
    base level is pushed backward through the prefetch positions, then each
    higher level is pushed backward from the window end, reverting the
    first assignment that causes a stall.  Level assignments persist from
    one base level to the next, which is what builds up the staircase
    prefixes.  Every recorded candidate is scored by (mean bitrate, wait
    fraction, switch fraction) under the three weights.
    """
    n = window.num_segments
    prefetch = min(cfg.prefetch_segments, n)
    video_length = n * cfg.segment_duration
    levels = [1] * n
    evaluated: list[tuple[tuple[int, ...], tuple[float, float, float], float, float]] = []

    def record(ev):
        plan = tuple(levels)
        tau = ev.baw_durations[0]
        row = (
            sum(_levels_to_bitrates(plan, cfg)) / n,
            tau / video_length,
            switch_fraction(plan),
        )
        evaluated.append((plan, row, tau, ev.playback_end))

    for base in range(1, cfg.num_levels + 1):
        for s in range(prefetch, n):
            levels[s] = base
        clean, ev = _window_clean(levels, window, trace, cfg)
        if not clean:
            continue
        for s in range(prefetch - 1, -1, -1):
            previous = levels[s]
            levels[s] = base
            ok, trial = _window_clean(levels, window, trace, cfg)
            if not ok:
                levels[s] = previous
                break
            ev = trial
        record(ev)
        for higher in range(base + 1, cfg.num_levels + 1):
            for s in range(n - 1, prefetch - 1, -1):
                previous = levels[s]
                levels[s] = higher
                ok, trial = _window_clean(levels, window, trace, cfg)
                if not ok:
                    levels[s] = previous
                    break
                ev = trial
            record(ev)

    best = None
    best_score = -math.inf
    for plan, row, tau, playback_end in evaluated:
        score = row[0] * weights3[0] + row[1] * weights3[1] + row[2] * weights3[2]
        if best is None or score > best_score or (score == best_score
                                                  and plan < best.levels):
            best = _WindowPlan(plan, row, tau, playback_end)
            best_score = score
    return best


def maestro(trace: ThroughputTrace, cfg: SessionConfig, weights3,
            window: CycleWindow | None = None) -> PlanResult:
    """One-cycle heuristic plan; stall-free and non-decreasing in its window.

    ``weights3`` weighs (mean bitrate, wait fraction, switch fraction); the
    wait fraction is the window's initial wait over the window's content
    length.  Without an explicit window the whole session is planned.
    """
    w3 = validate_weights(weights3, length=3)
    if window is None:
        window = CycleWindow(1, cfg.num_segments)
    elif window.last_segment > cfg.num_segments:
        raise ValidationError("window extends past the session's last segment")
    found = _maestro_window(trace, cfg, w3, window)
    if found is None:
        raise InfeasibleError(
            "no level streams the window without stalls within the trace"
        )
    metrics = Metrics(found.row[0], found.row[1], found.row[2], 0.0, 0.0)
    return PlanResult(
        plan=BitratePlan(found.levels),
        metrics=metrics,
        qoe=float(found.row[0] * w3[0] + found.row[1] * w3[1] + found.row[2] * w3[2]),
        stall_positions=(),
    )


@dataclass
class _Cycle:
    first: int
    last: int
    start_time: float
    levels: tuple[int, ...] | None
    is_startup: bool


def castle(trace: ThroughputTrace, cfg: SessionConfig, weights,
           max_stalls: int | None = None) -> PlanResult:
    """Multi-cycle heuristic: add stall boundaries while the score improves.

    Starts from the zero-stall one-cycle solution.  Each round tries every
    unused boundary segment in {x0+1..S-x0}: the containing cycle is split
    there, both sides re-planned by the one-cycle heuristic (the wait of a
    mid-session cycle is scored with the rebuffering weight instead of the
    startup weight), the stitched plan simulated whole, and the best
    boundary kept only if the full five-weight score strictly improves.
    Stops at the stall budget or the first non-improving round.
    """
    W = validate_weights(weights)
    p = cfg.max_stalls if max_stalls is None else int(max_stalls)
    if p < 0:
        raise ValidationError("max_stalls must be non-negative")
    S = cfg.num_segments
    x0 = cfg.prefetch_segments
    w_startup = (W[0], W[1], W[2])
    w_rebuffer = (W[0], W[4], W[2])

    init = _maestro_window(trace, cfg, w_startup, CycleWindow(1, S))
    if init is not None:
        incumbent = _evaluate_levels(init.levels, trace, cfg, W, p)
        cycles = [_Cycle(1, S, 0.0, init.levels, True)]
    else:
        incumbent = None
        cycles = [_Cycle(1, S, 0.0, None, True)]
    horizon = trace.num_slots * trace.slot_duration

    for _ in range(p):
        best = None
        best_split = None
        for boundary in range(x0 + 1, S - x0 + 1):
            holder = None
            for idx, cyc in enumerate(cycles):
                if cyc.first < boundary <= cyc.last:
                    holder = idx
                    break
            if holder is None:
                continue  # boundary already starts a cycle
            cyc = cycles[holder]
            pre_weights = w_startup if cyc.is_startup else w_rebuffer
            pre = _maestro_window(
                trace, cfg, pre_weights,
                CycleWindow(cyc.first, boundary - 1, cyc.start_time))
            if pre is None:
                continue
            post = _maestro_window(
                trace, cfg, w_rebuffer,
                CycleWindow(boundary, cyc.last, pre.playback_end))
            if post is None:
                continue
            stitched: list[int] = []
            for idx, other in enumerate(cycles):
                if idx == holder:
                    stitched.extend(pre.levels)
                    stitched.extend(post.levels)
                else:
                    stitched.extend(other.levels)
            candidate = _evaluate_levels(tuple(stitched), trace, cfg, W, p)
            if candidate is None:
                continue
            if _better(candidate, best):
                best = candidate
                best_split = (holder, boundary, pre, post)
        if best is None or incumbent is not None and best.qoe <= incumbent.qoe:
            break
        incumbent = best
        holder, boundary, pre, post = best_split
        cyc = cycles[holder]
        cycles[holder:holder + 1] = [
            _Cycle(cyc.first, boundary - 1, cyc.start_time, pre.levels,
                   cyc.is_startup),
            _Cycle(boundary, cyc.last, pre.playback_end, post.levels, False),
        ]
        clock = 0.0
        for cyc in cycles:
            cyc.start_time = clock
            ev = _stream(_levels_to_bitrates(cyc.levels, cfg),
                         cfg.segment_duration, trace.values,
                         trace.slot_duration, cfg.prefetch_segments,
                         start_time=clock)
            clock = ev.playback_end if ev.complete else horizon

    if incumbent is None:
        raise InfeasibleError(
            "no zero-stall plan exists and no stall placement rescues one"
        )
    return incumbent


def brute_force_plan(trace: ThroughputTrace, cfg: SessionConfig, weights,
                     max_stalls: int | None = None,
                     max_evaluations: int = 10_000_000) -> PlanResult:
    """Exact argmax over every plan in the full cross product.

    Refuses outright when L**S exceeds ``max_evaluations``.  Ties fall to
    the lexicographically smallest plan.
    """
    W = validate_weights(weights)
    p = cfg.max_stalls if max_stalls is None else int(max_stalls)
    if p < 0:
        raise ValidationError("max_stalls must be non-negative")
    total = cfg.num_levels ** cfg.num_segments
    if total > max_evaluations:
        raise SearchSpaceError(
            f"{total} candidate plans exceed the cap of {max_evaluations}"
        )
    best: PlanResult | None = None
    for levels in itertools.product(range(1, cfg.num_levels + 1),
                                    repeat=cfg.num_segments):
        result = _evaluate_levels(levels, trace, cfg, W, p)
        if result is not None and result.qoe > (best.qoe if best else -math.inf):
            best = result
    if best is None:
        raise InfeasibleError(
            "no plan finishes within the trace and stall budget"
        )
    return best
