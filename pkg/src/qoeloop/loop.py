"""Closed learning loop: plan with current weights, score, retrain, repeat.

Each round draws a mini-batch of traces from the training pool, plans each
one with the current weight vector, lets the feedback oracle score the
delivered metric vectors, and retrains the weights on those samples,
warm-starting from the current vector.  The convergence signal is the
mean square variation of the weight vector between rounds; the loop stops
once it stays under the threshold for three consecutive rounds, or at the
round limit.

The feedback oracle is duck-typed: anything with ``classify(phi).mos`` and
``sample_score(phi, rng)`` works, so tests can substitute noise-free
oracles for the procedural dataset.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, ValidationError
from .learner import (LearnerConfig, TrainingSample, initial_weights,
                      project_signs, train)
from .metrics import NUM_METRICS, validate_weights
from .planner import castle, optimal_plan
from .playback import SessionConfig
from .trace import ThroughputTrace

logger = logging.getLogger(__name__)

_PLANNERS = {"castle": castle, "optimal": optimal_plan}

CONSECUTIVE_QUIET_ROUNDS = 3


def mean_square_variation(current, previous) -> float:
    """Mean squared per-component change between two weight vectors."""
    a = validate_weights(current)
    b = validate_weights(previous)
    return sum((x - y) ** 2 for x, y in zip(a, b)) / NUM_METRICS


def _resolve_planner(planner):
    if callable(planner):
        return planner
    try:
        return _PLANNERS[planner]
    except KeyError:
        raise ValidationError(
            f"unknown planner {planner!r}; choose from {sorted(_PLANNERS)}"
        ) from None


@dataclass(frozen=True)
class LoopConfig:
    minibatch_size: int = 10
    max_rounds: int = 200
    planner: str = "castle"
    learner_cfg: LearnerConfig = field(default_factory=LearnerConfig)
    train_pool: tuple[ThroughputTrace, ...] = ()
    eval_pool: tuple[ThroughputTrace, ...] = ()
    msv_threshold: float = 1e-3
    seed: int = 0
    session: SessionConfig = field(default_factory=SessionConfig)
    refill_factor: int = 50
    project_for_planner: bool = False

    def __post_init__(self):
        if self.minibatch_size < 1:
            raise ValidationError("minibatch_size must be at least 1")
        if self.max_rounds < 1:
            raise ValidationError("max_rounds must be at least 1")
        if len(self.train_pool) == 0:
            raise ValidationError("the training trace pool must not be empty")
        if not (self.msv_threshold > 0.0):
            raise ValidationError("msv_threshold must be positive")
        if self.refill_factor < 1:
            raise ValidationError("refill_factor must be at least 1")
        _resolve_planner(self.planner)
        object.__setattr__(self, "train_pool", tuple(self.train_pool))
        object.__setattr__(self, "eval_pool", tuple(self.eval_pool))


@dataclass
class LoopTelemetry:
    w_history: list[tuple[float, ...]]
    msv_series: list[float]
    mos_series: list[float]
    batches: list[list[TrainingSample]]
    infeasible_skips: list[int]
    stop_reason: str
    config: LoopConfig

    @property
    def rounds(self) -> int:
        return len(self.msv_series)

    @property
    def initial_weights(self) -> tuple[float, ...]:
        return self.w_history[0]

    @property
    def final_weights(self) -> tuple[float, ...]:
        return self.w_history[-1]

    @property
    def converged(self) -> bool:
        return self.stop_reason == "msv-threshold"

    def to_csv(self, path) -> None:
        """Write one row per round, with the run configuration up front."""
        cfg = self.config
        lc = cfg.learner_cfg
        s = cfg.session
        lines = [
            "# closed-loop telemetry",
            f"# seed={cfg.seed} minibatch_size={cfg.minibatch_size}"
            f" planner={cfg.planner} msv_threshold={cfg.msv_threshold!r}"
            f" max_rounds={cfg.max_rounds} rounds_executed={self.rounds}"
            f" stop_reason={self.stop_reason}"
            f" project_for_planner={cfg.project_for_planner}",
            f"# learner epsilon={lc.epsilon!r} mu={lc.mu!r} max_steps={lc.max_steps}"
            f" alpha_min={lc.alpha_min!r} alpha_max={lc.alpha_max!r}"
            f" init_scale={lc.init_scale!r} max_rounds={lc.max_rounds}",
            f"# session num_segments={s.num_segments} segment_duration={s.segment_duration!r}"
            f" prefetch_segments={s.prefetch_segments}"
            f" ladder={','.join(repr(b) for b in s.ladder)} max_stalls={s.max_stalls}",
            f"# pools train={len(cfg.train_pool)} eval={len(cfg.eval_pool)}",
            "# initial_weights " + ",".join(repr(w) for w in self.w_history[0]),
            "round,msv,mos," + ",".join(f"w{i}" for i in range(1, NUM_METRICS + 1)),
        ]
        for i in range(self.rounds):
            w = self.w_history[i + 1]
            lines.append(
                f"{i + 1},{self.msv_series[i]!r},{self.mos_series[i]!r},"
                + ",".join(repr(x) for x in w)
            )
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def run_closed_loop(cfg: LoopConfig, ds) -> LoopTelemetry:
    """Run the plan/score/retrain loop until quiet or out of rounds."""
    planner = _resolve_planner(cfg.planner)
    trace_ss, score_ss, init_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    trace_rng = np.random.default_rng(trace_ss)
    score_rng = np.random.default_rng(score_ss)
    weights = tuple(float(x) for x in initial_weights(cfg.learner_cfg, init_ss))

    telemetry = LoopTelemetry(
        w_history=[weights],
        msv_series=[],
        mos_series=[],
        batches=[],
        infeasible_skips=[],
        stop_reason="max-rounds",
        config=cfg,
    )
    pool = cfg.train_pool
    quiet = 0
    for round_index in range(1, cfg.max_rounds + 1):
        batch: list[TrainingSample] = []
        skipped = 0
        attempts = 0
        budget = cfg.minibatch_size * cfg.refill_factor
        while len(batch) < cfg.minibatch_size:
            if attempts >= budget:
                raise InfeasibleError(
                    f"round {round_index}: {skipped} infeasible plans in "
                    f"{attempts} draws; the training pool does not support "
                    f"this session configuration"
                )
            attempts += 1
            trace = pool[int(trace_rng.integers(len(pool)))]
            planner_w = (project_signs(weights) if cfg.project_for_planner
                         else weights)
            try:
                result = planner(trace, cfg.session, planner_w,
                                 cfg.session.max_stalls)
            except InfeasibleError:
                skipped += 1
                logger.info("round %d: trace %s infeasible; redrawing",
                            round_index, trace.trace_id or "<unnamed>")
                continue
            score = ds.sample_score(result.metrics, score_rng)
            batch.append(TrainingSample(result.metrics.as_tuple(), float(score)))

        outcome = train(batch, cfg.learner_cfg, w0=weights)
        msv = mean_square_variation(outcome.weights, weights)
        weights = outcome.weights
        telemetry.w_history.append(weights)
        telemetry.msv_series.append(msv)
        telemetry.mos_series.append(sum(s.score for s in batch) / len(batch))
        telemetry.batches.append(batch)
        telemetry.infeasible_skips.append(skipped)

        quiet = quiet + 1 if msv <= cfg.msv_threshold else 0
        if quiet >= CONSECUTIVE_QUIET_ROUNDS:
            telemetry.stop_reason = "msv-threshold"
            break
    return telemetry


@dataclass(frozen=True)
class MosEvaluation:
    mos: float
    evaluated: int
    infeasible: int

    def __float__(self) -> float:
        return self.mos


def evaluate_mos(weights, eval_pool, ds, session: SessionConfig | None = None,
                 planner="castle", deterministic: bool = True,
                 rng=None) -> MosEvaluation:
    """Mean opinion score of planner outputs under fixed weights.

    Plans every trace in the pool; traces whose planning is infeasible are
    excluded and counted.  In deterministic mode each plan contributes its
    category's exact MOS; otherwise an integer score is sampled per plan,
    which matches how live users would rate.
    """
    w = validate_weights(weights)
    session = session or SessionConfig()
    plan_fn = _resolve_planner(planner)
    if not deterministic and rng is None:
        rng = np.random.default_rng(0)
    if len(eval_pool) == 0:
        raise ValidationError("the evaluation pool must not be empty")
    total = 0.0
    evaluated = 0
    infeasible = 0
    for trace in eval_pool:
        try:
            result = plan_fn(trace, session, w, session.max_stalls)
        except InfeasibleError:
            infeasible += 1
            continue
        if deterministic:
            total += ds.classify(result.metrics).mos
        else:
            total += ds.sample_score(result.metrics, rng)
        evaluated += 1
    if evaluated == 0:
        raise InfeasibleError("every trace in the evaluation pool is infeasible")
    return MosEvaluation(mos=total / evaluated, evaluated=evaluated,
                         infeasible=infeasible)
