"""Command-line entry point for traces, planning, learning, and the loop.

Subcommands: ``trace``, ``simulate``, ``plan``, ``learn``, ``dataset``,
``loop``, ``eval``.  Every output file embeds the fully resolved
configuration and seeds, and identical invocations produce byte-identical
files.  Exit codes: 0 success, 2 invalid usage or input, 3 infeasible
instance, 4 search space over the configured cap.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import feedback as feedback_mod
from . import learner as learner_mod
from . import loop as loop_mod
from . import planner as planner_mod
from .errors import InfeasibleError, SearchSpaceError, ValidationError
from .metrics import compute_metrics, qoe_score
from .playback import BitratePlan, SessionConfig, simulate
from .trace import SyntheticTraceConfig, ThroughputTrace, generate_pool, generate_trace, load_trace

_ENV_SEED = "QOELOOP_SEED"


def _default_seed() -> int:
    try:
        return int(os.environ.get(_ENV_SEED, "0"))
    except ValueError:
        return 0


def _parse_floats(text: str, expected: int | None = None, flag: str = "") -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValidationError(f"{flag or 'value list'} must be comma-separated numbers: {text!r}")
    if expected is not None and len(values) != expected:
        raise ValidationError(f"{flag or 'value list'} needs {expected} numbers, got {len(values)}")
    return values


def _parse_ints(text: str, flag: str = "") -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ValidationError(f"{flag or 'value list'} must be comma-separated integers: {text!r}")


def _add_session_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("session")
    g.add_argument("--segments", type=int, default=30, help="segments in the video (default 30)")
    g.add_argument("--segment-duration", type=float, default=1.0,
                   help="seconds of content per segment (default 1)")
    g.add_argument("--prefetch", type=int, default=5,
                   help="segments buffered before playback starts (default 5)")
    g.add_argument("--ladder", default="0.4,0.75,1.0,2.5,4.5",
                   help="comma-separated bitrates in Mb/s, ascending")
    g.add_argument("--max-stalls", type=int, default=1,
                   help="stall budget for planners (default 1)")
    g.add_argument("--frame-rate", type=float, default=30.0,
                   help="frames per second (default 30)")


def _session_from(args) -> SessionConfig:
    return SessionConfig(
        num_segments=args.segments,
        segment_duration=args.segment_duration,
        prefetch_segments=args.prefetch,
        ladder=_parse_floats(args.ladder, flag="--ladder"),
        max_stalls=args.max_stalls,
        frame_rate=args.frame_rate,
    )


def _session_dict(cfg: SessionConfig) -> dict:
    return {
        "num_segments": cfg.num_segments,
        "segment_duration": cfg.segment_duration,
        "prefetch_segments": cfg.prefetch_segments,
        "ladder": list(cfg.ladder),
        "max_stalls": cfg.max_stalls,
        "frame_rate": cfg.frame_rate,
    }


def _flatten(obj, prefix="", out=None):
    if out is None:
        out = []
    if isinstance(obj, dict):
        for key in sorted(obj):
            _flatten(obj[key], f"{prefix}{key}.", out)
    elif isinstance(obj, (list, tuple)):
        out.append((prefix.rstrip("."), ";".join(_scalar(v) for v in obj)))
    else:
        out.append((prefix.rstrip("."), _scalar(obj)))
    return out


def _scalar(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_scalar(x) for x in v)
    return str(v)


def _emit(payload: dict, out: str | None, emit: str) -> None:
    if emit == "json":
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        rows = _flatten(payload)
        text = "key,value\n" + "\n".join(f"{k},{v}" for k, v in rows) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _add_emit(p, default_out_required=False):
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--emit", choices=("json", "csv"), default="json",
                   help="output encoding (default json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qoeloop",
        description="Streaming-session planning, simulation, and closed-loop "
                    "weight learning over throughput traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="generate a synthetic throughput trace")
    p.add_argument("--slots", type=int, default=70)
    p.add_argument("--mean", type=float, default=2.0)
    p.add_argument("--correlation", type=float, default=0.9)
    p.add_argument("--volatility", type=float, default=0.5)
    p.add_argument("--floor", type=float, default=0.0)
    p.add_argument("--slot-duration", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True, help="output file (.csv or .json)")
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("simulate", help="play a plan against a trace")
    p.add_argument("--trace", required=True, help="trace file (.csv or .json)")
    p.add_argument("--plan", required=True, help="comma-separated ladder indices, one per segment")
    p.add_argument("--slot-duration", type=float, default=1.0,
                   help="slot duration for CSV traces (default 1)")
    p.add_argument("--weights", default=None,
                   help="optional 5 weights to score the session")
    p.add_argument("--report", default=None, help="directory for rendered figures")
    _add_session_args(p)
    _add_emit(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("plan", help="choose a bitrate plan for a trace")
    p.add_argument("--algo", choices=("optimal", "maestro", "castle", "brute"),
                   default="castle")
    p.add_argument("--weights", required=True,
                   help="5 comma-separated weights (maestro uses the first 3)")
    p.add_argument("--trace", required=True, help="trace file (.csv or .json)")
    p.add_argument("--slot-duration", type=float, default=1.0)
    p.add_argument("--max-evaluations", type=int, default=10_000_000,
                   help="cap for the brute-force search")
    _add_session_args(p)
    _add_emit(p)
    p.set_defaults(func=_cmd_plan)

    lc = learner_mod.LearnerConfig()
    p = sub.add_parser("learn", help="fit weights to a batch of scored sessions")
    p.add_argument("--batch", required=True, help="JSON-lines file of {phi1..phi5, score}")
    p.add_argument("--epsilon", type=float, default=lc.epsilon)
    p.add_argument("--mu", type=float, default=lc.mu)
    p.add_argument("--max-steps", type=int, default=lc.max_steps)
    p.add_argument("--alpha-min", type=float, default=lc.alpha_min)
    p.add_argument("--alpha-max", type=float, default=lc.alpha_max)
    p.add_argument("--init-scale", type=float, default=lc.init_scale)
    p.add_argument("--max-rounds", type=int, default=lc.max_rounds)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--w0", default=None, help="optional 5 starting weights")
    _add_emit(p)
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("dataset", help="build the procedural feedback dataset")
    p.add_argument("--categories", type=int, default=10)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--quality-points", type=int, default=6)
    p.add_argument("--fraction-points", type=int, default=6)
    p.add_argument("--stall-levels", type=int, default=3)
    p.add_argument("--out", required=True, help="dataset JSON file")
    _add_session_args(p)
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("loop", help="run the closed plan/score/retrain loop")
    p.add_argument("--m", type=int, default=10, help="mini-batch size per round")
    p.add_argument("--rounds", type=int, default=200, help="round limit")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--planner", choices=("castle", "optimal"), default="castle")
    p.add_argument("--msv-threshold", type=float, default=1e-3)
    p.add_argument("--train-pool", type=int, default=200, help="training pool size")
    p.add_argument("--pool-seed", type=int, default=None,
                   help="pool generation seed (default: --seed + 1)")
    p.add_argument("--pool-slots", type=int, default=70)
    p.add_argument("--pool-mean-min", type=float, default=0.3)
    p.add_argument("--pool-mean-max", type=float, default=6.0)
    p.add_argument("--pool-correlation", type=float, default=0.9)
    p.add_argument("--pool-volatility-fraction", type=float, default=0.3)
    p.add_argument("--dataset", default=None, help="feedback dataset JSON (default: build procedurally)")
    p.add_argument("--categories", type=int, default=10)
    p.add_argument("--epsilon", type=float, default=lc.epsilon)
    p.add_argument("--mu", type=float, default=lc.mu)
    p.add_argument("--max-steps", type=int, default=lc.max_steps)
    p.add_argument("--alpha-min", type=float, default=lc.alpha_min)
    p.add_argument("--alpha-max", type=float, default=lc.alpha_max)
    p.add_argument("--init-scale", type=float, default=lc.init_scale)
    p.add_argument("--learner-rounds", type=int, default=lc.max_rounds,
                   help="outer-round cap inside each training call")
    p.add_argument("--out", required=True, help="telemetry CSV file")
    p.add_argument("--weights-out", default=None, help="optional final-weights JSON")
    p.add_argument("--report", default=None, help="directory for rendered figures")
    _add_session_args(p)
    p.set_defaults(func=_cmd_loop)

    p = sub.add_parser("eval", help="mean opinion score of a weight vector over a pool")
    p.add_argument("--weights", required=True, help="5 comma-separated weights")
    p.add_argument("--pool", type=int, default=1000, help="evaluation pool size")
    p.add_argument("--pool-seed", type=int, default=None,
                   help="pool generation seed (default: --seed + 1)")
    p.add_argument("--pool-slots", type=int, default=70)
    p.add_argument("--pool-mean-min", type=float, default=0.3)
    p.add_argument("--pool-mean-max", type=float, default=6.0)
    p.add_argument("--pool-correlation", type=float, default=0.9)
    p.add_argument("--pool-volatility-fraction", type=float, default=0.3)
    p.add_argument("--dataset", default=None, help="feedback dataset JSON")
    p.add_argument("--categories", type=int, default=10)
    p.add_argument("--planner", choices=("castle", "optimal"), default="castle")
    p.add_argument("--sampled", action="store_true",
                   help="sample integer scores instead of using exact category MOS")
    p.add_argument("--seed", type=int, default=_default_seed())
    _add_session_args(p)
    _add_emit(p)
    p.set_defaults(func=_cmd_eval)

    return parser


def _cmd_trace(args) -> int:
    cfg = SyntheticTraceConfig(
        num_slots=args.slots, mean=args.mean, correlation=args.correlation,
        volatility=args.volatility, floor=args.floor,
        slot_duration=args.slot_duration, seed=args.seed,
    )
    trace = generate_trace(cfg)
    header = (f"# synthetic trace slots={cfg.num_slots} mean={cfg.mean!r}"
              f" correlation={cfg.correlation!r} volatility={cfg.volatility!r}"
              f" floor={cfg.floor!r} slot_duration={cfg.slot_duration!r}"
              f" seed={cfg.seed}")
    if args.out.lower().endswith(".json"):
        payload = {
            "id": trace.trace_id,
            "slot_duration": trace.slot_duration,
            "values": list(trace.values),
            "generator": {
                "num_slots": cfg.num_slots, "mean": cfg.mean,
                "correlation": cfg.correlation, "volatility": cfg.volatility,
                "floor": cfg.floor, "slot_duration": cfg.slot_duration,
                "seed": cfg.seed,
            },
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for v in trace.values:
                fh.write(repr(v) + "\n")
    return 0


def _load_trace_arg(args) -> ThroughputTrace:
    return load_trace(args.trace, slot_duration=args.slot_duration)


def _cmd_simulate(args) -> int:
    session = _session_from(args)
    trace = _load_trace_arg(args)
    plan = BitratePlan(_parse_ints(args.plan, flag="--plan"))
    timeline = simulate(plan, trace, session)
    payload = {
        "config": {"session": _session_dict(session), "trace": args.trace,
                   "plan": list(plan.levels)},
        "timeline": timeline.to_dict(),
    }
    if not timeline.incomplete:
        m = compute_metrics(plan, timeline, session)
        payload["metrics"] = dict(zip(
            ("mean_bitrate", "startup_fraction", "switch_fraction",
             "stall_count", "rebuffer_fraction"), m.as_tuple()))
        if args.weights is not None:
            w = _parse_floats(args.weights, 5, "--weights")
            payload["qoe"] = qoe_score(m, w)
    _emit(payload, args.out, args.emit)
    if args.report:
        from . import report as report_mod
        report_mod.render_session_report(timeline, args.report, trace=trace)
    return 0


def _cmd_plan(args) -> int:
    session = _session_from(args)
    trace = _load_trace_arg(args)
    w = _parse_floats(args.weights, 5, "--weights")
    if args.algo == "optimal":
        result = planner_mod.optimal_plan(trace, session, w, session.max_stalls)
    elif args.algo == "castle":
        result = planner_mod.castle(trace, session, w, session.max_stalls)
    elif args.algo == "brute":
        result = planner_mod.brute_force_plan(trace, session, w, session.max_stalls,
                                              max_evaluations=args.max_evaluations)
    else:
        result = planner_mod.maestro(trace, session, w[:3])
    payload = {
        "config": {"session": _session_dict(session), "trace": args.trace,
                   "algo": args.algo, "weights": list(w)},
        "plan": list(result.plan.levels),
        "metrics": dict(zip(
            ("mean_bitrate", "startup_fraction", "switch_fraction",
             "stall_count", "rebuffer_fraction"), result.metrics.as_tuple())),
        "qoe": result.qoe,
        "stall_positions": list(result.stall_positions),
    }
    _emit(payload, args.out, args.emit)
    return 0


def _cmd_learn(args) -> int:
    batch = learner_mod.load_batch(args.batch)
    cfg = learner_mod.LearnerConfig(
        epsilon=args.epsilon, mu=args.mu, max_steps=args.max_steps,
        alpha_min=args.alpha_min, alpha_max=args.alpha_max,
        init_scale=args.init_scale, max_rounds=args.max_rounds,
    )
    w0 = _parse_floats(args.w0, 5, "--w0") if args.w0 else None
    result = learner_mod.train(batch, cfg, w0=w0, seed=args.seed)
    payload = {
        "config": {
            "batch": args.batch, "samples": len(batch), "seed": args.seed,
            "epsilon": cfg.epsilon, "mu": cfg.mu, "max_steps": cfg.max_steps,
            "alpha_min": cfg.alpha_min, "alpha_max": cfg.alpha_max,
            "init_scale": cfg.init_scale, "max_rounds": cfg.max_rounds,
            "w0": list(w0) if w0 else None,
        },
        "weights": list(result.weights),
        "converged": result.converged,
        "steps": result.steps,
        "rounds": result.rounds,
        "final_loss": result.final_loss,
    }
    _emit(payload, args.out, args.emit)
    return 0


def _cmd_dataset(args) -> int:
    session = _session_from(args)
    ds = feedback_mod.build_dataset(
        num_categories=args.categories, cfg=session, seed=args.seed,
        quality_points=args.quality_points, fraction_points=args.fraction_points,
        stall_levels=args.stall_levels,
    )
    data = ds.to_dict()
    data["build"] = {
        "categories": args.categories, "seed": args.seed,
        "quality_points": args.quality_points,
        "fraction_points": args.fraction_points,
        "stall_levels": args.stall_levels,
        "session": _session_dict(session),
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _pool_from_args(args, size, seed) -> list[ThroughputTrace]:
    return generate_pool(
        size, seed=seed, num_slots=args.pool_slots,
        mean_range=(args.pool_mean_min, args.pool_mean_max),
        correlation=args.pool_correlation,
        volatility_fraction=args.pool_volatility_fraction,
    )


def _dataset_from_args(args, session) -> feedback_mod.FeedbackDataset:
    if args.dataset:
        return feedback_mod.load_dataset(args.dataset)
    return feedback_mod.build_dataset(num_categories=args.categories, cfg=session,
                                      seed=args.seed)


def _cmd_loop(args) -> int:
    session = _session_from(args)
    pool_seed = args.pool_seed if args.pool_seed is not None else args.seed + 1
    train_pool = _pool_from_args(args, args.train_pool, pool_seed)
    ds = _dataset_from_args(args, session)
    learner_cfg = learner_mod.LearnerConfig(
        epsilon=args.epsilon, mu=args.mu, max_steps=args.max_steps,
        alpha_min=args.alpha_min, alpha_max=args.alpha_max,
        init_scale=args.init_scale, max_rounds=args.learner_rounds,
    )
    cfg = loop_mod.LoopConfig(
        minibatch_size=args.m, max_rounds=args.rounds, planner=args.planner,
        learner_cfg=learner_cfg, train_pool=tuple(train_pool), eval_pool=(),
        msv_threshold=args.msv_threshold, seed=args.seed, session=session,
    )
    telemetry = loop_mod.run_closed_loop(cfg, ds)
    telemetry.to_csv(args.out)
    if args.weights_out:
        payload = {
            "config": {"seed": args.seed, "minibatch_size": args.m,
                       "planner": args.planner, "rounds": telemetry.rounds,
                       "stop_reason": telemetry.stop_reason,
                       "session": _session_dict(session)},
            "weights": list(telemetry.final_weights),
        }
        with open(args.weights_out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.report:
        from . import report as report_mod
        report_mod.render_loop_report(telemetry, args.report)
    return 0


def _cmd_eval(args) -> int:
    session = _session_from(args)
    w = _parse_floats(args.weights, 5, "--weights")
    pool_seed = args.pool_seed if args.pool_seed is not None else args.seed + 1
    pool = _pool_from_args(args, args.pool, pool_seed)
    ds = _dataset_from_args(args, session)
    rng = np.random.default_rng(args.seed) if args.sampled else None
    result = loop_mod.evaluate_mos(w, pool, ds, session, planner=args.planner,
                                   deterministic=not args.sampled, rng=rng)
    payload = {
        "config": {"session": _session_dict(session), "weights": list(w),
                   "pool": args.pool, "pool_seed": pool_seed,
                   "planner": args.planner, "sampled": bool(args.sampled),
                   "seed": args.seed,
                   "dataset": args.dataset or f"procedural:{args.categories}"},
        "mos": result.mos,
        "evaluated": result.evaluated,
        "infeasible": result.infeasible,
    }
    _emit(payload, args.out, args.emit)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        _report_error("invalid-input", exc)
        return 2
    except InfeasibleError as exc:
        _report_error("infeasible", exc)
        return 3
    except SearchSpaceError as exc:
        _report_error("search-space", exc)
        return 4
    except OSError as exc:
        _report_error("io", exc)
        return 2


def _report_error(category: str, exc: Exception) -> None:
    sys.stderr.write(json.dumps({"error": category, "message": str(exc)}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
