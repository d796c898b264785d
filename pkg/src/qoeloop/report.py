"""File-based reporting: rendered figures next to the delimited data.

Every renderer draws from already-computed results, writes deterministic
PNG files (fixed size, fixed dpi, fixed metadata — reruns are
byte-identical), and returns the paths it wrote.
"""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .loop import LoopTelemetry  # noqa: E402
from .playback import PlaybackTimeline  # noqa: E402
from .trace import ThroughputTrace  # noqa: E402

_PNG_METADATA = {"Software": "qoeloop"}
_FIGSIZE = (7.0, 3.5)
_DPI = 110


def _save(fig, path) -> str:
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)
    return os.fspath(path)


def plot_trace(trace: ThroughputTrace, path) -> str:
    """Step plot of the throughput trace in Mb/s over time."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    times = [i * trace.slot_duration for i in range(trace.num_slots + 1)]
    ax.stairs(trace.values, times, color="tab:blue")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("throughput (Mb/s)")
    ax.set_title(trace.trace_id or "throughput trace")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_buffer(timeline: PlaybackTimeline, path) -> str:
    """Buffered content per slot, with waits shaded and stalls marked."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    n = len(timeline.buffer_levels)
    ends = [(i + 1) * timeline.slot_duration for i in range(n)]
    ax.plot(ends, timeline.buffer_levels, color="tab:green", label="buffer")
    for i, phase in enumerate(timeline.phases):
        if phase == "baw":
            ax.axvspan(i * timeline.slot_duration, (i + 1) * timeline.slot_duration,
                       color="tab:orange", alpha=0.15, lw=0)
    for t in timeline.stall_times:
        ax.axvline(t, color="tab:red", linestyle="--", lw=1)
    if timeline.download_complete_time is not None:
        ax.axvline(timeline.download_complete_time, color="tab:blue",
                   linestyle=":", lw=1)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("buffered content (s)")
    ax.set_title("playback buffer (shaded: waiting; dashed: stalls)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_msv(msv_series, path) -> str:
    """Per-round weight variation on a log scale."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    rounds = range(1, len(msv_series) + 1)
    ax.semilogy(list(rounds), list(msv_series), color="tab:purple")
    ax.set_xlabel("round")
    ax.set_ylabel("mean square variation")
    ax.set_title("weight-vector variation per round")
    ax.grid(True, alpha=0.3, which="both")
    fig.tight_layout()
    return _save(fig, path)


def plot_mos(mos_series, path) -> str:
    """Per-round mean of the sampled scores."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    rounds = range(1, len(mos_series) + 1)
    ax.plot(list(rounds), list(mos_series), color="tab:cyan")
    ax.set_xlabel("round")
    ax.set_ylabel("mean score")
    ax.set_ylim(0.5, 5.5)
    ax.set_title("batch mean opinion score per round")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_weights(w_history, path) -> str:
    """Trajectories of the five weights across rounds."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    rounds = list(range(len(w_history)))
    for k in range(5):
        ax.plot(rounds, [w[k] for w in w_history], label=f"w{k + 1}")
    ax.set_xlabel("round")
    ax.set_ylabel("weight value")
    ax.set_title("learned weights per round")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def render_session_report(timeline: PlaybackTimeline, out_dir,
                          trace: ThroughputTrace | None = None,
                          prefix: str = "session") -> dict[str, str]:
    """Write the timeline as JSON plus its buffer figure (and trace figure)."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    data_path = os.path.join(out_dir, f"{prefix}-timeline.json")
    with open(data_path, "w", encoding="utf-8") as fh:
        json.dump(timeline.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["timeline"] = data_path
    paths["buffer"] = plot_buffer(timeline, os.path.join(out_dir, f"{prefix}-buffer.png"))
    if trace is not None:
        paths["trace"] = plot_trace(trace, os.path.join(out_dir, f"{prefix}-trace.png"))
    return paths


def render_loop_report(telemetry: LoopTelemetry, out_dir,
                       prefix: str = "loop") -> dict[str, str]:
    """Write telemetry CSV plus convergence and score figures."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    csv_path = os.path.join(out_dir, f"{prefix}-telemetry.csv")
    telemetry.to_csv(csv_path)
    paths["telemetry"] = csv_path
    paths["msv"] = plot_msv(telemetry.msv_series, os.path.join(out_dir, f"{prefix}-msv.png"))
    paths["mos"] = plot_mos(telemetry.mos_series, os.path.join(out_dir, f"{prefix}-mos.png"))
    paths["weights"] = plot_weights(telemetry.w_history,
                                    os.path.join(out_dir, f"{prefix}-weights.png"))
    return paths
