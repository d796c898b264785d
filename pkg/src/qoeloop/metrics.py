"""Session quality metrics and their weighted score.

A finished session condenses into five numbers:

1. mean bitrate value across segments (Mb/s);
2. startup delay divided by the video length;
3. fraction of adjacent segment pairs whose ladder index differs;
4. number of stall events;
5. total rebuffering time (waits after the first) divided by the video
   length.

The scalar score is the dot product of a five-weight vector with that
metric vector.  Higher-is-better conventions are up to the caller: raising
quality is usually rewarded through a positive first weight and the other
four carry negative weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, ValidationError
from .playback import BitratePlan, PlaybackTimeline, SessionConfig

NUM_METRICS = 5


@dataclass(frozen=True)
class Metrics:
    mean_bitrate: float
    startup_fraction: float
    switch_fraction: float
    stall_count: float
    rebuffer_fraction: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (
            self.mean_bitrate,
            self.startup_fraction,
            self.switch_fraction,
            self.stall_count,
            self.rebuffer_fraction,
        )

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    def score(self, weights) -> float:
        return qoe_score(self, weights)


def validate_weights(weights, length: int = NUM_METRICS) -> tuple[float, ...]:
    """Coerce to a tuple of floats of the expected length."""
    w = tuple(float(x) for x in weights)
    if len(w) != length:
        raise ValidationError(f"expected {length} weights, got {len(w)}")
    for x in w:
        if not math.isfinite(x):
            raise ValidationError("weights must be finite")
    return w


def switch_fraction(levels) -> float:
    """Fraction of adjacent pairs that change ladder index (0 for one segment)."""
    n = len(levels)
    if n < 2:
        return 0.0
    switches = sum(1 for a, b in zip(levels, levels[1:]) if a != b)
    return switches / (n - 1)


def metrics_from_parts(bitrate_values, levels, baw_durations, stall_count,
                       video_length: float) -> Metrics:
    """Assemble the metric vector from raw session quantities.

    ``baw_durations`` lists every wait phase in order; the first one is the
    startup wait and the rest are rebuffering.
    """
    if not baw_durations:
        raise ValidationError("a session always has a startup wait")
    startup = baw_durations[0]
    rebuffer = sum(baw_durations[1:])
    return Metrics(
        mean_bitrate=sum(bitrate_values) / len(bitrate_values),
        startup_fraction=startup / video_length,
        switch_fraction=switch_fraction(levels),
        stall_count=float(stall_count),
        rebuffer_fraction=rebuffer / video_length,
    )


def compute_metrics(plan: BitratePlan, timeline: PlaybackTimeline,
                    cfg: SessionConfig) -> Metrics:
    """Score a finished session; an unfinished one has no defined metrics."""
    plan.validate_against(cfg)
    if timeline.incomplete:
        raise InfeasibleError(
            "the download did not finish within the trace; metrics are undefined"
        )
    return metrics_from_parts(
        plan.bitrates(cfg), plan.levels, timeline.baw_durations,
        timeline.stall_count, cfg.video_length,
    )


def qoe_score(metrics: Metrics, weights) -> float:
    w = validate_weights(weights)
    phi = metrics.as_tuple()
    return float(sum(wi * pi for wi, pi in zip(w, phi)))
