"""Shared test helpers: a reproducible family of random planner instances.

Instances are deliberately small (4-8 segments, ladders of 1-3 rungs) so that
exhaustive search stays cheap while still exercising startup, switching,
stalls, and infeasibility.
"""

import numpy as np

from qoeloop import SessionConfig, ThroughputTrace

FULL_LADDER = (0.4, 0.75, 1.0, 2.5, 4.5)
MASTER_SEED = 20260814


def ar1_values(rng, num_slots, mean, correlation, sigma):
    """First-order autoregressive series around `mean`, clipped at zero."""
    value = mean
    out = []
    for _ in range(num_slots):
        value = mean + correlation * (value - mean) + rng.normal(0.0, sigma)
        out.append(max(float(value), 0.0))
    return tuple(out)


def make_instance(index, master_seed=MASTER_SEED):
    """Deterministic random instance number `index`: (trace, cfg, weights)."""
    rng = np.random.default_rng((master_seed, index))
    num_segments = int(rng.integers(4, 9))
    ladder_len = int(rng.integers(1, 4))
    start = int(rng.integers(0, len(FULL_LADDER) - ladder_len + 1))
    ladder = FULL_LADDER[start:start + ladder_len]
    prefetch = int(rng.integers(1, min(3, num_segments - 1) + 1))
    max_stalls = int(rng.integers(0, 2))
    cfg = SessionConfig(
        num_segments=num_segments,
        segment_duration=1.0,
        prefetch_segments=prefetch,
        ladder=ladder,
        max_stalls=max_stalls,
    )
    num_slots = int(rng.integers(3 * num_segments, 6 * num_segments + 1))
    mean = float(10.0 ** rng.uniform(np.log10(0.2), np.log10(8.0)))
    values = ar1_values(rng, num_slots, mean, 0.9, 0.3 * mean)
    trace = ThroughputTrace(values=values, slot_duration=1.0, trace_id=f"inst-{index}")
    magnitudes = 10.0 ** rng.uniform(-2.0, 1.0, size=5)
    weights = (
        float(magnitudes[0]),
        -float(magnitudes[1]),
        -float(magnitudes[2]),
        -float(magnitudes[3]),
        -float(magnitudes[4]),
    )
    return trace, cfg, weights


def instances(count, master_seed=MASTER_SEED):
    return [make_instance(i, master_seed) for i in range(count)]


def constant_trace(value, num_slots, slot_duration=1.0):
    return ThroughputTrace(values=(float(value),) * num_slots,
                           slot_duration=slot_duration)
