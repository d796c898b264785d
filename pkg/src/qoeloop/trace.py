"""Throughput traces: file formats, synthetic generation, and pool sampling.

A trace is a sequence of non-negative average throughput values in Mb/s, one
per time slot of fixed duration.  Two on-disk formats are supported:

* CSV: one decimal value per line (blank lines and ``#`` comments are
  skipped), slot duration supplied by the caller.
* JSON: ``{"slot_duration": <seconds>, "values": [...]}``.

Synthetic traces follow a first-order autoregressive recursion around a mean,
which gives stationary, positively correlated series resembling cellular
link measurements.  Values are clipped at a configurable floor; the clipped
value feeds back into the recursion so the series never leaves the valid
range.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import TraceFormatError, ValidationError


@dataclass(frozen=True)
class ThroughputTrace:
    """Per-slot average throughput in Mb/s over a finite horizon."""

    values: tuple[float, ...]
    slot_duration: float = 1.0
    trace_id: str = ""

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValidationError("trace must contain at least one slot")
        if not (self.slot_duration > 0.0 and math.isfinite(self.slot_duration)):
            raise ValidationError("slot_duration must be a positive finite number")
        vals = tuple(float(v) for v in self.values)
        for i, v in enumerate(vals):
            if not math.isfinite(v):
                raise ValidationError(f"non-finite throughput at record {i + 1}")
            if v < 0.0:
                raise ValidationError(f"negative throughput at record {i + 1}")
        object.__setattr__(self, "values", vals)

    @property
    def num_slots(self) -> int:
        return len(self.values)

    @property
    def duration(self) -> float:
        """Horizon covered by the trace in seconds."""
        return len(self.values) * self.slot_duration

    def mean(self) -> float:
        return sum(self.values) / len(self.values)


@dataclass(frozen=True)
class SyntheticTraceConfig:
    """Parameters of the autoregressive trace generator.

    ``volatility`` is the standard deviation of the per-slot innovation;
    the stationary standard deviation is volatility / sqrt(1 - correlation^2).
    """

    num_slots: int = 70
    mean: float = 2.0
    correlation: float = 0.9
    volatility: float = 0.5
    floor: float = 0.0
    slot_duration: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_slots < 1:
            raise ValidationError("num_slots must be at least 1")
        if not (self.mean > 0.0):
            raise ValidationError("mean throughput must be positive")
        if not (0.0 <= self.correlation < 1.0):
            raise ValidationError("correlation must lie in [0, 1)")
        if self.volatility < 0.0:
            raise ValidationError("volatility must be non-negative")
        if self.floor < 0.0:
            raise ValidationError("floor must be non-negative")
        if not (self.slot_duration > 0.0):
            raise ValidationError("slot_duration must be positive")


def generate_trace(cfg: SyntheticTraceConfig) -> ThroughputTrace:
    """Generate a synthetic trace; identical seeds give identical traces."""
    rng = np.random.default_rng(cfg.seed)
    rho = cfg.correlation
    if cfg.volatility == 0.0:
        values = [max(cfg.mean, cfg.floor)] * cfg.num_slots
        return ThroughputTrace(tuple(values), cfg.slot_duration, f"ar1-{cfg.seed}")
    stationary_sd = cfg.volatility / math.sqrt(1.0 - rho * rho)
    v = cfg.mean + stationary_sd * rng.standard_normal()
    values = []
    for _ in range(cfg.num_slots):
        v = max(v, cfg.floor)
        values.append(v)
        v = cfg.mean + rho * (v - cfg.mean) + cfg.volatility * rng.standard_normal()
    return ThroughputTrace(tuple(values), cfg.slot_duration, f"ar1-{cfg.seed}")


def generate_pool(
    size: int,
    seed: int = 0,
    num_slots: int = 70,
    mean_range: tuple[float, float] = (0.3, 6.0),
    correlation: float = 0.9,
    volatility_fraction: float = 0.3,
    floor: float = 0.0,
    slot_duration: float = 1.0,
) -> list[ThroughputTrace]:
    """Generate a pool of traces whose means are log-uniform over a range.

    The spread of means puts different traces in different quality regimes,
    which is what makes pool-driven experiments informative.
    """
    if size < 1:
        raise ValidationError("pool size must be at least 1")
    rng = np.random.default_rng(seed)
    lo, hi = mean_range
    if not (0.0 < lo <= hi):
        raise ValidationError("mean_range must be positive and ordered")
    pool = []
    for i in range(size):
        mean = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        child_seed = int(rng.integers(0, 2**31 - 1))
        cfg = SyntheticTraceConfig(
            num_slots=num_slots,
            mean=mean,
            correlation=correlation,
            volatility=volatility_fraction * mean,
            floor=floor,
            slot_duration=slot_duration,
            seed=child_seed,
        )
        trace = dataclasses.replace(generate_trace(cfg), trace_id=f"pool-{seed}-{i}")
        pool.append(trace)
    return pool


def sample_pool(pool, rng) -> ThroughputTrace:
    """Draw one trace uniformly at random; ``rng`` is a seed or Generator."""
    if len(pool) == 0:
        raise ValidationError("cannot sample from an empty pool")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    idx = int(rng.integers(0, len(pool)))
    return pool[idx]


def _format_of(path: str, fmt: str | None) -> str:
    if fmt is not None:
        return fmt
    ext = os.path.splitext(path)[1].lower()
    if ext == ".json":
        return "json"
    return "csv"


def load_trace(path: str, fmt: str | None = None, slot_duration: float = 1.0) -> ThroughputTrace:
    """Load a trace from a CSV or JSON file.

    Raises TraceFormatError on unparseable records (with 1-based index) and
    ValidationError on structurally valid but unacceptable content.
    """
    fmt = _format_of(path, fmt)
    if fmt == "json":
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(payload, dict) or "values" not in payload:
            raise TraceFormatError(f"{path}: expected an object with a 'values' array")
        values = payload["values"]
        if not isinstance(values, list):
            raise TraceFormatError(f"{path}: 'values' must be an array")
        parsed = []
        for i, v in enumerate(values):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise TraceFormatError(f"{path}: non-numeric value at record {i + 1}", record=i + 1)
            parsed.append(float(v))
        slot = payload.get("slot_duration", slot_duration)
        if not isinstance(slot, (int, float)) or isinstance(slot, bool):
            raise TraceFormatError(f"{path}: slot_duration must be a number")
        return ThroughputTrace(tuple(parsed), float(slot), payload.get("id", ""))
    if fmt != "csv":
        raise ValidationError(f"unknown trace format: {fmt}")
    values = []
    with open(path) as fh:
        record = 0
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            record += 1
            try:
                values.append(float(line))
            except ValueError as exc:
                raise TraceFormatError(
                    f"{path}: unparseable value {line!r} at record {record}", record=record
                ) from exc
    if not values:
        raise ValidationError(f"{path}: trace file contains no values")
    return ThroughputTrace(tuple(values), slot_duration)


def save_trace(trace: ThroughputTrace, path: str, fmt: str | None = None) -> None:
    """Write a trace so that a reload reproduces the exact float values."""
    fmt = _format_of(path, fmt)
    if fmt == "json":
        payload = {"slot_duration": trace.slot_duration, "values": list(trace.values)}
        if trace.trace_id:
            payload["id"] = trace.trace_id
        with open(path, "w") as fh:
            json.dump(payload, fh)
            fh.write("\n")
        return
    if fmt != "csv":
        raise ValidationError(f"unknown trace format: {fmt}")
    with open(path, "w") as fh:
        for v in trace.values:
            fh.write(repr(v) + "\n")
