"""Fluid playback-buffer simulation for sequential segment download.

Model conventions
-----------------
The buffer is measured in seconds of stored content.  Segments are fetched
strictly in order and the downloader never idles: while slot ``k`` delivers
throughput ``r`` and segment ``s`` (encoded at ``b`` Mb/s) is in flight,
content is appended at ``r / b`` seconds of video per wall second, crossing
segment boundaries at each segment's own bitrate.  Playback, once started,
drains exactly one second of content per wall second.

A session alternates between two phases:

* buffer-and-wait: playback is paused until the buffer holds the prefetch
  amount (``prefetch_segments`` segments' worth of content, or everything
  that remains when fewer segments are left near the end of the video);
* buffer-and-play: content plays out while download continues.

The session starts in buffer-and-wait; the duration of that first wait is
the startup delay.  If the buffer runs empty while playing and the download
has not finished, a stall occurs and a new wait phase begins.  Event times
(phase switches, stalls, segment completions) are resolved in continuous
time inside slots, so reported durations are exact real numbers rather than
slot counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError
from .trace import ThroughputTrace

_INF = math.inf


@dataclass(frozen=True)
class SessionConfig:
    """Static description of one streaming session.

    ``frame_rate`` only documents how many frames one segment carries; the
    simulation itself works in seconds of content.
    """

    num_segments: int = 30
    segment_duration: float = 1.0
    prefetch_segments: int = 5
    ladder: tuple[float, ...] = (0.4, 0.75, 1.0, 2.5, 4.5)
    max_stalls: int = 1
    frame_rate: float = 30.0

    def __post_init__(self):
        if self.num_segments < 2:
            raise ValidationError("a session needs at least two segments")
        if not (self.segment_duration > 0.0):
            raise ValidationError("segment_duration must be positive")
        if not (1 <= self.prefetch_segments < self.num_segments):
            raise ValidationError("prefetch_segments must satisfy 1 <= x0 < num_segments")
        if len(self.ladder) < 1:
            raise ValidationError("the bitrate ladder must not be empty")
        ladder = tuple(float(b) for b in self.ladder)
        for b in ladder:
            if not (b > 0.0 and math.isfinite(b)):
                raise ValidationError("ladder bitrates must be positive finite numbers")
        if any(b2 <= b1 for b1, b2 in zip(ladder, ladder[1:])):
            raise ValidationError("ladder bitrates must be strictly increasing")
        if self.max_stalls < 0:
            raise ValidationError("max_stalls must be non-negative")
        if not (self.frame_rate > 0.0):
            raise ValidationError("frame_rate must be positive")
        object.__setattr__(self, "ladder", ladder)

    @property
    def num_levels(self) -> int:
        return len(self.ladder)

    @property
    def video_length(self) -> float:
        """Total content duration in seconds."""
        return self.num_segments * self.segment_duration

    @property
    def frames_per_segment(self) -> float:
        return self.frame_rate * self.segment_duration

    def bitrate(self, level: int) -> float:
        """Bitrate value in Mb/s for a 1-based ladder index."""
        if not (1 <= level <= len(self.ladder)):
            raise ValidationError(f"ladder index {level} outside [1, {len(self.ladder)}]")
        return self.ladder[level - 1]


@dataclass(frozen=True)
class BitratePlan:
    """One 1-based ladder index per segment, in playback order."""

    levels: tuple[int, ...]

    def __post_init__(self):
        if len(self.levels) == 0:
            raise ValidationError("a plan must cover at least one segment")
        levels = tuple(int(l) for l in self.levels)
        for l in levels:
            if l < 1:
                raise ValidationError("ladder indices are 1-based and must be >= 1")
        object.__setattr__(self, "levels", levels)

    def __len__(self) -> int:
        return len(self.levels)

    def validate_against(self, cfg: SessionConfig) -> None:
        if len(self.levels) != cfg.num_segments:
            raise ValidationError(
                f"plan covers {len(self.levels)} segments, session has {cfg.num_segments}"
            )
        top = cfg.num_levels
        for i, l in enumerate(self.levels):
            if l > top:
                raise ValidationError(f"segment {i + 1} uses ladder index {l} > {top}")

    def bitrates(self, cfg: SessionConfig) -> tuple[float, ...]:
        return tuple(cfg.ladder[l - 1] for l in self.levels)


class _StreamEvents:
    """Raw event record produced by the fluid engine."""

    __slots__ = (
        "complete", "stalled", "download_end", "playback_end",
        "baw_durations", "bap_starts", "stall_times", "stall_contents",
        "seg_finish", "pending_baw_start", "horizon",
        "slot_buffers", "slot_phases", "slot_fills",
    )

    def __init__(self, horizon):
        self.complete = False
        self.stalled = False
        self.download_end = None
        self.playback_end = None
        self.baw_durations = []
        self.bap_starts = []
        self.stall_times = []
        self.stall_contents = []
        self.seg_finish = []
        self.pending_baw_start = None
        self.horizon = horizon
        self.slot_buffers = None
        self.slot_phases = None
        self.slot_fills = None


def _stream(bitrates, segment_duration, rates, slot_duration, prefetch_segments,
            start_time=0.0, collect_slots=False, stop_on_stall=False):
    """Run the fluid model and return the event record.

    ``bitrates`` are Mb/s values per segment (not ladder indices).  The
    trace is indexed from absolute time zero, so a window that begins
    mid-session passes its wall-clock ``start_time``.  With
    ``stop_on_stall`` the engine returns at the first stall, which is all a
    zero-stall feasibility probe needs.
    """
    n_seg = len(bitrates)
    n_slots = len(rates)
    total = n_seg * segment_duration
    horizon = n_slots * slot_duration
    ev = _StreamEvents(horizon)
    if collect_slots:
        if start_time != 0.0:
            raise ValidationError("slot collection is only supported from time zero")
        ev.slot_buffers, ev.slot_phases, ev.slot_fills = [], [], []

    t = start_time
    j = int(t / slot_duration)
    seg = 0
    bits_left = bitrates[0] * segment_duration
    dl = 0.0            # content seconds appended so far
    played = 0.0
    baw = True
    baw_start = t
    target = min(prefetch_segments * segment_duration, total)

    # per-slot sampling state
    phase_at_slot_start = "baw"
    dl_at_slot_start = 0.0

    while j < n_slots:
        r = rates[j]
        fill = r / bitrates[seg] if r > 0.0 else 0.0
        slot_end = (j + 1) * slot_duration
        dt_slot = slot_end - t
        dt_seg = bits_left / r if r > 0.0 else _INF
        if baw:
            gap = target - (dl - played)
            dt_evt = gap / fill if fill > 0.0 else _INF
            if dt_evt < 0.0:
                dt_evt = 0.0
        else:
            buffer = dl - played
            dt_evt = buffer / (1.0 - fill) if fill < 1.0 else _INF
            if dt_evt < 0.0:
                dt_evt = 0.0
        dt = dt_slot
        if dt_seg < dt:
            dt = dt_seg
        if dt_evt < dt:
            dt = dt_evt

        if dt > 0.0:
            if fill > 0.0:
                bits_left -= r * dt
                dl += fill * dt
            if not baw:
                played += dt
            t += dt

        # segment boundary first: it may finish the download
        if dt == dt_seg:
            seg += 1
            dl = seg * segment_duration
            ev.seg_finish.append(t)
            if seg == n_seg:
                ev.complete = True
                ev.download_end = t
                break
            bits_left = bitrates[seg] * segment_duration

        if baw:
            if dl - played >= target or dt == dt_evt:
                ev.baw_durations.append(t - baw_start)
                ev.bap_starts.append(t)
                baw = False
        elif dt == dt_evt and dt < dt_seg and dt < dt_slot:
            # Buffer ran dry while playing: stall, then wait again.  If the
            # dry point coincides with a segment or slot boundary the fill
            # rate changes right there, so the verdict is deferred one
            # iteration: a zero buffer only stalls if it keeps draining.
            played = dl
            ev.stall_times.append(t)
            ev.stall_contents.append(played)
            if stop_on_stall:
                ev.stalled = True
                return ev
            baw = True
            baw_start = t
            target = min(prefetch_segments * segment_duration, total - played)

        if dt == dt_slot:
            t = slot_end
            if collect_slots:
                ev.slot_buffers.append(dl - played)
                ev.slot_phases.append(phase_at_slot_start)
                ev.slot_fills.append(dl - dl_at_slot_start)
                phase_at_slot_start = "baw" if baw else "bap"
                dl_at_slot_start = dl
            j += 1

    if not ev.complete:
        if baw:
            ev.pending_baw_start = baw_start
        return ev

    # download finished: any pending wait ends now (the whole remainder is
    # buffered, which meets the capped prefetch target), then pure drain
    if baw:
        ev.baw_durations.append(ev.download_end - baw_start)
        ev.bap_starts.append(ev.download_end)
    ev.playback_end = ev.download_end + (total - played)

    if collect_slots:
        end = ev.playback_end
        while j * slot_duration < end:
            slot_end = (j + 1) * slot_duration
            drained = min(slot_end, end) - ev.download_end
            if drained < 0.0:
                drained = 0.0
            buffer = total - (played + drained)
            if buffer < 0.0:
                buffer = 0.0
            ev.slot_buffers.append(buffer)
            ev.slot_phases.append(phase_at_slot_start)
            ev.slot_fills.append(dl - dl_at_slot_start)
            phase_at_slot_start = "bap"
            dl_at_slot_start = dl
            j += 1
    return ev


@dataclass
class PlaybackTimeline:
    """Everything observable about one simulated session.

    ``buffer_levels[k]`` samples the buffer at the end of slot ``k`` while
    ``phases[k]`` records the phase in effect as slot ``k`` begins.
    ``slot_fills[k]`` is the content appended during slot ``k``.
    """

    slot_duration: float
    buffer_levels: list[float]
    phases: list[str]
    slot_fills: list[float]
    bap_start_times: list[float]
    baw_durations: list[float]
    stall_times: list[float]
    stall_positions: list[int]
    segment_finish_times: list[float]
    download_complete_time: float | None
    download_complete_slot: int | None
    playback_end_time: float | None
    incomplete: bool
    segments_remaining: int
    trace_horizon: float

    @property
    def stall_count(self) -> int:
        return len(self.stall_times)

    @property
    def startup_delay(self) -> float | None:
        return self.baw_durations[0] if self.baw_durations else None

    def to_dict(self) -> dict:
        return {
            "slot_duration": self.slot_duration,
            "buffer_levels": list(self.buffer_levels),
            "phases": list(self.phases),
            "slot_fills": list(self.slot_fills),
            "bap_start_times": list(self.bap_start_times),
            "baw_durations": list(self.baw_durations),
            "stall_times": list(self.stall_times),
            "stall_positions": list(self.stall_positions),
            "stall_count": self.stall_count,
            "segment_finish_times": list(self.segment_finish_times),
            "download_complete_time": self.download_complete_time,
            "download_complete_slot": self.download_complete_slot,
            "playback_end_time": self.playback_end_time,
            "incomplete": self.incomplete,
            "segments_remaining": self.segments_remaining,
        }


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    complete: bool
    stall_count: int
    max_stalls: int

    @property
    def stalls(self) -> int:
        return self.stall_count

    @property
    def incomplete(self) -> bool:
        return not self.complete


def _stall_positions(stall_contents, segment_duration):
    # 1-based index of the segment the player was about to consume
    return [int(c / segment_duration) + 1 for c in stall_contents]


def _slot_of(time, slot_duration):
    slot = int(time / slot_duration)
    if slot > 0 and slot * slot_duration == time:
        slot -= 1
    return slot


def simulate(plan: BitratePlan, trace: ThroughputTrace, cfg: SessionConfig) -> PlaybackTimeline:
    """Play the plan against the trace and return the full timeline."""
    plan.validate_against(cfg)
    ev = _stream(
        plan.bitrates(cfg), cfg.segment_duration, trace.values, trace.slot_duration,
        cfg.prefetch_segments, collect_slots=True,
    )
    return PlaybackTimeline(
        slot_duration=trace.slot_duration,
        buffer_levels=ev.slot_buffers,
        phases=ev.slot_phases,
        slot_fills=ev.slot_fills,
        bap_start_times=ev.bap_starts,
        baw_durations=ev.baw_durations,
        stall_times=ev.stall_times,
        stall_positions=_stall_positions(ev.stall_contents, cfg.segment_duration),
        segment_finish_times=ev.seg_finish,
        download_complete_time=ev.download_end,
        download_complete_slot=(
            _slot_of(ev.download_end, trace.slot_duration) if ev.complete else None
        ),
        playback_end_time=ev.playback_end,
        incomplete=not ev.complete,
        segments_remaining=cfg.num_segments - len(ev.seg_finish),
        trace_horizon=ev.horizon,
    )


def check_feasibility(plan: BitratePlan, trace: ThroughputTrace, cfg: SessionConfig,
                      max_stalls: int | None = None) -> FeasibilityReport:
    """Does the plan download in time and stay within the stall budget?"""
    plan.validate_against(cfg)
    limit = cfg.max_stalls if max_stalls is None else max_stalls
    ev = _stream(
        plan.bitrates(cfg), cfg.segment_duration, trace.values, trace.slot_duration,
        cfg.prefetch_segments,
    )
    stalls = len(ev.stall_times)
    return FeasibilityReport(
        feasible=ev.complete and stalls <= limit,
        complete=ev.complete,
        stall_count=stalls,
        max_stalls=limit,
    )
