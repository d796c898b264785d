"""Synthetic user-feedback oracle over delivered-quality vectors.

A feedback dataset ranks a grid of representative metric vectors by a
strict priority order — stalls dominate everything, then rebuffering time,
then (higher is better) mean bitrate, then startup delay, then switching —
and splits the ranking into equal-population categories.  Each category
carries a mean opinion score, linear from 5 for the best category down to
1 for the worst, and a small mean-matched score distribution on {1..5}
concentrated around that value.  Classifying a vector finds its category
by comparing its priority key against the category boundaries; sampling
draws an integer score from the category's distribution.
"""

from __future__ import annotations

import bisect
import itertools
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .metrics import Metrics, NUM_METRICS
from .playback import SessionConfig

logger = logging.getLogger(__name__)

SCORES = (1, 2, 3, 4, 5)


def ordering_key(phi) -> tuple[float, float, float, float, float]:
    """Priority key; lexicographically smaller is better quality.

    Stall count first, then rebuffer fraction, then negated mean bitrate,
    then startup fraction, then switch fraction.
    """
    if isinstance(phi, Metrics):
        phi = phi.as_tuple()
    phi = tuple(float(x) for x in phi)
    if len(phi) != NUM_METRICS:
        raise ValidationError(f"metric vectors have {NUM_METRICS} entries, got {len(phi)}")
    return (phi[3], phi[4], -phi[0], phi[1], phi[2])


def priority_weights(separation: float = 50.0) -> tuple[float, float, float, float, float]:
    """Weight vector realizing the dataset's priority order numerically.

    Each tier's magnitude is ``separation`` times the next one below it:
    stalls outweigh rebuffering, which outweighs quality, which outweighs
    startup delay, which outweighs switching.
    """
    if not (separation > 1.0):
        raise ValidationError("separation must exceed 1")
    s = float(separation)
    return (1.0, -1.0 / s, -1.0 / (s * s), -(s * s), -s)


def _score_distribution(mos: float) -> dict[int, float]:
    """Mean-matched unimodal mass on {1..5} centred at the category score."""
    if mos >= 5.0:
        return {5: 1.0}
    if mos <= 1.0:
        return {1: 1.0}
    low = int(math.floor(mos))
    frac = round(mos - low, 12)
    if frac == 0.0:
        return {low - 1: 0.1, low: 0.8, low + 1: 0.1}
    return {low: 1.0 - frac, low + 1: frac}


@dataclass(frozen=True)
class QoECategory:
    rank: int
    mos: float
    score_distribution: dict[int, float]

    def __post_init__(self):
        if self.rank < 1:
            raise ValidationError("category ranks are 1-based")
        if not (1.0 <= self.mos <= 5.0):
            raise ValidationError("category MOS must lie in [1, 5]")
        total = math.fsum(self.score_distribution.values())
        if abs(total - 1.0) > 1e-9:
            raise ValidationError("score distribution must sum to 1")
        mean = math.fsum(s * p for s, p in self.score_distribution.items())
        if abs(mean - self.mos) > 1e-9:
            raise ValidationError("score distribution mean must equal the MOS")
        for s, p in self.score_distribution.items():
            if s not in SCORES or p < 0.0:
                raise ValidationError("scores are integers 1..5 with non-negative mass")


@dataclass(frozen=True)
class FeedbackDataset:
    categories: tuple[QoECategory, ...]
    boundaries: tuple[tuple[float, float, float, float, float], ...]
    seed: int = 0

    def __post_init__(self):
        if len(self.categories) < 2:
            raise ValidationError("a dataset needs at least two categories")
        if len(self.boundaries) != len(self.categories):
            raise ValidationError("one boundary key per category is required")
        for a, b in zip(self.categories, self.categories[1:]):
            if b.mos > a.mos:
                raise ValidationError("MOS must be non-increasing in rank")
        for a, b in zip(self.boundaries, self.boundaries[1:]):
            if not a < b:
                raise ValidationError("boundary keys must strictly increase")

    @property
    def num_categories(self) -> int:
        return len(self.categories)

    def classify(self, phi) -> QoECategory:
        key = ordering_key(phi)
        idx = bisect.bisect_left(self.boundaries, key)
        if idx >= len(self.categories):
            logger.debug("metric key %s beyond modeled worst; clamped", key)
            idx = len(self.categories) - 1
        return self.categories[idx]

    def mos_of(self, phi) -> float:
        return self.classify(phi).mos

    def sample_score(self, phi, rng) -> int:
        category = self.classify(phi)
        u = rng.random()
        acc = 0.0
        support = sorted(category.score_distribution.items())
        for score, mass in support:
            acc += mass
            if u < acc:
                return score
        return support[-1][0]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "ordering": "stalls, rebuffer fraction, -mean bitrate, startup fraction, switch fraction",
            "categories": [
                {
                    "rank": c.rank,
                    "mos": c.mos,
                    "distribution": {str(s): p for s, p in sorted(c.score_distribution.items())},
                }
                for c in self.categories
            ],
            "boundaries": [list(b) for b in self.boundaries],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeedbackDataset":
        categories = tuple(
            QoECategory(
                rank=int(c["rank"]),
                mos=float(c["mos"]),
                score_distribution={int(s): float(p) for s, p in c["distribution"].items()},
            )
            for c in data["categories"]
        )
        boundaries = tuple(tuple(float(x) for x in b) for b in data["boundaries"])
        return cls(categories=categories, boundaries=boundaries, seed=int(data.get("seed", 0)))


def build_dataset(num_categories: int = 10, cfg: SessionConfig | None = None,
                  seed: int = 0, quality_points: int = 6, fraction_points: int = 6,
                  stall_levels: int = 3) -> FeedbackDataset:
    """Construct the procedural dataset over a grid of reachable vectors.

    The grid spans the ladder's bitrate range, startup/rebuffer/switch
    fractions in [0, 1], and stall counts 0..stall_levels-1.  Vectors are
    ranked by the priority key, split into equal-population categories
    (earlier categories take the remainder), and each category's boundary
    is the worst key it contains.  Construction is deterministic; the seed
    is carried only so downstream score sampling runs are labelled.
    """
    if num_categories < 2:
        raise ValidationError("num_categories must be at least 2")
    if quality_points < 2 or fraction_points < 2 or stall_levels < 1:
        raise ValidationError("grid needs >= 2 quality/fraction points and >= 1 stall level")
    cfg = cfg or SessionConfig()
    quality = np.linspace(cfg.ladder[0], cfg.ladder[-1], quality_points)
    fractions = np.linspace(0.0, 1.0, fraction_points)
    stalls = range(stall_levels)
    keys = sorted(
        (float(s), float(f5), -float(q), float(f2), float(f3))
        for q, f2, f3, s, f5 in itertools.product(
            quality, fractions, fractions, stalls, fractions)
    )
    n = len(keys)
    if num_categories > n:
        raise ValidationError(
            f"cannot split {n} grid vectors into {num_categories} categories"
        )
    base, extra = divmod(n, num_categories)
    categories = []
    boundaries = []
    start = 0
    for rank in range(1, num_categories + 1):
        size = base + (1 if rank <= extra else 0)
        chunk = keys[start:start + size]
        start += size
        mos = 5.0 - 4.0 * (rank - 1) / (num_categories - 1)
        categories.append(QoECategory(
            rank=rank, mos=mos, score_distribution=_score_distribution(mos)))
        boundaries.append(chunk[-1])
    return FeedbackDataset(tuple(categories), tuple(boundaries), seed=seed)


def classify(phi, ds: FeedbackDataset) -> QoECategory:
    """Deterministically map a metric vector to its category."""
    return ds.classify(phi)


def sample_score(phi, ds: FeedbackDataset, rng) -> int:
    """Draw an integer score 1..5 from the vector's category distribution."""
    return ds.sample_score(phi, rng)


def save_dataset(ds: FeedbackDataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ds.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> FeedbackDataset:
    with open(path, "r", encoding="utf-8") as fh:
        return FeedbackDataset.from_dict(json.load(fh))
