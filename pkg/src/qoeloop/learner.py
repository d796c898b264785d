"""Linear score model and its mini-batch gradient-descent trainer.

The model is a single linear unit: a five-weight vector scores a metric
vector by inner product.  Training minimizes the mean half-squared error
over a batch of (metrics, score) samples.

The trainer wraps plain gradient descent in a step-size bracket.  Each
round picks the bracket midpoint as the step size and descends for up to
``max_steps`` steps.  If the loss dropped below the target the run
converged.  If it merely decreased, the round counts as slow convergence
and the bracket's lower end is raised to try bolder steps.  Otherwise the
round diverged: the weights roll back to the round's starting point and
the bracket's upper end is lowered.  The bracket keeps narrowing until
convergence, until its width falls under ``mu``, or until a safety cap on
rounds — without the cap a run whose loss keeps creeping downward would
never exit when the bracket is too wide for the width test to bite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .metrics import NUM_METRICS, Metrics, validate_weights

SCORE_MIN = 1.0
SCORE_MAX = 5.0


def _phi_tuple(phi) -> tuple[float, ...]:
    if isinstance(phi, Metrics):
        return phi.as_tuple()
    values = tuple(float(x) for x in phi)
    if len(values) != NUM_METRICS:
        raise ValidationError(f"metric vectors have {NUM_METRICS} entries, got {len(values)}")
    return values


@dataclass(frozen=True)
class TrainingSample:
    """One (metric vector, user score) pair."""

    metrics: tuple[float, ...]
    score: float

    def __post_init__(self):
        object.__setattr__(self, "metrics", _phi_tuple(self.metrics))
        score = float(self.score)
        if not (SCORE_MIN <= score <= SCORE_MAX):
            raise ValidationError(
                f"score {score} outside the feedback scale [{SCORE_MIN}, {SCORE_MAX}]"
            )
        object.__setattr__(self, "score", score)


@dataclass(frozen=True)
class LearnerConfig:
    epsilon: float = 1e-6
    mu: float = 1e-4
    max_steps: int = 200
    alpha_min: float = 1e-4
    alpha_max: float = 1.0
    init_scale: float = 1e-3
    max_rounds: int = 500

    def __post_init__(self):
        if not (self.epsilon > 0.0):
            raise ValidationError("epsilon must be positive")
        if not (self.mu > 0.0):
            raise ValidationError("mu must be positive")
        if self.max_steps < 1:
            raise ValidationError("max_steps must be at least 1")
        if not (0.0 < self.alpha_min < self.alpha_max):
            raise ValidationError("the step bracket needs 0 < alpha_min < alpha_max")
        if not (self.init_scale > 0.0):
            raise ValidationError("init_scale must be positive")
        if self.max_rounds < 1:
            raise ValidationError("max_rounds must be at least 1")


@dataclass(frozen=True)
class TrainResult:
    weights: tuple[float, ...]
    converged: bool
    steps: int
    final_loss: float
    rounds: int


def _batch_arrays(batch):
    if len(batch) == 0:
        raise ValidationError("the training batch must not be empty")
    phi = np.array([s.metrics for s in batch], dtype=float)
    scores = np.array([s.score for s in batch], dtype=float)
    return phi, scores


def predict(weights, phi) -> float:
    """Model output for one metric vector: the plain inner product."""
    w = validate_weights(weights)
    p = _phi_tuple(phi)
    return float(sum(wi * pi for wi, pi in zip(w, p)))


def sample_loss(weights, sample: TrainingSample) -> float:
    """Half squared error on one sample."""
    err = predict(weights, sample.metrics) - sample.score
    return 0.5 * err * err


def batch_loss(weights, batch) -> float:
    """Mean of the sample losses."""
    phi, scores = _batch_arrays(batch)
    w = np.asarray(validate_weights(weights), dtype=float)
    err = phi @ w - scores
    return float(0.5 * np.mean(err * err))


def gradient(weights, batch) -> np.ndarray:
    """Analytic gradient of the batch loss with respect to the weights."""
    phi, scores = _batch_arrays(batch)
    w = np.asarray(validate_weights(weights), dtype=float)
    err = phi @ w - scores
    return phi.T @ err / len(batch)


def initial_weights(cfg: LearnerConfig, seed: int = 0) -> np.ndarray:
    """Small random starting point, uniform in ±init_scale per component."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-cfg.init_scale, cfg.init_scale, size=NUM_METRICS)


def train(batch, cfg: LearnerConfig | None = None, w0=None,
          seed: int = 0) -> TrainResult:
    """Fit the weight vector to the batch by bracketed gradient descent."""
    cfg = cfg or LearnerConfig()
    phi, scores = _batch_arrays(batch)
    m = len(batch)
    if w0 is not None:
        w = np.asarray(validate_weights(w0), dtype=float)
    else:
        w = initial_weights(cfg, seed)

    def loss_of(vec):
        err = phi @ vec - scores
        return float(0.5 * np.mean(err * err))

    lo, hi = cfg.alpha_min, cfg.alpha_max
    loss = loss_of(w)
    steps = 0
    rounds = 0
    converged = False
    # An overly large step can overshoot through inf before the non-finite
    # check catches it; those transient overflows are expected, not errors.
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            rounds += 1
            alpha = 0.5 * (lo + hi)
            checkpoint = w.copy()
            start_loss = loss
            inner = 0
            while True:
                grad = phi.T @ (phi @ w - scores) / m
                w = w - alpha * grad
                inner += 1
                steps += 1
                loss = loss_of(w)
                if (not math.isfinite(loss) or loss <= cfg.epsilon
                        or inner >= cfg.max_steps):
                    break
            if math.isfinite(loss) and loss <= cfg.epsilon:
                converged = True
                break
            if math.isfinite(loss) and loss < start_loss:
                lo = min(2.0 * lo, hi * (1.0 - cfg.mu))
            else:
                # Diverged (or went non-finite): discard the round's movement.
                w = checkpoint
                loss = start_loss
                hi = max(hi / 2.0, lo * (1.0 + cfg.mu))
            if hi - lo <= cfg.mu or rounds >= cfg.max_rounds:
                break
    return TrainResult(
        weights=tuple(float(x) for x in w),
        converged=converged,
        steps=steps,
        final_loss=loss,
        rounds=rounds,
    )


def project_signs(weights) -> tuple[float, ...]:
    """Clamp to the usual sign convention: reward up, penalties down.

    The trainer itself is unconstrained; callers that need a planner-ready
    vector (non-negative quality weight, non-positive penalty weights) can
    apply this projection afterwards.
    """
    w = validate_weights(weights)
    return (max(w[0], 0.0),) + tuple(min(x, 0.0) for x in w[1:])


def load_batch(path) -> list[TrainingSample]:
    """Read samples from a JSON-lines file of {phi1..phi5, score} objects."""
    samples = []
    keys = [f"phi{i}" for i in range(1, NUM_METRICS + 1)]
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                phi = tuple(float(obj[k]) for k in keys)
                score = float(obj["score"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"sample {lineno}: {exc}") from exc
            samples.append(TrainingSample(phi, score))
    if not samples:
        raise ValidationError(f"no samples found in {path}")
    return samples


def save_batch(batch, path) -> None:
    """Write samples as JSON lines, one {phi1..phi5, score} object each."""
    with open(path, "w", encoding="utf-8") as fh:
        for sample in batch:
            obj = {f"phi{i + 1}": sample.metrics[i] for i in range(NUM_METRICS)}
            obj["score"] = sample.score
            fh.write(json.dumps(obj) + "\n")
