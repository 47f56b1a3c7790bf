"""Closed-form model of the generate-verify loop and its Monte Carlo
validator.

The system draws designs that are correct with probability x; the
verifier accepts correct designs with probability a (true positive) and
incorrect ones with probability b (false positive), and rejects with
c = 1 - b (true negative) and d = 1 - a (false negative).  Rates are
conditioned on design correctness, which makes a + d = 1 and b + c = 1.

The accept-on-first-pass success rate has the closed form
x*a / (x*a + (1-x)*b); it exceeds x exactly when a > b.  The loop's
exhaustion fallback (after N consecutive rejections, sample one attempt
uniformly) shifts the finite-N rate; both quantities are reported and the
Monte Carlo simulation validates them empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput

_Z99 = 2.5758293035489004  # two-sided 99% normal quantile


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0  # verifier accepted a correct design
    fp: int = 0  # verifier accepted an incorrect design
    tn: int = 0  # verifier rejected an incorrect design
    fn: int = 0  # verifier rejected a correct design

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class AnalyticParams:
    x: float          # generator success rate
    a: float          # P(accept | correct)
    b: float          # P(accept | incorrect)
    c: float | None = None  # P(reject | incorrect); defaults to 1 - b
    d: float | None = None  # P(reject | correct); defaults to 1 - a

    def __post_init__(self):
        object.__setattr__(self, "c", 1.0 - self.b if self.c is None else self.c)
        object.__setattr__(self, "d", 1.0 - self.a if self.d is None else self.d)
        for name in ("x", "a", "b", "c", "d"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def from_confusion(cls, counts: ConfusionCounts, x: float) -> "AnalyticParams":
        """Derive the conditional rates from observed counts.

        Guarantees a + d = 1 and b + c = 1 (to rounding) by construction.
        """
        correct = counts.tp + counts.fn
        incorrect = counts.fp + counts.tn
        if correct == 0 or incorrect == 0:
            raise DegenerateInput(
                "confusion matrix needs at least one correct and one incorrect design")
        return cls(
            x=x,
            a=counts.tp / correct,
            b=counts.fp / incorrect,
            c=counts.tn / incorrect,
            d=counts.fn / correct,
        )


def sys_success_rate(p: AnalyticParams) -> float:
    """Probability that the first accepted design is correct:
    x*a / (x*a + (1-x)*b)."""
    numerator = p.x * p.a
    denominator = p.x * p.a + (1.0 - p.x) * p.b
    if denominator == 0.0:
        raise DegenerateInput(
            f"x*a + (1-x)*b = 0 for x={p.x}, a={p.a}, b={p.b}")
    return numerator / denominator


def feedback_true_rate(p: AnalyticParams) -> float:
    """c - d: how much more often rejection feedback is right than wrong
    (negative when false negatives dominate)."""
    return p.c - p.d


def finite_horizon_success_rate(p: AnalyticParams, n_attempts: int) -> float:
    """Success rate including the exhaustion fallback after *n_attempts*
    consecutive rejections (uniform sample over the rejected attempts).

    Converges to :func:`sys_success_rate` as n_attempts grows whenever
    some design is eventually accepted.
    """
    if n_attempts < 1:
        raise DegenerateInput("n_attempts must be >= 1")
    p_acc_correct = p.x * p.a
    p_acc = p.x * p.a + (1.0 - p.x) * p.b
    q = 1.0 - p_acc  # per-attempt rejection probability
    if p_acc == 0.0:
        # never accepts: always exhausts; a sampled design is correct iff drawn correct
        return p.x
    if q == 0.0:
        return p_acc_correct / p_acc
    accepted_mass = p_acc_correct * (1.0 - q ** n_attempts) / (1.0 - q)
    correct_given_rejected = p.x * (1.0 - p.a) / q
    return accepted_mass + q ** n_attempts * correct_given_rejected


@dataclass(frozen=True)
class MonteCarloResult:
    rate: float
    half_width: float  # 99% normal-approximation half width
    trials: int
    seed: int


def monte_carlo_system(p: AnalyticParams, n_attempts: int, trials: int,
                       seed: int = 0) -> MonteCarloResult:
    """Simulate the three-rule loop per trial and return the empirical
    success rate with its 99% half-width.

    Rules: output the first accepted design; on rejection regenerate;
    after n_attempts consecutive rejections sample one attempt uniformly.
    """
    if trials < 1:
        raise DegenerateInput("trials must be >= 1")
    if n_attempts < 1:
        raise DegenerateInput("n_attempts must be >= 1")
    rng = np.random.default_rng(seed)
    correct = rng.random((trials, n_attempts)) < p.x
    accept_prob = np.where(correct, p.a, p.b)
    accepted = rng.random((trials, n_attempts)) < accept_prob

    any_accepted = accepted.any(axis=1)
    first_accepted = accepted.argmax(axis=1)
    sampled = rng.integers(0, n_attempts, size=trials)
    rows = np.arange(trials)
    chosen = np.where(any_accepted, first_accepted, sampled)
    outcome_correct = correct[rows, chosen]

    rate = float(outcome_correct.mean())
    half = _Z99 * math.sqrt(max(rate * (1.0 - rate), 0.0) / trials)
    return MonteCarloResult(rate=rate, half_width=half, trials=trials, seed=seed)
