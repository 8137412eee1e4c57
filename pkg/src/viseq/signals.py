"""Turning a predicted proportion into the evidence an agent sees.

Three display schemes are modelled: a static bar chart of exact counts, a
single binomial sample of prior decisions, and a HOPs-style sequence of
independent binomial frames.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoFrames


class SchemeKind(str, enum.Enum):
    EXACT = "exact"
    BINOMIAL = "binomial"
    FRAMES = "frames"


@dataclass(frozen=True)
class SignalScheme:
    kind: SchemeKind = SchemeKind.EXACT
    sample_size: int = 30
    frame_count: int = 30
    # Exact only. False shows p_hat itself (continuum display).
    round_counts: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")

    @property
    def is_sampled(self):
        return self.kind is not SchemeKind.EXACT

    @property
    def statistic_trials(self):
        """Number of Bernoulli trials behind the displayed proportion."""
        if self.kind is SchemeKind.FRAMES:
            return self.sample_size * self.frame_count
        return self.sample_size

    def render(self, p_hat, rng):
        return render(self, p_hat, rng)

    def displayed_exact(self, p_hat):
        """Displayed proportion of the Exact scheme; works on arrays."""
        if not self.round_counts:
            return p_hat
        return round_counts(p_hat, self.sample_size) / self.sample_size


def round_counts(p_hat, n):
    """``round(p_hat * n)`` with ties to even, robust to float noise at halves."""
    x = np.asarray(p_hat, dtype=float) * n
    halves = np.round(x * 2.0)
    on_half = np.abs(x * 2.0 - halves) < 1e-9
    x = np.where(on_half, halves / 2.0, x)
    out = np.round(x)  # numpy rounds half to even
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Signal:
    displayed_prop: float
    source_prediction: float
    n: int = 30
    frames: tuple | None = None

    def __post_init__(self):
        if not 0.0 <= self.displayed_prop <= 1.0:
            raise ValueError(f"displayed_prop {self.displayed_prop} outside [0, 1]")
        if self.frames is not None:
            frames = tuple((int(a), int(b)) for a, b in self.frames)
            for a, b in frames:
                if a < 0 or b < 0 or a + b != self.n:
                    raise ValueError(f"frame ({a}, {b}) does not sum to n={self.n}")
            object.__setattr__(self, "frames", frames)

    @property
    def counts(self):
        """(count_a, count_b) shown on a static chart."""
        a = int(round(self.displayed_prop * self.n))
        return a, self.n - a

    def to_json(self):
        return json.dumps({
            "prop": self.displayed_prop,
            "n": self.n,
            "frames": None if self.frames is None else [list(f) for f in self.frames],
            "p_hat": self.source_prediction,
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        frames = None if d["frames"] is None else tuple(tuple(f) for f in d["frames"])
        return cls(d["prop"], d["p_hat"], d["n"], frames)


def render(scheme: SignalScheme, p_hat: float, rng: np.random.Generator) -> Signal:
    if not 0.0 <= p_hat <= 1.0:
        raise ValueError(f"p_hat {p_hat} outside [0, 1]")
    n = scheme.sample_size
    if scheme.kind is SchemeKind.EXACT:
        return Signal(float(scheme.displayed_exact(p_hat)), p_hat, n)
    if scheme.kind is SchemeKind.BINOMIAL:
        k = int(rng.binomial(n, p_hat))
        return Signal(k / n, p_hat, n)
    ks = rng.binomial(n, p_hat, size=scheme.frame_count)
    frames = tuple((int(k), n - int(k)) for k in ks)
    return Signal(float(ks.sum()) / (n * scheme.frame_count), p_hat, n, frames)


def expected_proportion(signal: Signal) -> float:
    """The summary proportion an agent reads off the display."""
    if signal.frames:
        return math.fsum(a for a, _ in signal.frames) / (signal.n * len(signal.frames))
    return signal.displayed_prop


def frame_win_fraction(signal: Signal, game) -> float:
    """Share of frames in which A pays more than B (ties count one half)."""
    if not signal.frames:
        raise NoFrames("signal has no frame sequence")
    a = np.array([f[0] for f in signal.frames], dtype=float)
    diff = game.payoff_difference(a / signal.n)
    wins = np.where(np.isclose(diff, 0.0, atol=1e-9), 0.5, (diff > 0).astype(float))
    return float(wins.mean())
