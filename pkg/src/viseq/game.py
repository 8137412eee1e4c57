"""Two-location non-atomic congestion game with affine payoffs.

Both payoffs are written as functions of ``p``, the proportion of agents
choosing location A. The default instance pays ``40 - 30 p`` at A and
``20 + 60 p`` at B.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NoInteriorEquilibrium, NotConcave


@dataclass(frozen=True)
class AffinePayoff:
    intercept: float
    slope: float

    def __post_init__(self):
        if not (math.isfinite(self.intercept) and math.isfinite(self.slope)):
            raise ValueError("payoff coefficients must be finite")

    def __call__(self, p):
        return self.intercept + self.slope * p


class WelfarePoint(NamedTuple):
    proportion: float
    welfare: float


@dataclass(frozen=True)
class CongestionGame:
    payoff_a: AffinePayoff
    payoff_b: AffinePayoff

    @classmethod
    def from_coefficients(cls, intercept_a, slope_a, intercept_b, slope_b):
        return cls(AffinePayoff(float(intercept_a), float(slope_a)),
                   AffinePayoff(float(intercept_b), float(slope_b)))

    def to_dict(self):
        return {
            "intercept_a": self.payoff_a.intercept,
            "slope_a": self.payoff_a.slope,
            "intercept_b": self.payoff_b.intercept,
            "slope_b": self.payoff_b.slope,
        }

    @property
    def is_congestible(self):
        return self.payoff_a.slope < 0 < self.payoff_b.slope

    def payoff_difference(self, p):
        """``U_A(p) - U_B(p)``; positive means A pays more."""
        return self.payoff_a(p) - self.payoff_b(p)

    def nash_proportion(self):
        """The unique interior indifference point.

        Raises ``NoInteriorEquilibrium`` when the payoffs are not congestible
        or the indifference point falls outside [0, 1].
        """
        a, b = self.payoff_a, self.payoff_b
        if not self.is_congestible:
            raise NoInteriorEquilibrium(
                f"need slope_a < 0 < slope_b, got slope_a={a.slope}, slope_b={b.slope}")
        p = (a.intercept - b.intercept) / (b.slope - a.slope)
        if not 0.0 <= p <= 1.0:
            raise NoInteriorEquilibrium(f"indifference point {p:.6g} lies outside [0, 1]")
        return p

    def welfare_coefficients(self):
        """(constant, linear, quadratic) coefficients of the welfare polynomial in p."""
        a, b = self.payoff_a, self.payoff_b
        return (b.intercept,
                a.intercept - b.intercept + b.slope,
                a.slope - b.slope)

    def social_welfare(self, p):
        """Average payoff ``p U_A(p) + (1 - p) U_B(p)``. Accepts arrays."""
        return p * self.payoff_a(p) + (1 - p) * self.payoff_b(p)

    def welfare_optimum(self):
        c0, c1, c2 = self.welfare_coefficients()
        if c2 >= 0:
            raise NotConcave(
                f"welfare is not concave: quadratic coefficient slope_a - slope_b = {c2:g}")
        p = min(1.0, max(0.0, -c1 / (2.0 * c2)))
        return WelfarePoint(p, self.social_welfare(p))

    def welfare_curve(self, step=0.01):
        grid = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
        return grid, self.social_welfare(grid)


DEFAULT_GAME = CongestionGame.from_coefficients(40.0, -30.0, 20.0, 60.0)
