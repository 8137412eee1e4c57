"""Visualization equilibria for a two-location congestion game."""
from .game import DEFAULT_GAME, AffinePayoff, CongestionGame, WelfarePoint
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["DEFAULT_GAME", "AffinePayoff", "CongestionGame", "WelfarePoint", "BACKEND"]
