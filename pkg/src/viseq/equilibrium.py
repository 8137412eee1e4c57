"""Fixed points of display-then-respond maps.

A response map takes the predicted proportion ``p`` that is put on display
and returns the proportion that actually chooses A. A visualization
equilibrium is a ``p`` the map sends to itself.
"""
from __future__ import annotations

import inspect
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from . import kernels
from .behavior import (Access, BlockOrder, Context, MonteCarloConfig, VisType,
                       aggregate_response, default_vis_type, response_table)
from .errors import DegenerateSlope, MaxIterExceeded, OutsideUnitInterval
from .signals import SignalScheme


def _float_key(p):
    return struct.unpack("<Q", struct.pack("<d", float(p)))[0]


@dataclass
class ResponseMap:
    """``p -> population share at A`` for a fixed population, game and display.

    Sampled displays are integrated exactly over the binomial support unless
    ``mc`` is given, in which case each evaluation is a Monte-Carlo average
    whose random stream is derived from ``(mc.seed, p)`` alone.
    """

    population: object
    game: object
    scheme: SignalScheme
    access: Access = Access.PUBLIC
    vis_type: VisType | None = None
    block_order: BlockOrder = BlockOrder.PUBLIC_FIRST
    mc: MonteCarloConfig | None = None
    _table: tuple | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.access = Access(self.access)
        self.vis_type = VisType(self.vis_type or default_vis_type(self.scheme))
        self.block_order = BlockOrder(self.block_order)

    @property
    def context(self):
        return Context(self.access, self.vis_type, self.block_order)

    @property
    def is_noisy(self):
        return self.scheme.is_sampled and self.access is not Access.NO_INFO

    def table(self):
        if self._table is None:
            self._table = response_table(self.population, self.game, self.scheme, self.access,
                                         self.vis_type, self.block_order)
        return self._table

    def evaluate(self, p):
        """(value, standard error) at a single ``p``."""
        if self.is_noisy and self.mc is None:
            trials, tab = self.table()
            return float(binom.pmf(np.arange(trials + 1), trials, p) @ tab), 0.0
        mc = self.mc or MonteCarloConfig()
        if self.mc is not None:
            mc = MonteCarloConfig(self.mc.draws, int(np.random.SeedSequence(
                [self.mc.seed, _float_key(p)]).generate_state(1, np.uint64)[0]))
        return aggregate_response(self.population, self.game, self.scheme, float(p), self.access,
                                  mc, self.vis_type, self.block_order)

    def __call__(self, p):
        if np.ndim(p) == 0:
            return self.evaluate(p)[0]
        ps = np.asarray(p, dtype=float)
        if self.mc is not None:
            return np.array([self.evaluate(x)[0] for x in ps])
        if not self.is_noisy:
            d = self.scheme.displayed_exact(ps) if self.access is not Access.NO_INFO else None
            out = self.population.prob_a(self.game, d, self.context)
            return np.broadcast_to(np.asarray(out, dtype=float), ps.shape).copy()
        trials, tab = self.table()
        ks = np.arange(trials + 1)
        out = np.empty(ps.shape)
        flat = ps.ravel()
        res = out.ravel()
        for start in range(0, flat.size, 2048):
            chunk = flat[start:start + 2048]
            res[start:start + 2048] = binom.pmf(ks[None, :], trials, chunk[:, None]) @ tab
        return out

    def sample(self, p, rng):
        """One noisy evaluation: a single rendered display."""
        if not self.is_noisy:
            return self(p)
        trials, tab = self.table()
        return float(tab[rng.binomial(trials, p)])


@dataclass
class EquilibriumResult:
    p_star: float
    residual: float
    method: str
    iterations: int
    ci: tuple | None = None
    welfare: float | None = None
    brackets: tuple = ()
    converged: bool = True

    def __post_init__(self):
        if self.ci is not None:
            lo, hi = self.ci
            self.ci = (min(lo, self.p_star), max(hi, self.p_star))

    def to_dict(self):
        return {
            "p_star": self.p_star,
            "residual": self.residual,
            "method": self.method,
            "iterations": self.iterations,
            "ci": None if self.ci is None else list(self.ci),
            "welfare": self.welfare,
            "brackets": [list(b) for b in self.brackets],
            "converged": self.converged,
        }


def _welfare(game, S, p):
    game = game if game is not None else getattr(S, "game", None)
    return None if game is None else float(game.social_welfare(p))


def _evaluate_many(S, ps):
    try:
        vals = np.asarray(S(ps), dtype=float)
        return np.broadcast_to(vals, ps.shape).astype(float)
    except (TypeError, ValueError):
        return np.array([float(S(float(p))) for p in ps])


def unit_grid(resolution):
    n = int(math.floor(1.0 / resolution + 1e-9))
    grid = np.arange(n + 1) * resolution
    if grid[-1] < 1.0 - 1e-12:
        grid = np.append(grid, 1.0)
    return np.minimum(grid, 1.0)


def grid_scan(S, resolution=1e-3, game=None):
    """Grid point minimising ``|S(p) - p|`` (smallest p on ties).

    ``brackets`` lists every grid interval over which ``S(p) - p`` changes
    sign, so multiple equilibria are visible.
    """
    if not 0 < resolution <= 0.1:
        raise ValueError("resolution must lie in (0, 0.1]")
    grid = unit_grid(resolution)
    g = _evaluate_many(S, grid) - grid
    best = int(np.argmin(np.abs(g)))
    signs = np.sign(g)
    brackets = []
    for i in range(len(grid) - 1):
        if signs[i] == 0:
            brackets.append((float(grid[i]), float(grid[i])))
        elif signs[i] * signs[i + 1] < 0:
            brackets.append((float(grid[i]), float(grid[i + 1])))
    if signs[-1] == 0:
        brackets.append((float(grid[-1]), float(grid[-1])))
    p = float(grid[best])
    return EquilibriumResult(p, float(abs(g[best])), "grid", len(grid),
                             welfare=_welfare(game, S, p), brackets=tuple(brackets))


def bisection(S, tol=1e-6, max_iter=200, game=None):
    """Halve a bracket of ``g(p) = S(p) - p`` starting from [0, 1].

    The residual is reported at the midpoint; it can be large when S jumps
    across the final bracket.
    """
    lo, hi = 0.0, 1.0
    g_lo = float(S(lo)) - lo
    if g_lo == 0.0:
        return EquilibriumResult(0.0, 0.0, "bisection", 0, welfare=_welfare(game, S, 0.0))
    g_hi = float(S(hi)) - hi
    if g_hi == 0.0:
        return EquilibriumResult(1.0, 0.0, "bisection", 0, welfare=_welfare(game, S, 1.0))
    it = 0
    while hi - lo > tol:
        if it >= max_iter:
            mid = 0.5 * (lo + hi)
            res = EquilibriumResult(mid, abs(float(S(mid)) - mid), "bisection", it,
                                    welfare=_welfare(game, S, mid), converged=False)
            raise MaxIterExceeded(f"bracket width {hi - lo:.3g} > tol after {it} steps", res)
        it += 1
        mid = 0.5 * (lo + hi)
        g_mid = float(S(mid)) - mid
        if g_mid == 0.0:
            return EquilibriumResult(mid, 0.0, "bisection", it, welfare=_welfare(game, S, mid))
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    return EquilibriumResult(mid, abs(float(S(mid)) - mid), "bisection", it,
                             welfare=_welfare(game, S, mid))


def damped_iteration(S, damping=0.5, tol=1e-6, max_iter=10_000, p0=0.5, game=None):
    """Iterate ``p <- (1 - damping) p + damping S(p)`` until ``|S(p) - p| <= tol``.

    ``iterations`` counts updates, so a constant map with ``damping=1`` takes one.
    """
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    p = float(p0)
    best_p, best_res = p, math.inf
    for it in range(max_iter + 1):
        s = float(S(p))
        res = abs(s - p)
        if res < best_res:
            best_p, best_res = p, res
        if res <= tol:
            return EquilibriumResult(p, res, "damped", it, welfare=_welfare(game, S, p))
        if it == max_iter:
            break
        p = p + damping * (s - p)
    res = EquilibriumResult(best_p, best_res, "damped", max_iter,
                            welfare=_welfare(game, S, best_p), converged=False)
    raise MaxIterExceeded(f"no convergence in {max_iter} iterations", res)


def _takes_rng(fn):
    try:
        params = inspect.signature(fn).parameters.values()
    except (TypeError, ValueError):
        return False
    positional = [q for q in params if q.kind in (q.POSITIONAL_ONLY, q.POSITIONAL_OR_KEYWORD)]
    return len(positional) >= 2


def robbins_monro(S, iterations=100_000, a0=1.0, t0=10.0, seed=0, p0=0.5,
                  tail=0.5, batches=20, mean_map=None, game=None):
    """Stochastic approximation ``p <- clamp(p + a_t (S_hat(p) - p))``, ``a_t = a0 / (t + t0)``.

    ``S`` is a ResponseMap (one rendered display per step), a noisy callable
    ``S(p, rng)``, or a deterministic callable ``S(p)``. The estimate is the
    average of the final ``tail`` fraction of iterates; the interval comes
    from batch means over that tail. The residual is measured against
    ``mean_map`` (or the ResponseMap's exact expectation).
    """
    if a0 <= 0 or t0 < 1:
        raise ValueError("need a0 > 0 and t0 >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(S, ResponseMap) and S.is_noisy:
        trials, tab = S.table()
        iterates = kernels.robbins_monro_table(rng.random(iterations), tab, trials,
                                               float(p0), float(a0), float(t0))
        mean_map = mean_map or ResponseMap(S.population, S.game, S.scheme, S.access,
                                           S.vis_type, S.block_order)
    else:
        noisy = S.sample if hasattr(S, "sample") else S
        draw = noisy if _takes_rng(noisy) else (lambda p, _rng: noisy(p))
        iterates = np.empty(iterations)
        p = float(p0)
        for t in range(iterations):
            a = a0 / ((t + 1) + t0)
            p = min(1.0, max(0.0, p + a * (float(draw(p, rng)) - p)))
            iterates[t] = p
        if mean_map is None and not _takes_rng(noisy):
            mean_map = noisy

    start = int(iterations * (1.0 - tail))
    tail_iter = iterates[start:]
    p_star = float(tail_iter.mean())
    nb = min(batches, tail_iter.size)
    if nb >= 2:
        means = np.array([b.mean() for b in np.array_split(tail_iter, nb)])
        half = 1.959963984540054 * means.std(ddof=1) / math.sqrt(nb)
        ci = (max(0.0, p_star - half), min(1.0, p_star + half))
    else:
        ci = (p_star, p_star)

    if mean_map is not None:
        residual = abs(float(mean_map(p_star)) - p_star)
    else:
        check = np.random.default_rng([seed, 1])
        residual = abs(float(np.mean([draw(p_star, check) for _ in range(1000)])) - p_star)
    return EquilibriumResult(p_star, residual, "robbins_monro", iterations, ci=ci,
                             welfare=_welfare(game, S, p_star))


def fit_fixed_point_from_regression(a, b):
    """Where the fitted line ``a + b p`` crosses the identity: ``a / (1 - b)``."""
    if abs(1.0 - b) < 1e-9:
        raise DegenerateSlope(f"slope {b} is too close to 1; the fixed point is unidentified")
    p = a / (1.0 - b)
    if not 0.0 <= p <= 1.0:
        raise OutsideUnitInterval(f"fixed point {p:.6g} outside [0, 1]")
    return p


def equilibrium_report(game, result):
    """Welfare comparison of an equilibrium against Nash and the social optimum."""
    p = result.p_star if isinstance(result, EquilibriumResult) else float(result)
    nash = game.nash_proportion()
    opt = game.welfare_optimum()
    sw = float(game.social_welfare(p))
    sw_nash = float(game.social_welfare(nash))
    return {
        "p_star": p,
        "welfare": sw,
        "p_nash": nash,
        "welfare_nash": sw_nash,
        "p_opt": opt.proportion,
        "welfare_opt": opt.welfare,
        "welfare_gain_over_nash": sw - sw_nash,
    }
