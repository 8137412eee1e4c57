"""Behavioral response rules: from (game, displayed signal, access) to P(choose A).

Every model exposes ``prob_a(game, d, ctx)`` where ``d`` is the displayed
proportion at A (scalar or array, ``None`` when nothing is shown). All of
them read the display only through that summary, which lets sampled schemes
be integrated exactly over the binomial support.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .errors import SignalRequired
from .signals import SchemeKind, SignalScheme, expected_proportion


class Access(str, enum.Enum):
    NO_INFO = "noinfo"
    PRIVATE = "private"
    PUBLIC = "public"


class VisType(str, enum.Enum):
    BAR = "bar"
    HOPS = "hops"


class BlockOrder(str, enum.Enum):
    PUBLIC_FIRST = "public_first"
    PRIVATE_FIRST = "private_first"


@dataclass(frozen=True)
class Context:
    access: Access = Access.PUBLIC
    vis_type: VisType = VisType.BAR
    block_order: BlockOrder = BlockOrder.PUBLIC_FIRST


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def best_response(game, q):
    """1 where A pays more at proportion ``q``, 0 where B does, 0.5 on ties."""
    diff = np.asarray(game.payoff_difference(np.asarray(q, dtype=float)))
    return np.where(np.abs(diff) <= 1e-12, 0.5, (diff > 0).astype(float))


def _shape_like(d, value):
    if d is None:
        return np.float64(value)
    return np.full(np.shape(d), value, dtype=float) if np.ndim(d) else np.float64(value)


@dataclass(frozen=True)
class BestResponder:
    reads_signal = True

    def prob_a(self, game, d, ctx):
        return best_response(game, d)


@dataclass(frozen=True)
class RandomChooser:
    reads_signal = False

    def prob_a(self, game, d, ctx):
        return _shape_like(d, 0.5)


@dataclass(frozen=True)
class PayoffPrior:
    """Best responds to a fixed belief about p, whatever the display says."""

    prior_belief: float = 0.5
    reads_signal = False

    def __post_init__(self):
        if not 0.0 <= self.prior_belief <= 1.0:
            raise ValueError("prior_belief must lie in [0, 1]")

    def prob_a(self, game, d, ctx):
        return _shape_like(d, float(best_response(game, self.prior_belief)))


@dataclass(frozen=True)
class LogitResponder:
    rationality: float = 1.0
    reads_signal = True

    def __post_init__(self):
        if self.rationality < 0:
            raise ValueError("rationality must be >= 0")

    def prob_a(self, game, d, ctx):
        return _sigmoid(self.rationality * game.payoff_difference(np.asarray(d, dtype=float)))


@dataclass(frozen=True)
class LevelK:
    """Level 0 applies ``base`` to the display; level k best responds to a
    population playing level k-1.

    ``base=None`` picks BestResponder when a signal is shown and PayoffPrior
    otherwise.
    """

    level: int = 1
    base: object = None

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")

    @property
    def reads_signal(self):
        return self.base is not None and self.base.reads_signal

    def resolved_base(self, d):
        if self.base is not None:
            return self.base
        return PayoffPrior() if d is None else BestResponder()

    def prob_a(self, game, d, ctx):
        q = self.resolved_base(d).prob_a(game, d, ctx)
        for _ in range(self.level):
            q = best_response(game, q)
        return q


@dataclass(frozen=True)
class EmpiricalCoefficients:
    """Log-odds of choosing the displayed higher-payoff location."""

    intercept: float = 0.41
    hops: float = -0.33
    public: float = -0.41
    hops_public_interaction: float = 0.12
    abs_payoff_diff: float = 0.02
    b_is_higher: float = 0.76
    block_order: float = 0.0

    def as_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class EmpiricalLogistic:
    coefficients: EmpiricalCoefficients = field(default_factory=EmpiricalCoefficients)
    reads_signal = True

    def linear_predictor(self, game, d, ctx):
        c = self.coefficients
        diff = game.payoff_difference(np.asarray(d, dtype=float))
        hops = float(ctx.vis_type is VisType.HOPS)
        public = float(ctx.access is Access.PUBLIC)
        private_first = float(ctx.block_order is BlockOrder.PRIVATE_FIRST)
        return (c.intercept + c.hops * hops + c.public * public
                + c.hops_public_interaction * hops * public
                + c.abs_payoff_diff * np.abs(diff)
                + c.b_is_higher * (diff < 0)
                + c.block_order * private_first)

    def prob_best_respond(self, game, d, ctx):
        return _sigmoid(self.linear_predictor(game, d, ctx))

    def prob_a(self, game, d, ctx):
        diff = np.asarray(game.payoff_difference(np.asarray(d, dtype=float)))
        p_br = self.prob_best_respond(game, d, ctx)
        return np.where(np.abs(diff) <= 1e-12, 0.5, np.where(diff > 0, p_br, 1.0 - p_br))


def llo_weight(p, gamma, delta):
    """Linear-in-log-odds distortion: logit(w) = gamma * logit(p) + ln(delta)."""
    if gamma <= 0 or delta <= 0:
        raise ValueError("gamma and delta must be positive")
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p must lie in [0, 1]")
    num = delta * p ** gamma
    out = num / (num + (1.0 - p) ** gamma)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LLOReporter:
    """Distorts reported probabilities; does not choose locations."""

    gamma: float = 0.6
    delta: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0 or self.delta <= 0:
            raise ValueError("gamma and delta must be positive")

    def report(self, p):
        return llo_weight(p, self.gamma, self.delta)


AgentModel = BestResponder | RandomChooser | PayoffPrior | LogitResponder | LevelK | EmpiricalLogistic


@dataclass(frozen=True)
class PopulationMixture:
    components: tuple

    def __post_init__(self):
        comps = tuple((m, float(w)) for m, w in self.components)
        if not comps:
            raise ValueError("a population needs at least one component")
        if any(w < 0 for _, w in comps):
            raise ValueError("mixture weights must be nonnegative")
        total = sum(w for _, w in comps)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {total}, not 1")
        for m, _ in comps:
            if isinstance(m, LLOReporter) or not hasattr(m, "prob_a"):
                raise TypeError(f"{m!r} is not a choice model")
        object.__setattr__(self, "components", comps)

    @classmethod
    def of(cls, model):
        return cls(((model, 1.0),))

    @classmethod
    def normalized(cls, components):
        components = tuple(components)
        total = sum(w for _, w in components)
        return cls(tuple((m, w / total) for m, w in components))

    @property
    def reads_signal(self):
        return any(m.reads_signal for m, _ in self.components)

    @property
    def weights(self):
        return tuple(w for _, w in self.components)

    def prob_a(self, game, d, ctx):
        total = 0.0
        for m, w in self.components:
            if w:
                total = total + w * np.asarray(m.prob_a(game, d, ctx), dtype=float)
        return total


def _context(access, vis_type, block_order, signal=None):
    access = Access(access)
    if vis_type is None:
        vis_type = VisType.HOPS if signal is not None and signal.frames else VisType.BAR
    return Context(access, VisType(vis_type), BlockOrder(block_order))


def choose_prob_a(model, game, signal, access, vis_type=None,
                  block_order=BlockOrder.PUBLIC_FIRST):
    """Probability that an agent following ``model`` chooses A.

    ``model`` may also be a PopulationMixture. ``vis_type=None`` infers HOPs
    from the presence of frames.
    """
    if isinstance(model, LLOReporter):
        raise TypeError("LLOReporter distorts reports and has no choice rule")
    access = Access(access)
    if access is Access.NO_INFO and signal is not None:
        raise ValueError("no-information trials carry no signal")
    if signal is None and model.reads_signal:
        raise SignalRequired(f"{type(model).__name__} needs a displayed signal")
    ctx = _context(access, vis_type, block_order, signal)
    d = None if signal is None else expected_proportion(signal)
    return float(model.prob_a(game, d, ctx))


@dataclass(frozen=True)
class MonteCarloConfig:
    draws: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.draws < 1:
            raise ValueError("draws must be >= 1")


def default_vis_type(scheme):
    return VisType.HOPS if scheme.kind is SchemeKind.FRAMES else VisType.BAR


def response_table(pop, game, scheme: SignalScheme, access, vis_type=None,
                   block_order=BlockOrder.PUBLIC_FIRST):
    """P(A) at every displayable proportion of a sampled scheme.

    Returns ``(trials, values)`` with ``values[k]`` the response when the
    display shows ``k / trials``.
    """
    ctx = Context(Access(access), VisType(vis_type or default_vis_type(scheme)),
                  BlockOrder(block_order))
    trials = scheme.statistic_trials
    d = np.arange(trials + 1) / trials
    return trials, np.broadcast_to(np.asarray(pop.prob_a(game, d, ctx), dtype=float),
                                   d.shape).copy()


def aggregate_response(pop, game, scheme: SignalScheme, p_hat, access,
                       mc: MonteCarloConfig = MonteCarloConfig(), vis_type=None,
                       block_order=BlockOrder.PUBLIC_FIRST):
    """Population share choosing A when ``p_hat`` is displayed through ``scheme``.

    Returns ``(proportion, standard_error)``. Exact displays and no-information
    trials are evaluated in closed form with zero standard error; sampled
    displays are averaged over ``mc.draws`` rendered signals.
    """
    if not 0.0 <= p_hat <= 1.0:
        raise ValueError(f"p_hat {p_hat} outside [0, 1]")
    access = Access(access)
    ctx = Context(access, VisType(vis_type or default_vis_type(scheme)), BlockOrder(block_order))
    if access is Access.NO_INFO:
        if pop.reads_signal:
            raise SignalRequired("population contains signal-reading models")
        return float(pop.prob_a(game, None, ctx)), 0.0
    if not scheme.is_sampled:
        return float(pop.prob_a(game, scheme.displayed_exact(p_hat), ctx)), 0.0

    rng = np.random.default_rng(mc.seed)
    n = scheme.sample_size
    if scheme.kind is SchemeKind.BINOMIAL:
        d = rng.binomial(n, p_hat, size=mc.draws) / n
    else:
        ks = rng.binomial(n, p_hat, size=(mc.draws, scheme.frame_count))
        d = ks.sum(axis=1) / (n * scheme.frame_count)
    values = np.broadcast_to(np.asarray(pop.prob_a(game, d, ctx), dtype=float), d.shape)
    se = float(values.std(ddof=1) / np.sqrt(mc.draws)) if mc.draws > 1 else float("nan")
    return float(values.mean()), se


def expected_response(pop, game, scheme: SignalScheme, p_hat, access, vis_type=None,
                      block_order=BlockOrder.PUBLIC_FIRST):
    """Exact expectation of the aggregate response over the sampling distribution."""
    if not scheme.is_sampled or Access(access) is Access.NO_INFO:
        return aggregate_response(pop, game, scheme, p_hat, access, vis_type=vis_type,
                                  block_order=block_order)[0]
    trials, table = response_table(pop, game, scheme, access, vis_type, block_order)
    return float(binom.pmf(np.arange(trials + 1), trials, p_hat) @ table)


# Strategy frequencies reported for the public setting; rows are not
# mutually exclusive, so they are renormalised.
STRATEGY_WEIGHTS = {
    None: {"payoff_prior": 0.61, "level_k": 0.28, "random": 0.11},
    VisType.BAR: {"best_responder": 0.42, "level_k": 0.32, "payoff_prior": 0.15, "random": 0.09},
    VisType.HOPS: {"best_responder": 0.53, "level_k": 0.24, "payoff_prior": 0.15, "random": 0.06},
}


def default_population(access, vis_type=None):
    access = Access(access)
    if access is Access.NO_INFO or vis_type is None:
        w = STRATEGY_WEIGHTS[None]
        return PopulationMixture.normalized([
            (PayoffPrior(), w["payoff_prior"]),
            (LevelK(1, PayoffPrior()), w["level_k"]),
            (RandomChooser(), w["random"]),
        ])
    w = STRATEGY_WEIGHTS[VisType(vis_type)]
    if access is Access.PRIVATE:
        # nobody else sees a private display; anticipation collapses to best responding
        return PopulationMixture.normalized([
            (BestResponder(), w["best_responder"] + w["level_k"]),
            (PayoffPrior(), w["payoff_prior"]),
            (RandomChooser(), w["random"]),
        ])
    return PopulationMixture.normalized([
        (BestResponder(), w["best_responder"]),
        (LevelK(1, BestResponder()), w["level_k"]),
        (PayoffPrior(), w["payoff_prior"]),
        (RandomChooser(), w["random"]),
    ])
