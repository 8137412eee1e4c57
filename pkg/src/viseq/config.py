"""TOML run configuration for the command-line tool.

Every key is optional; missing sections fall back to library defaults.

    seed = 7
    out_dir = "out"
    threads = 1

    [game]
    intercept_a = 40
    slope_a = -30
    intercept_b = 20
    slope_b = 60

    [scheme]                 # display used by `solve`
    kind = "exact"           # exact | binomial | frames
    sample_size = 30
    frame_count = 30
    round_counts = true

    [solver]
    method = "bisection"     # grid | bisection | damped | robbins_monro | all
    access = "public"
    vis_type = "bar"
    residual_tol = 1e-3

    [[population]]           # applies to every signal condition
    model = "logit"
    weight = 1.0
    params = { rationality = 10 }

    [populations."private.hops"]   # optional per-condition override
    ...

    [experiment]
    participants = 400

    [bootstrap]
    replications = 1000
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .behavior import (Access, BestResponder, BlockOrder, EmpiricalCoefficients, EmpiricalLogistic,
                       LevelK, LogitResponder, PayoffPrior, PopulationMixture, RandomChooser,
                       VisType, default_population)
from .errors import ViseqError
from .experiment import ExperimentConfig
from .game import CongestionGame, DEFAULT_GAME
from .signals import SchemeKind, SignalScheme
from .stats import BootstrapConfig


class ConfigError(ViseqError, ValueError):
    """Invalid configuration; the message names the offending key."""


SECTIONS = {"seed", "out_dir", "threads", "game", "scheme", "solver", "population",
            "populations", "experiment", "bootstrap", "analyze"}
SOLVER_METHODS = ("grid", "bisection", "damped", "robbins_monro", "all")


@dataclass(frozen=True)
class SolverSettings:
    method: str = "bisection"
    access: Access = Access.PUBLIC
    vis_type: VisType | None = None
    block_order: BlockOrder = BlockOrder.PUBLIC_FIRST
    tol: float = 1e-6
    resolution: float = 1e-4
    damping: float = 0.5
    max_iter: int = 10_000
    p0: float = 0.5
    iterations: int = 100_000
    a0: float = 1.0
    t0: float = 10.0
    residual_tol: float = 1e-3


@dataclass
class CliConfig:
    game: CongestionGame = DEFAULT_GAME
    scheme: SignalScheme = field(default_factory=SignalScheme)
    solver: SolverSettings = field(default_factory=SolverSettings)
    # None means the default strategy mixtures
    population: PopulationMixture | None = None
    overrides: dict = field(default_factory=dict)
    experiment: ExperimentConfig | None = None
    experiment_params: dict = field(default_factory=dict)
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    filter_attention: bool = False
    seed: int | None = None
    out_dir: str = "."
    threads: int = 1

    def population_for(self, access, vis_type):
        access = Access(access)
        for key in (f"{access.value}.{VisType(vis_type).value}" if vis_type else None,
                    access.value):
            if key in self.overrides:
                return self.overrides[key]
        if self.population is None:
            return default_population(access, vis_type)
        if access is Access.NO_INFO and self.population.reads_signal:
            return default_population(Access.NO_INFO)
        return self.population

    def experiment_config(self):
        params = dict(self.experiment_params)
        params.setdefault("seed", self.seed if self.seed is not None else 0)
        params.setdefault("threads", self.threads)
        try:
            return ExperimentConfig(**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"experiment: {exc}") from exc

    def require_seed(self):
        if self.seed is None:
            raise ConfigError("seed: this command is stochastic and needs --seed or a 'seed' key")
        return self.seed


def _enum(cls, value, key):
    try:
        return cls(value)
    except ValueError:
        allowed = ", ".join(e.value for e in cls)
        raise ConfigError(f"{key}: {value!r} is not one of {allowed}") from None


def _number(value, key, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int and value != int(value):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return kind(value)


def _table(raw, key):
    if not isinstance(raw, dict):
        raise ConfigError(f"{key}: expected a table")
    return raw


def _check_keys(raw, allowed, key):
    extra = sorted(set(raw) - set(allowed))
    if extra:
        raise ConfigError(f"{key}.{extra[0]}: unknown key")


def parse_game(raw):
    raw = _table(raw, "game")
    names = ("intercept_a", "slope_a", "intercept_b", "slope_b")
    _check_keys(raw, names, "game")
    base = DEFAULT_GAME.to_dict()
    vals = {k: _number(raw.get(k, base[k]), f"game.{k}") for k in names}
    return CongestionGame.from_coefficients(*(vals[k] for k in names))


def parse_scheme(raw):
    raw = _table(raw, "scheme")
    _check_keys(raw, ("kind", "sample_size", "frame_count", "round_counts"), "scheme")
    kind = _enum(SchemeKind, raw.get("kind", "exact"), "scheme.kind")
    try:
        return SignalScheme(kind, _number(raw.get("sample_size", 30), "scheme.sample_size", int),
                            _number(raw.get("frame_count", 30), "scheme.frame_count", int),
                            bool(raw.get("round_counts", True)))
    except ValueError as exc:
        raise ConfigError(f"scheme: {exc}") from exc


def parse_solver(raw):
    raw = _table(raw, "solver")
    names = [f.name for f in fields(SolverSettings)]
    _check_keys(raw, names, "solver")
    kw = {}
    for f in fields(SolverSettings):
        if f.name not in raw:
            continue
        v, key = raw[f.name], f"solver.{f.name}"
        if f.name == "method":
            if v not in SOLVER_METHODS:
                raise ConfigError(f"{key}: {v!r} is not one of {', '.join(SOLVER_METHODS)}")
        elif f.name == "access":
            v = _enum(Access, v, key)
        elif f.name == "vis_type":
            v = _enum(VisType, v, key)
        elif f.name == "block_order":
            v = _enum(BlockOrder, v, key)
        elif f.name in ("max_iter", "iterations"):
            v = _number(v, key, int)
        else:
            v = _number(v, key)
        kw[f.name] = v
    return SolverSettings(**kw)


def _model(spec, key):
    spec = _table(spec, key)
    _check_keys(spec, ("model", "params", "weight"), key)
    name = spec.get("model")
    params = dict(_table(spec.get("params", {}), f"{key}.params"))
    try:
        if name == "best_responder":
            return BestResponder(**params)
        if name == "random":
            return RandomChooser(**params)
        if name == "payoff_prior":
            return PayoffPrior(**params)
        if name == "logit":
            return LogitResponder(**params)
        if name == "level_k":
            base = params.pop("base", None)
            if base is not None:
                base = _model(base if "model" in base else {"model": base}, f"{key}.params.base")
            return LevelK(base=base, **params)
        if name == "empirical_logistic":
            return EmpiricalLogistic(EmpiricalCoefficients(**params))
    except TypeError as exc:
        raise ConfigError(f"{key}.params: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{key}.params: {exc}") from exc
    raise ConfigError(f"{key}.model: unknown model {name!r} (best_responder, random, "
                      f"payoff_prior, logit, level_k, empirical_logistic)")


def parse_population(raw, key="population"):
    if raw in ("default", "table1"):
        return None
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{key}: expected a nonempty list of {{model, params, weight}}")
    comps = [(_model(spec, f"{key}[{i}]"), _number(spec.get("weight", 1.0), f"{key}[{i}].weight"))
             for i, spec in enumerate(raw)]
    if any(w < 0 for _, w in comps) or sum(w for _, w in comps) <= 0:
        raise ConfigError(f"{key}: weights must be nonnegative with a positive sum")
    return PopulationMixture.normalized(comps)


def parse_overrides(raw):
    out = {}
    for cond, spec in _table(raw, "populations").items():
        parts = cond.split(".")
        if len(parts) > 2:
            raise ConfigError(f"populations.{cond}: expected 'access' or 'access.vis_type'")
        _enum(Access, parts[0], f"populations.{cond}")
        if len(parts) == 2:
            _enum(VisType, parts[1], f"populations.{cond}")
        out[cond] = parse_population(spec, f"populations.{cond}")
    return out


def parse_bootstrap(raw, seed):
    raw = _table(raw, "bootstrap")
    _check_keys(raw, ("group_size", "replications", "coverage"), "bootstrap")
    gs = raw.get("group_size", 30)
    try:
        return BootstrapConfig(
            group_size=None if gs in (None, "all") else _number(gs, "bootstrap.group_size", int),
            replications=_number(raw.get("replications", 1000), "bootstrap.replications", int),
            coverage=_number(raw.get("coverage", 0.95), "bootstrap.coverage"),
            seed=0 if seed is None else seed)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bootstrap: {exc}") from exc


def parse_experiment(raw):
    raw = dict(_table(raw, "experiment"))
    allowed = ("signals", "group_size", "participants", "vis_types", "block_orders",
               "llo_gamma", "llo_delta")
    _check_keys(raw, allowed, "experiment")
    for k in ("group_size", "participants"):
        if k in raw:
            raw[k] = _number(raw[k], f"experiment.{k}", int)
    for k in ("llo_gamma", "llo_delta"):
        if k in raw:
            raw[k] = _number(raw[k], f"experiment.{k}")
    if "vis_types" in raw:
        raw["vis_types"] = tuple(_enum(VisType, v, "experiment.vis_types") for v in raw["vis_types"])
    if "block_orders" in raw:
        raw["block_orders"] = tuple(_enum(BlockOrder, v, "experiment.block_orders")
                                    for v in raw["block_orders"])
    if "signals" in raw:
        raw["signals"] = tuple(_number(s, "experiment.signals") for s in raw["signals"])
    return raw


def from_mapping(raw):
    _check_keys(raw, SECTIONS, "config")
    seed = raw.get("seed")
    if seed is not None:
        seed = _number(seed, "seed", int)
        if seed < 0:
            raise ConfigError("seed: must be >= 0")
    threads = _number(raw.get("threads", 1), "threads", int)
    if threads < 1:
        raise ConfigError("threads: must be >= 1")
    analyze = _table(raw.get("analyze", {}), "analyze")
    _check_keys(analyze, ("filter_attention",), "analyze")
    return CliConfig(
        game=parse_game(raw.get("game", {})),
        scheme=parse_scheme(raw.get("scheme", {})),
        solver=parse_solver(raw.get("solver", {})),
        population=parse_population(raw["population"]) if "population" in raw else None,
        overrides=parse_overrides(raw.get("populations", {})),
        experiment_params=parse_experiment(raw.get("experiment", {})),
        bootstrap=parse_bootstrap(raw.get("bootstrap", {}), seed),
        filter_attention=bool(analyze.get("filter_attention", False)),
        seed=seed,
        out_dir=str(raw.get("out_dir", ".")),
        threads=threads,
    )


def load(path=None):
    if path is None:
        return from_mapping({})
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config: {exc}") from exc
    return from_mapping(raw)
