"""Synthetic experiments, CSV ingestion, payoffs, and the analysis pipeline.

Each participant plays two blocks of ten trials (one block public, one
private, order counterbalanced). A block opens with a no-information trial
followed by the nine signals in random order.
"""
from __future__ import annotations

import csv
import functools
import json
import logging
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .behavior import (Access, BlockOrder, Context, LLOReporter, PopulationMixture, VisType,
                       choose_prob_a,
                       default_population)
from .equilibrium import EquilibriumResult, fit_fixed_point_from_regression
from .errors import (CellTooSmall, DegenerateSlope, EmptyInput, MissingSignal,
                     OutsideUnitInterval, ParseError, SchemaError)
from .game import DEFAULT_GAME
from .signals import SchemeKind, SignalScheme, expected_proportion
from .stats import (BootstrapConfig, bootstrap_proportion, ground_truth_prob, logistic_fit,
                    ols_fit, percentile_interval)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("participant_id", "vis_type", "access", "block_order", "trial_index",
               "signal_prop", "choice", "prob_estimate", "payoff", "strategy_text")
CELL_COLUMNS = ("vis_type", "access", "signal_prop", "proportion_a", "ci_lo", "ci_hi", "n")
DEFAULT_SIGNALS = tuple(round(0.10 + 0.05 * i, 2) for i in range(9))
TRIALS_PER_BLOCK = 10
EQ4_TERMS = ("intercept", "hops", "public", "hops:public", "abs_payoff_diff", "b_is_higher",
             "block_order")


@dataclass(frozen=True)
class TrialRecord:
    participant_id: int
    vis_type: VisType
    access: Access
    block_order: BlockOrder
    trial_index: int
    signal_prop: float | None
    choice: str
    prob_estimate: float
    payoff: float | None = None
    strategy_text: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "vis_type", VisType(self.vis_type))
        object.__setattr__(self, "access", Access(self.access))
        object.__setattr__(self, "block_order", BlockOrder(self.block_order))
        if self.access is Access.NO_INFO:
            raise ValueError("record access is the block's access: private or public")
        if self.choice not in ("A", "B"):
            raise ValueError(f"choice must be 'A' or 'B', got {self.choice!r}")
        if not 0.0 <= self.prob_estimate <= 100.0:
            raise ValueError(f"prob_estimate {self.prob_estimate} outside [0, 100]")
        if self.signal_prop is not None and not 0.0 <= self.signal_prop <= 1.0:
            raise ValueError(f"signal_prop {self.signal_prop} outside [0, 1]")

    @property
    def has_signal(self):
        return self.signal_prop is not None


def higher_location(game, p):
    """Location the displayed proportion says pays more, or None on a tie."""
    diff = game.payoff_difference(p)
    if abs(diff) <= 1e-12:
        return None
    return "A" if diff > 0 else "B"


def best_responded(record, game=DEFAULT_GAME):
    if not record.has_signal:
        return None
    hi = higher_location(game, record.signal_prop)
    return None if hi is None else int(record.choice == hi)


@dataclass(frozen=True)
class ExperimentConfig:
    signals: tuple = DEFAULT_SIGNALS
    group_size: int = 30
    participants: int = 400
    vis_types: tuple = (VisType.BAR, VisType.HOPS)
    block_orders: tuple = (BlockOrder.PUBLIC_FIRST, BlockOrder.PRIVATE_FIRST)
    seed: int = 0
    llo_gamma: float = 0.6
    llo_delta: float = 1.0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "signals", tuple(float(s) for s in self.signals))
        object.__setattr__(self, "vis_types", tuple(VisType(v) for v in self.vis_types))
        object.__setattr__(self, "block_orders", tuple(BlockOrder(b) for b in self.block_orders))
        if not self.signals or any(not 0.0 <= s <= 1.0 for s in self.signals):
            raise ValueError("signals must be a nonempty list within [0, 1]")
        if self.group_size < 1:
            raise ValueError("group_size must be >= 1")
        if self.participants < self.group_size:
            raise ValueError(f"participants ({self.participants}) must be >= group_size "
                             f"({self.group_size})")
        if not self.vis_types or not self.block_orders:
            raise ValueError("need at least one vis type and one block order")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


DEFAULT_SCHEMES = {VisType.BAR: SignalScheme(SchemeKind.EXACT),
                   VisType.HOPS: SignalScheme(SchemeKind.FRAMES)}


def _population_lookup(populations):
    if populations is None:
        return default_population
    if hasattr(populations, "prob_a"):
        # one model for every signal trial; no-info trials use the default mixture
        pop = populations if isinstance(populations, PopulationMixture) \
            else PopulationMixture.of(populations)

        def single(access, vis_type):
            if Access(access) is Access.NO_INFO and pop.reads_signal:
                return default_population(Access.NO_INFO)
            return pop
        return single
    if callable(populations):
        return populations

    def lookup(access, vis_type):
        key = (VisType(vis_type) if vis_type is not None else None, Access(access))
        if key in populations:
            return populations[key]
        if Access(access) is Access.NO_INFO:
            for (v, a), pop in populations.items():
                if a is Access.NO_INFO and (v is None or v is key[0]):
                    return pop
            return default_population(Access.NO_INFO)
        raise KeyError(f"no population configured for {key}")
    return lookup


@functools.lru_cache(maxsize=4096)
def _truth(game, choice, d, n):
    return ground_truth_prob(game, choice, d, n)


def _simulate_participant(pid, cfg, lookup, game, schemes, reporter):
    rng = np.random.default_rng([cfg.seed, pid])
    vis = cfg.vis_types[pid % len(cfg.vis_types)]
    order = cfg.block_orders[(pid // len(cfg.vis_types)) % len(cfg.block_orders)]
    blocks = ((Access.PUBLIC, Access.PRIVATE) if order is BlockOrder.PUBLIC_FIRST
              else (Access.PRIVATE, Access.PUBLIC))
    scheme = schemes[vis]
    out = []
    for b, access in enumerate(blocks):
        base = b * TRIALS_PER_BLOCK
        pop = lookup(Access.NO_INFO, vis)
        p_a = float(pop.prob_a(game, None, Context(Access.NO_INFO, vis, order)))
        choice = "A" if rng.random() < p_a else "B"
        out.append(TrialRecord(pid, vis, access, order, base, None, choice,
                               100.0 * reporter.report(0.5)))
        pop = lookup(access, vis)
        for j, s_idx in enumerate(rng.permutation(len(cfg.signals))):
            p_hat = cfg.signals[s_idx]
            signal = scheme.render(p_hat, rng)
            p_a = choose_prob_a(pop, game, signal, access, vis, order)
            choice = "A" if rng.random() < p_a else "B"
            conf = _truth(game, choice, expected_proportion(signal), scheme.sample_size)
            out.append(TrialRecord(pid, vis, access, order, base + 1 + j, p_hat, choice,
                                   100.0 * reporter.report(conf)))
    return out


def _cell_seed(seed, *key):
    return [seed, zlib.crc32(repr(key).encode())]


def simulate_experiment(cfg: ExperimentConfig, populations=None, game=DEFAULT_GAME,
                        schemes=None):
    """Synthetic trial records with payoffs, deterministic given ``cfg.seed``.

    ``populations`` maps ``(vis_type, access)`` to a PopulationMixture (use
    ``Access.NO_INFO`` for no-information trials) or is a callable
    ``(access, vis_type) -> PopulationMixture``; unset means the default
    strategy mixtures. Participants draw from independent streams keyed by
    ``(seed, participant_id)``, so the thread count never changes the output.
    """
    lookup = _population_lookup(populations)
    schemes = {**DEFAULT_SCHEMES, **(schemes or {})}
    reporter = LLOReporter(cfg.llo_gamma, cfg.llo_delta)
    sim = functools.partial(_simulate_participant, cfg=cfg, lookup=lookup, game=game,
                            schemes=schemes, reporter=reporter)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            per_participant = list(pool.map(sim, range(cfg.participants)))
    else:
        per_participant = [sim(pid) for pid in range(cfg.participants)]
    records = [r for rs in per_participant for r in rs]
    return assign_payoffs(records, game, cfg.group_size, cfg.seed)


def assign_payoffs(records, game=DEFAULT_GAME, n=30, seed=0):
    """Private signal trials against binomial draws; public trials against grouped peers."""
    out = list(records)
    for i, rec in enumerate(out):
        if rec.access is Access.PRIVATE and rec.has_signal:
            rng = np.random.default_rng(_cell_seed(seed, "private", rec.participant_id,
                                                   rec.trial_index))
            out[i] = replace(rec, payoff=compute_private_payoff(game, rec, n, rng))
    cells = {}
    for i, rec in enumerate(out):
        if rec.access is Access.PUBLIC:
            cells.setdefault((rec.vis_type.value, rec.signal_prop), []).append(i)
    for key in sorted(cells, key=lambda k: (k[0], -1.0 if k[1] is None else k[1])):
        idx = cells[key]
        if len(idx) < n:
            log.warning("public cell %s has %d records (< %d); payoffs left empty", key, len(idx), n)
            continue
        rng = np.random.default_rng(_cell_seed(seed, "public", *key))
        paid = compute_public_payoffs([out[i] for i in idx], game, n, rng)
        for i, rec in zip(idx, paid):
            out[i] = rec
    return out


def _payoff_at(game, choice, q):
    return float(game.payoff_a(q) if choice == "A" else game.payoff_b(q))


def compute_private_payoff(game, record, n, rng):
    """Payoff against ``n - 1`` binomial draws at the shown proportion, the
    participant being the n-th member."""
    if not record.has_signal:
        raise MissingSignal("private payoffs need the displayed proportion")
    k = int(rng.binomial(n - 1, record.signal_prop))
    q = (k + (record.choice == "A")) / n
    return _payoff_at(game, record.choice, q)


def compute_public_payoffs(records, game, n, rng):
    """Partition a cell into groups of ``n`` and pay each member at the group's share.

    The last short group is topped up by sampling other members of the cell;
    those fillers count toward the share but are not re-paid. Records are
    returned in input order.
    """
    records = list(records)
    if len(records) < n:
        raise CellTooSmall(f"cell has {len(records)} records, need at least {n}")
    perm = rng.permutation(len(records))
    paid = [None] * len(records)
    for start in range(0, len(records), n):
        members = perm[start:start + n]
        group = list(members)
        if len(group) < n:
            others = np.setdiff1d(perm, members)
            group += list(rng.choice(others, size=n - len(group), replace=False))
        q = sum(records[j].choice == "A" for j in group) / n
        for j in members:
            paid[j] = replace(records[j], payoff=_payoff_at(game, records[j].choice, q))
    return paid


# -- CSV ------------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    if hasattr(x, "value"):
        return x.value
    return str(x)


def export_csv(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def _parse_float(raw, row, col, lo=None, hi=None, optional=False):
    if raw == "":
        if optional:
            return None
        raise ParseError(row, col, "missing value")
    try:
        x = float(raw)
    except ValueError:
        raise ParseError(row, col, f"not a number: {raw!r}") from None
    if not math.isfinite(x):
        raise ParseError(row, col, f"not finite: {raw!r}")
    if (lo is not None and x < lo) or (hi is not None and x > hi):
        raise ParseError(row, col, f"{x} outside [{lo}, {hi}]")
    return x


def _parse_int(raw, row, col):
    try:
        v = int(raw)
    except ValueError:
        raise ParseError(row, col, f"not an integer: {raw!r}") from None
    if v < 0:
        raise ParseError(row, col, "must be >= 0")
    return v


def _parse_enum(enum_cls, raw, row, col, allowed=None):
    try:
        v = enum_cls(raw)
    except ValueError:
        v = None
    if v is None or (allowed is not None and v not in allowed):
        names = [e.value for e in (allowed or enum_cls)]
        raise ParseError(row, col, f"{raw!r} not one of {names}")
    return v


_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


def ingest_csv(path, filter_attention=False):
    """Parse and validate an experiment CSV. Rows are numbered from 1 after the header.

    With ``filter_attention`` set, rows whose optional ``passed_checks``
    column is false are dropped.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing columns: {', '.join(missing)}")
        has_checks = "passed_checks" in header
        out = []
        for row_no, row in enumerate(reader, start=1):
            if None in row:
                raise ParseError(row_no, "<extra>", "more fields than header columns")
            if any(row[c] is None for c in CSV_COLUMNS):
                raise ParseError(row_no, next(c for c in CSV_COLUMNS if row[c] is None),
                                 "row is truncated")
            rec = TrialRecord(
                participant_id=_parse_int(row["participant_id"], row_no, "participant_id"),
                vis_type=_parse_enum(VisType, row["vis_type"], row_no, "vis_type"),
                access=_parse_enum(Access, row["access"], row_no, "access",
                                   (Access.PRIVATE, Access.PUBLIC)),
                block_order=_parse_enum(BlockOrder, row["block_order"], row_no, "block_order"),
                trial_index=_parse_int(row["trial_index"], row_no, "trial_index"),
                signal_prop=_parse_float(row["signal_prop"], row_no, "signal_prop", 0.0, 1.0,
                                         optional=True),
                choice=row["choice"] if row["choice"] in ("A", "B") else _bad_choice(row, row_no),
                prob_estimate=_parse_float(row["prob_estimate"], row_no, "prob_estimate",
                                           0.0, 100.0),
                payoff=_parse_float(row["payoff"], row_no, "payoff", optional=True),
                strategy_text=row["strategy_text"] or None,
            )
            if has_checks:
                flag = (row["passed_checks"] or "").strip().lower()
                if flag not in _TRUE | _FALSE:
                    raise ParseError(row_no, "passed_checks", f"not a boolean: {flag!r}")
                if filter_attention and flag in _FALSE:
                    continue
            out.append(rec)
    return out


def _bad_choice(row, row_no):
    raise ParseError(row_no, "choice", f"{row['choice']!r} not one of ['A', 'B']")


# -- analysis -------------------------------------------------------------

@dataclass(frozen=True)
class CellSummary:
    vis_type: VisType
    access: Access
    signal_prop: float | None
    proportion_a: float
    ci: tuple
    n: int

    def to_dict(self):
        return {"vis_type": self.vis_type.value, "access": self.access.value,
                "signal_prop": self.signal_prop, "proportion_a": self.proportion_a,
                "ci": list(self.ci), "n": self.n}


def _cell_key(rec):
    return (rec.vis_type, rec.access, rec.signal_prop)


def _cell_sort(key):
    vis, access, s = key
    return (vis.value, access.value, -1.0 if s is None else s)


def summarize(records, cfg=BootstrapConfig()):
    """Bootstrap the share choosing A in every (vis type, access, signal) cell."""
    records = list(records)
    if not records:
        raise EmptyInput("no records to summarise")
    cells = {}
    for r in records:
        cells.setdefault(_cell_key(r), []).append(r.choice == "A")
    out = []
    for key in sorted(cells, key=_cell_sort):
        vis, access, s = key
        rng = np.random.default_rng(_cell_seed(cfg.seed, vis.value, access.value, s))
        try:
            est, (lo, hi) = bootstrap_proportion(cells[key], cfg, rng)
        except EmptyInput:
            log.warning("cell %s is empty; skipped", key)
            continue
        # the percentile interval of small resamples can miss the full-sample share
        out.append(CellSummary(vis, access, s, est, (min(lo, est), max(hi, est)),
                               len(cells[key])))
    return out


def _eq3_design(cells):
    """Rows for observed share ~ vis condition + visualized proportion."""
    cells = [c for c in cells if c.access is Access.PUBLIC and c.signal_prop is not None]
    vis_levels = sorted({c.vis_type.value for c in cells})
    names = ["intercept"] + (["hops"] if len(vis_levels) > 1 else []) + ["visualized_prop"]
    X = [[1.0] + ([float(c.vis_type is VisType.HOPS)] if len(vis_levels) > 1 else [])
         + [c.signal_prop] for c in cells]
    y = [c.proportion_a for c in cells]
    return np.array(X, dtype=float).reshape(len(cells), len(names)), np.array(y), names


def _trial_design(records, game, n):
    """Per-trial regressors shared by the best-response and probability-error models."""
    rows, br, err = [], [], []
    for r in records:
        if not r.has_signal:
            continue
        hi = higher_location(game, r.signal_prop)
        if hi is None:
            continue
        hops = float(r.vis_type is VisType.HOPS)
        public = float(r.access is Access.PUBLIC)
        rows.append([1.0, hops, public, hops * public, abs(game.payoff_difference(r.signal_prop)),
                     float(hi == "B"), float(r.block_order is BlockOrder.PRIVATE_FIRST)])
        br.append(float(r.choice == hi))
        est_hi = r.prob_estimate if r.choice == hi else 100.0 - r.prob_estimate
        truth = 100.0 * _truth(game, hi, r.signal_prop, n)
        err.append(abs(est_hi - truth))
    X = np.array(rows, dtype=float).reshape(len(rows), len(EQ4_TERMS))
    # constant dummies (e.g. a single vis type) are not identified; drop them
    keep = [0] + [j for j in range(1, X.shape[1]) if X.shape[0] and np.ptp(X[:, j]) > 0]
    return X[:, keep], np.array(br), np.array(err), [EQ4_TERMS[j] for j in keep]


def fit_response_models(records, game=DEFAULT_GAME, cfg=BootstrapConfig(), n=30,
                        summaries=None):
    """Fit the three response models. Each failure is re-raised with ``fit_name`` set."""
    records = list(records)
    summaries = summarize(records, cfg) if summaries is None else summaries
    fits = {}
    X3, y3, names3 = _eq3_design(summaries)
    X, br, err, names = _trial_design(records, game, n)
    jobs = (("eq3", lambda: ols_fit(X3, y3, names3) if len(y3) else None),
            ("eq4", lambda: logistic_fit(X, br, names)),
            ("eq5", lambda: ols_fit(X, err, names)))
    for name, job in jobs:
        try:
            fits[name] = job()
        except Exception as exc:
            exc.fit_name = name
            raise
    return fits


def _public_choice_counts(records, vis, signals):
    """Per-participant A-counts and trial counts over the public signal cells."""
    pos = {s: j for j, s in enumerate(signals)}
    pids = sorted({r.participant_id for r in records if r.vis_type is vis})
    row = {p: i for i, p in enumerate(pids)}
    a = np.zeros((len(pids), len(signals)))
    t = np.zeros((len(pids), len(signals)))
    for r in records:
        if r.vis_type is vis:
            j = pos[r.signal_prop]
            t[row[r.participant_id], j] += 1
            a[row[r.participant_id], j] += r.choice == "A"
    return a, t


def estimate_vis_equilibrium(records, cfg=BootstrapConfig(), game=DEFAULT_GAME):
    """Fixed point of the fitted observed-vs-visualized line, per vis type.

    Returns ``{VisType: EquilibriumResult}``; empty when there are no public
    signal trials. The interval comes from resampling participants.
    """
    public = [r for r in records if r.access is Access.PUBLIC and r.has_signal]
    if not public:
        return {}
    signals = sorted({r.signal_prop for r in public})
    vis_levels = sorted({r.vis_type for r in public}, key=lambda v: v.value)
    counts = {v: _public_choice_counts(public, v, signals) for v in vis_levels}

    def fixed_points(props):
        cells = [CellSummary(v, Access.PUBLIC, s, props[v][j], (0.0, 0.0), 0)
                 for v in vis_levels for j, s in enumerate(signals) if not math.isnan(props[v][j])]
        X, y, names = _eq3_design(cells)
        fit = ols_fit(X, y, names)
        b = fit["visualized_prop"]
        out = {}
        for v in vis_levels:
            a = fit["intercept"] + (fit["hops"] * (v is VisType.HOPS) if "hops" in names else 0.0)
            out[v] = fit_fixed_point_from_regression(a, b)
        return out

    with np.errstate(invalid="ignore", divide="ignore"):
        point = fixed_points({v: counts[v][0].sum(0) / counts[v][1].sum(0) for v in vis_levels})
        rng = np.random.default_rng(_cell_seed(cfg.seed, "equilibrium"))
        draws = {v: [] for v in vis_levels}
        resampled = {}
        for v in vis_levels:
            a, t = counts[v]
            idx = rng.integers(0, a.shape[0], size=(cfg.replications, a.shape[0]))
            # multiplicity of each participant per replicate; integer sums stay exact
            w = np.stack([np.bincount(row, minlength=a.shape[0]) for row in idx]).astype(float)
            resampled[v] = (w @ a, w @ t)
        for b in range(cfg.replications):
            props = {v: resampled[v][0][b] / resampled[v][1][b] for v in vis_levels}
            try:
                fp = fixed_points(props)
            except (DegenerateSlope, OutsideUnitInterval, ValueError):
                continue
            for v in vis_levels:
                draws[v].append(fp[v])

    results = {}
    for v in vis_levels:
        ci = percentile_interval(draws[v], cfg.coverage) if draws[v] else None
        p = point[v]
        results[v] = EquilibriumResult(p, 0.0, "regression", cfg.replications, ci=ci,
                                       welfare=float(game.social_welfare(p)))
    return results


# -- plot data ------------------------------------------------------------

def export_plot_data(summaries, fits, path, equilibria=None):
    """Write ``cells.csv``, ``coefficients.csv`` and ``analysis.json`` under ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    cells_path = path / "cells.csv"
    with open(cells_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CELL_COLUMNS)
        for c in summaries:
            w.writerow([c.vis_type.value, c.access.value, _fmt(c.signal_prop),
                        repr(c.proportion_a), repr(c.ci[0]), repr(c.ci[1]), c.n])
    coef_path = path / "coefficients.csv"
    with open(coef_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("model", "term", "estimate", "se"))
        for model, fit in fits.items():
            if fit is None:
                continue
            for term in fit.names:
                w.writerow([model, term, repr(fit.coefficients[term]),
                            repr(fit.standard_errors[term])])
    bundle = {"cells": [c.to_dict() for c in summaries]}
    for model in ("eq3", "eq4", "eq5"):
        fit = fits.get(model)
        bundle[model] = None if fit is None else fit.to_dict()
    if equilibria:
        bundle["equilibria"] = {
            v.value: {"p": r.p_star,
                      "lo": None if r.ci is None else r.ci[0],
                      "hi": None if r.ci is None else r.ci[1]}
            for v, r in equilibria.items()}
    json_path = path / "analysis.json"
    json_path.write_text(json.dumps(bundle, indent=2) + "\n", encoding="utf-8")
    return [cells_path, coef_path, json_path]


def read_cells_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CELL_COLUMNS:
            raise SchemaError(f"expected columns {CELL_COLUMNS}")
        return [CellSummary(VisType(r["vis_type"]), Access(r["access"]),
                            float(r["signal_prop"]) if r["signal_prop"] else None,
                            float(r["proportion_a"]), (float(r["ci_lo"]), float(r["ci_hi"])),
                            int(r["n"]))
                for r in reader]
