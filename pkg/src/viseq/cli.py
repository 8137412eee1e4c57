"""Command-line entry point: ``viseq <command> [options]``.

Exit codes: 0 success, 2 configuration or schema error, 3 solver did not
converge, 4 I/O failure, 5 a regression fit failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from .behavior import Access, VisType, default_vis_type
from .equilibrium import (ResponseMap, bisection, damped_iteration,
                          equilibrium_report, grid_scan, robbins_monro)
from .errors import (MaxIterExceeded, NoInteriorEquilibrium, NotConcave, NotConverged,
                     ParseError, RankDeficient, SchemaError, Separation, ViseqError)
from .experiment import (DEFAULT_SIGNALS, estimate_vis_equilibrium, export_csv, export_plot_data,
                         fit_response_models, ingest_csv, simulate_experiment, summarize)
from .stats import ground_truth_prob

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO, EXIT_STATS = 0, 2, 3, 4, 5

FIXED_EFFECTS_CAVEAT = ("note: eq4/eq5 are fixed-effects fits; per-participant random "
                        "intercepts are not estimated, so standard errors ignore clustering")
# human-study estimates of the same quantity, shown for comparison only
REFERENCE_EQUILIBRIA = {"bar": (0.34, 0.32, 0.36), "hops": (0.35, 0.33, 0.37)}

log = logging.getLogger("viseq")


class CommandFailed(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _dump(obj, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _out(cfg, name):
    return Path(cfg.out_dir) / name


# -- commands -------------------------------------------------------------

def cmd_game(cfg, args, stdout):
    game = cfg.game
    try:
        opt = game.welfare_optimum()
        nash = game.nash_proportion()
    except (NotConcave, NoInteriorEquilibrium) as exc:
        raise CommandFailed(EXIT_CONFIG, f"game: {type(exc).__name__}: {exc}") from exc
    ps, sw = game.welfare_curve(0.01)
    report = {"game": game.to_dict(), "nash": nash,
              "welfare_at_nash": float(game.social_welfare(nash)),
              "optimum": {"p": opt.proportion, "welfare": opt.welfare},
              "welfare_curve": [{"p": float(p), "welfare": float(w)} for p, w in zip(ps, sw)]}
    _dump(report, _out(cfg, "game.json"))
    print(f"nash proportion     {nash:.4f}   welfare {report['welfare_at_nash']:.2f}", file=stdout)
    print(f"welfare optimum     {opt.proportion:.4f}   welfare {opt.welfare:.2f}", file=stdout)
    print("p       SW(p)", file=stdout)
    for p, w in zip(ps, sw):
        print(f"{p:.2f}  {w:8.3f}", file=stdout)
    return EXIT_OK


def _response_map(cfg):
    s = cfg.solver
    vis = s.vis_type or default_vis_type(cfg.scheme)
    pop = cfg.population_for(s.access, vis)
    return ResponseMap(pop, cfg.game, cfg.scheme, s.access, vis, s.block_order)


def _run_solver(method, S, cfg):
    s, game = cfg.solver, cfg.game
    if method == "grid":
        return grid_scan(S, s.resolution, game=game)
    if method == "bisection":
        return bisection(S, s.tol, game=game)
    if method == "damped":
        return damped_iteration(S, s.damping, s.tol, s.max_iter, s.p0, game=game)
    return robbins_monro(S, s.iterations, s.a0, s.t0, seed=cfg.require_seed(), p0=s.p0, game=game)


def cmd_solve(cfg, args, stdout):
    S = _response_map(cfg)
    methods = (["grid", "bisection", "damped", "robbins_monro"] if cfg.solver.method == "all"
               else [cfg.solver.method])
    if "robbins_monro" in methods:
        cfg.require_seed()
    results, failed = {}, []
    for m in methods:
        try:
            results[m] = _run_solver(m, S, cfg)
        except MaxIterExceeded as exc:
            failed.append(f"{m}: {exc}")
            if exc.result is not None:
                results[m] = exc.result
        except NotConverged as exc:
            failed.append(f"{m}: {exc}")
    primary = results.get(methods[0])
    out = {"condition": {"access": cfg.solver.access.value, "vis_type": S.vis_type.value,
                         "scheme": cfg.scheme.kind.value},
           "results": {m: r.to_dict() for m, r in results.items()}}
    if primary is not None:
        out["report"] = equilibrium_report(cfg.game, primary)
    _dump(out, _out(cfg, "solve.json"))
    print(f"{'method':<14}{'p*':>12}{'residual':>12}{'welfare':>10}  ci", file=stdout)
    for m, r in results.items():
        ci = "" if r.ci is None else f"[{r.ci[0]:.4f}, {r.ci[1]:.4f}]"
        print(f"{m:<14}{r.p_star:>12.6f}{r.residual:>12.2e}{r.welfare:>10.3f}  {ci}", file=stdout)
    if primary is not None:
        rep = out["report"]
        print(f"nash {rep['p_nash']:.4f} (SW {rep['welfare_nash']:.3f}); optimum "
              f"{rep['p_opt']:.4f} (SW {rep['welfare_opt']:.3f})", file=stdout)
    tol = cfg.solver.residual_tol
    bad = [m for m, r in results.items() if abs(r.residual) > tol]
    if failed or bad:
        detail = "; ".join(failed + [f"{m}: residual {results[m].residual:.3g} > {tol}"
                                     for m in bad])
        raise CommandFailed(EXIT_CONVERGENCE, f"solve did not converge: {detail}")
    return EXIT_OK


def cmd_simulate(cfg, args, stdout):
    cfg.require_seed()
    ecfg = cfg.experiment_config()
    records = simulate_experiment(ecfg, cfg.population_for, cfg.game)
    path = _out(cfg, "experiment.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    export_csv(records, path)
    print(f"wrote {len(records)} trials from {ecfg.participants} participants to {path}",
          file=stdout)
    return EXIT_OK


def _analysis(cfg, dataset):
    records = ingest_csv(dataset, filter_attention=cfg.filter_attention)
    if not records:
        raise CommandFailed(EXIT_CONFIG, f"{dataset}: no usable rows")
    n = cfg.experiment_params.get("group_size", 30)
    summaries = summarize(records, cfg.bootstrap)
    try:
        fits = fit_response_models(records, cfg.game, cfg.bootstrap, n, summaries=summaries)
    except (Separation, NotConverged, RankDeficient, ValueError) as exc:
        which = getattr(exc, "fit_name", "regression")
        raise CommandFailed(EXIT_STATS, f"{which} fit failed: {type(exc).__name__}: {exc}") from exc
    if fits.get("eq3") is None:
        log.warning("no public signal trials; equilibrium estimates omitted")
        equilibria = {}
    else:
        try:
            equilibria = estimate_vis_equilibrium(records, cfg.bootstrap, cfg.game)
        except (ValueError, RankDeficient) as exc:
            raise CommandFailed(EXIT_STATS, f"equilibrium fit failed: {type(exc).__name__}: "
                                            f"{exc}") from exc
    return records, summaries, fits, equilibria


def cmd_analyze(cfg, args, stdout):
    cfg.require_seed()
    records, summaries, fits, equilibria = _analysis(cfg, args.dataset)
    export_plot_data(summaries, fits, cfg.out_dir, equilibria)
    print(f"{len(records)} trials, {len(summaries)} cells", file=stdout)
    print(f"{'vis':<6}{'access':<9}{'signal':>7}{'P(A)':>8}  95% ci          n", file=stdout)
    for c in summaries:
        s = "none" if c.signal_prop is None else f"{c.signal_prop:.2f}"
        print(f"{c.vis_type.value:<6}{c.access.value:<9}{s:>7}{c.proportion_a:>8.3f}  "
              f"[{c.ci[0]:.3f}, {c.ci[1]:.3f}]  {c.n}", file=stdout)
    for name, fit in fits.items():
        if fit is None:
            continue
        print(f"\n{name}", file=stdout)
        for term in fit.names:
            print(f"  {term:<18}{fit[term]:>10.4f}  (se {fit.standard_errors[term]:.4f})",
                  file=stdout)
    print(f"\n{FIXED_EFFECTS_CAVEAT}", file=stdout)
    if equilibria:
        print("\nvisualization equilibrium (fitted line)", file=stdout)
        for vis, r in equilibria.items():
            ref = REFERENCE_EQUILIBRIA[vis.value]
            ci = "" if r.ci is None else f"[{r.ci[0]:.3f}, {r.ci[1]:.3f}]"
            print(f"  {vis.value:<5} p* {r.p_star:.4f} {ci}   human-study reference "
                  f"{ref[0]:.2f} [{ref[1]:.2f}, {ref[2]:.2f}]", file=stdout)
    return EXIT_OK


def cmd_export_plots(cfg, args, stdout):
    cfg.require_seed()
    _, summaries, fits, equilibria = _analysis(cfg, args.dataset)
    for p in export_plot_data(summaries, fits, cfg.out_dir, equilibria):
        print(p, file=stdout)
    return EXIT_OK


def cmd_truth(cfg, args, stdout):
    signals = cfg.experiment_params.get("signals", DEFAULT_SIGNALS)
    n = cfg.experiment_params.get("group_size", 30)
    rows = [(s, ground_truth_prob(cfg.game, "A", s, n), ground_truth_prob(cfg.game, "B", s, n))
            for s in signals]
    path = _out(cfg, "truth.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("signal_prop", "prob_a_better", "prob_b_better"))
        for s, a, b in rows:
            w.writerow((repr(s), repr(a), repr(b)))
    print("signal   P(A better)   P(B better)", file=stdout)
    for s, a, b in rows:
        print(f"{s:6.2f}   {a:11.6f}   {b:11.6f}", file=stdout)
    return EXIT_OK


COMMANDS = {"game": cmd_game, "solve": cmd_solve, "simulate": cmd_simulate,
            "analyze": cmd_analyze, "truth": cmd_truth, "export-plots": cmd_export_plots}


# -- argument parsing -----------------------------------------------------

def _global_flags(suppress=False):
    # subcommand copies must not reset values given before the subcommand
    p = argparse.ArgumentParser(add_help=False,
                                argument_default=argparse.SUPPRESS if suppress else None)
    g = p.add_argument_group("global options")
    g.add_argument("--config", metavar="PATH", help="TOML configuration file")
    g.add_argument("--seed", type=int, help="random seed (required by stochastic commands)")
    g.add_argument("--out-dir", metavar="DIR", help="directory for all output files")
    g.add_argument("--threads", type=int, help="worker threads; never changes results")
    g.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="viseq", parents=[_global_flags()],
                                     description="Visualization equilibria in a two-location "
                                                 "congestion game.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = _global_flags(suppress=True)
    sub.add_parser("game", parents=[common], help="Nash equilibrium, welfare optimum and curve")
    solve = sub.add_parser("solve", parents=[common], help="solve for the visualization equilibrium")
    solve.add_argument("--method", choices=config_mod.SOLVER_METHODS)
    solve.add_argument("--access", choices=[a.value for a in Access])
    solve.add_argument("--vis-type", choices=[v.value for v in VisType])
    solve.add_argument("--residual-tol", type=float)
    sim = sub.add_parser("simulate", parents=[common], help="simulate an experiment to CSV")
    sim.add_argument("--participants", type=int)
    for name, text in (("analyze", "summaries, fits and equilibrium estimates for a CSV"),
                       ("export-plots", "write plot-ready CSV/JSON for a CSV")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("dataset", help="experiment CSV")
        sp.add_argument("--filter-attention", action="store_true",
                        help="drop rows whose passed_checks column is false")
    sub.add_parser("truth", parents=[common], help="ground-truth probabilities per signal")
    return parser


def _resolve(args):
    cfg = config_mod.load(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise config_mod.ConfigError("--seed: must be >= 0")
        cfg.seed = args.seed
    if cfg.seed is not None:
        cfg.bootstrap = replace(cfg.bootstrap, seed=cfg.seed)
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    if args.threads is not None:
        if args.threads < 1:
            raise config_mod.ConfigError("--threads: must be >= 1")
        cfg.threads = args.threads
    updates = {}
    if getattr(args, "method", None):
        updates["method"] = args.method
    if getattr(args, "access", None):
        updates["access"] = Access(args.access)
    if getattr(args, "vis_type", None):
        updates["vis_type"] = VisType(args.vis_type)
    if getattr(args, "residual_tol", None) is not None:
        updates["residual_tol"] = args.residual_tol
    if updates:
        cfg.solver = replace(cfg.solver, **updates)
    if getattr(args, "participants", None) is not None:
        cfg.experiment_params["participants"] = args.participants
    if getattr(args, "filter_attention", False):
        cfg.filter_attention = True
    return cfg


def main(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on unknown flags
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg, args, stdout)
    except CommandFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        code = EXIT_CONFIG if args.config and exc.filename == args.config else EXIT_IO
        print(f"error: {exc}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParseError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MaxIterExceeded, NotConverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ViseqError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
