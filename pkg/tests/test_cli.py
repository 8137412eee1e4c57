import hashlib
import io
import json

import pytest

from viseq import DEFAULT_GAME as G
from viseq.behavior import Access, EmpiricalLogistic, PopulationMixture, VisType
from viseq.cli import FIXED_EFFECTS_CAVEAT, build_parser, main
from viseq.equilibrium import ResponseMap, bisection
from viseq.signals import SignalScheme
from viseq.stats import binom_cdf


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), stdout=out)
    return code, out.getvalue()


def config(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


EMPIRICAL = """
[[population]]
model = "empirical_logistic"
"""


def test_game_default(tmp_path):
    code, out = run("game", "--out-dir", str(tmp_path))
    assert code == 0
    assert "0.2222" in out and "0.4444" in out and "37.78" in out
    report = json.loads((tmp_path / "game.json").read_text())
    assert report["nash"] == pytest.approx(2 / 9, abs=1e-12)
    assert len(report["welfare_curve"]) == 101


def test_game_symmetric(tmp_path):
    cfg = config(tmp_path, "[game]\nintercept_a = 40\nslope_a = -30\nintercept_b = 10\nslope_b = 30\n")
    code, _ = run("game", "--config", cfg, "--out-dir", str(tmp_path))
    report = json.loads((tmp_path / "game.json").read_text())
    assert code == 0 and report["nash"] == 0.5


def test_game_not_concave(tmp_path, capsys):
    cfg = config(tmp_path, "[game]\nslope_a = -30\nslope_b = -60\n")
    code, _ = run("game", "--config", cfg, "--out-dir", str(tmp_path))
    assert code == 2 and "NotConcave" in capsys.readouterr().err


def test_bad_key_is_named(tmp_path, capsys):
    cfg = config(tmp_path, "[game]\nslope_c = 1\n")
    assert run("game", "--config", cfg)[0] == 2
    assert "game.slope_c" in capsys.readouterr().err
    cfg = config(tmp_path, '[scheme]\nkind = "pie"\n', "b.toml")
    assert run("solve", "--config", cfg)[0] == 2
    assert "scheme.kind" in capsys.readouterr().err


def test_solve_random_population(tmp_path):
    cfg = config(tmp_path, '[[population]]\nmodel = "random"\n')
    code, _ = run("solve", "--config", cfg, "--out-dir", str(tmp_path))
    assert code == 0
    assert json.loads((tmp_path / "solve.json").read_text())["report"]["p_star"] == 0.5


def test_solve_matches_library_bisection(tmp_path):
    cfg = config(tmp_path, EMPIRICAL)
    code, _ = run("solve", "--config", cfg, "--out-dir", str(tmp_path), "--vis-type", "bar")
    lib = bisection(ResponseMap(PopulationMixture.of(EmpiricalLogistic()), G, SignalScheme(),
                                Access.PUBLIC, VisType.BAR), game=G)
    got = json.loads((tmp_path / "solve.json").read_text())["results"]["bisection"]["p_star"]
    assert code == 0 and got == lib.p_star


def test_solve_high_rationality(tmp_path):
    cfg = config(tmp_path, '[scheme]\nround_counts = false\n[[population]]\nmodel = "logit"\n'
                           'params = { rationality = 10.0 }\n')
    code, _ = run("solve", "--config", cfg, "--out-dir", str(tmp_path))
    p = json.loads((tmp_path / "solve.json").read_text())["report"]["p_star"]
    assert code == 0 and abs(p - 2 / 9) <= 0.005


def test_solve_nonconvergence_exit_3(tmp_path):
    # best responders on an exact display: the map jumps across the diagonal at 2/9
    cfg = config(tmp_path, '[[population]]\nmodel = "best_responder"\n')
    code, _ = run("solve", "--config", cfg, "--out-dir", str(tmp_path), "--method", "damped")
    assert code == 3


def test_solve_robbins_monro_needs_seed(tmp_path):
    cfg = config(tmp_path, EMPIRICAL + '[scheme]\nkind = "binomial"\n'
                                       '[solver]\nmethod = "robbins_monro"\niterations = 20000\n')
    assert run("solve", "--config", cfg, "--out-dir", str(tmp_path))[0] == 2
    assert run("solve", "--config", cfg, "--out-dir", str(tmp_path), "--seed", "1")[0] == 0


def test_simulate(tmp_path):
    code, _ = run("simulate", "--seed", "1", "--participants", "400", "--out-dir", str(tmp_path))
    assert code == 0
    data = (tmp_path / "experiment.csv").read_bytes()
    assert data.count(b"\n") == 8001
    digest = hashlib.sha256(data).hexdigest()
    run("simulate", "--seed", "1", "--participants", "400", "--out-dir", str(tmp_path),
        "--threads", "3")
    assert hashlib.sha256((tmp_path / "experiment.csv").read_bytes()).hexdigest() == digest


def test_simulate_config_invariants(tmp_path):
    assert run("simulate", "--out-dir", str(tmp_path))[0] == 2  # no seed
    assert run("simulate", "--seed", "1", "--participants", "10", "--out-dir", str(tmp_path))[0] == 2


def test_simulate_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("simulate", "--seed", "1", "--participants", "30",
               "--out-dir", str(blocker / "sub"))[0] == 4


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    cfg = config(d, EMPIRICAL)
    assert run("simulate", "--config", cfg, "--seed", "2", "--participants", "200",
               "--out-dir", str(d))[0] == 0
    return d / "experiment.csv"


def test_analyze(tmp_path, dataset):
    code, out = run("analyze", str(dataset), "--seed", "2", "--out-dir", str(tmp_path))
    assert code == 0
    assert FIXED_EFFECTS_CAVEAT in out
    bundle = json.loads((tmp_path / "analysis.json").read_text())
    assert set(bundle) == {"cells", "eq3", "eq4", "eq5", "equilibria"}
    assert (tmp_path / "cells.csv").exists() and (tmp_path / "coefficients.csv").exists()


def test_analyze_without_public_trials(tmp_path, dataset, caplog):
    lines = dataset.read_text().splitlines(keepends=True)
    private = [lines[0]] + [l for l in lines[1:] if ",private," in l]
    path = tmp_path / "private.csv"
    path.write_text("".join(private))
    code, _ = run("analyze", str(path), "--seed", "2", "--out-dir", str(tmp_path))
    assert code == 0
    assert "equilibria" not in json.loads((tmp_path / "analysis.json").read_text())
    assert "equilibrium estimates omitted" in caplog.text


def test_analyze_malformed_row(tmp_path, dataset, capsys):
    lines = dataset.read_text().splitlines(keepends=True)
    lines[3] = lines[3].replace(",A,", ",Z,").replace(",B,", ",Z,")
    path = tmp_path / "bad.csv"
    path.write_text("".join(lines))
    assert run("analyze", str(path), "--seed", "2", "--out-dir", str(tmp_path))[0] == 2
    err = capsys.readouterr().err
    assert "row 3" in err and "'choice'" in err


def test_analyze_regression_failure(tmp_path, capsys):
    cfg = config(tmp_path, '[[population]]\nmodel = "best_responder"\n[experiment]\n'
                           'vis_types = ["bar"]\n')
    run("simulate", "--config", cfg, "--seed", "3", "--participants", "60", "--out-dir", str(tmp_path))
    code, _ = run("analyze", str(tmp_path / "experiment.csv"), "--seed", "3",
                  "--out-dir", str(tmp_path))
    assert code == 5 and "eq4" in capsys.readouterr().err


def test_analyze_missing_file(tmp_path):
    assert run("analyze", str(tmp_path / "nope.csv"), "--seed", "1", "--out-dir", str(tmp_path))[0] == 4


def test_export_plots(tmp_path, dataset):
    code, out = run("export-plots", str(dataset), "--seed", "2", "--out-dir", str(tmp_path))
    assert code == 0 and "cells.csv" in out


def test_truth(tmp_path):
    code, out = run("truth", "--out-dir", str(tmp_path))
    assert code == 0
    rows = (tmp_path / "truth.csv").read_text().splitlines()[1:]
    table = {float(r.split(",")[0]): tuple(map(float, r.split(",")[1:])) for r in rows}
    assert len(table) == 9
    assert table[0.5][1] == pytest.approx(1 - binom_cdf(6, 30, 0.5), abs=1e-15)


def test_truth_degenerate_signal(tmp_path):
    cfg = config(tmp_path, "[experiment]\nsignals = [1.0]\n")
    run("truth", "--config", cfg, "--out-dir", str(tmp_path))
    row = (tmp_path / "truth.csv").read_text().splitlines()[1]
    assert row == "1.0,0.0,1.0"


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["solve", "--nope"])
    assert info.value.code == 2


@pytest.mark.parametrize("command", ["game", "solve", "simulate", "analyze", "truth",
                                     "export-plots"])
def test_help_lists_global_flags(command, capsys):
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args([command, "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--config", "--seed", "--out-dir", "--threads"):
        assert flag in text


def test_global_flags_before_subcommand(tmp_path):
    cfg = config(tmp_path, EMPIRICAL)
    before, after = tmp_path / "before", tmp_path / "after"
    assert run("--config", cfg, "--out-dir", str(before), "solve", "--vis-type", "bar")[0] == 0
    assert run("solve", "--vis-type", "bar", "--config", cfg, "--out-dir", str(after))[0] == 0
    assert (before / "solve.json").read_bytes() == (after / "solve.json").read_bytes()
    # a seed given before the subcommand survives parsing
    assert run("--seed", "4", "simulate", "--participants", "60", "--out-dir", str(before))[0] == 0
