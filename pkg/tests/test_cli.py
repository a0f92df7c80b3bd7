import csv
import io
import json

import numpy as np
import pytest

from pmdkit.anon_games import MixedProfile, random_game
from pmdkit.cli import EXIT_INVALID, EXIT_OK, EXIT_SEARCH, dispatch
from pmdkit.cover import CoverElement
from pmdkit.gaussian import BlockStructure, GaussianParams, StructuredGaussian
from pmdkit.pmd_core import sample_pmd, validate_params


@pytest.fixture
def files(tmp_path):
    def write(name, obj):
        path = tmp_path / name
        path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return str(path)
    return write


def run(argv, capsys):
    code = dispatch(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


FAIR2 = {"k": 2, "rows": [[0.5, 0.5], [0.5, 0.5]]}


def test_pmf(files, capsys):
    code, out, _ = run(["pmf", "--params", files("p.json", FAIR2)], capsys)
    assert code == EXIT_OK
    assert json.loads(out) == [{"p": 0.25, "point": [0, 2]}, {"p": 0.5, "point": [1, 1]},
                               {"p": 0.25, "point": [2, 0]}]


def test_malformed_json(files, capsys):
    code, _, err = run(["pmf", "--params", files("bad.json", "{not json")], capsys)
    assert code == EXIT_INVALID and "not valid JSON" in err


def test_invalid_params(files, capsys):
    code, _, _ = run(["pmf", "--params", files("p.json", {"k": 2, "rows": [[0.5, 0.6]]})], capsys)
    assert code == EXIT_INVALID


def test_unknown_and_missing_command(capsys):
    assert run(["frobnicate"], capsys)[0] == EXIT_INVALID
    assert run([], capsys)[0] == EXIT_INVALID
    assert run(["pmf"], capsys)[0] == EXIT_INVALID


def test_sample_deterministic(files, capsys):
    p = files("p.json", FAIR2)
    a = run(["sample", "--params", p, "--count", "50", "--seed", "4"], capsys)[1]
    b = run(["sample", "--params", p, "--count", "50", "--seed", "4"], capsys)[1]
    assert a == b and json.loads(a)["seed"] == 4


def test_tv_and_moments(files, capsys):
    a = files("a.json", FAIR2)
    b = files("b.json", [{"point": [1, 1], "p": 1.0}])
    code, out, _ = run(["tv", a, b], capsys)
    assert code == EXIT_OK and json.loads(out)["tv"] == pytest.approx(0.5)
    code, out, _ = run(["moments", "--params", a, "--alpha", "1,0"], capsys)
    rep = json.loads(out)
    assert rep["moment"] == pytest.approx(1.0) and rep["elementary"] == pytest.approx(1.0)


def test_gauss_commands(files, capsys):
    g = files("g.json", {"mean": [0.0, 1.0], "cov": [[1.0, 0.2], [0.2, 2.0]]})
    code, out, _ = run(["gauss-tv", g, g, "--budget", "1000", "--seed", "3"], capsys)
    rep = json.loads(out)
    assert code == EXIT_OK and rep["certificate"]["certified"] and rep["mc_tv"] == 0 and rep["seed"] == 3
    code, out, _ = run(["gauss-sample", "--params", g, "--count", "10"], capsys)
    assert code == EXIT_OK and len(json.loads(out)["points"]) == 10


def test_clt_check(files, capsys):
    p = files("p.json", {"k": 2, "rows": [[0.5, 0.5]] * 100})
    code, out, _ = run(["clt-check", "--params", p, "--seed", "2"], capsys)
    rep = json.loads(out)
    assert code == EXIT_OK and rep["seed"] == 2 and rep["half_width"] > 0 and rep["method"] == "exact"


def test_clt_sweep_csv_and_png(tmp_path, capsys):
    png = tmp_path / "sweep.png"
    out = tmp_path / "sweep.csv"
    code, _, _ = run(["clt-sweep", "--out", str(out), "--plot", str(png)], capsys)
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [r["n"] for r in rows] == ["100", "400", "1600"]
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    png2 = tmp_path / "sweep2.png"
    out2 = tmp_path / "sweep2.csv"
    run(["clt-sweep", "--out", str(out2), "--plot", str(png2)], capsys)
    assert out.read_bytes() == out2.read_bytes() and png.read_bytes() == png2.read_bytes()


def test_cover_enumerate_sparse(capsys):
    code, out, _ = run(["cover", "enumerate", "--kind", "sparse", "--n", "1", "--k", "2", "--step", "0.5"], capsys)
    lines = [json.loads(x) for x in out.splitlines()]
    assert code == EXIT_OK and len(lines) == 3
    assert lines[1]["sparse"]["rows"] == [[0.5, 0.5]]


def test_cover_enumerate_needs_size(capsys):
    assert run(["cover", "enumerate", "--k", "2"], capsys)[0] == EXIT_INVALID


def test_cover_enumerate_gaussian_cap(capsys):
    code, _, err = run(["cover", "enumerate", "--n", "50", "--k", "2", "--eps", "0.5", "--mean-step", "1",
                        "--weight-step", "1", "--min-block-eig", "1", "--cap", "100"], capsys)
    assert code == EXIT_INVALID and "CapExceeded" in err


def test_cover_properize(files, capsys):
    g = GaussianParams([2.0, 1.0], np.zeros((2, 2)))
    el = CoverElement(StructuredGaussian(g, BlockStructure(((0, 1),), (1,))), None)
    code, out, _ = run(["cover", "properize", "--in", files("el.json", el.to_json())], capsys)
    assert code == EXIT_OK
    assert sorted(json.loads(out)["rows"]) == [[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]]


def test_learn_and_sample_hypothesis(files, capsys, tmp_path):
    truth = validate_params(np.random.default_rng(0).dirichlet([1, 1], size=20))
    s = files("s.json", sample_pmd(truth, 20_000, 1).to_json())
    hyp = tmp_path / "h.json"
    code, _, _ = run(["learn", "--samples", s, "--k", "2", "--eps", "0.1", "--out", str(hyp)], capsys)
    assert code == EXIT_OK
    h = json.loads(hyp.read_text())
    assert h["n"] == 20 and {"gaussian", "sparse"} <= set(h)
    code, out, _ = run(["hypothesis", "sample", "--in", str(hyp), "--count", "30", "--seed", "1"], capsys)
    pts = np.array(json.loads(out)["points"])
    assert code == EXIT_OK and pts.shape == (30, 2) and np.all(pts.sum(axis=1) == 20)


def test_anon_solve_and_verify(files, capsys, tmp_path):
    game = files("g.json", random_game(4, 2, 3).to_json())
    sol = tmp_path / "sol.json"
    code, _, _ = run(["anon", "solve", "--game", game, "--eps", "0.2", "--out", str(sol)], capsys)
    assert code == EXIT_OK
    rep = json.loads(sol.read_text())
    prof = files("p.json", rep["profile"])
    code, out, _ = run(["anon", "verify", "--game", game, "--profile", prof, "--eps", "0.2"], capsys)
    assert code == EXIT_OK and json.loads(out)["is_eps_nash"]
    assert json.loads(out)["regret"] == pytest.approx(rep["regret"])


def test_anon_verify_rejects(files, capsys):
    game = files("g.json", random_game(3, 2, 0).to_json())
    worst = files("p.json", MixedProfile([[0.5, 0.5]] * 3).to_json())
    code, out, _ = run(["anon", "verify", "--game", game, "--profile", worst, "--eps", "0.0"], capsys)
    assert code == EXIT_OK and not json.loads(out)["is_eps_nash"]


def test_anon_exhausted_exit_code(files, capsys):
    game = files("g.json", random_game(4, 2, 0).to_json())
    code, _, err = run(["anon", "solve", "--game", game, "--eps", "0.01", "--cap-sparse", "1",
                        "--cap-gauss", "1", "--cap-stats", "2"], capsys)
    assert code == EXIT_SEARCH and "Exhausted" in err
