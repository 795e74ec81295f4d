import json
import subprocess
import sys

import pytest

from locfo import __version__
from locfo.cli import EXIT_NOINPUT, EXIT_SOFTWARE, EXIT_USAGE, run
from locfo.gadgets import build_a2m
from locfo.syntax import parse_formula, read_structure, write_structure
from support import fig_ball2

UNSAT_EXIST1 = "exists x. loc[1] x { P(x) & !P(x) }"
SAT_EXIST1 = "exists x. loc[1] x { exists y. !(y = x) & x ~1:1 y }"


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return write


@pytest.fixture
def fig2(files):
    return files("fig2.json", write_structure(fig_ball2()))


def last_json(out):
    return json.loads(out.strip().splitlines()[-1])


class TestCheck:
    def test_grid_fixture(self, tmp_path, files, capsys):
        a2m = str(tmp_path / "a2m3.json")
        assert run(["gadget", "a2m", "--m", "3", "-o", a2m]) == 0
        formula = str(tmp_path / "grid3loc.lfo")
        assert run(["gadget", "formula", "grid3loc", "-o", formula]) == 0
        assert run(["check", "-s", a2m, "-f", formula, "--gamma", "1:1,2:2"]) == 0
        assert capsys.readouterr().out.strip() == "true"

    def test_false_exits_one(self, fig2, files, capsys):
        f = files("q.lfo", "forall x. x ~1:1 x & P(x)")
        assert run(["check", "-s", fig2, "-f", f]) == 1

    def test_witness_printed(self, fig2, files, capsys):
        f = files("q.lfo", "exists x. exists y. x ~2:1 y")
        assert run(["check", "-s", fig2, "-f", f]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "true" and lines[1].startswith("witness: x=")

    def test_counterexample_printed(self, fig2, files, capsys):
        f = files("q.lfo", "forall x. x ~1:2 x")
        assert run(["check", "-s", fig2, "-f", f]) == 1
        assert "counterexample: x=" in capsys.readouterr().out

    def test_gamma_restricts(self, fig2, files):
        f = files("q.lfo", "exists x. exists y. x ~1:2 y")
        assert run(["check", "-s", fig2, "-f", f]) == 0
        assert run(["check", "-s", fig2, "-f", f, "--gamma", "1:1,2:2"]) == EXIT_SOFTWARE

    def test_json(self, fig2, files, capsys):
        f = files("q.lfo", "exists x. x = x")
        assert run(["--json", "check", "-s", fig2, "-f", f]) == 0
        report = last_json(capsys.readouterr().out)
        assert report["command"] == "check" and report["verdict"] == "true"
        assert report["witness"] == {"x": "a"} and "total" in report["timings"]


class TestView:
    def test_fig2_radius_two(self, fig2, capsys):
        assert run(["view", "-s", fig2, "-e", "a", "-r", "2", "--gamma", "1:1,2:2,1:2,2:1"]) == 0
        V = read_structure(capsys.readouterr().out)
        assert set(V.ids) == {"a", "b", "c", "f"}

    def test_sidecar(self, fig2, tmp_path):
        out = str(tmp_path / "v.json")
        assert run(["view", "-s", fig2, "-e", "a", "-r", "1", "-o", out]) == 0
        side = json.loads((tmp_path / "v.json.fresh.json").read_text())
        assert side["center"] == "a" and side["radius"] == 1
        V = read_structure((tmp_path / "v.json").read_text())
        assert {e for e, _ in side["freshened"]} <= set(V.ids)

    def test_unknown_element(self, fig2):
        assert run(["view", "-s", fig2, "-e", "zz", "-r", "1"]) == EXIT_SOFTWARE


class TestTranslate:
    @pytest.mark.parametrize(
        "pipeline, text",
        [
            ("nf", "exists y. y != x & P(y)"),
            ("twovar", "atleast[2] y. P(y)"),
            ("loc1", "exists x. loc[1] x { exists y. x ~1:2 y & P(y) }"),
            ("exist2", "exists x. loc[2] x { exists y. y != x & x ~2:1 y }"),
            ("exist1", SAT_EXIST1),
        ],
    )
    def test_output_parses(self, files, capsys, pipeline, text):
        f = files("phi.lfo", text)
        assert run(["translate", "-f", f, "--pipeline", pipeline]) == 0
        parse_formula(capsys.readouterr().out)

    def test_signature_out(self, files, tmp_path):
        f = files("phi.lfo", "exists x. loc[1] x { P(x) }")
        sig = str(tmp_path / "sig.json")
        assert run(["translate", "-f", f, "--pipeline", "loc1", "--signature-out", sig]) == 0
        obj = json.loads((tmp_path / "sig.json").read_text())
        assert obj["d"] == 2 and "P" in obj["sigma"] and "M" in obj

    def test_wrong_fragment(self, files):
        f = files("phi.lfo", "forall x. loc[2] x { P(x) }")
        assert run(["translate", "-f", f, "--pipeline", "exist2"]) == EXIT_SOFTWARE


class TestSat:
    def test_unsat_exist1(self, files):
        assert run(["sat", "-f", files("unsat.lfo", UNSAT_EXIST1), "--fragment", "exist1"]) == 1

    def test_sat_exist1_witness(self, files, tmp_path):
        w = str(tmp_path / "w.json")
        assert run(["sat", "-f", files("phi.lfo", SAT_EXIST1), "--fragment", "exist1", "--witness", w]) == 0
        from locfo.evaluator import models

        assert models(read_structure((tmp_path / "w.json").read_text()), parse_formula(SAT_EXIST1))

    def test_raw_within_bound(self, files, capsys):
        assert run(["sat", "-f", files("c.lfo", "exists x. !(x = x)"), "--fragment", "raw", "--max-size", "2"]) == 2
        assert capsys.readouterr().out.startswith("UNSAT_WITHIN")

    def test_exist2_unknown(self, files):
        f = files("u.lfo", "exists x. loc[2] x { P(x) & !P(x) }")
        assert run(["sat", "-f", f, "--fragment", "exist2", "--max-size", "2", "--seq"]) == 2

    def test_json_report(self, files, capsys):
        assert run(["--json", "sat", "-f", files("phi.lfo", SAT_EXIST1), "--fragment", "exist1"]) == 0
        report = last_json(capsys.readouterr().out)
        assert report["verdict"] == "SAT" and report["witness"]["d"] == 1

    def test_free_variable(self, files):
        assert run(["sat", "-f", files("o.lfo", "P(x)"), "--fragment", "raw"]) == EXIT_SOFTWARE


class TestGadget:
    def test_a2m_stdout(self, capsys):
        assert run(["gadget", "a2m", "--m", "1"]) == 0
        assert read_structure(capsys.readouterr().out) == build_a2m(1)

    def test_domino_search(self, files, capsys):
        d = files("d.json", json.dumps({"dominoes": ["W"], "h": [["W", "W"]], "v": [["W", "W"]]}))
        assert run(["gadget", "domino", "--file", d, "--search-tiling", "--max-m", "2"]) == 0
        assert capsys.readouterr().out.startswith("period 1")

    def test_domino_none(self, files):
        d = files("d.json", json.dumps({"dominoes": ["W"], "h": [], "v": [["W", "W"]]}))
        assert run(["gadget", "domino", "--file", d, "--search-tiling", "--max-m", "2"]) == 1

    def test_domino_formula(self, files, capsys):
        d = files("d.json", json.dumps({"dominoes": ["W"], "h": [["W", "W"]], "v": [["W", "W"]]}))
        assert run(["gadget", "domino", "--file", d, "--radius", "2"]) == 0
        parse_formula(capsys.readouterr().out)

    def test_bad_domino_file(self, files):
        assert run(["gadget", "domino", "--file", files("d.json", "{not json")]) == EXIT_NOINPUT


class TestReport:
    def test_grid(self, tmp_path, capsys):
        assert run(["report", "grid", "--m", "1", "-o", str(tmp_path)]) == 0
        rows = (tmp_path / "grid.csv").read_text().splitlines()
        assert rows[0] == "kind,src_i,src_j,dst_i,dst_j,in_grid"
        assert all(r.endswith(",1") for r in rows[1:])
        assert (tmp_path / "grid.png").stat().st_size > 0

    def test_view_tab(self, fig2, tmp_path):
        assert run(["report", "view", "-s", fig2, "-e", "a", "-r", "1", "-o", str(tmp_path), "--delimiter", "tab"]) == 0
        header = (tmp_path / "view.tsv").read_text().splitlines()[0]
        assert header.split("\t")[0] == "element"

    def test_sat_counts(self, files, tmp_path):
        f = files("s.lfo", "exists x. P(x)")
        assert run(["report", "sat", "-f", f, "--max-size", "2", "-o", str(tmp_path), "--fig-format", "svg"]) == 0
        rows = [r.split(",") for r in (tmp_path / "sat.csv").read_text().splitlines()[1:]]
        # one P-free structure per size, the rest are models
        assert [(int(r[1]) - int(r[2])) for r in rows] == [1, 1]


class TestExitCodes:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["--version"])
        assert exc.value.code == 0
        assert __version__ in capsys.readouterr().out

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["frobnicate"],
            ["sat", "-f", "x.lfo", "--fragment", "nope"],
            ["sat", "-f", "x.lfo", "--fragment", "raw", "--max-size", "0"],
            ["view", "-s", "x.json", "-e", "a", "-r", "-1"],
        ],
    )
    def test_flag_errors(self, argv):
        assert run(argv) == EXIT_USAGE

    def test_bad_gamma(self, fig2, files):
        f = files("q.lfo", "exists x. x = x")
        assert run(["check", "-s", fig2, "-f", f, "--gamma", "1:3"]) == EXIT_USAGE

    def test_missing_file(self, tmp_path):
        assert run(["sat", "-f", str(tmp_path / "missing.lfo"), "--fragment", "raw"]) == EXIT_NOINPUT

    def test_parse_error(self, files):
        assert run(["sat", "-f", files("bad.lfo", "exists x. ("), "--fragment", "raw"]) == EXIT_NOINPUT

    def test_bad_structure(self, files):
        f = files("q.lfo", "exists x. x = x")
        assert run(["check", "-s", files("s.json", '{"d": 2}'), "-f", f]) == EXIT_NOINPUT

    def test_json_error_report(self, tmp_path, capsys):
        assert run(["--json", "sat", "-f", str(tmp_path / "none.lfo"), "--fragment", "raw"]) == EXIT_NOINPUT
        report = last_json(capsys.readouterr().out)
        assert report["verdict"] == "error" and report["exit"] == EXIT_NOINPUT

    def test_console_entry(self, files):
        proc = subprocess.run(
            [sys.executable, "-m", "locfo.cli", "sat", "-f", files("u.lfo", UNSAT_EXIST1), "--fragment", "exist1"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 1 and proc.stdout.startswith("UNSAT")
