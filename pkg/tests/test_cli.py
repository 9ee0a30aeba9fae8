import json

import pytest

from coarsekit.cli import main


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def cloud(lo, hi):
    return {"kind": "cloud", "coords": [[i] for i in range(lo, hi + 1)]}


def run(capsys, argv):
    code = main(argv)
    cap = capsys.readouterr()
    report = json.loads(cap.out) if cap.out else None
    return code, report, cap.err


@pytest.fixture
def path16(tmp_path):
    return write(tmp_path, "space.json", cloud(0, 15))


@pytest.fixture
def fold5(tmp_path):
    dom = write(tmp_path, "dom.json", cloud(-5, 5))
    cod = write(tmp_path, "cod.json", cloud(0, 5))
    f = write(tmp_path, "map.json", {"assign": [abs(i) for i in range(-5, 6)]})
    return dom, cod, f


class TestSpaceCommand:
    def test_describe(self, capsys, tmp_path):
        sp = write(tmp_path, "s.json", cloud(0, 9))
        code, report, _ = run(capsys, ["space", "--space", sp])
        assert code == 0
        assert report["schema_version"] == 1
        assert report["status"] == "ok"
        assert report["result"] == {
            "n": 10,
            "diam": 9.0,
            "labels": [str(i) for i in range(10)],
        }
        assert len(report["inputs"]["space"]) == 64  # sha256 hex digest

    def test_invalid_metric_is_usage_error(self, capsys, tmp_path):
        sp = write(
            tmp_path,
            "bad.json",
            {"kind": "matrix", "labels": [0, 1, 2], "matrix": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]},
        )
        code, report, err = run(capsys, ["space", "--space", sp])
        assert code == 2
        assert report is None
        assert "error:" in err

    def test_missing_file(self, capsys, tmp_path):
        code, report, err = run(capsys, ["space", "--space", str(tmp_path / "nope.json")])
        assert code == 2 and report is None and "not found" in err

    def test_malformed_json(self, capsys, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{not json")
        code, report, err = run(capsys, ["space", "--space", str(p)])
        assert code == 2 and "malformed JSON" in err

    def test_unknown_command_is_usage_error(self, capsys):
        code, report, _ = run(capsys, ["frobnicate"])
        assert code == 2


class TestCoverCommands:
    @pytest.fixture
    def three_intervals(self, tmp_path):
        sp = write(tmp_path, "sp.json", cloud(0, 20))
        cov = write(
            tmp_path,
            "cov.json",
            {"sets": [list(range(0, 11)), list(range(5, 16)), list(range(10, 21))]},
        )
        return sp, cov

    def test_dim(self, capsys, three_intervals):
        sp, cov = three_intervals
        code, report, _ = run(
            capsys, ["cover", "dim", "--space", sp, "--cover", cov, "--scale", "2"]
        )
        assert code == 0
        assert report["result"]["dim"] == 2
        assert report["result"]["covers_space"] is True

    def test_disjointify(self, capsys, three_intervals):
        sp, cov = three_intervals
        code, report, _ = run(
            capsys, ["cover", "disjointify", "--space", sp, "--cover", cov, "--scale", "2"]
        )
        assert code == 0
        res = report["result"]
        assert res["colors"] == 3
        assert res["output_mesh"] <= res["input_mesh"] + 4.0

    def test_lebesgue(self, capsys, tmp_path):
        sp = write(tmp_path, "sp.json", cloud(0, 9))
        cov = write(tmp_path, "cov.json", {"sets": [list(range(0, 5)), list(range(5, 10))]})
        code, report, _ = run(capsys, ["cover", "lebesgue", "--space", sp, "--cover", cov])
        assert code == 0
        assert report["result"]["lebesgue_number"] == 1.0

    def test_uncovered_point_is_violation(self, capsys, tmp_path):
        sp = write(tmp_path, "sp.json", cloud(0, 9))
        cov = write(tmp_path, "cov.json", {"sets": [list(range(0, 5))]})
        code, report, _ = run(capsys, ["cover", "lebesgue", "--space", sp, "--cover", cov])
        assert code == 1
        assert report["status"] == "violation"


class TestMapCommands:
    def test_profile(self, capsys, fold5):
        dom, cod, f = fold5
        code, report, _ = run(
            capsys,
            ["map", "profile", "--domain", dom, "--codomain", cod, "--map", f,
             "--r", "2", "--big-r", "3"],
        )
        assert code == 0
        assert report["result"]["max_components"] == 2
        assert report["result"]["max_component_diam"] == 2.0

    def test_factor(self, capsys, fold5):
        dom, cod, f = fold5
        code, report, _ = run(
            capsys,
            ["map", "factor", "--domain", dom, "--codomain", cod, "--map", f, "--big-r", "1"],
        )
        assert code == 0
        assert len(report["result"]["classes"]) == 11

    def test_control_refusal_exits_one(self, capsys, fold5):
        dom, cod, f = fold5
        code, report, _ = run(
            capsys,
            ["map", "control", "--domain", dom, "--codomain", cod, "--map", f,
             "--n", "1", "--c-cap", "5"],
        )
        assert code == 1
        assert report["status"] == "refusal"
        assert report["error"]["proved"] is True

    def test_control_fold(self, capsys, fold5):
        dom, cod, f = fold5
        code, report, _ = run(
            capsys,
            ["map", "control", "--domain", dom, "--codomain", cod, "--map", f, "--n", "2"],
        )
        assert code == 0
        bps = report["result"]["control"]["breakpoints"]
        assert all(r == v for r, v in bps)


class TestTreeCommands:
    def tree_obj(self, scale):
        return {
            "levels": [
                {"sets": [list(range(16))]},
                {"sets": [list(range(0, 7)), list(range(9, 16)), [7, 8]]},
            ],
            "scales": [scale],
            "branching": [2],
            "splits": [[[[0, 1], [2]]]],
            "terminal_mesh": 6.0,
            "union_mode": "equal",
        }

    def test_verify_ok(self, capsys, tmp_path, path16):
        t = write(tmp_path, "t.json", self.tree_obj(2.0))
        code, report, _ = run(
            capsys, ["tree", "verify", "--space", path16, "--tree", t, "--mode", "sfdc"]
        )
        assert code == 0
        assert report["result"]["ok"] is True
        assert report["result"]["bounded_levels"] == [2]

    def test_verify_violation(self, capsys, tmp_path, path16):
        t = write(tmp_path, "t.json", self.tree_obj(4.0))
        code, report, _ = run(
            capsys, ["tree", "verify", "--space", path16, "--tree", t, "--mode", "casdim"]
        )
        assert code == 1
        assert report["status"] == "violation"
        witness = report["error"]["witness"]
        assert witness["violations"][0][2] == "subfamily_not_disjoint"

    def test_cover(self, capsys, tmp_path, path16):
        t = write(tmp_path, "t.json", self.tree_obj(2.0))
        code, report, _ = run(
            capsys, ["tree", "cover", "--space", path16, "--tree", t, "--scale", "2"]
        )
        assert code == 0
        assert report["result"]["family"]["n_colors"] == 2


class TestMspCommands:
    @pytest.fixture
    def fold3(self, tmp_path):
        dom = write(tmp_path, "d3.json", cloud(-3, 3))
        cod = write(tmp_path, "c3.json", cloud(0, 3))
        f = write(tmp_path, "m3.json", {"assign": [abs(i) for i in range(-3, 4)]})
        return dom, cod, f

    def test_family(self, capsys, tmp_path):
        sp = write(tmp_path, "sp.json", cloud(0, 9))
        mu = write(tmp_path, "mu.json", {"weights": [1] * 10})
        code, report, _ = run(
            capsys,
            ["msp", "family", "--space", sp, "--measure", mu, "--big-r", "2", "--big-s", "3"],
        )
        assert code == 0
        assert abs(report["result"]["mass_family"]["mass"] - 0.8) < 1e-12

    def test_check_not_achievable(self, capsys, fold3):
        dom, cod, f = fold3
        code, report, _ = run(
            capsys,
            ["msp", "check", "--domain", dom, "--codomain", cod, "--map", f,
             "--big-r", "10", "--big-s", "0", "--c", "0.9", "--big-k", "0"],
        )
        assert code == 1
        assert report["status"] == "violation"
        assert report["error"]["witness"]["worst_value"] == 0.5

    def test_check_achievable(self, capsys, fold3):
        dom, cod, f = fold3
        code, report, _ = run(
            capsys,
            ["msp", "check", "--domain", dom, "--codomain", cod, "--map", f,
             "--big-r", "10", "--big-s", "0", "--c", "0.25", "--big-k", "0"],
        )
        assert code == 0
        assert report["result"]["achievable"] is True

    def test_push(self, capsys, tmp_path):
        dom = write(tmp_path, "d9.json", cloud(-9, 9))
        cod = write(tmp_path, "c9.json", cloud(0, 9))
        f = write(tmp_path, "m9.json", {"assign": [abs(i) for i in range(-9, 10)]})
        mu = write(tmp_path, "mu9.json", {"weights": [1] * 10})
        code, report, _ = run(
            capsys,
            ["msp", "push", "--domain", dom, "--codomain", cod, "--map", f,
             "--measure", mu, "--n", "2",
             "--control", '{"type": "linear", "a": 1.0}', "--big-r", "1"],
        )
        assert code == 0
        assert report["result"]["mass_family"]["mass"] >= 0.25


class TestSuiteCommand:
    def test_alias_runs(self, capsys):
        code, report, _ = run(
            capsys, ["suite", "--name", "lemma-disjointify", "--seed", "7", "--count", "3"]
        )
        assert code == 0
        assert report["result"]["suite"] == "disjointify"
        assert report["result"]["failures"] == []

    def test_unknown_suite(self, capsys):
        code, report, err = run(capsys, ["suite", "--name", "nope", "--seed", "1"])
        assert code == 2 and report is None


class TestDeterminism:
    def test_identical_bytes_across_runs(self, capsys, tmp_path, path16):
        cov = write(tmp_path, "cov.json", {"sets": [list(range(0, 9)), list(range(7, 16))]})
        argv = ["cover", "dim", "--space", path16, "--cover", cov, "--scale", "2"]
        code1, _, _ = run(capsys, argv)
        out1 = (tmp_path / "r1.json")
        out2 = (tmp_path / "r2.json")
        assert main(["--output", str(out1)] + argv) == 0
        assert main(["--output", str(out2)] + argv) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_timing_goes_to_stderr_only(self, capsys, tmp_path, path16):
        cov = write(tmp_path, "cov.json", {"sets": [list(range(16))]})
        argv = ["cover", "dim", "--space", path16, "--cover", cov, "--scale", "2"]
        code, report1, err = run(capsys, ["--timing"] + argv)
        assert code == 0 and "elapsed:" in err
        code, report2, err = run(capsys, argv)
        assert err == ""
        assert report1 == report2

    def test_parameters_exclude_io_flags(self, capsys, tmp_path, path16):
        cov = write(tmp_path, "cov.json", {"sets": [list(range(16))]})
        _, report, _ = run(
            capsys, ["cover", "dim", "--space", path16, "--cover", cov, "--scale", "2"]
        )
        assert "output" not in report["parameters"]
        assert "timing" not in report["parameters"]
