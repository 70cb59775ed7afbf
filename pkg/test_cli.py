"""
Tests for the hesscraft command-line interface.
"""

import pytest

from cli import CheckReport, main, run_check
from conftest import WORKED_HESSIAN
from core.tape import dumps, record


def mm_body(text):
    return [line.split() for line in text.splitlines() if line and not line.startswith("%")]


@pytest.fixture
def worked_files(tmp_path, worked_tape):
    tape_file = tmp_path / "worked.tape"
    tape_file.write_text(dumps(worked_tape), encoding="utf-8")
    point_file = tmp_path / "x.txt"
    point_file.write_text("1 0\n2\n", encoding="utf-8")
    return str(tape_file), str(point_file)


class TestArtifacts:
    def test_grad_linear(self, capsys):
        assert main(["grad", "--function", "linear", "--n", "4", "--x-const", "0"]) == 0
        assert capsys.readouterr().out == "3 3 3 3\n"

    def test_grad_csv(self, capsys):
        assert main(["grad", "--function", "linear", "--n", "2", "--format", "csv"]) == 0
        assert capsys.readouterr().out == "3,3\n"

    def test_eval(self, capsys, worked_files):
        tape_file, point_file = worked_files
        assert main(["eval", "--tape", tape_file, "--x-file", point_file]) == 0
        assert capsys.readouterr().out == "8\n"

    def test_hess_band1_matrix_market(self, capsys):
        assert main(["hess", "--function", "band1", "--n", "6", "--x-const", "1.0"]) == 0
        captured = capsys.readouterr()
        body = mm_body(captured.out)
        assert body[0] == ["6", "6", "11"]
        assert len(body) == 12
        assert "[INFO] n=6" in captured.err

    def test_hess_plain_from_tape_file(self, capsys, worked_files):
        tape_file, point_file = worked_files
        assert main(["hess", "--tape", tape_file, "--x-file", point_file, "--format", "plain", "-q"]) == 0
        captured = capsys.readouterr()
        got = {}
        for line in captured.out.splitlines():
            r, c, v = line.split()
            got[int(r), int(c)] = float(v)
        assert got == WORKED_HESSIAN
        assert captured.err == ""

    @pytest.mark.parametrize("method", ["nested", "paths", "pattern", "fd"])
    def test_hess_methods_share_pattern(self, capsys, method, worked_files):
        tape_file, point_file = worked_files
        assert main(["hess", "--tape", tape_file, "--x-file", point_file, "--format", "csv", "--method", method]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "row,col,value"
        assert {tuple(map(int, line.split(",")[:2])) for line in lines[1:]} == set(WORKED_HESSIAN)

    def test_hess_drop_tol(self, capsys, worked_files):
        tape_file, point_file = worked_files
        main(["hess", "--tape", tape_file, "--x-file", point_file, "--format", "plain", "--drop-tol", "5"])
        assert capsys.readouterr().out == "1 1 10\n"

    def test_output_file(self, tmp_path, capsys):
        target = tmp_path / "h.mtx"
        assert main(["hess", "--function", "arrow", "--n", "5", "-o", str(target), "-q"]) == 0
        assert capsys.readouterr().out == ""
        assert mm_body(target.read_text(encoding="utf-8"))[0] == ["5", "5", "9"]

    def test_repeated_runs_are_byte_identical(self, capsys):
        argv = ["hess", "--function", "irregular", "--n", "30", "--x-seed", "4", "-q"]
        main(argv)
        first = capsys.readouterr().out
        main(argv)
        assert capsys.readouterr().out == first

    @pytest.mark.parametrize("graph", ["tape", "folded", "snapshots"])
    def test_export_graph(self, capsys, graph):
        assert main(["export-graph", "--function", "band1", "--n", "3", "--graph", graph]) == 0
        out = capsys.readouterr().out
        assert out.startswith("digraph ")
        assert ("dashed" in out) == (graph != "tape")

    def test_bench_csv(self, capsys):
        assert main(["bench", "--function", "band1", "linear", "--n", "10", "--repeats", "1", "-q"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "family,n,ell,phase,median_ns,nnz,peak_live_edges"
        assert [line.split(",")[0] for line in lines[1:]] == ["band1", "linear"]

    def test_config(self, capsys):
        assert main(["config"]) == 0
        assert "dense_cap: 200" in capsys.readouterr().out


class TestErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["hess"],
            ["hess", "--function", "band1"],
            ["hess", "--function", "band1", "--n", "0"],
            ["hess", "--function", "band1", "--n", "4", "--x-const", "1", "--x-seed", "2"],
            ["hess", "--function", "band1", "--n", "4", "--method", "magic"],
            ["grad", "--function", "band1", "--n", "4", "--format", "mm"],
            ["bench", "--function", "band1"],
        ],
    )
    def test_usage_errors_exit_2(self, argv, capsys):
        assert main(argv) == 2

    def test_point_length_mismatch(self, tmp_path, capsys):
        point = tmp_path / "x.txt"
        point.write_text("1 2 3", encoding="utf-8")
        assert main(["grad", "--function", "band1", "--n", "4", "--x-file", str(point)]) == 2
        assert "[ERROR] point has 3 coordinates" in capsys.readouterr().err

    def test_evaluation_error_exits_1(self, tmp_path, capsys):
        tape = tmp_path / "ln.tape"
        tape.write_text("0 input\n1 ln 0\n", encoding="utf-8")
        assert main(["eval", "--tape", str(tape), "--x-const", "-1"]) == 1
        captured = capsys.readouterr()
        assert captured.out == ""
        assert captured.err.startswith("[ERROR]")

    def test_unknown_family_exits_2(self, capsys):
        assert main(["grad", "--function", "band9", "--n", "4"]) == 2
        err = capsys.readouterr().err
        assert "usage: hesscraft" in err
        assert "[ERROR] Unknown family: band9" in err

    def test_n_below_family_minimum_exits_2(self, capsys):
        assert main(["grad", "--function", "band5", "--n", "3"]) == 2
        assert "[ERROR]" in capsys.readouterr().err

    def test_malformed_tape_exits_2(self, tmp_path, capsys):
        tape = tmp_path / "bad.tape"
        tape.write_text("0 input\n1 frobnicate 0\n", encoding="utf-8")
        assert main(["hess", "--tape", str(tape)]) == 2
        assert capsys.readouterr().out == ""


class TestCheck:
    def test_run_check_small(self):
        report = run_check(trials=20, max_n=4, max_ell=12, seed=3)
        assert isinstance(report, CheckReport)
        assert report.trials == 20
        assert report.enumerated == 20
        assert report.failures == []
        assert report.max_nested <= 1e-9

    def test_default_check_run_is_clean(self):
        report = run_check(trials=1000, max_n=8, max_ell=40, seed=0)
        assert report.trials == 1000
        assert report.failures == []
        assert report.max_fd <= 1e-4 and report.max_gradient <= 1e-5

    def test_check_command(self, capsys):
        assert main(["check", "--trials", "5", "--max-n", "3", "--max-ell", "10", "-q"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("trials=5 ")
        assert "failures=0" in out

    def test_linear_tape_through_file(self, tmp_path, capsys):
        tape = tmp_path / "lin.tape"
        tape.write_text(dumps(record(lambda x: 3 * x[0] + x[1] - 7, 2)), encoding="utf-8")
        assert main(["hess", "--tape", str(tape), "--format", "plain", "-q"]) == 0
        assert capsys.readouterr().out == ""
