import json
import subprocess
import sys
import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from airycov import airy, cli, covariance
from airycov.fredholm import FredholmError

SMALL_FIGURE = ["--K", "400", "--R", "2", "--N", "6", "--du", "0.5"]


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def manifest(err):
    return json.loads(err.strip().splitlines()[-1])


def rows(path):
    text = path.read_bytes().decode()
    assert "\r" not in text and text.endswith("\n")
    lines = text.splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


class TestSelftest:
    def test_passes(self, capsys):
        start = time.perf_counter()
        code, out, _ = run(["selftest"], capsys)
        assert code == 0
        assert time.perf_counter() - start < 60
        assert "FAIL" not in out and out.count("PASS") == len(cli.selftest_checks())

    def test_perturbed_airy_series_fails(self, capsys, monkeypatch):
        coef = airy._COEF.copy()
        coef *= 1.0 + 1e-9
        monkeypatch.setattr(airy, "_COEF", coef)
        code, out, err = run(["selftest"], capsys)
        assert code == 1
        assert "FAIL" in out and "self-test failed" in err

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "airycov", "selftest"], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr


class TestCov:
    def test_single_variance_row(self, tmp_path, capsys):
        out = tmp_path / "g1.csv"
        code, _, err = run(["cov", "--process", "airy1", "--umax", 0, "--du", 1, "--out", out], capsys)
        assert code == 0
        header, body = rows(out)
        assert header == ["u", "cov"]
        assert len(body) == 1 and float(body[0][0]) == 0.0
        assert abs(float(body[0][1]) - 0.402) <= 1e-3
        m = manifest(err)
        assert m["subcommand"] == "cov" and m["outputs"] == [str(out)]
        assert m["params"]["tol"] == 1e-14 and "version" in m and "wall_clock_s" in m

    def test_airy2_variance_row(self, tmp_path, capsys):
        out = tmp_path / "g2.csv"
        assert run(["cov", "--process", "airy2", "--umax", 0, "--du", 0.1, "--out", out], capsys)[0] == 0
        _, body = rows(out)
        assert abs(float(body[0][1]) - 0.81320) <= 1e-4

    def test_seventeen_digits(self, tmp_path, capsys):
        out = tmp_path / "g.csv"
        run(["cov", "--process", "airy1", "--umax", 0.2, "--du", 0.1, "--out", out], capsys)
        _, body = rows(out)
        assert [r[0] for r in body] == ["0", "0.10000000000000001", "0.20000000000000001"]
        for _, v in body:
            assert float(v) == float(f"{float(v):.17g}")

    def test_numerical_failure_exits_one(self, tmp_path, capsys, monkeypatch):
        def broken(*args, **kwargs):
            raise FredholmError("stub failure")

        monkeypatch.setattr(covariance, "covariance_point", broken)
        out = tmp_path / "x.csv"
        code, _, err = run(["cov", "--process", "airy2", "--umax", 0.1, "--du", 0.1, "--out", out], capsys)
        assert code == 1 and "numerical failure" in err
        assert not out.exists()


class TestJoint:
    def test_stdout(self, capsys):
        code, out, _ = run(["joint", "--process", "airy2", "--u", 0, "--s1", 0.3, "--s2", -0.1], capsys)
        assert code == 0
        header, line = out.strip().splitlines()
        assert header == "process,u,s1,s2,value"
        assert line.startswith("airy2,0,0.29999999999999999,-0.10000000000000001,")

    def test_file(self, tmp_path, capsys):
        out = tmp_path / "j.csv"
        code, stdout, _ = run(
            ["joint", "--process", "airy1", "--u", 1, "--s1", 0, "--s2", 0, "--tol", 1e-10, "--out", out], capsys
        )
        assert code == 0 and stdout == ""
        _, body = rows(out)
        assert 0 < float(body[0][4]) < 1


class TestDyson:
    def test_columns_and_single_realization(self, tmp_path, capsys):
        out = tmp_path / "d.csv"
        code, _, _ = run(["dyson", "--ensemble", "gue", "--N", 6, "--K", 300, "--maxlag", 4, "--out", out], capsys)
        assert code == 0
        header, body = rows(out)
        assert header == ["u", "cov", "stderr"]
        assert len(body) == 5 and all(r[2] == "" for r in body)
        assert float(body[0][1]) > 0

    def test_stderr_with_realizations(self, tmp_path, capsys):
        out = tmp_path / "d.csv"
        run(["dyson", "--ensemble", "goe", "--N", 6, "--K", 300, "--R", 3, "--maxlag", 2, "--out", out], capsys)
        _, body = rows(out)
        assert all(float(r[2]) >= 0 for r in body)
        np.testing.assert_allclose([float(r[0]) for r in body], 0.5 * 6 ** (-1 / 3) * 0.5 * 6 ** (1 / 3) * 0.5
                                   * np.arange(3))


class TestFigure:
    @pytest.mark.parametrize("which", [1, 2, 3])
    def test_outputs(self, which, tmp_path, capsys):
        prefix = tmp_path / f"fig{which}"
        code, _, err = run(["figure", "--which", which, "--out", prefix] + SMALL_FIGURE, capsys)
        assert code == 0, err
        header, body = rows(tmp_path / f"fig{which}.csv")
        assert header == ["series", "u", "value", "stderr"]
        series = {r[0] for r in body}
        root = ET.parse(tmp_path / f"fig{which}.svg").getroot()
        assert root.tag.endswith("svg") and root.get("viewBox") == "0 0 800 600"
        texts = [t.text for t in root.iter() if t.tag.endswith("text")]
        assert "u" in texts and "covariance" in texts
        lines = [e for e in root.iter() if e.tag.endswith("polyline")]
        circles = [e for e in root.iter() if e.tag.endswith("circle")]
        if which == 3:
            assert series == {"f_goe_N6", "half_f_gue_2u_N6", "u^-2"}
            assert len(lines) == 1
        else:
            assert series == {"g1" if which == 1 else "g2", f"f_{'goe' if which == 1 else 'gue'}_N6"}
            assert len(lines) == 1 and circles
        assert manifest(err)["outputs"] == [str(prefix) + ".csv", str(prefix) + ".svg"]

    def test_partial_outputs_removed(self, tmp_path, capsys, monkeypatch):
        def broken(*args, **kwargs):
            raise FloatingPointError("render failed")

        monkeypatch.setattr(cli, "render_svg", broken)
        prefix = tmp_path / "fig"
        code, _, _ = run(["figure", "--which", 3, "--out", prefix] + SMALL_FIGURE, capsys)
        assert code == 1
        assert list(tmp_path.iterdir()) == []


class TestArguments:
    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["nonsense"],
            ["cov", "--process", "airy3", "--umax", 1, "--du", 0.1, "--out", "x.csv"],
            ["cov", "--process", "airy2", "--umax", 1, "--du", 0, "--out", "x.csv"],
            ["cov", "--process", "airy2", "--umax", 11, "--du", 0.1, "--out", "x.csv"],
            ["cov", "--process", "airy2", "--du", 0.1, "--out", "x.csv"],
            ["joint", "--process", "airy2", "--u", -1, "--s1", 0, "--s2", 0],
            ["joint", "--process", "airy2", "--u", 1, "--s1", 0, "--s2", 0, "--tol", 1e-20],
            ["dyson", "--ensemble", "goe", "--N", 1, "--K", 300, "--out", "x.csv"],
            ["dyson", "--ensemble", "goe", "--N", 8, "--K", 10, "--out", "x.csv"],
            ["figure", "--which", 4, "--out", "f"],
            ["figure", "--which", 1, "--scale", "huge", "--out", "f"],
        ],
    )
    def test_exit_two(self, argv, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, _, err = run(argv, capsys)
        assert code == 2
        assert "error" in err
        assert not (tmp_path / "x.csv").exists()

    def test_config_file_and_precedence(self, tmp_path, capsys):
        cfg = tmp_path / "run.conf"
        cfg.write_text("# desk settings\nensemble = goe\nN = 6\nK = 300\nmaxlag = 3\nseed = 5\n")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(["--config", cfg, "dyson", "--out", a], capsys)[0] == 0
        code, _, err = run(["--config", cfg, "dyson", "--seed", 6, "--out", b], capsys)
        assert code == 0 and manifest(err)["seed"] == 6
        assert len(rows(a)[1]) == 4
        assert a.read_bytes() != b.read_bytes()

    def test_config_from_environment(self, tmp_path, capsys, monkeypatch):
        cfg = tmp_path / "env.conf"
        cfg.write_text("process = airy1\numax = 0\ndu = 1\n")
        monkeypatch.setenv(cli.CONFIG_ENV, str(cfg))
        out = tmp_path / "c.csv"
        assert run(["cov", "--out", out], capsys)[0] == 0
        assert len(rows(out)[1]) == 1

    @pytest.mark.parametrize("text", ["N\n", "N = many\n"])
    def test_bad_config(self, text, tmp_path, capsys):
        cfg = tmp_path / "bad.conf"
        cfg.write_text(text)
        code, _, _ = run(["--config", cfg, "dyson", "--ensemble", "goe", "--K", 300, "--out", tmp_path / "o.csv"],
                         capsys)
        assert code == 2

    def test_missing_config_file(self, tmp_path, capsys):
        code, _, _ = run(["--config", tmp_path / "absent.conf", "selftest"], capsys)
        assert code == 2


class TestSvg:
    def test_log_axes_skip_non_positive(self):
        svg = cli.render_svg("t", "u", "v", [("c", np.array([0.5, 1.0, 2.0]), np.array([1.0, 0.0, 0.25]))],
                             [("s", np.array([1.0]), np.array([0.5]), np.array([0.1]))], log=True)
        root = ET.fromstring(svg)
        assert root.tag.endswith("svg")

    def test_fmt(self):
        assert cli.fmt(None) == "" and cli.fmt(float("nan")) == ""
        assert cli.fmt(0.1) == "0.10000000000000001"
