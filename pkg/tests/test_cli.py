import math

import numpy as np
import pytest

from pharmonious.cli import (EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_OK, EXIT_VIOLATION, ConfigError,
                             compile_expression, load_config, main)


def test_expressions():
    pts = np.array([[0.5, 0.5], [-1.0, 0.0], [0.0, 2.0]])
    np.testing.assert_allclose(compile_expression("x1^2 + 2*x2 - 1")(pts), pts[:, 0] ** 2 + 2 * pts[:, 1] - 1)
    np.testing.assert_allclose(compile_expression("cos(theta)")(pts), pts[:, 0] / np.linalg.norm(pts, axis=1),
                               atol=1e-15)
    np.testing.assert_allclose(compile_expression("r^(2/3)")(pts), np.linalg.norm(pts, axis=1) ** (2 / 3))
    np.testing.assert_allclose(compile_expression("-sin(pi*x1)*exp(x2)")(pts),
                               -np.sin(math.pi * pts[:, 0]) * np.exp(pts[:, 1]))
    assert compile_expression("3")(pts).tolist() == [3.0, 3.0, 3.0]


@pytest.mark.parametrize("bad", ["x1 +", "__import__('os')", "x1.real", "lambda: 1", "x4", "open(1)"])
def test_expression_rejects(bad):
    with pytest.raises(ConfigError):
        compile_expression(bad)(np.zeros((1, 2)))


def test_config_diagnostics(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("# comment\nh = 0.1\n\np = abc\n")
    with pytest.raises(ConfigError, match=":4: bad value for 'p'"):
        load_config(str(path))
    path.write_text("[run]\nwidth = 3\n")
    with pytest.raises(ConfigError, match="unknown key 'width'"):
        load_config(str(path))
    with pytest.raises(ConfigError, match="constants rejected"):
        load_config(None, ["p=4", "lambda_cap=0.8", "lambda=0.5"])
    with pytest.raises(ConfigError, match="strictly decreasing"):
        load_config(None, ["mode=eps_study", "eps_list=0.2 0.4"])


def test_config_values(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("domain = annulus\ninner = 0.3\np = 4\neps_list = 0.4, 0.2\nwarm_start = no\n")
    cfg = load_config(str(path), ["h=0.05"])
    assert cfg.domain == "annulus" and cfg.inner == 0.3 and cfg.p == 4.0
    assert cfg.eps_list == (0.4, 0.2) and cfg.warm_start is False and cfg.h == 0.05


def test_bad_config_exit_code(tmp_path, capsys):
    assert main(["solve", "--set", "p=1", "--output", str(tmp_path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "manifest.csv").exists()


def test_solve_constant(tmp_path):
    assert main(["solve", "--set", "f=1", "--set", "h=0.0625", "--output", str(tmp_path)]) == EXIT_OK
    data = np.loadtxt(tmp_path / "solution.csv", delimiter=",", skiprows=1)
    assert np.all(data[:, -1] == 1.0)
    manifest = (tmp_path / "manifest.csv").read_text()
    assert "library_version,0.1.0" in manifest and "mode,solve" in manifest


def test_non_convergence_exit(tmp_path):
    code = main(["solve", "--set", "f=x1^2", "--set", "h=0.125", "--set", "max_iter=2", "--output", str(tmp_path)])
    assert code == EXIT_NONCONVERGED
    assert (tmp_path / "increments.csv").read_text().count("\n") == 3


def test_eps_study_affine(tmp_path):
    args = ["eps-study", "--set", "f=x1", "--set", "reference=x1", "--set", "h=0.03125", "--set", "p=2",
            "--set", "lambda=0.5", "--set", "lambda_cap=0.5", "--set", "eps_list=0.4 0.2 0.1",
            "--output", str(tmp_path)]
    assert main(args) == EXIT_OK
    study = np.loadtxt(tmp_path / "study.csv", delimiter=",", skiprows=1)
    assert study.shape == (3, 6)
    assert np.all(np.diff(study[:, 0]) < 0)
    assert np.all(np.diff(study[:, 4]) < 0), study[:, 4]


def test_verify_lemmas(tmp_path):
    assert main(["verify-lemmas", "--output", str(tmp_path)]) == EXIT_OK
    rows = (tmp_path / "summary.csv").read_text().splitlines()[1:]
    assert len(rows) == 3 and all(r.endswith(",1") for r in rows)


def test_verify_barrier_disk(tmp_path):
    assert main(["verify-barrier", "--output", str(tmp_path)]) == EXIT_OK
    rows = (tmp_path / "summary.csv").read_text().splitlines()[1:]
    assert rows and all(r.endswith(",1") for r in rows)
    assert (tmp_path / "margins_key_inequality.csv").exists()


def test_consistency_mode(tmp_path):
    assert main(["consistency", "--set", "p=3", "--output", str(tmp_path)]) == EXIT_OK
    text = (tmp_path / "consistency.csv").read_text().splitlines()
    assert text[0].startswith("function,x1,x2,epsilon")
    assert len(text) == 1 + 2 * 3 * 3
