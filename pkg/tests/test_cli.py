import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ibcfem import cli
from ibcfem.cli import ConfigError, ExperimentConfig, main, run, run_convergence, run_single_solve


def run_main(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_single_mesh_convergence_has_na_orders(capsys):
    code, out, _ = run_main(["convergence", "--meshes", "10"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 3
    assert lines[2].count("n/a") == 3
    assert "7.3" in lines[2]  # reference value for the coarsest mesh


def test_convergence_lagrange_test2_two_meshes():
    rep = run_convergence(ExperimentConfig(problem="test2", method="lagrange", meshes=(10, 20)))
    assert rep.eps is None
    assert [r.n for r in rep.rows] == [10, 20]
    assert rep.rows[0].l2 == pytest.approx(3.51e-2, rel=0.15)
    # the Lagrange current is only first-order accurate
    assert abs(rep.rows[1].current - 2 / np.pi**2) < abs(rep.rows[0].current - 2 / np.pi**2)


def test_rows_sorted_by_h_regardless_of_input_order():
    rep = run_convergence(ExperimentConfig(meshes=(8, 4)))
    assert [r.n for r in rep.rows] == [4, 8]


def test_outputs_are_byte_identical_on_rerun(tmp_path, capsys):
    for d in ("a", "b"):
        code, _, _ = run_main(["convergence", "--meshes", "4,8", "--out", str(tmp_path / d)], capsys)
        assert code == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["convergence_test1_nitsche_direct.csv", "convergence_test1_nitsche_direct.json",
                     "convergence_test1_nitsche_direct.md"]
    # the JSON report carries wall times; CSV and markdown must be reproducible
    for name in names:
        if name.endswith(".json"):
            continue
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes()
    assert b"seconds" not in (tmp_path / "a" / names[0]).read_bytes()


def test_csv_identical_with_threads(tmp_path, monkeypatch):
    base = ExperimentConfig(meshes=(4, 8, 16), out=str(tmp_path / "serial"))
    run(base, stdout=io.StringIO())
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    run(ExperimentConfig(meshes=(16, 4, 8), out=str(tmp_path / "threads")), stdout=io.StringIO())
    stem = "convergence_test1_nitsche_direct.csv"
    assert (tmp_path / "serial" / stem).read_bytes() == (tmp_path / "threads" / stem).read_bytes()


def test_bad_thread_count(monkeypatch, capsys):
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    code, _, err = run_main(["convergence", "--meshes", "4"], capsys)
    assert code == 2 and cli.THREADS_ENV in err


@pytest.mark.parametrize(
    "argv",
    [
        ["convergence", "--meshes", ""],
        ["convergence", "--meshes", "0"],
        ["convergence", "--meshes", "a,b"],
        ["convergence", "--epsilon", "0"],
        ["convergence", "--epsilon=-1e-9"],
        ["convergence", "--epsilon", "1e-3,1e-4"],
        ["convergence", "--method", "penalty"],
        ["convergence", "--method", "nitsche,lagrange"],
        ["solver-study", "--solver", "direct"],
        ["epsilon-sweep", "--method", "lagrange"],
        ["epsilon-sweep", "--meshes", "10,20"],
        ["solve", "--meshes", "10,20"],
        ["convergence", "--problem", "custom", "--f", "0"],
        ["solve", "--f", "exp(x)", "--sigma", "1", "--phi-d", "1", "--V", "1", "--R", "0"],
        ["solve", "--f", "0", "--sigma", "1", "--phi-d", "1", "--V", "1", "--R", "-1"],
        ["convergence", "--f", "0", "--sigma", "1", "--phi-d", "1", "--V", "1", "--R", "0", "--meshes", "4"],
        ["convergence", "--tol", "0"],
    ],
)
def test_config_errors_exit_2(argv, capsys):
    code, out, err = run_main(argv, capsys)
    assert code == 2
    assert err.startswith("error:")
    assert out == ""


def test_unknown_verb_is_argparse_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit"])
    assert exc.value.code == 2


def test_non_converged_rows_exit_1(capsys):
    code, out, _ = run_main(
        ["convergence", "--method", "lagrange", "--solver", "gmres-amg", "--meshes", "10", "--max-iter", "3"],
        capsys,
    )
    assert code == 1
    assert "Not Converge" in out


def test_solver_study_non_convergence_is_data(tmp_path, capsys):
    code, out, _ = run_main(
        ["solver-study", "--meshes", "10", "--max-iter", "50", "--out", str(tmp_path)], capsys
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "| Mesh size | nitsche | lagrange |"
    cells = [c.strip() for c in lines[2].strip("|").split("|")]
    assert cells[0] == "0.1" and int(cells[1]) <= 40 and cells[2] == "Not Converge"
    data = json.loads((tmp_path / "solver_study_test1.json").read_text())
    assert data["tol"] == 1e-7 and len(data["rows"]) == 2


def test_epsilon_sweep_small(tmp_path, capsys):
    code, out, _ = run_main(
        ["epsilon-sweep", "--meshes", "20", "--epsilon", "1e-2,1e-6", "--out", str(tmp_path)], capsys
    )
    assert code == 0
    csv_lines = (tmp_path / "epsilon_sweep_test2_nitsche-bordered_n20.csv").read_text().splitlines()
    assert [ln.split(",")[0] for ln in csv_lines[1:]] == ["1.0e-02", "1.0e-06"]
    l2 = [float(ln.split(",")[1]) for ln in csv_lines[1:]]
    assert l2[0] > 2 * l2[1]


@pytest.mark.parametrize("name,current,mean", [("test1", 1 / 6, 5 / 6), ("test2", 2 / np.pi**2, 1.0)])
def test_single_solve_builtin(name, current, mean):
    res = run_single_solve(ExperimentConfig(experiment="solve", problem=name))
    assert res.stats.converged
    assert res.current == pytest.approx(current, abs=1e-3)
    assert res.trace["mean"] == pytest.approx(mean, abs=1e-3)
    assert res.phi.shape == (81 * 81,)


def test_solve_writes_solution_rows(tmp_path, capsys):
    code, out, _ = run_main(["solve", "--meshes", "4", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.startswith("current ")
    rows = np.loadtxt(tmp_path / "solve_test1_nitsche_n4.txt")
    assert rows.shape == (25, 3)
    assert np.allclose(rows[:5, 1], 0.0) and np.allclose(rows[:5, 0], [0, 0.25, 0.5, 0.75, 1.0])
    summary = json.loads((tmp_path / "solve_test1_nitsche_n4.json").read_text())
    assert set(summary["gamma1_trace"]) >= {"mean", "min", "max"}
    assert summary["config"]["meshes"] == [4]


@pytest.mark.parametrize("method", ["nitsche", "nitsche-bordered", "lagrange"])
def test_custom_constant_solution(method, capsys, tmp_path):
    argv = ["solve", "--f", "0", "--sigma", "1", "--phi-d", "2.5", "--V", "2.5", "--R", "0",
            "--method", method, "--meshes", "12", "--out", str(tmp_path)]
    code, _, _ = run_main(argv, capsys)
    assert code == 0
    phi = np.loadtxt(tmp_path / f"solve_custom_{method}_n12.txt")[:, 2]
    assert np.max(np.abs(phi - 2.5)) <= 1e-9


def test_custom_problem_from_config_file(tmp_path, capsys):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(
        "[experiment]\n"
        "experiment = convergence\n"
        "problem = custom\n"
        "method = nitsche\n"
        "meshes = 10,20\n"
        "epsilon = 1e-9\n"
        "\n"
        "[problem]\n"
        "f = -4*x*y + 2*x\n"
        "sigma = 1\n"
        "V = 1\n"
        "R = 1\n"
        "phi_d = 2/3*y^3 - y^2 + 5/6\n"
        "exact = 2/3*x*y^3 - x*y^2 + 5/6\n"
    )
    code, out, _ = run_main(["convergence", "--config", str(cfg)], capsys)
    assert code == 0
    builtin = run_convergence(ExperimentConfig(meshes=(10, 20)))
    lines = out.strip().splitlines()
    # same problem written as expressions: the L2 column matches the built-in Test 1
    assert f"{builtin.rows[0].l2:.2e}" in lines[2] and f"{builtin.rows[1].l2:.2e}" in lines[3]


def test_flags_override_config_file(tmp_path, capsys):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[experiment]\nmeshes = 10,20,40\nmethod = lagrange\n")
    code, out, _ = run_main(["convergence", "--config", str(cfg), "--meshes", "4"], capsys)
    assert code == 0 and len(out.strip().splitlines()) == 3


@pytest.mark.parametrize("text", ["[experiment]\ncolour = red\n", "[problem]\ng = 1\n"])
def test_config_file_rejects_unknown_keys(tmp_path, text, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(text)
    code, _, err = run_main(["convergence", "--config", str(cfg)], capsys)
    assert code == 2 and "unknown" in err


def test_missing_config_file(tmp_path, capsys):
    code, _, _ = run_main(["convergence", "--config", str(tmp_path / "nope.ini")], capsys)
    assert code == 2


def test_resolved_defaults():
    c = ExperimentConfig(experiment="epsilon-sweep").resolved()
    assert c.problem == "test2" and c.method == "nitsche-bordered" and c.meshes == (80,)
    assert c.epsilon[0] == 1e-2 and c.epsilon[-1] == pytest.approx(1e-14) and len(c.epsilon) == 13
    assert c.arithmetic == "literal"
    s = ExperimentConfig(experiment="solver-study").resolved()
    assert s.methods == ["nitsche", "lagrange"] and s.solver == "gmres-amg" and s.meshes == (10, 20, 40, 80)
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="nope").resolved()


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "ibcfem", "convergence", "--meshes", "4"], capture_output=True, text=True, timeout=120
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("| Mesh size |")
