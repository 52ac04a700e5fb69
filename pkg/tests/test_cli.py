import subprocess
import sys

import numpy as np
import pytest

from sparsekaczmarz.cli import EXIT_INPUT, EXIT_MAX_STEPS, EXIT_OK, main
from sparsekaczmarz.io import read_pgm, read_vector, write_matrix, write_vector


def parse_summary(out):
    line = [ln for ln in out.splitlines() if ln.startswith("summary,")][-1]
    parts = line.split(",")
    return parts[1], dict(p.split("=") for p in parts[2:])


@pytest.fixture
def identity_files(tmp_path):
    write_matrix(tmp_path / "A.mtx", np.eye(2))
    write_vector(tmp_path / "b.txt", [2.0, 0.0])
    return tmp_path


def test_solve_identity(identity_files, capsys):
    d = identity_files
    code = main(["solve", str(d / "A.mtx"), str(d / "b.txt"), "--lambda", "1",
                 "--output", str(d / "x.txt"), "--trace", str(d / "t.csv")])
    assert code == EXIT_OK
    np.testing.assert_allclose(read_vector(d / "x.txt"), [2, 0], atol=1e-6)
    name, fields = parse_summary(capsys.readouterr().out)
    assert name == "solve" and fields["stop_step"] == "none"
    assert (d / "t.csv").read_text().startswith("step,rows,residual,error,objective\n")


def test_solve_dimension_mismatch(identity_files, capsys):
    d = identity_files
    write_vector(d / "b3.txt", [1.0, 2.0, 3.0])
    assert main(["solve", str(d / "A.mtx"), str(d / "b3.txt")]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_solve_missing_file(tmp_path):
    assert main(["solve", str(tmp_path / "nope.mtx"), str(tmp_path / "b.txt")]) == EXIT_INPUT


def test_solve_max_steps(tmp_path):
    A = np.random.default_rng(0).standard_normal((6, 10))
    write_matrix(tmp_path / "A.mtx", A)
    write_vector(tmp_path / "b.txt", A @ np.ones(10))
    code = main(["solve", str(tmp_path / "A.mtx"), str(tmp_path / "b.txt"),
                 "--max-steps", "10", "--tol", "1e-14", "--trace", str(tmp_path / "t.csv")])
    assert code == EXIT_MAX_STEPS
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 11


def test_solve_block_and_stepsize_options(tmp_path):
    A = np.random.default_rng(1).standard_normal((6, 10))
    write_matrix(tmp_path / "A.mtx", A)
    write_vector(tmp_path / "b.txt", A @ np.ones(10))
    code = main(["solve", str(tmp_path / "A.mtx"), str(tmp_path / "b.txt"),
                 "--block-size", "4", "--stepsize", "constant", "--tol", "1e-6",
                 "--control", "uniform_random", "--seed", "2"])
    assert code == EXIT_OK


def test_cs_online_example(tmp_path, capsys):
    trace = tmp_path / "cs.csv"
    assert main(["cs-online", "--n", "200", "--sparsity", "5", "--seed", "1",
                 "--trace", str(trace)]) == EXIT_OK
    rows = trace.read_text().splitlines()
    assert float(rows[-1].split(",")[3]) < 1e-3
    _, fields = parse_summary(capsys.readouterr().out)
    assert float(fields["error"]) < 1e-3


def test_tomo_contract(tmp_path, capsys):
    img, trace = tmp_path / "u.pgm", tmp_path / "t.csv"
    assert main(["tomo", "--size", "32", "--lb-steps", "1", "--sweeps", "50",
                 "--image", str(img), "--trace", str(trace)]) == EXIT_OK
    assert read_pgm(img).shape == (32, 32)
    assert len(trace.read_text().splitlines()) == 51
    name, fields = parse_summary(capsys.readouterr().out)
    assert name == "tomo" and fields["steps"] == "50"


def test_ri_reports_stop_step(tmp_path, capsys):
    img = tmp_path / "x.pgm"
    assert main(["ri", "--size", "32", "--blocks", "16", "--image", str(img)]) == EXIT_OK
    _, fields = parse_summary(capsys.readouterr().out)
    assert fields["stop_step"] != "none"
    assert int(fields["stop_step"]) % 300 == 0
    assert read_pgm(img).shape == (32, 32)


def test_invalid_config_exits_nonzero(capsys):
    assert main(["cs-online", "--n", "5", "--sparsity", "6"]) == EXIT_INPUT
    assert main(["tomo", "--size", "4"]) == EXIT_INPUT
    with pytest.raises(SystemExit) as exc:
        main(["cs-online", "--schedule", "0"])
    assert exc.value.code != 0


SMALL_RUNS = {
    "solve": None,
    "cs-online": ["cs-online", "--n", "60", "--sparsity", "3", "--seed", "4",
                  "--control", "uniform_random", "--tail-steps", "100"],
    "tomo": ["tomo", "--size", "16", "--sweeps", "5", "--lb-steps", "3"],
    "ri": ["ri", "--size", "16", "--blocks", "6", "--schedule", "40", "--log-every", "10"],
}


@pytest.mark.parametrize("command", sorted(SMALL_RUNS))
def test_traces_byte_identical(command, tmp_path, identity_files):
    argv = SMALL_RUNS[command]
    if argv is None:
        argv = ["solve", str(identity_files / "A.mtx"), str(identity_files / "b.txt"),
                "--control", "uniform_random", "--seed", "5"]
    outs = []
    for k in range(2):
        path = tmp_path / f"{k}.csv"
        main(argv + ["--trace", str(path)])
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] and len(outs[0]) > 0


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "sparsekaczmarz", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for sub in ("solve", "cs-online", "tomo", "ri"):
        assert sub in out
