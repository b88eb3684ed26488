import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from dcxperc import bounds as bd
from dcxperc.cli import Config, ConfigError, parse_grid, parse_kernel, run
from dcxperc.core import read_pattern_csv

SMALL = {
    "generate": ["--window", "8"],
    "percolate": ["--window", "10"],
    "sweep-r": ["--window", "10", "--reps", "4", "--set", "grid.r_grid=0.5:0.05:0.6"],
    "estimate-rc": ["--window", "10", "--reps", "6", "--set", "estimator.tol=0.02"],
    "kperc": ["--window", "6", "--reps", "2", "--set", "grid.r_grid=0.8,1.2"],
    "rbar": ["--reps", "4", "--set", "grid.r_grid=0.4,0.6", "--set", "estimator.max_len=10"],
    "rpaths": ["--reps", "4", "--set", "grid.r_grid=0.3,0.36", "--set", "estimator.m=2"],
    "sinr-sweep": ["--window", "8", "--reps", "3", "--set", "grid.gammas=0,0.01"],
    "bounds": [],
    "cx-check": [],
    "counts-dcx": ["--reps", "200"],
    "stats": ["--window", "6", "--reps", "5"],
    "figure2": ["--window", "8", "--reps", "2", "--set", "grid.r_grid=0.5,0.6",
                "--set", "estimator.n_list=1,2"],
    "figure4": ["--window", "8", "--reps", "2", "--set", "grid.r_grid=0.5,0.6",
                "--set", "estimator.n_list=1"],
}


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize("cmd", sorted(SMALL))
def test_every_subcommand_is_deterministic(cmd):
    a = _run([cmd, "--seed", "3", *SMALL[cmd]])
    b = _run([cmd, "--seed", "3", *SMALL[cmd]])
    assert a[0] == 0, a[2]
    assert a[1] == b[1] and a[1]
    if cmd != "generate":
        rows = _rows(a[1])
        assert rows and all(r["seed"] == "3" for r in rows)
        assert len({r["config_hash"] for r in rows}) == 1


@pytest.mark.parametrize("cmd", ["sweep-r", "generate", "counts-dcx"])
def test_out_sidecar_reproduces(cmd, tmp_path):
    out = tmp_path / "a.csv"
    assert _run([cmd, "--seed", "5", *SMALL[cmd], "--out", str(out)])[0] == 0
    ini = tmp_path / "a.csv.ini"
    assert ini.read_text().startswith(f"# {cmd}\n")
    again = tmp_path / "b.csv"
    assert _run([cmd, "--config", str(ini), "--out", str(again)])[0] == 0
    assert out.read_bytes() == again.read_bytes()


def test_seed_changes_output():
    assert _run(["sweep-r", "--seed", "1", *SMALL["sweep-r"]])[1] != _run(["sweep-r", "--seed", "2", *SMALL["sweep-r"]])[1]


def test_generate_round_trip(tmp_path):
    code, text, _ = _run(["generate", "--seed", "1", "--window", "6"])
    assert code == 0 and text.startswith("# seed 1\n# config_hash ")
    pat = read_pattern_csv(io.StringIO(text))
    assert len(pat) > 0


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nseeds = 3\n")
    code, _, err = _run(["sweep-r", "--config", str(bad)])
    assert code == 2 and "seeds" in err
    bad.write_text("[nonsense]\nx = 1\n")
    assert _run(["sweep-r", "--config", str(bad)])[0] == 2
    assert _run(["sweep-r", "--set", "run.reps=abc"])[0] == 2
    assert _run(["sweep-r", "--set", "noequals"])[0] == 2
    with pytest.raises(ConfigError):
        Config.load(None, {("process", "colour"): "red"})


def test_runtime_errors_exit_1():
    code, _, err = _run(["estimate-rc", "--window", "6", "--reps", "2",
                         "--set", "estimator.r_lo=0.01", "--set", "estimator.r_hi=0.02"])
    assert code == 1 and err.startswith("error:")


def test_bounds_output():
    code, text, err = _run(["bounds", "--lambda", "1.154701", "--d", "2", "--k", "3"])
    assert code == 0
    vals = {r["quantity"]: float(r["value"]) for r in _rows(text)}
    assert vals["rc_lower"] == bd.rc_lower(1.154701, 2)
    assert vals["rc_upper_tilde"] == bd.rc_upper_tilde(1.154701, 2)
    assert vals["c_lambda_k"] == bd.c_lambda_k(1.154701, 3, 2)
    assert "0.164509" in err
    assert "1.83587" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dcxperc", "bounds"], capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("quantity,value,lambda,d,k,seed,config_hash")


def test_parsers():
    assert parse_grid("0.5:0.1:0.8") == pytest.approx([0.5, 0.6, 0.7, 0.8])
    assert parse_grid("1, 2,3") == [1.0, 2.0, 3.0]
    k = parse_kernel("binomial(2,1/2)")
    assert k.pmf(np.array([0, 1, 2])) == pytest.approx([0.25, 0.5, 0.25])
    with pytest.raises(ValueError):
        parse_kernel("zipf(2)")


def test_figure2_shape_and_monotone():
    code, text, _ = _run(["figure2", "--window", "30", "--reps", "50", "--seed", "7",
                          "--set", "grid.r_grid=0.5:0.05:0.7"])
    assert code == 0
    rows = _rows(text)
    fams = [(r["family"], r["n"]) for r in rows]
    assert list(dict.fromkeys(fams)) == [("lattice", "0"), *[("binomial", str(n)) for n in (1, 2, 3, 5, 10, 20)],
                                         ("poisson", "inf")]
    again = _run(["figure2", "--window", "30", "--reps", "50", "--seed", "7", "--set", "grid.r_grid=0.5:0.05:0.7"])[1]
    assert again == text
    for key in dict.fromkeys(fams):
        curve = [float(r["mean_frac1"]) for r in rows if (r["family"], r["n"]) == key]
        assert curve == sorted(curve)
