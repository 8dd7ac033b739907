import csv
import json

import numpy as np
import pytest

from hydrofine import checks, cli
from hydrofine.config import KEYS, ConfigError, load_config, parse_overrides
from hydrofine.gamma import gamma_continuum
from hydrofine.model import PhysicalParams, derive_constants
from hydrofine.records import decode_array, encode, read_record, write_record, write_table


def run_cli(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


# ------------------------------------------------------------------ config

def test_defaults_resolve():
    v = load_config()
    assert set(v) == set(KEYS)
    assert v["physics.m_n"] == 1836.152 and v["fock.n_max"] == 1
    assert v["feshbach.epsilon"] == (0.01, 0.001)
    assert v["sweep.values"] == (0.02, 0.04, 0.08)


def test_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nphysics.g = 0.05\ngrid.n_radial = 3  # inline\nfock.include_quadratic = yes\n")
    v = load_config(path, ["physics.g=0.07"])
    assert v["physics.g"] == 0.07 and v["grid.n_radial"] == 3 and v["fock.include_quadratic"] is True


@pytest.mark.parametrize("item,key", [
    ("physics.gg=1", "physics.gg"),
    ("fock.n_max=3", "fock.n_max"),
    ("physics.m_n=-2", "physics.m_n"),
    ("grid.n_phi=two", "grid.n_phi"),
    ("feshbach.tau=0.3", "feshbach.tau"),
    ("sweep.variable=mass", "sweep.variable"),
    ("physics.p_total=1,2", "physics.p_total"),
])
def test_bad_keys_are_named(item, key):
    with pytest.raises(ConfigError) as exc:
        load_config(None, [item])
    assert exc.value.key == key


def test_grid_sweep_values():
    v = load_config(None, ["sweep.variable=grid", "sweep.values=2:2:2, 4:4:4"])
    assert v["sweep.values"] == ((2, 2, 2), (4, 4, 4))
    with pytest.raises(ConfigError):
        load_config(None, ["sweep.variable=grid", "sweep.values=2:2"])


def test_override_syntax():
    assert parse_overrides(["a = 1", "b=x=y"]) == {"a": "1", "b": "x=y"}
    with pytest.raises(ConfigError):
        parse_overrides(["novalue"])


# ------------------------------------------------------------------ records

def test_matrix_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(3)
    mats = {"c": rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) / 3,
            "r": rng.normal(size=(2, 3, 5)) * 1e-300, "b": rng.normal(size=7) > 0}
    write_record(tmp_path, "m", {"mats": mats, "z": 1 + 2j})
    back = read_record(tmp_path / "m.json")
    for k, a in mats.items():
        got = decode_array(back["mats"][k])
        assert got.dtype.kind == a.dtype.kind and np.array_equal(got, a)
    assert back["z"] == [1.0, 2.0]
    assert encode(np.float64(0.1)) == 0.1


def test_non_finite_values_stay_strict_json(tmp_path):
    arr = np.array([1.0, np.nan, np.inf])
    write_record(tmp_path, "n", {"x": float("nan"), "a": arr})
    text = (tmp_path / "n.json").read_text()
    assert "NaN" not in text and "Infinity" not in text
    back = json.loads(text)
    assert back["x"] is None
    got = decode_array(back["a"])
    assert got[0] == 1.0 and np.isnan(got[1]) and np.isnan(got[2])


def test_gamma_record_round_trip(tmp_path):
    assert run_cli(tmp_path, "gamma", "--set", "physics.g=0.01", "--set", "grid.n_radial=2",
                   "--set", "grid.n_costheta=2", "--set", "grid.n_phi=2") == 0
    rec = read_record(tmp_path / "gamma.json")
    assert rec["command"] == "gamma" and rec["wall_time"] > 0
    assert rec["config"]["physics.g"] == 0.01
    got = decode_array(rec["result"]["continuum"]["matrix"])
    p = PhysicalParams(g=0.01)
    assert np.array_equal(got, gamma_continuum(p, derive_constants(p)).matrix)


def test_table_writer(tmp_path):
    write_table(tmp_path, "t", ("a", "b"), [{"a": 0.1, "b": "x"}, {"a": 2, "b": "y"}])
    assert (tmp_path / "t.csv").read_text() == "a,b\n0.1,x\n2.0,y\n"


# ------------------------------------------------------------------ commands

def test_c0_command(tmp_path, capsys):
    assert run_cli(tmp_path, "c0") == 0
    r = read_record(tmp_path / "c0.json")["result"]
    assert r["closed_form"] > 0 and r["quadrature"] > 0 and r["rel_diff"] <= 1e-10
    assert "C0 closed form" in capsys.readouterr().out


def test_spectrum_zero_coupling(tmp_path):
    assert run_cli(tmp_path, "spectrum", "--set", "physics.g=0", "--set", "grid.n_radial=2",
                   "--set", "grid.n_costheta=2", "--set", "grid.n_phi=2") == 0
    r = read_record(tmp_path / "spectrum.json")["result"]
    ev = decode_array(r["eigenvalues"]) if isinstance(r["eigenvalues"], dict) else np.array(r["eigenvalues"])
    assert len(ev) == 4 and np.all(ev == r["E0"])


def test_feshbach_command(tmp_path):
    args = ["--set", "physics.g=0.001", "--set", "grid.n_radial=2", "--set", "grid.n_costheta=2",
            "--set", "grid.n_phi=2", "--set", "feshbach.rho=0.2"]
    assert run_cli(tmp_path, "feshbach", *args) == 0
    r = read_record(tmp_path / "feshbach.json")["result"]
    assert r["residual_identity_max"] <= 1e-8 and r["residual_kernel"] <= 1e-8


def test_exit_codes(tmp_path, capsys):
    assert run_cli(tmp_path, "c0", "--set", "bogus.key=1") == 1
    assert "bogus.key" in capsys.readouterr().err
    assert run_cli(tmp_path, "c0", "--config", str(tmp_path / "missing.cfg")) == 1
    # the regime condition ρ >= 10 g² names the feshbach key
    assert run_cli(tmp_path, "feshbach", "--set", "physics.g=0.1", "--set", "feshbach.rho=0.01") == 1
    assert "feshbach" in capsys.readouterr().err
    # Fock dimension beyond the budget
    assert run_cli(tmp_path, "spectrum", "--set", "fock.n_max=2", "--set", "grid.n_radial=20",
                   "--set", "grid.n_costheta=20", "--set", "grid.n_phi=20") == 2
    assert "budget" in capsys.readouterr().err
    assert run_cli(tmp_path, "check", "--set", "check.items=nope") == 1


def test_check_failure_exits_three(tmp_path, monkeypatch, capsys):
    def failing(params=None):
        return checks.CheckResult("c0", "forced failure", {"value": False})

    monkeypatch.setitem(checks.CHECKS, "c0", failing)
    assert run_cli(tmp_path, "check", "--set", "check.items=c0") == 3
    assert "[FAIL] c0" in capsys.readouterr().out


def test_check_subset_passes(tmp_path):
    assert run_cli(tmp_path, "check", "--set", "check.items=c0,splitting") == 0
    rec = read_record(tmp_path / "check.json")
    assert rec["result"]["all_passed"] and set(rec["result"]["checks"]) == {"c0", "splitting"}


SMALL_GRID = ["--set", "grid.n_radial=2", "--set", "grid.n_costheta=4", "--set", "grid.n_phi=4"]


def test_g_sweep_table(tmp_path):
    assert run_cli(tmp_path, "sweep", *SMALL_GRID) == 0
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == cli.SPECTRUM_COLUMNS
    assert len(rows) == 4
    assert [float(r[0]) for r in rows[1:]] == [0.02, 0.04, 0.08]
    rec = json.loads((tmp_path / "sweep.json").read_text())
    assert rec["result"]["exponents"]["gap12"] == pytest.approx(2.0, abs=0.1)


def test_sweep_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["sweep", *SMALL_GRID, "--set", "run.workers=3"]
    assert run_cli(a, *args) == 0
    assert cli.main([*args[:-2], "--out", str(b)]) == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()


@pytest.mark.parametrize("var,values,command,label", [
    ("grid", "1:2:2,2:2:2", "gamma", "grid"),
    ("p", "0,10", "gamma", "p"),
    ("g", "0.01,0.02", "c0", "g"),
])
def test_other_sweeps(tmp_path, var, values, command, label):
    assert run_cli(tmp_path, "sweep", "--set", f"sweep.variable={var}", "--set", f"sweep.values={values}",
                   "--set", f"sweep.command={command}", *SMALL_GRID) == 0
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == label and len(rows) == 3
    assert len(set(rows[0])) == len(rows[0])
