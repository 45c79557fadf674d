import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boundpair import cli
from boundpair.artifacts import fmt, ordered_map, read_csv
from boundpair.config import DriveConfig, ModeFlags, RunConfig, RunSettings, SweepSpec, from_ini, to_ini
from boundpair.farfield import peak_positions
from boundpair.model import ConfigError, ModelParams


@st.composite
def configs(draw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = ModelParams(
            M=draw(st.integers(1, 10).map(lambda n: 2 * n + 1)),
            U=draw(st.floats(-200, 200, allow_nan=False)),
            lambda_at=draw(st.floats(0.05, 2.0)),
            gamma1=draw(st.none() | st.complex_numbers(max_magnitude=1.0, allow_nan=False)),
        )
    return RunConfig(
        model=model,
        drive=DriveConfig(pump_rate=draw(st.floats(0, 0.5)), beta_exc_deg=draw(st.floats(-90, 90))),
        sweep=SweepSpec(variable=draw(st.sampled_from(["bragg", "beta_deg"])), steps=draw(st.integers(1, 5000))),
        modes=ModeFlags(draw(st.sampled_from(["exact", "approx"])), draw(st.sampled_from(["tight", "alpha"])),
                        draw(st.sampled_from(["ideal", "finite"]))),
        run=RunSettings(K=draw(st.floats(-np.pi, np.pi)), seed=draw(st.none() | st.integers(0, 2**32)),
                        pattern3d=draw(st.booleans())),
        out=draw(st.none() | st.sampled_from(["a.csv", "out/dir.csv"])),
    )


@given(configs())
def test_config_round_trip(cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert from_ini(to_ini(cfg)) == cfg


@pytest.mark.parametrize("text", [
    "[modes]\nmode = sloppy\n",
    "[model]\nM = 8\n",
    "[model]\nbogus = 1\n",
    "[extra]\nx = 1\n",
    "[sweep]\nsteps = 0\n",
    "[run]\nthreads = x\n",
    "not an ini",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        from_ini(text)


def test_number_format():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(np.int64(4)) == "4" and fmt(True) == "1"


def test_ordered_map_keeps_order():
    assert ordered_map(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]


def run(tmp_path, command, *extra, name=None):
    out = tmp_path / (name or f"{command}.csv")
    code = cli.main([command, "--out", str(out), *extra])
    return code, out


def body(path):
    return read_csv(str(path))


def test_dispersion_artifact(tmp_path):
    code, out = run(tmp_path, "dispersion", "--mode", "exact")
    assert code == 0
    meta, cols, rows = body(out)
    assert meta["params_hash"] == ModelParams().digest() and meta["mode"] == "exact"
    bands = [r[0] for r in rows]
    assert bands.count("single") == 7 and bands.count("bound") == 7
    assert bands.count("scattering") == 7 * 2
    rates = ModelParams().rates()
    lo = -(1 + 2 * abs(rates.Gamma1))
    for r in rows:
        if r[0] != "single":
            assert lo <= float(r[5]) < 0
    re_b = [float(r[4]) for r in rows if r[0] == "bound"]
    re_s = [float(r[4]) for r in rows if r[0] == "scattering"]
    assert min(abs(b - s) for b in re_b for s in re_s) >= 50 - 2 * abs(rates.Gamma1)


def test_outputs_are_deterministic(tmp_path):
    a = run(tmp_path, "spectrum", name="a.csv")[1].read_bytes()
    b = run(tmp_path, "spectrum", "--threads", "3", name="b.csv")[1].read_bytes()
    assert a == b


def test_pattern_artifact(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[sweep]\nsteps = 181\nlambda_steps = 4\n[run]\npattern3d = true\n")
    code, out = run(tmp_path, "pattern", "--config", str(cfg), "--threads", "2")
    assert code == 0
    _, cols, rows = body(out)
    vals = np.array([[float(x) for x in r] for r in rows])
    assert vals[:, 2].min() >= 0 and vals[:, 2].max() <= 1
    assert vals[:, 1].min() == -90 and vals[:, 1].max() == 90
    peaks = []
    for lr in np.unique(vals[:, 0]):
        sel = vals[vals[:, 0] == lr]
        peaks.append(len(peak_positions(sel[:, 1], sel[:, 2])))
    assert all(a >= b for a, b in zip(peaks, peaks[1:]))
    assert (tmp_path / "pattern_3d.csv").exists()


def test_finite_pattern_artifact(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[sweep]\nsteps = 31\nlambda_steps = 2\nlambda_start = 0.5\nlambda_stop = 0.6\n")
    code, out = run(tmp_path, "pattern", "--config", str(cfg), "--lattice", "finite")
    assert code == 0
    _, _, rows = body(out)
    assert len(rows) == 62


def test_decay_artifact(tmp_path):
    code, out = run(tmp_path, "decay")
    assert code == 0
    _, cols, rows = body(out)
    t = np.array([float(r[0]) for r in rows])
    bs = np.array([float(r[cols.index("pop_K3:BS")]) for r in rows])
    k3 = np.array([float(r[cols.index("pop_k3")]) for r in rows])
    assert np.allclose(bs, np.exp(-2 * t), atol=1e-8)
    assert np.allclose(k3, (4 / 7) * (np.exp(-t) - np.exp(-2 * t)), atol=1e-8)
    assert max(float(r[-1]) for r in rows) <= 1e-8


def test_steady_artifact(tmp_path):
    code, out = run(tmp_path, "steady")
    assert code == 0
    meta, cols, rows = body(out)
    xi = float(meta["Xi"])
    row = next(r for r in rows if r[0] == "k3")
    for c in ("closed", "linear", "ode"):
        assert abs(float(row[cols.index(c)]) / xi - 1) <= 10 * xi


@pytest.mark.parametrize("flags", [[], ["--mode", "approx", "--bs", "alpha"]])
def test_extract_artifact(tmp_path, flags):
    code, out = run(tmp_path, "extract", *flags)
    assert code == 0
    meta, _, rows = body(out)
    assert float(meta["coverage"]) == 1.0
    assert max(abs(float(r[2]) - float(r[3])) for r in rows) <= 1e-8
    if not flags:
        assert max(abs(float(r[2]) - 4 / 7 * np.cos(float(r[1])) ** 2) for r in rows) <= 1e-6


def test_validate_default_passes(capsys):
    assert cli.main(["validate"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)


def test_validate_small_u_skips(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[model]\nU = 0.05\n")
    with pytest.warns(Warning):
        assert cli.main(["validate", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "SKIP bound-state energies" in out and "FAIL" not in out


def test_validate_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[model]\nM = 5\n")
    assert cli.main(["validate", "--config", str(cfg)]) == cli.EXIT_VALIDATION


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\nM = 6\n")
    assert cli.main(["dispersion", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert cli.main(["dispersion", "--config", str(tmp_path / "missing.ini")]) == cli.EXIT_IO
    assert cli.main(["dispersion", "--out", str(tmp_path / "no" / "dir.csv")]) == cli.EXIT_IO
    strong = tmp_path / "strong.ini"
    strong.write_text("[drive]\npump_rate = 1.5\n")
    assert cli.main(["steady", "--config", str(strong)]) == cli.EXIT_PHYSICS
    with pytest.raises(SystemExit):
        cli.main(["bogus"])
