import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rssaoa import io as rio
from rssaoa.channel import observe
from rssaoa.cli import main
from rssaoa.config import ConfigError, RunConfig, load, parse_text
from rssaoa.estimator import CalibrationFit
from rssaoa.pointproc import MaternII


# -- config ---------------------------------------------------------------

def test_dump_round_trips():
    cfg = parse_text("dim = 3\nmodel = tcp\nlambda_p = 0.4\nseed = 9\ngrid = 1,2,4\n")
    again = parse_text(cfg.dump())
    assert again == cfg
    assert again.dump() == cfg.dump()


@settings(max_examples=40)
@given(st.integers(2, 5), st.floats(0.1, 100), st.sampled_from(["ppp", "mcp", "ginibre"]),
       st.one_of(st.none(), st.integers(0, 2**40)), st.lists(st.floats(0.1, 10), max_size=4))
def test_dump_round_trip_property(dim, radius, model, seed, grid):
    cfg = RunConfig()
    cfg.set("dim", dim, "t")
    cfg.set("radius", radius, "t")
    cfg.set("model", model, "t")
    cfg.set("seed", seed, "t")
    cfg.set("grid", grid, "t")
    assert parse_text(cfg.dump()) == cfg


def test_threads_not_in_canonical_dump():
    assert "threads" not in parse_text("threads = 8\n").dump()


def test_errors_are_line_addressed(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\ndim = 2\nbeta = 1.5\n")
    with pytest.raises(ConfigError, match=r"run.cfg:3"):
        load(path).validate()
    path.write_text("dim = two\n")
    with pytest.raises(ConfigError, match=r"run.cfg:1"):
        load(path)
    path.write_text("dim 2\n")
    with pytest.raises(ConfigError, match=r"run.cfg:1"):
        load(path)
    path.write_text("colour = red\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load(path)


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("radius = 10\n")
    cfg = load(path, {"radius": "20"})
    assert cfg["radius"] == 20.0 and cfg.where("radius") == "--radius"


def test_model_construction():
    cfg = parse_text("model = matern2\ntarget_lambda = 1\nrc = 0.3\n")
    m = cfg.model()
    assert isinstance(m, MaternII)
    assert m.parent_intensity == pytest.approx(1.1753470, rel=1e-6)
    with pytest.raises(ConfigError, match="needs lambda_p"):
        parse_text("model = mcp\n").model()
    with pytest.raises(ConfigError, match="unsupported dimension"):
        parse_text("model = ginibre\ndim = 3\n").model()


# -- io ---------------------------------------------------------------------

def test_pattern_and_observation_round_trip(tmp_path, params, rng):
    pts = rng.normal(size=(20, 3))
    rio.write_pattern(tmp_path / "p.csv", pts)
    assert np.array_equal(rio.read_pattern(tmp_path / "p.csv"), pts)
    obs = observe(pts, params, rng)
    rio.write_observations(tmp_path / "o.csv", obs)
    back = rio.read_observations(tmp_path / "o.csv")
    for f in ("sensors", "rss", "angles", "inverse_rss"):
        assert np.array_equal(getattr(back, f), getattr(obs, f))


def test_fit_and_calibration_round_trip(tmp_path, params):
    fit = CalibrationFit.exact(params)
    rio.write_fit(tmp_path / "f.json", fit)
    assert rio.read_fit(tmp_path / "f.json") == fit
    rio.write_calibration(tmp_path / "c.csv", [1e-9, 2e-9], [3.0, 4.0])
    rss, r = rio.read_calibration(tmp_path / "c.csv")
    assert list(rss) == [1e-9, 2e-9] and list(r) == [3.0, 4.0]


def test_bad_headers_rejected(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    for reader in (rio.read_pattern, rio.read_observations, rio.read_calibration):
        with pytest.raises(ValueError):
            reader(tmp_path / "x.csv")


# -- cli --------------------------------------------------------------------

def run(args, capsys=None):
    code = main([str(a) for a in args])
    return code


def test_sample_is_deterministic(tmp_path):
    base = ["sample", "--model", "ppp", "--lambda", 1, "--radius", 30, "--dim", 2, "--seed", 7]
    assert run(base + ["--out", tmp_path / "a.csv"]) == 0
    assert run(base + ["--out", tmp_path / "b.csv"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    side = json.loads((tmp_path / "a.json").read_text())
    assert side["seed"] == 7 and "seed=7" in side["config_canonical"]


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RSSAOA_SEED", "7")
    assert run(["sample", "--radius", 5, "--out", tmp_path / "a.csv"]) == 0
    assert run(["sample", "--radius", 5, "--seed", 7, "--out", tmp_path / "b.csv"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_ginibre_in_3d_is_config_error(tmp_path, capsys):
    assert run(["sample", "--model", "ginibre", "--dim", 3, "--out", tmp_path / "g.csv"]) == 2
    assert "unsupported dimension" in capsys.readouterr().err


def test_matern2_sidecar_records_parent(tmp_path):
    assert run(["sample", "--model", "matern2", "--target-lambda", 1, "--rc", 0.3, "--radius", 5,
                "--seed", 1, "--out", tmp_path / "m.csv"]) == 0
    side = json.loads((tmp_path / "m.json").read_text())
    assert side["model"]["parent_intensity"] == pytest.approx(1.1753470, rel=1e-6)


def test_scene_pipeline(tmp_path):
    common = ["--radius", 10, "--seed", 3]
    assert run(["observe", *common, "--out", tmp_path / "obs.csv"]) == 0
    assert run(["calibrate", *common, "--n-cal", 2000, "--out", tmp_path / "fit.json"]) == 0
    assert run(["localize", *common, "--obs", tmp_path / "obs.csv", "--fit", tmp_path / "fit.json",
                "--out", tmp_path / "est.csv"]) == 0
    header = (tmp_path / "est.csv").read_text().splitlines()[0]
    assert header.startswith("x1,x2")


def test_cmse_rejects_non_poisson(tmp_path, capsys):
    code = run(["cmse", "--model", "mcp", "--lambda-p", 0.4, "--out", tmp_path / "c.csv"])
    assert code == 2
    assert "ppp" in capsys.readouterr().err.lower()


def test_bound_ratios(tmp_path):
    assert run(["bound", "--mode", "cmse", "--grid", "1000,2000,4000", "--n-mc", 10000, "--seed", 1,
                "--out", tmp_path / "b.csv"]) == 0
    header, data = rio.read_table(tmp_path / "b.csv")
    assert "bound_stderr" in header
    b = data[:, header.index("bound")]
    assert b[0] / b[1] == pytest.approx(2.0, rel=1e-12) and b[1] / b[2] == pytest.approx(2.0, rel=1e-12)
    assert run(["bound", "--mode", "mse", "--grid", "1,2,4", "--n-mc", 10000, "--seed", 1,
                "--out", tmp_path / "m.csv"]) == 0
    header, data = rio.read_table(tmp_path / "m.csv")
    b = data[:, header.index("bound")]
    assert b[0] / b[2] == pytest.approx(4.0, rel=1e-12)


def srd_row(path):
    with open(path, newline="") as fh:
        return next(csv.DictReader(fh))


def test_paircorr_and_srd(tmp_path):
    assert run(["srd", "--model", "tcp", "--lambda-p", 0.4, "--sigma-c", 0.3, "--out", tmp_path / "s.csv"]) == 0
    row = srd_row(tmp_path / "s.csv")
    assert row["model"] == "tcp"
    assert float(row["srd"]) == pytest.approx(1 / (2 * np.pi * 0.4), rel=1e-6)
    assert run(["srd", "--model", "ppp", "--out", tmp_path / "p.csv"]) == 0
    assert float(srd_row(tmp_path / "p.csv")["srd"]) == 0.0
    assert run(["paircorr", "--model", "matern1", "--lambda-p", 1, "--rc", 0.3,
                "--grid", "0.1,0.2,0.3,0.7,1.0", "--out", tmp_path / "h.csv"]) == 0
    header, data = rio.read_table(tmp_path / "h.csv")
    assert list(data[:, 1]) == [0.0, 0.0, 0.0, 1.0, 1.0]


@pytest.mark.parametrize("cmd", [
    ["mse", "--grid", "0.05,0.1", "--radius", 10, "--reps", 20, "--n-mc", 10000, "--n-cal", 500],
    ["cmse", "--grid", "5,10", "--radius", 10, "--reps", 20, "--n-mc", 10000, "--n-cal", 500],
])
def test_simulation_thread_count_does_not_change_output(tmp_path, cmd):
    assert run(cmd + ["--seed", 4, "--threads", 1, "--out", tmp_path / "t1.csv"]) == 0
    assert run(cmd + ["--seed", 4, "--threads", 8, "--deterministic", "--out", tmp_path / "t8.csv"]) == 0
    assert (tmp_path / "t1.csv").read_bytes() == (tmp_path / "t8.csv").read_bytes()
    assert (tmp_path / "t1.json").read_bytes() == (tmp_path / "t8.json").read_bytes()
    assert (tmp_path / "t1.csv").read_text().splitlines()[0] == "grid,empirical,stderr,bound"


def test_converge_defaults_are_echoed(tmp_path):
    assert run(["converge", "--model", "ppp", "--radius", 5, "--reps", 100, "--seed", 2,
                "--sigma-db-grid", "8", "--out", tmp_path / "c.csv"]) == 0
    side = json.loads((tmp_path / "c.json").read_text())
    assert side["probe"] == {"r_lo": 0.5, "r_hi": 2.0, "weight": 0.2, "shoulder": 0.25}
    header, data = rio.read_table(tmp_path / "c.csv")
    assert data[0, header.index("gap")] < 4 * data[0, header.index("joint_stderr")]


def test_runtime_error_exit_code(tmp_path):
    assert run(["localize", "--obs", tmp_path / "missing.csv", "--exact-fit", "--out", tmp_path / "e.csv"]) == 3
