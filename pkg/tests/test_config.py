import math

import pytest

from pvtol import config
from pvtol.sim import run


def test_defaults_build_canonical_config():
    cfg = config.sim_config(config.load())
    assert cfg.controller == "invopt"
    assert tuple(cfg.setpoint) == (5.0, 5.0)
    assert tuple(cfg.comp0) == (9.81, 0.0)
    assert cfg.decimation is None


def test_file_then_overrides(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("# comment\ncontroller = fbl   # trailing\n\nsim.t_final = 2\nk0 = 1, 2, 3, 4\n")
    v = config.load(p, ["sim.t_final=3.5"])
    assert v["controller"] == "fbl"
    assert v["sim.t_final"] == 3.5
    assert v["k0"] == (1.0, 2.0, 3.0, 4.0)


@pytest.mark.parametrize("line,key", [
    ("sim.dt = 0", "sim.dt"),
    ("sim.dt = abc", "sim.dt"),
    ("controller = pid", "controller"),
    ("setpoint = 1", "setpoint"),
    ("kx = -1", "kx"),
    ("mc.delta_range = 5, 0.2", "mc.delta_range"),
    ("mc.write_runs = maybe", "mc.write_runs"),
    ("plant.gravity = inf", "plant.gravity"),
    ("bogus.key = 1", "bogus.key"),
])
def test_bad_values_name_the_key(line, key):
    with pytest.raises(config.ConfigError, match=key.replace(".", r"\.")):
        config.parse_text(line, config.load())


def test_missing_equals():
    with pytest.raises(config.ConfigError, match=":1:"):
        config.parse_text("controller fbl")


def test_missing_file(tmp_path):
    with pytest.raises(config.ConfigError):
        config.load(tmp_path / "none.cfg")


def test_nan_fhat_means_hover():
    v = config.load()
    assert math.isnan(v["initial.fhat"])
    v = config.load(overrides=["initial.fhat = 4.0", "initial.fhatdot = 0.5"])
    assert tuple(config.sim_config(v).comp0) == (4.0, 0.5)


def test_fixed_delta_parsing():
    assert config.load()["mc.fixed_delta"] == ()
    v = config.load(overrides=["mc.fixed_delta = 1, 1"])
    assert config.monte_carlo_config(v, 7).fixed_delta == (1.0, 1.0)
    with pytest.raises(config.ConfigError):
        config.load(overrides=["mc.fixed_delta = 1"])


def test_round_trip_identical_values_and_run(tmp_path):
    v = config.load(overrides=["controller=fbl", "sim.t_final=0.7", "setpoint=0.1, -2.25",
                               "sim.delta=0.3,1.7", "initial.theta=0.123456789012345678",
                               "mc.write_runs=yes", "c0=0.1"])
    text = config.dump(v)
    v2 = config.parse_text(text, {})
    assert set(v2) == set(v)
    for k in v:
        assert v2[k] == v[k] or (math.isnan(v[k]) and math.isnan(v2[k])), k
    assert config.dump(v2) == text
    a = run(config.sim_config(v))
    b = run(config.sim_config(v2))
    assert a.to_csv() == b.to_csv()


def test_dump_lists_every_key():
    text = config.dump(config.load())
    keys = [line.split("=")[0].strip() for line in text.splitlines()]
    assert keys == list(config.SCHEMA)
