import json
import os

import pytest

from mblkam import io
from mblkam.config import RunConfig, load_config
from mblkam.exceptions import ConfigError
from mblkam.model import Distribution


def test_toml_round_trip(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(
        'n = 6\ngamma = [0.01, 0.02]\neps_exponent = 0.5\nweights = {gibbs = 2.0}\n'
        '[distribution]\nh = [-2, 2]\nJ = 0.5\n'
    )
    cfg = load_config(p)
    assert cfg.geometry.n == 6 and cfg.gamma == (0.01, 0.02)
    assert cfg.distribution.h == Distribution("uniform", -2.0, 2.0)
    assert cfg.distribution.J == Distribution.constant(0.5)
    echo = cfg.to_dict()
    json.dumps(echo)
    assert echo["weights"] == {"gibbs": 2.0} and echo["growth"] == 1.875
    again = RunConfig.from_mapping({k: v for k, v in echo.items() if k not in ("left_end", "right_end")})
    assert again == cfg


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("n = [")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"colour": 1})
    with pytest.raises(ConfigError):
        RunConfig(n=5, left_end=1, right_end=1).geometry
    with pytest.raises(ConfigError):
        RunConfig(weights="cold")
    with pytest.raises(ConfigError):
        RunConfig(site=10)


def test_overrides_and_geometry():
    cfg = RunConfig(left_end=1, right_end=3)
    assert list(cfg.geometry.sites) == [-1, 0, 1, 2, 3]
    cfg = cfg.override(n=4, seed=9, gamma=None)
    assert cfg.geometry.n == 4 and cfg.seed == 9 and cfg.gamma == (0.01,)
    ec = cfg.ensemble_config(realizations=2)
    assert ec.realizations == 2 and ec.master_seed == 9 and ec.kam["growth"] == 1.875


def test_atomic_write_and_formats(tmp_path):
    io.write_csv(tmp_path / "t.csv", ["a", "b"], [(1, 0.1), (2, None)])
    raw = (tmp_path / "t.csv").read_bytes()
    assert raw == b"a,b\n1,0.1\n2,\n"
    io.write_jsonl(tmp_path / "r.jsonl", [{"b": 1, "a": 2}])
    assert (tmp_path / "r.jsonl").read_text() == '{"a": 2, "b": 1}\n'
    io.write_json(tmp_path / "s.json", {"x": [1]})
    assert io.read_json(tmp_path / "s.json") == {"x": [1]}
    assert io.read_csv(tmp_path / "t.csv")[0] == {"a": "1", "b": "0.1"}
    assert not [f for f in os.listdir(tmp_path) if f.startswith(".")]
    with pytest.raises(ValueError):
        io.write_json(tmp_path / "nan.json", {"x": float("nan")})
    assert not (tmp_path / "nan.json").exists()


def test_prepare_output_dir(tmp_path):
    out = io.prepare_output_dir(tmp_path / "o")
    (out / "f").write_text("x")
    with pytest.raises(ConfigError):
        io.prepare_output_dir(out)
    assert io.prepare_output_dir(out, force=True) == out
    with pytest.raises(ConfigError):
        io.prepare_output_dir(out / "f")
