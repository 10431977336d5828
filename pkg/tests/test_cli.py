import json

import pytest

from mblkam import cli
from mblkam.exceptions import NumericalError
from mblkam.io import read_csv, read_json, read_jsonl


def run(*argv):
    return cli.run_command([str(a) for a in argv])


def test_diagonalize_outputs(tmp_path):
    out = tmp_path / "d"
    assert run("diagonalize", "--n", 6, "--gamma", 0.02, "--seed", 3, "--out", out) == 0
    assert sorted(p.name for p in out.iterdir()) == ["spectrum.csv", "steps.jsonl", "summary.json"]
    s = read_json(out / "summary.json")
    assert s["config"]["n"] == 6 and s["config"]["gamma"] == [0.02]
    assert s["oracle_check"]["relative_error"] < 1e-10
    rows = read_csv(out / "spectrum.csv")
    assert len(rows) == 64 and set(rows[0]) == {"rank", "label", "energy_kam", "energy_oracle", "abs_error"}
    assert read_jsonl(out / "steps.jsonl")
    assert b"\r\n" not in (out / "spectrum.csv").read_bytes()


def test_config_file_and_echo_replay(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("n = 5\ngamma = 0.03\nseed = 4\neps_exponent = 0.5\n")
    assert run("diagonalize", "--config", cfg, "--out", tmp_path / "a") == 0
    echo = read_json(tmp_path / "a" / "summary.json")["config"]
    replay = tmp_path / "replay.toml"
    replay.write_text(
        "\n".join(f"{k} = {json.dumps(v)}" for k, v in echo.items() if v is not None and not isinstance(v, dict))
        + "\n[distribution]\n"
        + "\n".join(f"{k} = {json.dumps(v) if not isinstance(v, dict) else '{' + ', '.join(f'{a} = {json.dumps(b)}' for a, b in v.items()) + '}'}"
                    for k, v in echo["distribution"].items())
        + "\n"
    )
    assert run("diagonalize", "--config", replay, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "spectrum.csv").read_bytes() == (tmp_path / "b" / "spectrum.csv").read_bytes()


def test_exit_codes(tmp_path, monkeypatch):
    assert run("diagonalize", "--bogus") == 1
    assert run("diagonalize", "--n", 3) == 1  # --out missing
    assert run("diagonalize", "--config", tmp_path / "nope.toml", "--out", tmp_path / "x") == 1
    out = tmp_path / "c"
    assert run("diagonalize", "--n", 3, "--out", out) == 0
    assert run("diagonalize", "--n", 3, "--out", out) == 1
    assert run("diagonalize", "--n", 3, "--out", out, "--force") == 0
    monkeypatch.setenv("MBLKAM_MAX_N", "2")
    assert run("diagonalize", "--n", 3, "--out", tmp_path / "big") == 1


def test_numerical_failure_writes_diagnostics(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise NumericalError("non-finite energy denominator", pair=(0, 1))

    monkeypatch.setattr(cli, "diagonalize_kam", boom)
    out = tmp_path / "f"
    assert run("diagonalize", "--n", 3, "--out", out) == 2
    s = read_json(out / "summary.json")
    assert s["status"] == "error" and s["details"]["pair"] == "(0, 1)"


def test_ensemble_command(tmp_path):
    out = tmp_path / "e"
    code = run("ensemble", "--n", 5, "--gamma", 0.01, 0.02, "--realizations", 3, "--workers", 2, "--seed", 1, "--out", out)
    assert code == 0
    recs = read_jsonl(out / "records.jsonl")
    assert len(recs) == 6 and all("seed" in r for r in recs)
    tables = {r["table"] for r in read_csv(out / "profiles.csv")}
    assert {"magnetization", "correlation_median", "block_connectivity"} <= tables
    s = read_json(out / "summary.json")
    assert s["config"]["realizations"] == 3 and len(s["profiles"]["magnetization_differences"]) == 1


def test_lla_command(tmp_path):
    out = tmp_path / "l"
    assert run("lla", "--n", 4, "--gamma", 0.05, "--realizations", 300, "--seed", 1, "--out", out) == 0
    rows = read_csv(out / "profiles.csv")
    assert set(rows[0]) == {"gamma", "delta", "P", "stderr"}
    P = [float(r["P"]) for r in rows]
    assert P == sorted(P)
    fit = read_json(out / "summary.json")["fits"][0]
    assert {"nu", "C_n", "fitted"} <= set(fit)


def test_observables_command(tmp_path):
    out = tmp_path / "o"
    assert run("observables", "--n", 5, "--gamma", 0.01, "--seed", 2, "--out", out) == 0
    rows = read_csv(out / "observables.csv")
    assert set(rows[0]) == {"seed", "aggregation", "observable", "value"}
    s = read_json(out / "summary.json")
    assert len(s["lbits"]) == 5 and s["lbit_pair_commutator"] < 1e-8
    assert all(l["commutator"] < 1e-8 for l in s["lbits"])


def test_report_is_deterministic(tmp_path, capsys):
    src = tmp_path / "e"
    assert run("ensemble", "--n", 4, "--gamma", 0.01, 0.05, "--realizations", 3, "--out", src) == 0
    assert run("report", "--in", src, "--svg", "--out", tmp_path / "p1") == 0
    assert run("report", "--in", src, "--svg", "--out", tmp_path / "p2") == 0
    names = sorted(p.name for p in (tmp_path / "p1").iterdir())
    assert "magnetization.svg" in names
    for name in names:
        assert (tmp_path / "p1" / name).read_bytes() == (tmp_path / "p2" / name).read_bytes()
    assert run("report", "--in", src) == 0
    assert "magnetization.svg" in capsys.readouterr().out
    assert run("report", "--in", tmp_path / "missing", "--svg") == 1
