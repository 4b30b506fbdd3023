"""Command-line interface: exit codes, artifact layout, flag precedence."""

import json
import subprocess
import sys

import pytest

import extremebandits as xb
from extremebandits import cli
from extremebandits.reporting import VERSION
from extremebandits.verification import CheckReport


def _csv_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# seed=")
    header = lines[1].split(",")
    return lines[0], header, [dict(zip(header, ln.split(","))) for ln in lines[2:]]


def test_simulate_exact_artifacts(tmp_path):
    rc = cli.main(
        [
            "simulate",
            "--bandit-preset",
            "uniform_vs_sure",
            "--policy",
            "fixed_arm",
            "--arm",
            "1",
            "--mode",
            "exact",
            "--horizon",
            "5",
            "--seed",
            "0",
            "--out-dir",
            str(tmp_path),
        ]
    )
    assert rc == 0
    for name in ("config.json", "curve.csv", "curve.jsonl"):
        assert (tmp_path / name).exists()
    meta, header, rows = _csv_rows(tmp_path / "curve.csv")
    assert "seed=0" in meta and f"version={VERSION}" in meta and "config_hash=" in meta
    assert header == ["t", "estimate", "raw", "se"]
    assert len(rows) == 5
    assert float(rows[4]["raw"]) == pytest.approx(1.0 / 6.0, rel=1e-12)
    payload = json.loads((tmp_path / "config.json").read_text())
    assert payload["version"] == VERSION
    assert "out_dir" not in payload["config"] and "workers" not in payload["config"]


def test_regret_exact_frozen_row(tmp_path):
    rc = cli.main(
        [
            "regret",
            "--bandit-preset",
            "uniform_vs_sure",
            "--policy",
            "arm_sequence",
            "--prefix",
            "2",
            "--tail-arm",
            "1",
            "--mode",
            "exact",
            "--horizon",
            "10",
            "--seed",
            "0",
            "--out-dir",
            str(tmp_path),
        ]
    )
    assert rc == 0
    _, header, rows = _csv_rows(tmp_path / "regret.csv")
    row = rows[0]
    assert row["horizon"] == "10"
    assert row["t_prime"] == "11"
    assert float(row["ratio"]) == pytest.approx(1.1, rel=1e-12)
    assert float(row["oracle_value"]) == pytest.approx(1.0 / 11.0, rel=1e-12)
    assert (tmp_path / "regret_curve.csv").exists()


def test_flag_overrides_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "seed": 3,
                "mode": "exact",
                "horizon": 4,
                "bandit": {"preset": "uniform_vs_sure"},
                "policy": {"name": "fixed_arm", "params": {"arm": 2}},
            }
        )
    )
    out = tmp_path / "out"
    rc = cli.main(
        ["simulate", "--config", str(cfg), "--horizon", "6", "--out-dir", str(out)]
    )
    assert rc == 0
    meta, _, rows = _csv_rows(out / "curve.csv")
    assert len(rows) == 6  # flag horizon beat the file's 4
    assert "seed=3" in meta  # file seed kept where no flag was given
    assert all(float(r["raw"]) == 1.0 for r in rows)  # fixed arm 2 = sure 1


def test_policy_flag_resets_stale_params(tmp_path):
    # The file pins fixed_arm params; switching policy by flag must not leak
    # {"arm": 2} into round_robin's constructor.
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "seed": 0,
                "mode": "exact",
                "horizon": 4,
                "bandit": {"preset": "uniform_vs_sure"},
                "policy": {"name": "fixed_arm", "params": {"arm": 2}},
            }
        )
    )
    out = tmp_path / "out"
    rc = cli.main(
        ["simulate", "--config", str(cfg), "--policy", "round_robin", "--out-dir", str(out)]
    )
    assert rc == 0
    _, _, rows = _csv_rows(out / "curve.csv")
    want = [0.5, 0.5, 1 / 3, 1 / 3]
    for row, w in zip(rows, want):
        assert float(row["raw"]) == pytest.approx(w, rel=1e-12)


def test_invalid_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 0, "bogus": 1}))
    rc = cli.main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_invalid_preset_value_exit_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 0, "bandit": {"preset": "nope"}}))
    rc = cli.main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "bandit/preset" in err


def test_unknown_check_exit_2(tmp_path, capsys):
    rc = cli.main(["verify", "lemma99", "--seed", "0", "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "unknown check" in capsys.readouterr().err


def test_verify_pass_and_artifacts(tmp_path, capsys):
    rc = cli.main(["verify", "lemma11", "lemma5", "--seed", "0", "--out-dir", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "check lemma11: PASS" in out
    assert "check lemma5: PASS" in out
    _, _, rows = _csv_rows(tmp_path / "checks.csv")
    assert [r["check_id"] for r in rows] == ["lemma11", "lemma5"]
    assert all(r["passed"] == "1" for r in rows)


def test_verify_failure_exit_1(tmp_path, capsys, monkeypatch):
    def fake_run_check(check_id, seed=0, workers=None, policy="round_robin"):
        return [CheckReport(check_id=check_id, passed=False, seed=seed)]

    monkeypatch.setattr(cli, "run_check", fake_run_check)
    rc = cli.main(["verify", "lemma11", "--seed", "0", "--out-dir", str(tmp_path)])
    assert rc == 1
    assert "check lemma11: FAIL" in capsys.readouterr().out


def test_rerun_is_byte_identical(tmp_path):
    argv = [
        "simulate",
        "--bandit-preset",
        "half_vs_risky",
        "--policy",
        "eps_greedy_min",
        "--epsilon",
        "0.1",
        "--horizon",
        "40",
        "--trials",
        "96",
        "--seed",
        "5",
    ]
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(argv + ["--out-dir", str(a)]) == 0
    assert cli.main(argv + ["--out-dir", str(b)]) == 0
    for name in ("config.json", "curve.csv", "curve.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_construct_two_index(tmp_path):
    rc = cli.main(
        ["construct", "--bandit-preset", "two_index", "--seed", "0", "--out-dir", str(tmp_path)]
    )
    assert rc == 0
    _, header, rows = _csv_rows(tmp_path / "bandit.csv")
    assert header == ["arm", "value", "prob", "log_prob"]
    probs = {(r["arm"], r["value"]): float(r["prob"]) for r in rows}
    assert probs[("1", "0.050000000000000003")] == pytest.approx(0.05, rel=1e-12)
    record = json.loads((tmp_path / "bandit.jsonl").read_text().splitlines()[0])
    assert record["horizons"]["2"]["T"] == 11940
    assert record["horizons"]["2"]["T_prime"] == 3673
    assert record["properties"]["passed"] is True


def test_construct_canonical_deep_reports_log_horizon(tmp_path):
    rc = cli.main(
        [
            "construct",
            "--bandit-preset",
            "canonical",
            "--K",
            "2",
            "--depth",
            "2",
            "--seed",
            "0",
            "--out-dir",
            str(tmp_path),
        ]
    )
    assert rc == 0
    record = json.loads((tmp_path / "bandit.jsonl").read_text().splitlines()[0])
    # alpha_2 = 16^-4: T fits comfortably, so both plain horizons appear.
    assert "T" in record["horizons"]["2"]


def test_best_arm_scan_runs(tmp_path):
    rc = cli.main(["best-arm-scan", "--horizons", "100", "--seed", "0", "--out-dir", str(tmp_path)])
    assert rc == 0
    _, _, rows = _csv_rows(tmp_path / "scan.csv")
    assert float(rows[0]["s_star"]) == pytest.approx(0.045102434872307216, abs=1e-7)


def test_arms_json_flag(tmp_path):
    arms = json.dumps(
        [
            {"kind": "discrete", "atoms": [{"value": 0.5, "prob": 1.0}]},
            {"kind": "uniform01"},
        ]
    )
    rc = cli.main(
        [
            "simulate",
            "--arms-json",
            arms,
            "--policy",
            "fixed_arm",
            "--arm",
            "1",
            "--mode",
            "exact",
            "--horizon",
            "3",
            "--seed",
            "0",
            "--out-dir",
            str(tmp_path),
        ]
    )
    assert rc == 0
    _, _, rows = _csv_rows(tmp_path / "curve.csv")
    assert all(float(r["raw"]) == 0.5 for r in rows)


def test_module_entrypoint(tmp_path):
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "extremebandits.cli",
            "simulate",
            "--bandit-preset",
            "uniform_vs_sure",
            "--policy",
            "fixed_arm",
            "--arm",
            "2",
            "--mode",
            "exact",
            "--horizon",
            "3",
            "--seed",
            "0",
            "--out-dir",
            str(tmp_path),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "simulate: policy=fixed_arm" in proc.stdout
