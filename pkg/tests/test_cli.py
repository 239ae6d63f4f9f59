import csv
import json

import pytest

from qkd4.cli import main

IDEAL = {"v_pol": 1.0, "v_x": 1.0, "v_p": 1.0, "bg": 0.0}


def write_config(tmp_path, **overrides):
    cfg = {"protocol": "QuQuart", "source": IDEAL, "n_pairs": 20_000, "seed": 5}
    cfg.update(overrides)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_ququart_attack_shows_oracle(tmp_path, capsys):
    path = write_config(tmp_path, eve={"intercept_fraction": 1.0}, n_pairs=100_000)
    rc = main(["run", "--config", str(path), "--out", str(tmp_path / "out"), "--check"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "symbol_error" in text and "3/8" in text
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["spec_version"] == "qkd4.report.v1"
    row = next(r for r in report["summary"] if r["metric"] == "symbol_error")
    assert row["oracle"] == "3/8" and abs(row["empirical"] - 0.375) <= 0.01
    assert (tmp_path / "out" / "key_alice.txt").exists()


def test_bad_schema_exit_2_no_outputs(tmp_path):
    path = write_config(tmp_path, colour="blue")
    out = tmp_path / "never"
    assert main(["run", "--config", str(path), "--out", str(out)]) == 2
    assert not out.exists()
    path.write_text(json.dumps({"source": {"v_pol": 2}}))
    assert main(["run", "--config", str(path), "--out", str(out)]) == 2
    path.write_text("{not json")
    assert main(["run", "--config", str(path), "--out", str(out)]) == 2
    assert not out.exists()


def test_run_twice_identical_files(tmp_path):
    path = write_config(tmp_path, eve={"intercept_fraction": 0.3}, n_pairs=5000)
    out = tmp_path / "o"
    names = ("report.json", "key_alice.txt", "key_bob.txt", "summary.csv")
    snapshots = []
    for _ in range(2):
        assert main(["run", "--config", str(path), "--out", str(out), "--format", "csv"]) == 0
        snapshots.append([(out / f).read_bytes() for f in names])
    assert snapshots[0] == snapshots[1]


def test_seed_env_fallback(tmp_path, monkeypatch):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"n_pairs": 1000}))
    monkeypatch.setenv("QKD4_SEED", "42")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "e")]) == 0
    assert json.loads((tmp_path / "e" / "report.json").read_text())["seed"] == 42
    assert main(["run", "--config", str(path), "--seed", "7", "--out", str(tmp_path / "f")]) == 0
    assert json.loads((tmp_path / "f" / "report.json").read_text())["seed"] == 7


def test_check_mode_flags_disagreement(tmp_path, monkeypatch):
    import qkd4.cli as cli

    monkeypatch.setattr(cli, "SIGMAS", 0.0)
    path = write_config(tmp_path, eve={"intercept_fraction": 1.0}, n_pairs=2000)
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o"), "--check"]) == 1


def test_tcp_transport(tmp_path):
    path = write_config(tmp_path, n_pairs=2000, transport={"kind": "tcp"})
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "t")]) == 0


def test_scan_sampled_092(tmp_path, capsys):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"source": {"v_pol": 0.92}, "seed": 1}))
    assert main(["scan", "--config", str(path), "--out", str(tmp_path), "--check"]) == 0
    with open(tmp_path / "scan_fit.csv") as fh:
        row = next(csv.DictReader(fh))
    assert 0.90 <= float(row["visibility"]) <= 0.94
    rows = list(csv.DictReader(open(tmp_path / "scan.csv")))
    assert len(rows) == 13


def test_scan_analytic_ideal(tmp_path):
    assert main(["scan", "--analytic", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "scan_fit.csv") as fh:
        row = next(csv.DictReader(fh))
    assert float(row["visibility"]) == pytest.approx(1.0, abs=1e-9)


def test_scan_two_angles_fit_failure(tmp_path, capsys):
    assert main(["scan", "--angles", "0", "90", "--out", str(tmp_path)]) == 3
    assert "fit failed" in capsys.readouterr().err


def test_table(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"source": {"v_x": 0.9, "v_p": 1.0}, "seed": 3}))
    assert main(["table", "--config", str(path), "--out", str(tmp_path), "--check"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "table.csv")))
    assert len(rows) == 16
    cell = {(r["basis_a"], r["basis_b"], r["index_a"], r["index_b"]): int(r["count"]) for r in rows}
    assert cell[("P", "P", "1", "2")] == 0 and cell[("P", "P", "2", "1")] == 0
    xx = [cell[("X", "X", i, j)] for i in "12" for j in "12"]
    assert (xx[0] + xx[3]) / sum(xx) == pytest.approx(0.95, abs=0.01)


@pytest.mark.parametrize(
    "protocol,needle",
    [("ParallelBBM", "qber=1/4"), ("QuQuart", "symbol_error=3/8"), ("SkewedQuQuart", "qber=1/4")],
)
def test_oracle(protocol, needle, capsys):
    assert main(["oracle", "--protocol", protocol]) == 0
    out = capsys.readouterr().out
    assert "rate=1 " in out and needle in out


def test_oracle_json(capsys):
    assert main(["oracle", "--format", "json", "--eve-fraction", "0.5"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["ParallelBBM"]["per_bit_qber"] == "1/8"
