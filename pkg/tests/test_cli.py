from __future__ import annotations

import json
import subprocess
import sys

import pytest

from agrichain.chain import Ledger
from agrichain.cli import main


def _sim(tmp_path, *extra):
    out = tmp_path / "sim"
    rc = main(["simulate", "--out", str(out), "--n-farms", "5", "--rounds", "1", "--difficulty", "6", *extra])
    return rc, out


def test_simulate_then_inspect(tmp_path, capsys):
    rc, out = _sim(tmp_path)
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 42 and "fn_ledger.txt" in manifest["outputs"]
    capsys.readouterr()
    assert main(["inspect", str(out / "fn_ledger.txt")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and lines[-1] == "chain valid"
    block = json.loads(lines[1])
    assert set(block["color_tokens"]) == {f"F{i:02d}" for i in range(5)}
    assert main(["inspect", str(out / "tn_ledger.txt")]) == 0


def test_inspect_reports_tampering(tmp_path, capsys):
    _, out = _sim(tmp_path)
    ledger = Ledger.load(out / "fn_ledger.txt")
    lines = ledger.export_lines()
    raw = bytearray.fromhex(lines[1])
    raw[-40] ^= 0x01
    lines[1] = raw.hex()
    bad = tmp_path / "bad.txt"
    bad.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["inspect", str(bad)]) == 2
    assert capsys.readouterr().out.strip().splitlines()[-1] == "chain INVALID at height 1"


def test_inspect_empty_file(tmp_path, capsys):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert main(["inspect", str(empty)]) == 2
    assert "parse error" in capsys.readouterr().err


def test_config_errors_exit_1(tmp_path, capsys):
    assert main(["simulate", "--n-farms", "0", "--out", str(tmp_path)]) == 1
    assert "n_farms" in capsys.readouterr().err
    assert main(["preset", "no-such-preset", "--out", str(tmp_path)]) == 1
    cfg = tmp_path / "c.json"
    cfg.write_text('{"alpha": -1}')
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_layering_flags_beat_env_beat_file(tmp_path, monkeypatch):
    from agrichain.cli import build_parser, resolve_config
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text('{"rounds": 3, "alpha": 0.2}')
    monkeypatch.setenv("AGRICHAIN_ROUNDS", "4")
    args = build_parser().parse_args(["preset", "sopt-search", "--config", str(cfg_file), "--tw", "7"])
    cfg = resolve_config(args, "sopt-search")
    assert (cfg.rounds, cfg.alpha, cfg.tw, cfg.inter_low) == (4, 0.2, 7, 20.0)


def test_calibrate(tmp_path, capsys):
    assert main(["calibrate"]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["k_D_hat"] == pytest.approx(10.0, rel=0.05)
    samples = tmp_path / "s.csv"
    samples.write_text("concentration,rf\n1,0.5\n3,0.75\n9,0.9\n")
    assert main(["calibrate", "--samples", str(samples)]) == 0
    assert json.loads(capsys.readouterr().out)["k_D_hat"] == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("name", ["rf-curves", "rf-fit", "sbu-deviation", "color-tokens"])
def test_quick_presets(tmp_path, name):
    out = tmp_path / name
    assert main(["preset", name, "--out", str(out), "--svg", "true", "--n-farms", "6",
                 "--rounds", "3", "--difficulty", "4"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["preset"] == name
    assert all((out / f).exists() for f in manifest["outputs"])


def test_presets_are_deterministic(tmp_path):
    digests = []
    for run in ("a", "b"):
        out = tmp_path / run
        main(["preset", "color-tokens", "--out", str(out), "--n-farms", "4", "--rounds", "2", "--difficulty", "4"])
        digests.append(json.loads((out / "manifest.json").read_text())["outputs"])
    assert digests[0] == digests[1]


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "agrichain.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout
