"""CLI contract: subcommands, exit codes, report files, summary lines."""

from __future__ import annotations

import os
import re

import pytest

from qkdnetsim.cli import main
from qkdnetsim.metrics import CSV_FILES
from qkdnetsim.report import FIGURE_FILES

from conftest import REPO_ROOT

VENQCI_FILE = os.path.join(REPO_ROOT, "scenarios", "venqci.yaml")

SUMMARY_RE = re.compile(r"^link=\S+ blocks=\d+ mean_skr=\d+\.\d+ mean_qber=\d+\.\d+$")


def test_validate_shipped_scenario():
    assert main(["validate", VENQCI_FILE]) == 0


def test_validate_broken_window_names_it(tmp_path, capsys):
    broken = tmp_path / "broken.yaml"
    with open(VENQCI_FILE) as fh:
        text = fh.read()
    broken.write_text(
        text + "\nfaults:\n  maintenance:\n    - {link: VSIX-CavPD, start: 100, end: 50}\n"
    )
    assert main(["validate", str(broken)]) == 1
    err = capsys.readouterr().err
    assert "VSIX-CavPD" in err and "100" in err and "50" in err


def test_run_broken_scenario_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("nodes: []\nlinks: []\nduration: -5\n")
    assert main(["run", str(bad)]) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_missing_file_exit_1(capsys):
    assert main(["validate", "/nonexistent/path.yaml"]) == 1
    assert "error" in capsys.readouterr().err


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["run"])  # missing scenario argument
    assert exc.value.code == 2


def test_unknown_preset_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["preset", "nope"])
    assert exc.value.code == 2


def test_preset_writes_reports_and_figures(tmp_path, capsys):
    out = tmp_path / "reports"
    code = main(["preset", "venqci", "--duration", "6h", "--seed", "1", "--out", str(out)])
    assert code == 0
    for name in CSV_FILES:
        assert (out / name).exists(), name
    for name in FIGURE_FILES:
        assert (out / name).exists(), name
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("link=")]
    assert len(lines) == 3
    assert all(SUMMARY_RE.match(l) for l in lines)


def test_run_with_overrides_and_no_figures(tmp_path, capsys):
    out = tmp_path / "o"
    code = main([
        "run", VENQCI_FILE, "--duration", "2h", "--seed", "5", "--out", str(out), "--no-figures",
    ])
    assert code == 0
    assert (out / "blocktimes.csv").exists()
    assert not (out / "blocktimes.png").exists()


def test_json_format(tmp_path):
    out = tmp_path / "j"
    code = main([
        "preset", "venqci", "--duration", "2h", "--out", str(out), "--format", "json", "--no-figures",
    ])
    assert code == 0
    assert (out / "rates_daily.json").exists()
    assert not (out / "rates_daily.csv").exists()


def test_snapshot_flag(tmp_path):
    snap = tmp_path / "run.json"
    code = main([
        "preset", "venqci", "--duration", "1h", "--out", str(tmp_path / "s"),
        "--no-figures", "--snapshot", str(snap),
    ])
    assert code == 0
    import json

    payload = json.loads(snap.read_bytes())
    assert payload["format_version"] == 1
    assert payload["scenario"] == "venqci"


def test_dump_scenario_round_trips(tmp_path):
    target = tmp_path / "dumped.yaml"
    assert main(["preset", "venqci", "--dump-scenario", str(target)]) == 0
    assert main(["validate", str(target)]) == 0
    from qkdnetsim.topology import load_scenario, venqci_preset

    assert load_scenario(str(target)) == venqci_preset()


def test_shipped_scenario_matches_preset():
    from qkdnetsim.topology import load_scenario, venqci_preset

    assert load_scenario(VENQCI_FILE) == venqci_preset()


def test_sweep_creates_per_seed_dirs(tmp_path, capsys):
    out = tmp_path / "sweep"
    scenario = tmp_path / "short.yaml"
    with open(VENQCI_FILE) as fh:
        text = fh.read()
    scenario.write_text(text.replace("duration: 5184000.0", "duration: 3600.0"))
    code = main(["sweep", str(scenario), "--seeds", "1:3", "--out", str(out)])
    assert code == 0
    for seed in (1, 2, 3):
        assert (out / f"seed-{seed}" / "rates_daily.csv").exists()


def test_sweep_seed_list_with_preset_rejected_together(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", VENQCI_FILE, "--preset", "venqci", "--seeds", "1:2"])
    assert exc.value.code == 2


def test_control_script_status_output(tmp_path, capsys):
    script = tmp_path / "control.yaml"
    script.write_text("- {at: 30m, verb: get-status, node: CavPD}\n")
    out = tmp_path / "c"
    code = main([
        "run", VENQCI_FILE, "--duration", "1h", "--out", str(out), "--no-figures",
        "--control", str(script),
    ])
    assert code == 0
    out_text = capsys.readouterr().out
    assert "status t=1800.000 agent=CavPD" in out_text


def test_env_var_default_outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("QKDNETSIM_OUT", str(tmp_path / "envout"))
    code = main(["preset", "venqci", "--duration", "1h", "--no-figures"])
    assert code == 0
    assert (tmp_path / "envout" / "rates_daily.csv").exists()


def test_default_report_is_exactly_five_csvs(tmp_path):
    out = tmp_path / "five"
    assert main(["preset", "venqci", "--duration", "1h", "--out", str(out), "--no-figures"]) == 0
    csvs = sorted(p.name for p in out.iterdir() if p.suffix == ".csv")
    assert csvs == sorted(CSV_FILES)


def test_key_log_and_dump(tmp_path):
    import csv as csvmod

    out = tmp_path / "keys"
    code = main([
        "preset", "venqci", "--duration", "1h", "--out", str(out), "--no-figures", "--dump-keys",
    ])
    assert code == 0
    with open(out / "key_events.csv", newline="") as fh:
        rows = list(csvmod.DictReader(fh))
    assert rows and rows[0]["source"] == "psk" and rows[0]["key_hex"] == ""
    qkd = [r for r in rows if r["source"] == "qkd"]
    assert qkd and all(len(r["key_hex"]) == 64 for r in qkd)
