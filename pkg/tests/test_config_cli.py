import io
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from hybridbf.cli import cmd_selftest, main, read_csv_body
from hybridbf.config import ScenarioConfig, default_config_text, parse_clusters
from hybridbf.errors import ConfigurationError
from hybridbf.syssim import RATE_CAP_BPS, VARIANTS

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def run_cli(*argv):
    return main([str(a) for a in argv])


# config parsing

@pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.glob("*.cfg")))
def test_shipped_scenarios_round_trip(name):
    cfg = ScenarioConfig.from_file(SCENARIOS / name)
    again = ScenarioConfig.from_string(cfg.to_string())
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()


def test_defaults_text_parses_to_defaults():
    cfg = ScenarioConfig.from_string(default_config_text(42))
    assert cfg.run.seed == 42
    assert cfg == ScenarioConfig.from_string("[run]\nseed = 42\n")


def test_unknown_key_reports_line():
    text = "[run]\nseed = 1\n\n[array]\nrows = 6\nrowz = 3\n"
    with pytest.raises(ConfigurationError, match=r"x\.cfg:6: unknown key 'rowz' in \[array\]"):
        ScenarioConfig.from_string(text, source="x.cfg")


def test_unknown_section_reports_line():
    with pytest.raises(ConfigurationError, match=r":3: unknown section \[antenna\]"):
        ScenarioConfig.from_string("[run]\nseed = 1\n[antenna]\nrows = 2\n", source="x.cfg")


def test_bad_value_reports_line():
    with pytest.raises(ConfigurationError, match=r":3: \[run\] subframes"):
        ScenarioConfig.from_string("[run]\nseed = 1\nsubframes = many\n", source="x.cfg")


def test_missing_seed():
    with pytest.raises(ConfigurationError, match="seed"):
        ScenarioConfig.from_string("[channel]\nsnr_db = 3\n")


def test_overrides_change_hash_except_neutral_keys():
    cfg = ScenarioConfig.from_string("[run]\nseed = 1\n")
    assert cfg.with_overrides(out="elsewhere", workers=3).config_hash() == cfg.config_hash()
    assert cfg.with_overrides(seed=2).config_hash() != cfg.config_hash()
    with pytest.raises(ConfigurationError):
        cfg.with_overrides(colour="red")


def test_parse_clusters():
    c = parse_clusters("0 10 0.75 100; 30 -5 0.25")
    assert len(c) == 2
    assert c[0].elevation == pytest.approx(np.radians(10.0))
    assert c[0].delay_s == pytest.approx(100e-9)
    assert c[1].power_fraction == 0.25
    with pytest.raises(ConfigurationError):
        parse_clusters("0 10")


# command line

def test_missing_seed_exits_2(tmp_path, capsys):
    cfg = tmp_path / "noseed.cfg"
    cfg.write_text("[channel]\nsnr_db = 10\n")
    assert run_cli("link", "--scenario", cfg, "--out", tmp_path / "o") == 2
    assert "seed" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[run]\nseed = 1\nspeed = 3\n")
    assert run_cli("link", "--scenario", cfg, "--out", tmp_path / "o") == 2
    assert "bad.cfg:3" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert run_cli("system", "--scenario", tmp_path / "absent.cfg") == 2


def test_seed_flag_makes_config_complete(tmp_path):
    cfg = tmp_path / "noseed.cfg"
    cfg.write_text("[channel]\nsnr_db = 10\n")
    out = tmp_path / "o"
    assert run_cli("link", "--scenario", cfg, "--seed", 3, "--subframes", 20, "--out", out) == 0
    saved = ScenarioConfig.from_file(out / "scenario.cfg")
    assert saved.run.seed == 3 and saved.run.subframes == 20


def test_link_rerun_is_byte_identical(tmp_path):
    args = ("link", "--scenario", SCENARIOS / "link_default.cfg", "--seed", 7, "--subframes", 60)
    assert run_cli(*args, "--out", tmp_path / "a") == 0
    assert run_cli(*args, "--out", tmp_path / "b") == 0
    a = read_csv_body(tmp_path / "a" / "trace.csv")
    assert a == read_csv_body(tmp_path / "b" / "trace.csv")
    assert a[0].startswith("# hybridbf") and "seed=7" in a[0]
    assert a[1].strip() == "subframe,weight_id,snr_db,oracle_db,gap_db,evm_db"
    assert len(a) == 2 + 60
    assert run_cli(*args[:3], "--seed", 8, "--subframes", 60, "--out", tmp_path / "c") == 0
    assert read_csv_body(tmp_path / "c" / "trace.csv") != a
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["causality_violations"] == 0


def test_ab_mode_writes_table(tmp_path):
    out = tmp_path / "ab"
    assert run_cli("link", "--scenario", SCENARIOS / "ab_rich.cfg", "--subframes", 40,
                   "--workers", 1, "--out", out) == 0
    body = read_csv_body(out / "ab.csv")
    assert body[1].startswith("seed,hybrid_snr_db")
    assert len(body) == 2 + 20
    summary = json.loads((out / "summary.json").read_text())
    assert summary["trials"] == 20 and summary["checksums_match"] is True


def test_trajectory_mode_summary(tmp_path):
    out = tmp_path / "step"
    assert run_cli("link", "--scenario", SCENARIOS / "step_trajectory.cfg", "--out", out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert 0 <= summary["reconvergence_subframes"] <= 300


def test_iq_dump(tmp_path):
    from hybridbf.phy.iq import read_iq, read_iq_header
    cfg = tmp_path / "iq.cfg"
    cfg.write_text("[run]\nseed = 2\nsubframes = 3\niq_dump = true\n")
    assert run_cli("link", "--scenario", cfg, "--out", tmp_path / "o") == 0
    iq = tmp_path / "o" / "rx.iq"
    assert read_iq_header(iq)["seed"] == "2"
    assert read_iq(iq).size == 3 * 30720


def test_system_rerun_and_outputs(tmp_path):
    args = ("system", "--scenario", SCENARIOS / "system_default.cfg", "--drops", 30)
    assert run_cli(*args, "--out", tmp_path / "a", "--workers", 1) == 0
    assert run_cli(*args, "--out", tmp_path / "b", "--workers", 2) == 0
    for v in VARIANTS:
        a = read_csv_body(tmp_path / "a" / f"cdf_{v}.csv")
        assert a == read_csv_body(tmp_path / "b" / f"cdf_{v}.csv")
        table = np.loadtxt(tmp_path / "a" / f"cdf_{v}.csv", delimiter=",", skiprows=3, ndmin=2)
        x, F = table.T
        assert np.all(np.diff(x) > 0) and np.all(np.diff(F) > 0) and F[-1] == 1.0
        assert x.min() >= 0 and x.max() <= RATE_CAP_BPS
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert set(summary["mean_rate_bps"]) == set(VARIANTS)


def test_single_cell_has_no_interference(tmp_path):
    out = tmp_path / "one"
    assert run_cli("system", "--scenario", SCENARIOS / "system_single_bs.cfg", "--drops", 20,
                   "--out", out) == 0
    for s in ("conventional", "hybrid"):
        assert (read_csv_body(out / f"cdf_{s}.csv")[2:]
                == read_csv_body(out / f"cdf_{s}_no_ici.csv")[2:])


def test_selftest_passes_and_detects_fault():
    buf = io.StringIO()
    assert cmd_selftest(stream=buf) == 0
    lines = buf.getvalue().splitlines()
    assert all(ln.startswith("PASS") for ln in lines[:-1])
    buf = io.StringIO()
    assert cmd_selftest("zc-sign", stream=buf) == 1
    assert buf.getvalue().startswith("FAIL  zadoff-chu")


def test_module_entry_point_selftest():
    r = subprocess.run([sys.executable, "-m", "hybridbf", "selftest", "--inject-fault", "zc-sign"],
                       capture_output=True, text=True, timeout=120)
    assert r.returncode == 1
    assert "FAIL" in r.stdout


def test_thousand_subframes_run_quickly(tmp_path):
    t0 = time.perf_counter()
    assert run_cli("link", "--scenario", SCENARIOS / "link_default.cfg", "--out", tmp_path,
                   "--subframes", 1000) == 0
    assert time.perf_counter() - t0 < 60.0
