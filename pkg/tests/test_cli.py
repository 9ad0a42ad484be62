import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from antrouting import __version__
from antrouting.cli import EXIT_CONFIG, EXIT_OK, EXIT_USAGE, header, main

ROOT = Path(__file__).resolve().parents[1]
PATH3 = ROOT / "scenarios" / "path3"
GOLDEN = Path(__file__).resolve().parent / "golden"


def simulate(out, *extra, network=PATH3 / "network.json"):
    return main(["simulate", "--network", str(network), "--workload", str(PATH3 / "workload.json"),
                 "--out", str(out), *extra])


def table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_simulate_matches_golden(tmp_path):
    assert simulate(tmp_path) == EXIT_OK
    assert json.loads((tmp_path / "metrics.json").read_text()) == \
        json.loads((GOLDEN / "path3_metrics.json").read_text())
    assert (tmp_path / "metrics.csv").read_text() == (GOLDEN / "path3_metrics.csv").read_text()


def test_simulate_csv_header_and_row(tmp_path):
    simulate(tmp_path, "--format", "csv")
    assert not (tmp_path / "metrics.json").exists()
    text = (tmp_path / "metrics.csv").read_text()
    first = text.splitlines()[0]
    assert first.startswith(f"# antrouting {__version__}; rng_seed=7; config=")
    row = table(text)[0]
    assert row["path"] == "1-2-3" and row["completed"] == "True" and row["fees_paid"] == "5"


def test_seed_override_recorded(tmp_path):
    simulate(tmp_path, "--seed", "99", "--format", "json")
    data = json.loads((tmp_path / "metrics.json").read_text())
    assert data["config"]["rng_seed"] == 99


def test_invalid_channel_exits_2(tmp_path, capsys):
    net = json.loads((PATH3 / "network.json").read_text())
    net["channels"].append({"a": 1, "b": 42, "balance_ab": 5, "balance_ba": 5})
    bad = tmp_path / "net.json"
    bad.write_text(json.dumps(net))
    assert simulate(tmp_path / "out", network=bad) == EXIT_CONFIG
    assert "1-42" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert simulate(tmp_path, network=tmp_path / "absent.json") == EXIT_CONFIG


@pytest.mark.parametrize("argv", [[], ["simulate"], ["capacity", "chain", "--block-max", "x"],
                                  ["scaling", "bench", "--trials", "0"], ["nosuch"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == EXIT_USAGE
    capsys.readouterr()


def test_value_error_exits_1(capsys):
    assert main(["scaling", "eval", "--rate", "5"]) == EXIT_USAGE
    capsys.readouterr()


def test_capacity_table(capsys):
    assert main(["capacity"]) == EXIT_OK
    rows = {r["preset"]: r for r in table(capsys.readouterr().out)}
    assert rows["bitcoin-typical"]["tx_per_s_2dp"] == "6.67"
    assert float(rows["ant-routing"]["tx_per_s"]) == 100_000


def test_capacity_preset_filter(capsys):
    assert main(["capacity", "--preset", "monero"]) == EXIT_OK
    rows = table(capsys.readouterr().out)
    assert [r["preset"] for r in rows] == ["monero"]


def test_capacity_chain_and_match(capsys):
    main(["capacity", "chain", "--block-max", "1000000", "--tx-size", "250", "--interblock-time", "600"])
    assert float(table(capsys.readouterr().out)[0]["tx_per_s"]) == pytest.approx(1e6 / 150_000)
    main(["capacity", "match", "--reach", "0.5", "--nodes", "32"])
    assert float(table(capsys.readouterr().out)[0]["match_probability"]) == pytest.approx(1 - 0.75 ** 32)


def test_scaling_subcommands(capsys):
    assert main(["scaling", "lambda-max"]) == EXIT_OK
    row = table(capsys.readouterr().out)[0]
    assert float(row["lambda_max"]) == pytest.approx(12444.32, rel=1e-5)
    assert float(row["network_upper_bound"]) == pytest.approx(2 * float(row["lambda_max"]))
    main(["scaling", "memory", "--rate", "10000"])
    out = capsys.readouterr()
    assert float(table(out.out)[0]["bytes"]) == 1_340_000 and "warning" in out.err
    main(["scaling", "bandwidth", "--rate", "10000", "--size", "16"])
    assert float(table(capsys.readouterr().out)[0]["bytes_per_s"]) == 160_000


def test_reproduce(capsys):
    assert main(["reproduce"]) == EXIT_OK
    rows = table(capsys.readouterr().out)
    assert rows and all(r["pass"] == "True" for r in rows)
    assert main(["reproduce", "--only", "bandwidth"]) == EXIT_OK
    assert {r["group"] for r in table(capsys.readouterr().out)} == {"bandwidth"}


def test_header_is_stable():
    assert header(3, {"b": 1, "a": 2}) == f'# antrouting {__version__}; rng_seed=3; config={{"a": 2, "b": 1}}\n'


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "antrouting.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
