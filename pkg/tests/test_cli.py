"""Tests for the qbc-sim command line."""

import json

import pytest

from qbc_sim.cli import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    build_parser,
    main,
)
from qbc_sim.harness import SWEEP_COLUMNS


@pytest.fixture(autouse=True)
def serial_settings(monkeypatch):
    """Run CLI tests serially without transcript dumps."""
    monkeypatch.setenv("QBC_SIM_PARALLELISM", "1")
    monkeypatch.delenv("QBC_SIM_TRANSCRIPT_DIR", raising=False)


def test_run_json(capsys):
    assert main(["run", "--seed", "5", "--trials", "2"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["n_sessions"] == 2
    assert payload["accept_fraction"] == 1.0
    assert len(payload["reports"]) == 2


def test_run_is_reproducible(capsys):
    main(["run", "--seed", "5", "--trials", "2"])
    first = json.loads(capsys.readouterr().out)
    main(["run", "--seed", "5", "--trials", "2"])
    second = json.loads(capsys.readouterr().out)
    first.pop("wall_clock_seconds")
    second.pop("wall_clock_seconds")
    assert first == second


def test_run_csv(capsys):
    assert main(["run", "--trials", "1", "--format", "csv"]) == EXIT_OK
    header = capsys.readouterr().out.splitlines()[0]
    assert header == ",".join(SWEEP_COLUMNS[1:])


def test_run_writes_transcripts(tmp_path, capsys):
    out_dir = tmp_path / "transcripts"
    assert main(["run", "--trials", "2", "--transcripts", str(out_dir)]) == EXIT_OK
    assert len(list(out_dir.glob("*.jsonl"))) == 2


def test_config_file_and_out(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "seed": 3,
                "source": {"session_duration": 20000},
                "adversary": {"strategy": "breidbart"},
            }
        )
    )
    out_path = tmp_path / "result.json"
    code = main(["run", "--config", str(config_path), "--out", str(out_path)])
    assert code == EXIT_OK
    payload = json.loads(out_path.read_text())
    assert payload["reports"][0]["verdict"] == "reject"


def test_sweep_csv(capsys):
    argv = [
        "sweep",
        "--trials", "1",
        "--param", "channel.visibility_v",
        "--values", "1.0,0.8",
        "--format", "csv",
    ]
    assert main(argv) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert len(lines) == 3


def test_sweep_bad_values(capsys):
    argv = ["sweep", "--param", "channel.visibility_v", "--values", "high"]
    assert main(argv) == EXIT_CONFIG_ERROR
    assert "Configuration error" in capsys.readouterr().err


def test_sweep_bad_param(capsys):
    argv = ["sweep", "--param", "channel.colour", "--values", "1"]
    assert main(argv) == EXIT_CONFIG_ERROR


def test_hiding_test_precondition(capsys):
    assert main(["hiding-test", "--sessions", "5"]) == EXIT_CONFIG_ERROR


def test_hiding_test_json(capsys):
    assert main(["hiding-test", "--sessions", "30", "--seed", "9"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert 0.0 <= payload["p_value"] <= 1.0
    assert sum(payload["counts_bit0"]) == 30


def test_fig2_csv(capsys):
    assert main(["fig2", "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("session_index,n_in_basis")
    assert len(lines) == 6


def test_fig2_json(capsys):
    assert main(["fig2", "--seed", "1"]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)
    assert [r["session_index"] for r in rows] == [0, 1, 2, 3, 4]


def test_basis_success_alias(capsys):
    assert main(["basis-success", "--seed", "1"]) == EXIT_OK
    assert len(json.loads(capsys.readouterr().out)) == 5


def test_invalid_trials(capsys):
    assert main(["run", "--trials", "0"]) == EXIT_CONFIG_ERROR


def test_subcommand_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_unwritable_out(tmp_path, capsys):
    out_path = tmp_path / "missing" / "result.json"
    assert main(["run", "--trials", "1", "--out", str(out_path)]) == EXIT_CONFIG_ERROR
    assert "I/O error" in capsys.readouterr().err


def test_transcript_dir_is_a_file(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    argv = ["run", "--trials", "1", "--transcripts", str(blocker / "sub")]
    assert main(argv) == EXIT_CONFIG_ERROR
    assert "I/O error" in capsys.readouterr().err
