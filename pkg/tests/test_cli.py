"""CLI subcommands: behavior, exit codes, determinism of outputs."""

import hashlib
import json

import numpy as np
import pytest
from PIL import Image

from cellcrowd.cli import main
from cellcrowd.records import read_votes, write_votes, write_truth_manifest

from corpus import pattern_corpus, table1_corpus


def write_corpus(tmp_path, votes, truth):
    votes_path = tmp_path / "votes.csv"
    with votes_path.open("w") as fh:
        write_votes(votes, fh)
    truth_path = tmp_path / "truth.csv"
    with truth_path.open("w") as fh:
        write_truth_manifest(truth, fh)
    return votes_path, truth_path


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ----------------------------------------------------------------- estimate

def test_estimate_published_values(capsys):
    assert main(["estimate", "0.86742", "0.612", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "98.11%" in out
    assert "70.31%" in out
    assert "50.00%" in out


def test_estimate_bad_alpha_exit_code():
    assert main(["estimate", "1.5"]) == 4


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["estimate"])  # missing required alphas
    assert exc.value.code == 2


# ---------------------------------------------------------------- aggregate

def test_aggregate_pattern_histogram(tmp_path, capsys):
    votes, truth = pattern_corpus(463, 226, 135, 24)
    votes_path, _ = write_corpus(tmp_path, votes, truth)
    assert main(["aggregate", "--votes", str(votes_path), "--out", str(tmp_path / "agg")]) == 0
    out = capsys.readouterr().out
    assert "5=463" in out
    assert "4-1=226" in out
    assert "3-*=135" in out
    assert "2-2-1=24" in out
    assert "votes=4240" in out
    consensus = (tmp_path / "agg" / "consensus.csv").read_text().strip().splitlines()
    assert len(consensus) == 1 + 848


def test_aggregate_empty_corpus(tmp_path, capsys):
    votes_path = tmp_path / "votes.csv"
    votes_path.write_text("item_id,worker_id,label,submitted_at\n")
    assert main(["aggregate", "--votes", str(votes_path)]) == 0
    out = capsys.readouterr().out
    assert "5=0" in out and "2-2-1=0" in out


def test_aggregate_incomplete_ballot_warns(tmp_path, capsys):
    votes, truth = pattern_corpus(1, 0, 0, 0)
    votes_path, _ = write_corpus(tmp_path, votes[:4], truth)
    assert main(["aggregate", "--votes", str(votes_path)]) == 0
    err = capsys.readouterr().err
    assert "incomplete" in err


def test_aggregate_parse_error_exit_code(tmp_path, capsys):
    votes_path = tmp_path / "votes.csv"
    votes_path.write_text("i1,w1,banana,2026-01-01T00:00:00Z\n")
    assert main(["aggregate", "--votes", str(votes_path)]) == 4
    assert "line 1" in capsys.readouterr().err


def test_aggregate_missing_file_exit_code(tmp_path):
    assert main(["aggregate", "--votes", str(tmp_path / "nope.csv")]) == 3


# ------------------------------------------------------------------- report

def test_report_on_table1_corpus(tmp_path, capsys):
    votes, truth = table1_corpus()
    votes_path, truth_path = write_corpus(tmp_path, votes, truth)
    out_dir = tmp_path / "rep"
    assert main([
        "report", "--votes", str(votes_path), "--truth", str(truth_path),
        "--out", str(out_dir),
    ]) == 0
    out = capsys.readouterr().out
    assert "0.8759" in out          # individual sds row
    assert "DIFFERS" in out         # published F/CBA/MCC not reproducible
    body = json.loads((out_dir / "report.json").read_text())
    assert body["metrics_3c"]["individual"]["sds"] == pytest.approx(0.8759)
    assert body["vote_accuracy"]["elongated"] == pytest.approx(0.6785)


def test_report_deterministic_outputs(tmp_path):
    votes, truth = table1_corpus()
    votes_path, truth_path = write_corpus(tmp_path, votes, truth)
    digests = []
    for run in ("r1", "r2"):
        out_dir = tmp_path / run
        assert main([
            "report", "--votes", str(votes_path), "--truth", str(truth_path),
            "--out", str(out_dir),
        ]) == 0
        digests.append((sha(out_dir / "report.txt"), sha(out_dir / "report.json")))
    assert digests[0] == digests[1]


# ----------------------------------------------------------------- simulate

def test_simulate_and_report_pipeline(tmp_path, capsys):
    out_dir = tmp_path / "sim"
    assert main(["simulate", "--out", str(out_dir), "--seed", "9"]) == 0
    votes = read_votes(out_dir / "votes.csv")
    assert len(votes) == 848 * 5
    assert main([
        "report", "--votes", str(out_dir / "votes.csv"),
        "--truth", str(out_dir / "truth.csv"),
    ]) == 0
    assert "Independence estimate" in capsys.readouterr().out


def test_simulate_reproducible(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert main(["simulate", "--out", str(out), "--seed", "4", "--rho", "0.5"]) == 0
    assert sha(a / "votes.csv") == sha(b / "votes.csv")


def test_simulate_config_file(tmp_path):
    config = tmp_path / "sim.yaml"
    config.write_text(
        "seed: 3\nworkers: 7\nitems:\n  circular: 20\n  elongated: 10\n  other: 5\n"
        "rho:\n  circular: 0.4\n  elongated: 0.5\n  other: 0.6\n"
    )
    out_dir = tmp_path / "sim"
    assert main(["simulate", "--config", str(config), "--out", str(out_dir)]) == 0
    votes = read_votes(out_dir / "votes.csv")
    assert len(votes) == 35 * 5
    assert len({v.worker_id for v in votes}) == 7


# ------------------------------------------------------------------ segment

def make_phantom_dir(tmp_path):
    img = np.full((96, 96), 0.9)
    yy, xx = np.ogrid[:96, :96]
    img[(yy - 30) ** 2 + (xx - 30) ** 2 <= 15**2] = 0.2
    img[(yy - 70) ** 2 + (xx - 70) ** 2 <= 12**2] = 0.25
    path = tmp_path / "smears"
    path.mkdir()
    Image.fromarray((img * 255).astype(np.uint8), mode="L").save(path / "slide0.png")
    return path


def test_segment_phantom_dir(tmp_path, capsys):
    input_dir = make_phantom_dir(tmp_path)
    out_dir = tmp_path / "seg"
    assert main([
        "segment", "--input", str(input_dir), "--out", str(out_dir),
        "--mu", "0.2", "--max-iter", "1000", "--min-area", "50",
    ]) == 0
    assert "2 crop(s)" in capsys.readouterr().out
    manifest = (out_dir / "crops.csv").read_text().strip().splitlines()
    assert len(manifest) == 3
    assert (out_dir / "crops" / "slide0-c000.png").exists()
    runs = (out_dir / "runs.jsonl").read_text()
    entry = json.loads(runs.strip().splitlines()[-1])
    assert entry["args"]["mu"] == "0.2"
    assert entry["args"]["max_iter"] == "1000"


def test_segment_missing_and_empty_dir(tmp_path):
    assert main(["segment", "--input", str(tmp_path / "none"), "--out", str(tmp_path / "o")]) == 3
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["segment", "--input", str(empty), "--out", str(tmp_path / "o")]) == 3


# -------------------------------------------------------------------- batch

def test_batch_payload(tmp_path):
    truth_path = tmp_path / "truth.csv"
    truth_path.write_text(
        "crops/a.png,circular,s\ncrops/b.png,elongated,s\ncrops/c.png,other,s\n"
    )
    out_dir = tmp_path / "batch"
    assert main(["batch", "--manifest", str(truth_path), "--out", str(out_dir)]) == 0
    payload = json.loads((out_dir / "batch.json").read_text())
    assert len(payload["items"]) == 3
    assert payload["k"] == 5
    assert payload["items"][0]["label"] == "circular"
