"""Line-delimited record formats: round trips and rejection cases."""

import io

import pytest

from cellcrowd.consensus import ConsensusResult, Vote, aggregate, group_ballots
from cellcrowd.errors import MissingFile, ParseError
from cellcrowd.labels import CellClass
from cellcrowd.records import (
    from_iso8601,
    read_votes,
    to_iso8601,
    votes_to_csv,
    write_consensus,
    write_votes,
)

C, E = CellClass.CIRCULAR, CellClass.ELONGATED


def test_iso8601_roundtrip():
    ts = 1_767_571_200.0
    assert from_iso8601(to_iso8601(ts)) == ts
    assert to_iso8601(0.0) == "1970-01-01T00:00:00Z"
    assert from_iso8601("2026-01-05T00:00:00+00:00") == from_iso8601("2026-01-05T00:00:00Z")


def test_vote_csv_roundtrip(tmp_path):
    votes = [
        Vote("w1", "i1", C, 100.0),
        Vote("w2", "i1", E, 101.0),
        Vote("w1", "i2", E, 102.0),
    ]
    path = tmp_path / "votes.csv"
    with path.open("w") as fh:
        assert write_votes(votes, fh) == 3
    loaded = read_votes(path)
    assert loaded == votes


def test_vote_csv_field_order():
    text = votes_to_csv([Vote("w9", "item3", C, 0.0)])
    lines = text.strip().splitlines()
    assert lines[0] == "item_id,worker_id,label,submitted_at"
    assert lines[1] == "item3,w9,circular,1970-01-01T00:00:00Z"


@pytest.mark.parametrize(
    "line,match",
    [
        ("i1,w1,square,1970-01-01T00:00:00Z", "line 1"),
        ("i1,w1,circular", "4 fields"),
        ("i1,w1,circular,not-a-time", "timestamp"),
    ],
)
def test_vote_csv_rejects_bad_rows(tmp_path, line, match):
    path = tmp_path / "votes.csv"
    path.write_text(line + "\n")
    with pytest.raises(ParseError, match=match):
        read_votes(path)


def test_vote_csv_rejects_duplicate_worker_item(tmp_path):
    path = tmp_path / "votes.csv"
    path.write_text(
        "i1,w1,circular,1970-01-01T00:00:00Z\ni1,w1,other,1970-01-01T00:00:01Z\n"
    )
    with pytest.raises(ParseError, match="duplicate"):
        read_votes(path)


def test_read_votes_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        read_votes(tmp_path / "none.csv")


def test_consensus_csv_shape():
    votes = [Vote(f"w{i}", "i1", C, float(i)) for i in range(5)]
    result = aggregate(group_ballots(votes)["i1"])
    na = ConsensusResult("i2", None, None, (2, 2, 1))
    buf = io.StringIO()
    write_consensus([result, na], buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "item_id,label,agreement,pattern"
    assert lines[1] == "i1,circular,5,5"
    assert lines[2] == "i2,,,2-2-1"
