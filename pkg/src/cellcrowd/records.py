"""Line-delimited record formats shared by all pipeline stages.

Formats (documented in docs/FORMATS.md):

* vote records     — CSV ``item_id,worker_id,label,submitted_at`` (ISO-8601 UTC)
* consensus records— CSV ``item_id,label,agreement,pattern`` (label empty => N/A)
* truth manifest   — CSV ``crop_path,label,source_image_id``; the item id is
  the crop file stem
* crop manifest    — CSV ``item_id,crop_path,source_image_id,x0,y0,x1,y1,area``
"""

from __future__ import annotations

import csv
import io
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, TextIO

from cellcrowd.consensus import ConsensusResult, GroundTruthRecord, Vote, pattern_label
from cellcrowd.errors import InvalidLabel, MissingFile, ParseError
from cellcrowd.labels import CellClass, parse_label

VOTE_HEADER = ("item_id", "worker_id", "label", "submitted_at")
CONSENSUS_HEADER = ("item_id", "label", "agreement", "pattern")
TRUTH_HEADER = ("crop_path", "label", "source_image_id")
CROP_HEADER = ("item_id", "crop_path", "source_image_id", "x0", "y0", "x1", "y1", "area")


def to_iso8601(ts: float) -> str:
    """POSIX seconds -> ISO-8601 UTC with second precision."""
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def from_iso8601(text: str) -> float:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def write_votes(votes: Iterable[Vote], out: TextIO) -> int:
    """Write vote records with header; returns the record count."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(VOTE_HEADER)
    n = 0
    for v in votes:
        writer.writerow((v.item_id, v.worker_id, v.label.value, to_iso8601(v.submitted_at)))
        n += 1
    return n


def votes_to_csv(votes: Iterable[Vote]) -> str:
    buf = io.StringIO()
    write_votes(votes, buf)
    return buf.getvalue()


def read_votes(path: str | Path) -> list[Vote]:
    """Parse a vote record file. Raises ParseError with the offending line."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    votes: list[Vote] = []
    seen: set[tuple[str, str]] = set()
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (lineno == 1 and tuple(row) == VOTE_HEADER):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", lineno)
            item_id, worker_id, label_text, ts_text = (f.strip() for f in row)
            try:
                label = parse_label(label_text)
            except InvalidLabel as exc:
                raise ParseError(str(exc), lineno) from None
            try:
                ts = from_iso8601(ts_text) if ts_text else 0.0
            except ValueError:
                raise ParseError(f"bad timestamp {ts_text!r}", lineno) from None
            key = (worker_id, item_id)
            if key in seen:
                raise ParseError(
                    f"duplicate vote by worker {worker_id} on item {item_id}", lineno
                )
            seen.add(key)
            votes.append(Vote(worker_id, item_id, label, ts))
    return votes


def write_consensus(results: Iterable[ConsensusResult], out: TextIO) -> int:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CONSENSUS_HEADER)
    n = 0
    for r in results:
        writer.writerow(
            (
                r.item_id,
                r.label.value if r.label is not None else "",
                r.agreement_level if r.agreement_level is not None else "",
                pattern_label(r.pattern),
            )
        )
        n += 1
    return n


def read_truth_manifest(path: str | Path) -> list[GroundTruthRecord]:
    """Parse a ground-truth manifest; item ids are the crop file stems.

    Duplicate item ids are rejected so each truth label is assigned once.
    Crop files are not required to exist (synthetic corpora have none).
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    records: list[GroundTruthRecord] = []
    seen: set[str] = set()
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (lineno == 1 and tuple(row) == TRUTH_HEADER):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
            crop_path, label_text, source = (f.strip() for f in row)
            if not crop_path:
                raise ParseError("empty crop path", lineno)
            try:
                label = parse_label(label_text)
            except InvalidLabel as exc:
                raise ParseError(str(exc), lineno) from None
            item_id = Path(crop_path).stem
            if item_id in seen:
                raise ParseError(f"duplicate item_id {item_id!r}", lineno)
            seen.add(item_id)
            records.append(GroundTruthRecord(item_id, label, source, crop_path))
    return records


def write_truth_manifest(records: Iterable[GroundTruthRecord], out: TextIO) -> int:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRUTH_HEADER)
    n = 0
    for r in records:
        writer.writerow((r.crop_path or f"{r.item_id}.png", r.true_label.value, r.source_image_id))
        n += 1
    return n


def class_histogram(records: Iterable[GroundTruthRecord]) -> dict[CellClass, int]:
    hist = {c: 0 for c in CellClass}
    for r in records:
        hist[r.true_label] += 1
    return hist


def iter_lines(path: str | Path) -> Iterator[str]:
    with Path(path).open() as fh:
        yield from fh
