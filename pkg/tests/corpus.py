"""Synthetic vote corpora used by several test modules."""

from __future__ import annotations

from cellcrowd.consensus import GroundTruthRecord, Vote
from cellcrowd.labels import CLASS_ORDER, CellClass

C, E, O = CellClass.CIRCULAR, CellClass.ELONGATED, CellClass.OTHER

#: Published per-vote confusion counts (truth rows x prediction columns).
TABLE1_ROWS = {
    C: [2676, 58, 351],
    E: [48, 614, 243],
    O: [69, 28, 153],
}
TABLE1_ITEMS = {C: 617, E: 181, O: 50}


def table1_corpus() -> tuple[list[Vote], list[GroundTruthRecord]]:
    """A 848-item, 4240-vote corpus whose per-vote matrix equals the
    published counts exactly. The split of votes across items is arbitrary
    (only row totals are pinned), so votes are dealt greedily."""
    votes: list[Vote] = []
    truth: list[GroundTruthRecord] = []
    for true_class, row in TABLE1_ROWS.items():
        remaining = dict(zip(CLASS_ORDER, row))
        for idx in range(TABLE1_ITEMS[true_class]):
            item_id = f"{true_class.value}-{idx:04d}"
            truth.append(GroundTruthRecord(item_id, true_class, "tbl1"))
            for slot in range(5):
                label = max(remaining, key=lambda c: remaining[c])
                remaining[label] -= 1
                votes.append(Vote(f"w{slot}", item_id, label, float(len(votes))))
        assert all(v == 0 for v in remaining.values())
    return votes, truth


def pattern_corpus(
    n5: int = 463, n41: int = 226, n3: int = 135, n221: int = 24
) -> tuple[list[Vote], list[GroundTruthRecord]]:
    """Corpus engineered to a given agreement-pattern histogram.

    The 3-agree block mixes 3-2 and 3-1-1 ballots; both land in the
    combined 3-* histogram bucket.
    """
    shapes: list[tuple[CellClass, ...]] = []
    shapes += [(C, C, C, C, C)] * n5
    shapes += [(C, C, C, C, E)] * n41
    half = n3 // 2
    shapes += [(E, E, E, O, O)] * half          # 3-2
    shapes += [(O, O, O, C, E)] * (n3 - half)   # 3-1-1
    shapes += [(C, C, E, E, O)] * n221
    votes: list[Vote] = []
    truth: list[GroundTruthRecord] = []
    for idx, shape in enumerate(shapes):
        item_id = f"p{idx:05d}"
        truth.append(GroundTruthRecord(item_id, shape[0], "patterns"))
        for slot, label in enumerate(shape):
            votes.append(Vote(f"w{slot}", item_id, label, float(idx * 5 + slot)))
    return votes, truth
