"""Label alphabets for red blood cell classification.

The three-class alphabet (circular / elongated / other) is the one workers
answer in; the two-class alphabet folds every deformation into a single
"not circular" category and is only ever applied to *results*, never to
raw votes (re-voting on merged classes would change consensus outcomes).
"""

from __future__ import annotations

import enum

from cellcrowd.errors import InvalidLabel


class CellClass(enum.Enum):
    """Cell shape category. Order is fixed so serialized output is stable."""

    CIRCULAR = "circular"
    ELONGATED = "elongated"
    OTHER = "other"

    def __lt__(self, other: "CellClass") -> bool:
        if not isinstance(other, CellClass):
            return NotImplemented
        order = list(CellClass)
        return order.index(self) < order.index(other)

    def __str__(self) -> str:
        return self.value


class MergedClass(enum.Enum):
    """Two-class alphabet: circular vs any deformation."""

    CIRCULAR = "circular"
    NOT_CIRCULAR = "not_circular"

    def __str__(self) -> str:
        return self.value


#: Canonical class order used everywhere a matrix or report is laid out.
CLASS_ORDER: tuple[CellClass, ...] = (
    CellClass.CIRCULAR,
    CellClass.ELONGATED,
    CellClass.OTHER,
)

MERGED_ORDER: tuple[MergedClass, ...] = (
    MergedClass.CIRCULAR,
    MergedClass.NOT_CIRCULAR,
)


def merge_label(label: CellClass) -> MergedClass:
    """Fold the three-class label into the two-class alphabet."""
    if label is CellClass.CIRCULAR:
        return MergedClass.CIRCULAR
    return MergedClass.NOT_CIRCULAR


def parse_label(text: str) -> CellClass:
    """Parse a serialized class name, raising InvalidLabel on anything else."""
    try:
        return CellClass(text.strip().lower())
    except ValueError:
        raise InvalidLabel(
            f"unknown label {text!r}; expected one of "
            + ", ".join(c.value for c in CLASS_ORDER)
        ) from None
