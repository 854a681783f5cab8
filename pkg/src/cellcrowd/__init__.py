"""Quality-controlled crowd annotation of red blood cell images.

Pipeline: segment cells out of smear images, distribute each crop to k
redundant workers, aggregate votes by quorum consensus, and score the
resulting labels against expert ground truth.
"""

from cellcrowd.labels import CellClass, MergedClass, merge_label
from cellcrowd.consensus import (
    Ballot,
    ConsensusResult,
    GroundTruthRecord,
    Vote,
    aggregate,
    classify_pattern,
    estimate_consensus_accuracy,
)

__version__ = "0.1.0"

__all__ = [
    "CellClass",
    "MergedClass",
    "merge_label",
    "Vote",
    "Ballot",
    "GroundTruthRecord",
    "ConsensusResult",
    "classify_pattern",
    "aggregate",
    "estimate_consensus_accuracy",
    "__version__",
]
