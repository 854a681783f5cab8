"""Orchestration lifecycle records.

Money is tracked in integer cents so ledger arithmetic is exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class TaskState(enum.Enum):
    OPEN = "open"
    COMPLETE = "complete"
    EXPIRED = "expired"


class AssignmentState(enum.Enum):
    CLAIMED = "claimed"
    SUBMITTED = "submitted"
    EXPIRED = "expired"
    APPROVED = "approved"
    REJECTED = "rejected"


#: States that occupy one of a task's k submission slots for good.
SETTLED_STATES = frozenset(
    {AssignmentState.SUBMITTED, AssignmentState.APPROVED, AssignmentState.REJECTED}
)


@dataclass
class WorkerProfile:
    """Worker identity plus the reputation that gates task visibility.

    ``seed_approved``/``seed_decided`` carry the external platform history a
    worker registers with; counts earned here accumulate on top. The approval
    rate counts decided submissions only (pending ones are neither approved
    nor rejected yet), matching how microtask markets report it.
    """

    worker_id: str
    is_master: bool = False
    seed_approved: int = 0
    seed_decided: int = 0
    approved_count: int = 0
    rejected_count: int = 0
    submitted_count: int = 0
    balance_cents: int = 0

    @property
    def approval_rate(self) -> float:
        decided = self.seed_decided + self.approved_count + self.rejected_count
        if decided == 0:
            return 1.0
        return (self.seed_approved + self.approved_count) / decided

    @property
    def pending_count(self) -> int:
        return self.submitted_count - self.approved_count - self.rejected_count

    def to_dict(self) -> dict:
        return {
            "worker_id": self.worker_id,
            "is_master": self.is_master,
            "seed_approved": self.seed_approved,
            "seed_decided": self.seed_decided,
            "approved_count": self.approved_count,
            "rejected_count": self.rejected_count,
            "submitted_count": self.submitted_count,
            "balance_cents": self.balance_cents,
        }


@dataclass
class Task:
    """One microtask: a pair of items labeled by k distinct workers."""

    task_id: str
    batch_id: str
    items: tuple[str, ...]
    k: int
    reward_cents: int
    created_at: float
    expires_at: float
    state: TaskState = TaskState.OPEN

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "batch_id": self.batch_id,
            "items": list(self.items),
            "k": self.k,
            "reward_cents": self.reward_cents,
            "created_at": self.created_at,
            "expires_at": self.expires_at,
            "state": self.state.value,
        }


@dataclass
class Assignment:
    """One worker's claim on one task."""

    assignment_id: str
    task_id: str
    worker_id: str
    claimed_at: float
    deadline: float
    state: AssignmentState = AssignmentState.CLAIMED
    answers: dict[str, str] = field(default_factory=dict)
    submitted_at: float | None = None

    def to_dict(self) -> dict:
        return {
            "assignment_id": self.assignment_id,
            "task_id": self.task_id,
            "worker_id": self.worker_id,
            "claimed_at": self.claimed_at,
            "deadline": self.deadline,
            "state": self.state.value,
            "answers": dict(self.answers),
            "submitted_at": self.submitted_at,
        }


@dataclass(frozen=True)
class LedgerEntry:
    """Append-only reward record."""

    worker_id: str
    assignment_id: str
    amount_cents: int
    reason: str  # "reward" | "bonus"
    at: float

    def to_dict(self) -> dict:
        return {
            "worker_id": self.worker_id,
            "assignment_id": self.assignment_id,
            "amount_cents": self.amount_cents,
            "reason": self.reason,
            "at": self.at,
        }


@dataclass
class BatchRecord:
    """Grouping of tasks created together, plus optional ground truth."""

    batch_id: str
    task_ids: list[str]
    item_ids: list[str]
    created_at: float
    truth: dict[str, str] = field(default_factory=dict)
    images: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "batch_id": self.batch_id,
            "task_ids": list(self.task_ids),
            "item_ids": list(self.item_ids),
            "created_at": self.created_at,
            "truth": dict(self.truth),
            "images": dict(self.images),
        }
