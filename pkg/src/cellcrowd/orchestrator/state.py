"""Pure state machine: events in, state out.

Every mutation of orchestrator state happens by applying an event dict, so
replaying the event log from scratch reconstructs the exact same state.
Validation lives in the service layer; apply functions trust their events.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from cellcrowd.consensus import Ballot, ConsensusResult, Vote, aggregate
from cellcrowd.labels import parse_label
from cellcrowd.orchestrator.model import (
    Assignment,
    AssignmentState,
    BatchRecord,
    LedgerEntry,
    Task,
    TaskState,
    WorkerProfile,
)


@dataclass
class OrchestratorState:
    workers: dict[str, WorkerProfile] = field(default_factory=dict)
    batches: dict[str, BatchRecord] = field(default_factory=dict)
    tasks: dict[str, Task] = field(default_factory=dict)
    assignments: dict[str, Assignment] = field(default_factory=dict)
    task_assignments: dict[str, list[str]] = field(default_factory=dict)
    worker_history: dict[str, set[str]] = field(default_factory=dict)
    ballots: dict[str, Ballot] = field(default_factory=dict)
    consensus: dict[str, ConsensusResult] = field(default_factory=dict)
    ledger: list[LedgerEntry] = field(default_factory=list)
    task_order: list[str] = field(default_factory=list)
    last_seq: int = 0
    last_at: float = 0.0

    # ------------------------------------------------------------- queries

    def task_votes(self, task: Task) -> dict[str, int]:
        return {
            item: len(self.ballots[item].votes) if item in self.ballots else 0
            for item in task.items
        }

    def settled_count(self, task_id: str) -> int:
        ids = self.task_assignments.get(task_id, ())
        return sum(
            1
            for aid in ids
            if self.assignments[aid].state
            in (AssignmentState.SUBMITTED, AssignmentState.APPROVED, AssignmentState.REJECTED)
        )

    def occupied_slots(self, task_id: str, now: float) -> int:
        """Slots taken by settled submissions plus claims that can still submit."""
        ids = self.task_assignments.get(task_id, ())
        occupied = 0
        for aid in ids:
            a = self.assignments[aid]
            if a.state in (AssignmentState.SUBMITTED, AssignmentState.APPROVED, AssignmentState.REJECTED):
                occupied += 1
            elif a.state is AssignmentState.CLAIMED and a.deadline >= now:
                occupied += 1
        return occupied

    def ledger_total_cents(self) -> int:
        return sum(e.amount_cents for e in self.ledger)

    # -------------------------------------------------------------- events

    def apply(self, event: dict) -> None:
        handler = getattr(self, f"_apply_{event['type']}")
        handler(event)
        self.last_seq = event["seq"]
        self.last_at = max(self.last_at, float(event.get("at", 0.0)))

    def _apply_worker_registered(self, e: dict) -> None:
        self.workers[e["worker_id"]] = WorkerProfile(
            worker_id=e["worker_id"],
            is_master=e["is_master"],
            seed_approved=e["seed_approved"],
            seed_decided=e["seed_decided"],
        )
        self.worker_history.setdefault(e["worker_id"], set())

    def _apply_batch_created(self, e: dict) -> None:
        batch = BatchRecord(
            batch_id=e["batch_id"],
            task_ids=[t["task_id"] for t in e["tasks"]],
            item_ids=list(e["item_ids"]),
            created_at=e["at"],
            truth=dict(e.get("truth", {})),
            images=dict(e.get("images", {})),
        )
        self.batches[batch.batch_id] = batch
        for spec in e["tasks"]:
            task = Task(
                task_id=spec["task_id"],
                batch_id=batch.batch_id,
                items=tuple(spec["items"]),
                k=e["k"],
                reward_cents=e["reward_cents"],
                created_at=e["at"],
                expires_at=e["expires_at"],
            )
            self.tasks[task.task_id] = task
            self.task_order.append(task.task_id)
            self.task_assignments[task.task_id] = []
            for item in task.items:
                self.ballots[item] = Ballot(item, k=e["k"])

    def _apply_assignment_claimed(self, e: dict) -> None:
        a = Assignment(
            assignment_id=e["assignment_id"],
            task_id=e["task_id"],
            worker_id=e["worker_id"],
            claimed_at=e["at"],
            deadline=e["deadline"],
        )
        self.assignments[a.assignment_id] = a
        self.task_assignments[a.task_id].append(a.assignment_id)
        self.worker_history.setdefault(a.worker_id, set()).add(a.task_id)

    def _apply_assignment_submitted(self, e: dict) -> None:
        a = self.assignments[e["assignment_id"]]
        a.state = AssignmentState.SUBMITTED
        a.answers = dict(e["answers"])
        a.submitted_at = e["at"]
        worker = self.workers[a.worker_id]
        worker.submitted_count += 1
        for item, label_text in e["answers"].items():
            self.ballots[item].add(
                Vote(a.worker_id, item, parse_label(label_text), e["at"])
            )
        task = self.tasks[a.task_id]
        if self.settled_count(a.task_id) >= task.k:
            task.state = TaskState.COMPLETE
            for item in task.items:
                self.consensus[item] = aggregate(self.ballots[item])

    def _apply_assignment_expired(self, e: dict) -> None:
        self.assignments[e["assignment_id"]].state = AssignmentState.EXPIRED

    def _apply_assignment_approved(self, e: dict) -> None:
        a = self.assignments[e["assignment_id"]]
        a.state = AssignmentState.APPROVED
        worker = self.workers[a.worker_id]
        worker.approved_count += 1
        worker.balance_cents += e["amount_cents"]
        self.ledger.append(
            LedgerEntry(
                worker_id=a.worker_id,
                assignment_id=a.assignment_id,
                amount_cents=e["amount_cents"],
                reason=e.get("reason", "reward"),
                at=e["at"],
            )
        )

    def _apply_assignment_rejected(self, e: dict) -> None:
        a = self.assignments[e["assignment_id"]]
        a.state = AssignmentState.REJECTED
        self.workers[a.worker_id].rejected_count += 1

    def _apply_task_expired(self, e: dict) -> None:
        self.tasks[e["task_id"]].state = TaskState.EXPIRED

    # ------------------------------------------------------------ snapshot

    def to_snapshot(self) -> dict:
        return {
            "workers": {k: w.to_dict() for k, w in sorted(self.workers.items())},
            "batches": {k: b.to_dict() for k, b in sorted(self.batches.items())},
            "tasks": {k: t.to_dict() for k, t in sorted(self.tasks.items())},
            "assignments": {k: a.to_dict() for k, a in sorted(self.assignments.items())},
            "task_assignments": {k: list(v) for k, v in sorted(self.task_assignments.items())},
            "worker_history": {k: sorted(v) for k, v in sorted(self.worker_history.items())},
            "ballots": {
                item: [
                    {"worker_id": v.worker_id, "label": v.label.value, "at": v.submitted_at}
                    for v in b.votes
                ]
                for item, b in sorted(self.ballots.items())
            },
            "ballot_k": {item: b.k for item, b in sorted(self.ballots.items())},
            "consensus": {
                item: {
                    "label": r.label.value if r.label else None,
                    "agreement": r.agreement_level,
                    "pattern": list(r.pattern),
                }
                for item, r in sorted(self.consensus.items())
            },
            "ledger": [entry.to_dict() for entry in self.ledger],
            "task_order": list(self.task_order),
            "last_seq": self.last_seq,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "OrchestratorState":
        state = cls()
        for wid, w in snap["workers"].items():
            state.workers[wid] = WorkerProfile(**w)
        for bid, b in snap["batches"].items():
            state.batches[bid] = BatchRecord(
                batch_id=b["batch_id"],
                task_ids=list(b["task_ids"]),
                item_ids=list(b["item_ids"]),
                created_at=b["created_at"],
                truth=dict(b["truth"]),
                images=dict(b["images"]),
            )
        for tid, t in snap["tasks"].items():
            state.tasks[tid] = Task(
                task_id=t["task_id"],
                batch_id=t["batch_id"],
                items=tuple(t["items"]),
                k=t["k"],
                reward_cents=t["reward_cents"],
                created_at=t["created_at"],
                expires_at=t["expires_at"],
                state=TaskState(t["state"]),
            )
        for aid, a in snap["assignments"].items():
            state.assignments[aid] = Assignment(
                assignment_id=a["assignment_id"],
                task_id=a["task_id"],
                worker_id=a["worker_id"],
                claimed_at=a["claimed_at"],
                deadline=a["deadline"],
                state=AssignmentState(a["state"]),
                answers=dict(a["answers"]),
                submitted_at=a["submitted_at"],
            )
        state.task_assignments = {k: list(v) for k, v in snap["task_assignments"].items()}
        state.worker_history = {k: set(v) for k, v in snap["worker_history"].items()}
        for item, votes in snap["ballots"].items():
            ballot = Ballot(item, k=snap["ballot_k"][item])
            for v in votes:
                ballot.add(Vote(v["worker_id"], item, parse_label(v["label"]), v["at"]))
            state.ballots[item] = ballot
        for item, r in snap["consensus"].items():
            state.consensus[item] = ConsensusResult(
                item_id=item,
                label=parse_label(r["label"]) if r["label"] else None,
                agreement_level=r["agreement"],
                pattern=tuple(r["pattern"]),
            )
        state.ledger = [LedgerEntry(**entry) for entry in snap["ledger"]]
        state.task_order = list(snap["task_order"])
        state.last_seq = snap["last_seq"]
        return state
