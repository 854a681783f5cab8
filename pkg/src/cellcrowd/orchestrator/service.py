"""Command layer: validation, ID assignment, and the single-writer lock.

Commands validate against current state, then append one or more events and
apply them. Because every state change flows through an event, replaying the
log (or loading snapshot + tail) reproduces the exact same state, and the
lock makes claims linearizable: two concurrent claims can never oversubscribe
a task or hand one worker the same task twice.
"""

from __future__ import annotations

import random
import threading
import time
from pathlib import Path
from typing import Sequence

from cellcrowd.consensus import ConsensusResult, GroundTruthRecord, Vote
from cellcrowd.errors import (
    DeadlineExceeded,
    DomainError,
    EmptyBatch,
    InvalidLabel,
    NotQualified,
    UnknownAssignment,
    UnknownTask,
    UnknownWorker,
    WrongState,
)
from cellcrowd.labels import CellClass, parse_label
from cellcrowd.orchestrator.config import OrchestratorConfig
from cellcrowd.orchestrator.eventlog import EventLog, read_snapshot, write_snapshot
from cellcrowd.orchestrator.model import Assignment, AssignmentState, TaskState, WorkerProfile
from cellcrowd.orchestrator.state import OrchestratorState


class Orchestrator:
    """Single-node microtask service with an event-sourced state machine."""

    def __init__(self, config: OrchestratorConfig | None = None, clock=time.time):
        self.config = config or OrchestratorConfig()
        self.clock = clock
        self._lock = threading.RLock()
        data_dir = Path(self.config.data_dir) if self.config.data_dir else None
        self._snapshot_path = data_dir / "snapshot.json" if data_dir else None
        log_path = data_dir / "events.jsonl" if data_dir else None

        snapshot = read_snapshot(self._snapshot_path) if self._snapshot_path else None
        self.log = EventLog(log_path)
        if snapshot is not None:
            self.state = OrchestratorState.from_snapshot(snapshot)
            for event in self.log.since(self.state.last_seq):
                self.state.apply(event)
        else:
            self.state = OrchestratorState()
            for event in self.log:
                self.state.apply(event)
        self._seq = self.state.last_seq

    # ----------------------------------------------------------- internals

    def _now(self, now: float | None) -> float:
        # logical time never runs backwards: late-arriving commands with a
        # stale clock are pinned to the newest time seen so far
        value = self.clock() if now is None else float(now)
        return max(value, self.state.last_at)

    def _emit(self, event_type: str, at: float, **payload) -> dict:
        self._seq += 1
        event = {"seq": self._seq, "type": event_type, "at": at, **payload}
        self.log.append(event)
        self.state.apply(event)
        if (
            self._snapshot_path is not None
            and self.config.snapshot_interval > 0
            and self._seq % self.config.snapshot_interval == 0
        ):
            write_snapshot(self._snapshot_path, self.state.to_snapshot())
        return event

    # ------------------------------------------------------------ commands

    def register_worker(
        self,
        worker_id: str,
        is_master: bool = False,
        approval_rate: float | None = None,
        approved_count: int | None = None,
        submitted_count: int | None = None,
        now: float | None = None,
    ) -> WorkerProfile:
        """Register a worker with their external reputation.

        History can be given as explicit counts or as a bare rate (converted
        to counts out of 1000). No history means a clean 1.0 rate.
        """
        with self._lock:
            if worker_id in self.state.workers:
                raise WrongState(f"worker {worker_id} already registered")
            if approved_count is not None or submitted_count is not None:
                seed_approved = int(approved_count or 0)
                seed_decided = int(submitted_count or 0)
            elif approval_rate is not None:
                if not 0.0 <= approval_rate <= 1.0:
                    raise DomainError(f"approval_rate {approval_rate} outside [0, 1]")
                seed_approved = round(approval_rate * 1000)
                seed_decided = 1000
            else:
                seed_approved = seed_decided = 0
            if seed_approved > seed_decided:
                raise DomainError("approved count exceeds submitted count")
            self._emit(
                "worker_registered",
                self._now(now),
                worker_id=worker_id,
                is_master=is_master,
                seed_approved=seed_approved,
                seed_decided=seed_decided,
            )
            return self.state.workers[worker_id]

    def create_batch(
        self,
        items: Sequence[str | GroundTruthRecord],
        k: int | None = None,
        reward_cents: int | None = None,
        pairing: str = "sequential",
        seed: int = 0,
        batch_id: str | None = None,
        expiry_seconds: float | None = None,
        images: dict[str, str] | None = None,
        now: float | None = None,
    ) -> dict:
        """Create tasks over the items, two per task (odd leftover rides alone).

        Items may carry ground truth (for benchmarking runs); each item lands
        in exactly one task. Pairing is manifest order, or a seeded shuffle.
        """
        with self._lock:
            if not items:
                raise EmptyBatch("cannot create a batch with no items")
            at = self._now(now)
            k = self.config.k if k is None else int(k)
            reward = self.config.reward_cents if reward_cents is None else int(reward_cents)
            if k < 1 or reward < 0:
                raise DomainError(f"bad batch parameters k={k} reward={reward}")
            ttl = self.config.task_ttl_seconds if expiry_seconds is None else float(expiry_seconds)

            item_ids: list[str] = []
            truth: dict[str, str] = {}
            for entry in items:
                if isinstance(entry, GroundTruthRecord):
                    item_ids.append(entry.item_id)
                    truth[entry.item_id] = entry.true_label.value
                else:
                    item_ids.append(str(entry))
            if len(set(item_ids)) != len(item_ids):
                raise DomainError("duplicate item ids in batch")
            for item in item_ids:
                if item in self.state.ballots:
                    raise DomainError(f"item {item} already belongs to a batch")

            if batch_id is None:
                batch_id = f"b{len(self.state.batches):04d}"
            elif batch_id in self.state.batches:
                raise WrongState(f"batch {batch_id} already exists")

            ordered = list(item_ids)
            if pairing == "shuffle":
                random.Random(seed).shuffle(ordered)
            elif pairing != "sequential":
                raise DomainError(f"unknown pairing policy {pairing!r}")
            tasks = [
                {"task_id": f"{batch_id}-t{i // 2:05d}", "items": ordered[i : i + 2]}
                for i in range(0, len(ordered), 2)
            ]
            self._emit(
                "batch_created",
                at,
                batch_id=batch_id,
                k=k,
                reward_cents=reward,
                expires_at=at + ttl,
                item_ids=item_ids,
                truth=truth,
                images=images or {},
                tasks=tasks,
            )
            batch = self.state.batches[batch_id]
            return {
                "batch_id": batch_id,
                "task_ids": list(batch.task_ids),
                "n_items": len(item_ids),
                "k": k,
                "reward_cents": reward,
            }

    def claim_next(self, worker_id: str, now: float | None = None) -> Assignment | None:
        """Hand the worker an assignment on the oldest open task they qualify
        for, or None when nothing is available. Atomic under the writer lock."""
        with self._lock:
            worker = self.state.workers.get(worker_id)
            if worker is None:
                raise UnknownWorker(worker_id)
            if self.config.require_master and not worker.is_master:
                raise NotQualified("masters qualification required")
            if not worker.approval_rate > self.config.min_approval_rate:
                raise NotQualified(
                    f"approval rate {worker.approval_rate:.2f} not above "
                    f"{self.config.min_approval_rate:.2f}"
                )
            at = self._now(now)
            for task_id in self.state.task_order:
                task = self.state.tasks[task_id]
                if task.state is not TaskState.OPEN or at >= task.expires_at:
                    continue
                if task_id in self.state.worker_history.get(worker_id, ()):
                    continue
                if self.state.occupied_slots(task_id, at) >= task.k:
                    continue
                assignment_id = f"a{len(self.state.assignments):06d}"
                self._emit(
                    "assignment_claimed",
                    at,
                    assignment_id=assignment_id,
                    task_id=task_id,
                    worker_id=worker_id,
                    deadline=at + self.config.claim_ttl_seconds,
                )
                return self.state.assignments[assignment_id]
            return None

    def submit_answers(
        self,
        assignment_id: str,
        answers: dict[str, str | CellClass],
        now: float | None = None,
    ) -> dict:
        """Record a worker's labels for their assignment's item pair.

        Submitting the same answers twice returns the original receipt, which
        makes client retries safe. A late submission expires the assignment
        and frees its slot.
        """
        with self._lock:
            assignment = self.state.assignments.get(assignment_id)
            if assignment is None:
                raise UnknownAssignment(assignment_id)
            normalized = {
                item: (label.value if isinstance(label, CellClass) else parse_label(str(label)).value)
                for item, label in answers.items()
            }
            if assignment.state is AssignmentState.SUBMITTED:
                if assignment.answers == normalized:
                    return self._receipt(assignment, idempotent=True)
                raise WrongState("assignment already submitted with different answers")
            if assignment.state is not AssignmentState.CLAIMED:
                raise WrongState(f"assignment is {assignment.state.value}, not claimed")
            at = self._now(now)
            if at > assignment.deadline:
                self._emit("assignment_expired", at, assignment_id=assignment_id, reason="deadline")
                raise DeadlineExceeded(
                    f"deadline was {assignment.deadline}, submission at {at}"
                )
            task = self.state.tasks[assignment.task_id]
            if set(normalized) != set(task.items):
                raise InvalidLabel(
                    f"answers must cover exactly the items {list(task.items)}"
                )
            self._emit(
                "assignment_submitted", at, assignment_id=assignment_id, answers=normalized
            )
            return self._receipt(assignment, idempotent=False)

    def _receipt(self, assignment: Assignment, idempotent: bool) -> dict:
        task = self.state.tasks[assignment.task_id]
        return {
            "assignment_id": assignment.assignment_id,
            "task_id": assignment.task_id,
            "worker_id": assignment.worker_id,
            "submitted_at": assignment.submitted_at,
            "task_complete": task.state is TaskState.COMPLETE,
            "idempotent": idempotent,
        }

    def sweep_timers(self, now: float | None = None) -> dict:
        """Run all timer transitions. Idempotent for a fixed ``now``:
        overdue claims expire, week-old submissions auto-approve with pay,
        and open tasks past their expiration close."""
        with self._lock:
            at = self._now(now)
            expired_assignments: list[str] = []
            approved: list[str] = []
            expired_tasks: list[str] = []
            for aid in sorted(self.state.assignments):
                a = self.state.assignments[aid]
                if a.state is AssignmentState.CLAIMED and a.deadline < at:
                    self._emit("assignment_expired", at, assignment_id=aid, reason="timeout")
                    expired_assignments.append(aid)
                elif (
                    a.state is AssignmentState.SUBMITTED
                    and a.submitted_at is not None
                    and at - a.submitted_at > self.config.auto_approve_seconds
                ):
                    task = self.state.tasks[a.task_id]
                    self._emit(
                        "assignment_approved",
                        at,
                        assignment_id=aid,
                        amount_cents=task.reward_cents,
                        reason="reward",
                    )
                    approved.append(aid)
            for task_id in self.state.task_order:
                task = self.state.tasks[task_id]
                if task.state is TaskState.OPEN and at >= task.expires_at:
                    self._emit("task_expired", at, task_id=task_id)
                    expired_tasks.append(task_id)
            return {
                "expired_assignments": expired_assignments,
                "auto_approved": approved,
                "expired_tasks": expired_tasks,
            }

    def approve(self, assignment_id: str, now: float | None = None) -> None:
        """Manual approval ahead of the auto-approval window."""
        with self._lock:
            a = self.state.assignments.get(assignment_id)
            if a is None:
                raise UnknownAssignment(assignment_id)
            if a.state is not AssignmentState.SUBMITTED:
                raise WrongState(f"cannot approve a {a.state.value} assignment")
            task = self.state.tasks[a.task_id]
            self._emit(
                "assignment_approved",
                self._now(now),
                assignment_id=assignment_id,
                amount_cents=task.reward_cents,
                reason="reward",
            )

    def reject(self, assignment_id: str, now: float | None = None) -> None:
        with self._lock:
            a = self.state.assignments.get(assignment_id)
            if a is None:
                raise UnknownAssignment(assignment_id)
            if a.state is not AssignmentState.SUBMITTED:
                raise WrongState(f"cannot reject a {a.state.value} assignment")
            self._emit("assignment_rejected", self._now(now), assignment_id=assignment_id)

    # ------------------------------------------------------------- queries

    def task_status(self, task_id: str) -> dict:
        with self._lock:
            task = self.state.tasks.get(task_id)
            if task is None:
                raise UnknownTask(task_id)
            consensus: dict[str, dict | None] = {}
            for item in task.items:
                result = self.state.consensus.get(item)
                if result is not None:
                    consensus[item] = {
                        "outcome": "label" if result.is_consensus else "no_consensus",
                        "label": result.label.value if result.label else None,
                        "agreement": result.agreement_level,
                        "pattern": list(result.pattern),
                    }
                elif task.state is TaskState.EXPIRED:
                    consensus[item] = {
                        "outcome": "no_consensus",
                        "reason": "expired-incomplete",
                        "votes": len(self.state.ballots[item].votes),
                    }
                else:
                    consensus[item] = None
            return {
                "task_id": task.task_id,
                "batch_id": task.batch_id,
                "state": task.state.value,
                "items": list(task.items),
                "k": task.k,
                "votes": self.state.task_votes(task),
                "assignments": [
                    {
                        "assignment_id": aid,
                        "worker_id": self.state.assignments[aid].worker_id,
                        "state": self.state.assignments[aid].state.value,
                    }
                    for aid in self.state.task_assignments[task_id]
                ],
                "consensus": consensus,
            }

    def batch_status(self, batch_id: str) -> dict:
        with self._lock:
            batch = self.state.batches.get(batch_id)
            if batch is None:
                raise UnknownTask(batch_id)
            tasks = [self.task_status(tid) for tid in batch.task_ids]
            return {
                "batch_id": batch_id,
                "n_tasks": len(tasks),
                "complete": sum(t["state"] == "complete" for t in tasks),
                "tasks": tasks,
            }

    def export_votes(self, batch_id: str) -> list[Vote]:
        """All recorded votes for a batch, in task/item/submission order."""
        with self._lock:
            batch = self.state.batches.get(batch_id)
            if batch is None:
                raise UnknownTask(batch_id)
            votes: list[Vote] = []
            for task_id in batch.task_ids:
                for item in self.state.tasks[task_id].items:
                    votes.extend(self.state.ballots[item].votes)
            return votes

    def batch_truth(self, batch_id: str) -> list[GroundTruthRecord]:
        with self._lock:
            batch = self.state.batches.get(batch_id)
            if batch is None:
                raise UnknownTask(batch_id)
            return [
                GroundTruthRecord(item, parse_label(label), batch_id)
                for item, label in batch.truth.items()
            ]

    def consensus_for(self, item_id: str) -> ConsensusResult | None:
        with self._lock:
            return self.state.consensus.get(item_id)

    def worker_snapshot(self, worker_id: str) -> dict:
        with self._lock:
            worker = self.state.workers.get(worker_id)
            if worker is None:
                raise UnknownWorker(worker_id)
            task = self.state.tasks
            pending_cents = sum(
                task[a.task_id].reward_cents
                for a in self.state.assignments.values()
                if a.worker_id == worker_id and a.state is AssignmentState.SUBMITTED
            )
            return {
                "worker_id": worker.worker_id,
                "is_master": worker.is_master,
                "approval_rate": worker.approval_rate,
                "submitted_count": worker.submitted_count,
                "approved_count": worker.approved_count,
                "balance_cents": worker.balance_cents,
                "pending_cents": pending_cents,
            }

    def save_snapshot(self) -> None:
        if self._snapshot_path is not None:
            with self._lock:
                write_snapshot(self._snapshot_path, self.state.to_snapshot())

    def close(self) -> None:
        self.save_snapshot()
        self.log.close()

    def replay_check(self) -> bool:
        """Replay the full event log into a fresh state; True when identical."""
        with self._lock:
            fresh = OrchestratorState()
            for event in self.log:
                fresh.apply(event)
            return fresh.to_snapshot() == self.state.to_snapshot()
