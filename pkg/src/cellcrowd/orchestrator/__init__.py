"""Self-hosted microtask service: batches, qualification-gated claims,
paired-image assignments, quorum aggregation, timers, and reward accounting."""

from cellcrowd.orchestrator.model import (
    Assignment,
    AssignmentState,
    LedgerEntry,
    Task,
    TaskState,
    WorkerProfile,
)
from cellcrowd.orchestrator.service import Orchestrator
from cellcrowd.orchestrator.config import OrchestratorConfig

__all__ = [
    "Assignment",
    "AssignmentState",
    "LedgerEntry",
    "Orchestrator",
    "OrchestratorConfig",
    "Task",
    "TaskState",
    "WorkerProfile",
]
