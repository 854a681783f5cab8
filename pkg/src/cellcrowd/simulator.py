"""Synthetic annotators with tunable error correlation.

Workers are Bernoulli classifiers with per-class accuracy alpha. Correlation
between workers on the same item comes from a shared clarity draw: with
probability ``rho`` a worker defers to the item (clear-cut items everyone
gets right, confusing ones everyone gets wrong), otherwise they judge
independently. Clear-cut items occur with probability alpha, so the marginal
per-vote accuracy stays exactly alpha for every rho; only the joint behavior
(and hence consensus accuracy) changes. rho=0 recovers fully independent
workers and the binomial-tail estimate.

All randomness is derived by hashing (seed, stream, worker, item) tuples, so
outcomes never depend on generation order or scheduling.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from cellcrowd.consensus import (
    DEFAULT_K,
    GroundTruthRecord,
    Vote,
    estimate_consensus_accuracy,
)
from cellcrowd.errors import DomainError, InsufficientWorkers, TargetUnreachable
from cellcrowd.labels import CLASS_ORDER, CellClass

#: Error-class distribution observed in the study's per-vote counts: when a
#: worker misreads a class, which wrong class do they pick.
DEFAULT_CONFUSION: dict[CellClass, dict[CellClass, float]] = {
    CellClass.CIRCULAR: {CellClass.ELONGATED: 58 / 409, CellClass.OTHER: 351 / 409},
    CellClass.ELONGATED: {CellClass.CIRCULAR: 48 / 291, CellClass.OTHER: 243 / 291},
    CellClass.OTHER: {CellClass.CIRCULAR: 69 / 97, CellClass.ELONGATED: 28 / 97},
}

#: Per-class accuracies observed in the study's per-vote counts.
DEFAULT_ACCURACY: dict[CellClass, float] = {
    CellClass.CIRCULAR: 2676 / 3085,
    CellClass.ELONGATED: 614 / 905,
    CellClass.OTHER: 153 / 250,
}

_U64 = np.uint64
_INV_2_64 = float(2.0**-64)


def stable_hash64(text: str) -> int:
    """Stable 64-bit hash of a string (process-salt free)."""
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 wraparound is intentional
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
        return z ^ (z >> _U64(31))


def keyed_u01(seed: int, stream: str, *keys) -> np.ndarray | float:
    """Uniform [0, 1) draws keyed by (seed, stream, *keys).

    Integer or uint64-array keys broadcast together; the result is scalar
    when every key is scalar. The same key tuple always yields the same
    value, independent of call order.
    """
    with np.errstate(over="ignore"):
        acc = _mix(np.asarray(_U64(seed % 2**64) + _U64(stable_hash64(stream))))
        for key in keys:
            arr = np.asarray(key, dtype=_U64)
            acc = _mix(acc ^ (arr + _U64(0x9E3779B97F4A7C15)))
    out = acc.astype(np.float64) * _INV_2_64
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WorkerModel:
    """Stochastic annotator: per-class accuracy plus error-class distribution."""

    worker_id: str
    accuracy: Mapping[CellClass, float] = field(
        default_factory=lambda: dict(DEFAULT_ACCURACY)
    )
    confusion: Mapping[CellClass, Mapping[CellClass, float]] = field(
        default_factory=lambda: {c: dict(r) for c, r in DEFAULT_CONFUSION.items()}
    )
    seed: int = 0

    def __post_init__(self) -> None:
        for cls in CLASS_ORDER:
            alpha = self.accuracy[cls]
            if not 0.0 <= alpha <= 1.0:
                raise DomainError(f"accuracy[{cls}] = {alpha} outside [0, 1]")
            row = self.confusion[cls]
            total = sum(row.get(c, 0.0) for c in CLASS_ORDER if c is not cls)
            if abs(total - 1.0) > 1e-9:
                raise DomainError(f"confusion row for {cls} sums to {total}, not 1")

    @property
    def key(self) -> int:
        return stable_hash64(self.worker_id) ^ self.seed


def uniform_workers(count: int, accuracy: Mapping[CellClass, float] | None = None) -> list[WorkerModel]:
    acc = dict(DEFAULT_ACCURACY if accuracy is None else accuracy)
    return [WorkerModel(f"sim-w{i:03d}", accuracy=acc) for i in range(count)]


@dataclass(frozen=True)
class DifficultyModel:
    """Shared per-item clarity with mixing weight rho.

    ``difficulty`` in [0, 1] is drawn per item (or supplied explicitly); an
    item is clear-cut for true class c when difficulty <= alpha_c. rho is the
    probability a worker's outcome is decided by the item rather than by an
    independent judgment; rho=0 is full independence.
    """

    rho: float | Mapping[CellClass, float] = 0.0
    seed: int = 0
    difficulties: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        for value in self._rho_values():
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"rho = {value} outside [0, 1]")

    def _rho_values(self) -> Iterable[float]:
        if isinstance(self.rho, Mapping):
            return self.rho.values()
        return (self.rho,)

    def rho_for(self, cls: CellClass) -> float:
        if isinstance(self.rho, Mapping):
            return float(self.rho.get(cls, 0.0))
        return float(self.rho)

    def difficulty(self, item_id: str) -> float:
        if self.difficulties is not None and item_id in self.difficulties:
            return float(self.difficulties[item_id])
        return float(keyed_u01(self.seed, "difficulty", stable_hash64(item_id)))


INDEPENDENT = DifficultyModel(rho=0.0)


def simulate_vote(
    model: WorkerModel,
    item: GroundTruthRecord,
    difficulty: DifficultyModel = INDEPENDENT,
    seed: int = 0,
) -> CellClass:
    """One deterministic vote, keyed by (seed, worker, item)."""
    true = item.true_label
    alpha = float(model.accuracy[true])
    item_key = stable_hash64(item.item_id)
    rho = difficulty.rho_for(true)
    use_shared = keyed_u01(seed, "branch", model.key, item_key) < rho
    if use_shared:
        correct = difficulty.difficulty(item.item_id) <= alpha
    else:
        correct = keyed_u01(seed, "judge", model.key, item_key) < alpha
    if correct:
        return true
    wrong = [c for c in CLASS_ORDER if c is not true]
    row = model.confusion[true]
    u = keyed_u01(seed, "errclass", model.key, item_key)
    return wrong[0] if u < row.get(wrong[0], 0.0) else wrong[1]


def _select_workers(
    workers: Sequence[WorkerModel], item_key: int, k: int, seed: int
) -> list[WorkerModel]:
    if len(workers) == k:
        return list(workers)
    scores = keyed_u01(seed, "assign", np.array([w.key for w in workers], dtype=_U64), _U64(item_key % 2**64))
    order = np.argsort(scores, kind="stable")
    return [workers[i] for i in order[:k]]


def run_experiment(
    workers: Sequence[WorkerModel],
    items: Sequence[GroundTruthRecord],
    k: int = DEFAULT_K,
    difficulty: DifficultyModel = INDEPENDENT,
    seed: int = 0,
    base_time: float = 0.0,
) -> list[Vote]:
    """Simulate a full redundant-annotation run: k distinct workers per item.

    Deterministic given (seed, worker ids, item ids); identical inputs
    produce a byte-identical vote stream.
    """
    if len(workers) < k:
        raise InsufficientWorkers(f"need >= {k} workers, got {len(workers)}")
    votes: list[Vote] = []
    for item in items:
        item_key = stable_hash64(item.item_id)
        chosen = _select_workers(workers, item_key, k, seed)
        for slot, model in enumerate(chosen):
            label = simulate_vote(model, item, difficulty, seed)
            votes.append(
                Vote(model.worker_id, item.item_id, label, base_time + len(votes) * 1.0)
            )
    return votes


def simulate_consensus_accuracy(
    alpha: float,
    rho: float,
    n_items: int,
    k: int = DEFAULT_K,
    quorum: int | None = None,
    seed: int = 0,
) -> float:
    """Monte-Carlo single-class consensus accuracy, fully vectorized.

    Uses the same keyed-draw scheme as simulate_vote over synthetic item and
    worker keys, so results are reproducible and order-independent.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha = {alpha} outside [0, 1]")
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"rho = {rho} outside [0, 1]")
    if quorum is None:
        quorum = k // 2 + 1
    item_keys = np.arange(n_items, dtype=_U64)
    worker_keys = np.arange(k, dtype=_U64)
    d = keyed_u01(seed, "difficulty", item_keys)
    clear = (d <= alpha)[:, None]
    branch = keyed_u01(seed, "branch", worker_keys[None, :], item_keys[:, None]) < rho
    judge = keyed_u01(seed, "judge", worker_keys[None, :], item_keys[:, None]) < alpha
    correct = np.where(branch, clear, judge)
    return float((correct.sum(axis=1) >= quorum).mean())


def consensus_accuracy_closed_form(
    alpha: float, rho: float, k: int = DEFAULT_K, quorum: int = 3
) -> float:
    """Exact consensus accuracy of the shared-clarity model.

    Conditioned on the item being clear-cut (probability alpha) each worker
    is correct with probability (1-rho)*alpha + rho, otherwise with
    probability (1-rho)*alpha; both cases reduce to binomial tails.
    """
    p_easy = (1.0 - rho) * alpha + rho
    p_hard = (1.0 - rho) * alpha
    return alpha * estimate_consensus_accuracy(p_easy, k, quorum) + (
        1.0 - alpha
    ) * estimate_consensus_accuracy(p_hard, k, quorum)


@dataclass(frozen=True)
class CalibrationResult:
    rho: float
    achieved: float
    half_width: float  # approximate 95% half-interval on rho
    evaluations: int


def calibrate_rho(
    target: float,
    alpha: float,
    tolerance: float = 2e-3,
    n_items: int = 100_000,
    k: int = DEFAULT_K,
    seed: int = 0,
    max_bisections: int = 40,
) -> CalibrationResult:
    """Find rho whose Monte-Carlo consensus accuracy hits the target.

    Consensus accuracy decreases monotonically from the independent estimate
    at rho=0 down to alpha at rho=1 (for alpha above one half), so plain
    bisection on a common-random-numbers estimator converges. Targets
    outside that reachable band raise TargetUnreachable.
    """
    ceiling = estimate_consensus_accuracy(alpha, k)
    floor = alpha
    se = float(np.sqrt(max(target * (1 - target), 1e-6) / n_items))
    if target > ceiling + 3 * se:
        raise TargetUnreachable(
            f"target {target:.4f} above the independent-worker bound {ceiling:.4f}"
        )
    if target < floor - 3 * se:
        raise TargetUnreachable(
            f"target {target:.4f} below the fully-correlated bound {floor:.4f}"
        )

    def measure(rho: float) -> float:
        return simulate_consensus_accuracy(alpha, rho, n_items, k, seed=seed)

    lo, hi = 0.0, 1.0
    acc_lo, acc_hi = measure(lo), measure(hi)
    evaluations = 2
    mid, acc_mid = 0.5, measure(0.5)
    for _ in range(max_bisections):
        mid = (lo + hi) / 2.0
        acc_mid = measure(mid)
        evaluations += 1
        if abs(acc_mid - target) <= tolerance or (hi - lo) < 1e-4:
            break
        if acc_mid > target:
            lo, acc_lo = mid, acc_mid
        else:
            hi, acc_hi = mid, acc_mid
    slope = abs(acc_hi - acc_lo) / max(hi - lo, 1e-9)
    half_width = 1.96 * se / max(slope, 1e-9)
    return CalibrationResult(rho=mid, achieved=acc_mid, half_width=half_width, evaluations=evaluations)


def calibrate_correlation(
    targets: Mapping[CellClass, float],
    alphas: Mapping[CellClass, float],
    tolerance: float = 2e-3,
    n_items: int = 100_000,
    k: int = DEFAULT_K,
    seed: int = 0,
) -> dict[CellClass, CalibrationResult]:
    """Per-class rho calibration against observed consensus accuracies."""
    return {
        cls: calibrate_rho(targets[cls], alphas[cls], tolerance, n_items, k, seed=seed)
        for cls in targets
    }
