"""Simulated annotators: marginals, correlation behavior, calibration."""

import numpy as np
import pytest

from cellcrowd.consensus import GroundTruthRecord, aggregate, estimate_consensus_accuracy, group_ballots
from cellcrowd.errors import DomainError, InsufficientWorkers, TargetUnreachable
from cellcrowd.labels import CellClass
from cellcrowd.simulator import (
    DEFAULT_ACCURACY,
    DifficultyModel,
    WorkerModel,
    calibrate_correlation,
    calibrate_rho,
    consensus_accuracy_closed_form,
    keyed_u01,
    run_experiment,
    simulate_consensus_accuracy,
    simulate_vote,
    uniform_workers,
)

C, E, O = CellClass.CIRCULAR, CellClass.ELONGATED, CellClass.OTHER
ALPHA_C = 2676 / 3085


def items_of(n, cls=C):
    return [GroundTruthRecord(f"it{i:06d}", cls, "sim") for i in range(n)]


# ----------------------------------------------------------------- keyed rng

def test_keyed_u01_deterministic_and_order_free():
    a = keyed_u01(7, "s", 1, 2)
    assert a == keyed_u01(7, "s", 1, 2)
    assert a != keyed_u01(7, "s", 2, 1)
    assert a != keyed_u01(8, "s", 1, 2)
    arr = keyed_u01(7, "s", np.arange(4, dtype=np.uint64), 2)
    assert arr[1] == pytest.approx(a)


def test_keyed_u01_roughly_uniform():
    u = keyed_u01(3, "u", np.arange(20000, dtype=np.uint64))
    assert abs(u.mean() - 0.5) < 0.01
    assert u.min() >= 0.0 and u.max() < 1.0


# -------------------------------------------------------------- single votes

def test_perfect_worker_always_correct():
    model = WorkerModel("w", accuracy={C: 1.0, E: 1.0, O: 1.0})
    for item in items_of(50, E):
        assert simulate_vote(model, item, DifficultyModel(rho=0.7)) is E


def test_hopeless_worker_never_correct():
    model = WorkerModel("w", accuracy={C: 0.0, E: 0.0, O: 0.0})
    for item in items_of(50, C):
        assert simulate_vote(model, item) is not C


def test_vote_is_deterministic_given_seed():
    model = WorkerModel("w")
    item = GroundTruthRecord("item-1", O, "s")
    first = simulate_vote(model, item, seed=5)
    assert all(simulate_vote(model, item, seed=5) is first for _ in range(10))


def test_error_classes_follow_confusion_row():
    model = WorkerModel("w", accuracy={C: 0.0, E: 0.0, O: 0.0})
    votes = [simulate_vote(model, item) for item in items_of(4000, C)]
    share_other = sum(v is O for v in votes) / len(votes)
    assert share_other == pytest.approx(351 / 409, abs=0.03)


def test_invalid_model_rejected():
    with pytest.raises(DomainError):
        WorkerModel("w", accuracy={C: 1.2, E: 0.5, O: 0.5})
    with pytest.raises(DomainError):
        WorkerModel("w", confusion={C: {E: 0.9, O: 0.9}, E: {C: 0.5, O: 0.5}, O: {C: 0.5, E: 0.5}})
    with pytest.raises(DomainError):
        DifficultyModel(rho=1.5)


# ------------------------------------------------------------ run_experiment

def test_experiment_shape_and_distinct_workers():
    votes = run_experiment(uniform_workers(5), items_of(848), k=5, seed=1)
    assert len(votes) == 4240
    by_item: dict[str, set[str]] = {}
    for v in votes:
        by_item.setdefault(v.item_id, set()).add(v.worker_id)
    assert all(len(ws) == 5 for ws in by_item.values())


def test_experiment_reproducible():
    workers = uniform_workers(9)
    items = items_of(100)
    a = run_experiment(workers, items, seed=3)
    b = run_experiment(workers, items, seed=3)
    assert a == b
    c = run_experiment(workers, items, seed=4)
    assert a != c


def test_experiment_requires_k_workers():
    with pytest.raises(InsufficientWorkers):
        run_experiment(uniform_workers(3), items_of(10), k=5)


def test_marginal_accuracy_invariant_in_rho():
    # correlation must change joint behavior only, never the per-vote marginal
    n = 20000
    items = items_of(n, C)
    workers = uniform_workers(5)
    for rho in (0.0, 0.5, 0.9):
        votes = run_experiment(workers, items, difficulty=DifficultyModel(rho=rho), seed=17)
        acc = sum(v.label is C for v in votes) / len(votes)
        se = (ALPHA_C * (1 - ALPHA_C) / len(votes)) ** 0.5
        assert abs(acc - ALPHA_C) <= 3 * se


# --------------------------------------------------- consensus accuracy (MC)

def test_independent_mc_matches_binomial_tail():
    mc = simulate_consensus_accuracy(ALPHA_C, 0.0, 100_000, seed=42)
    expected = estimate_consensus_accuracy(ALPHA_C)
    se = (expected * (1 - expected) / 100_000) ** 0.5
    assert abs(mc - expected) <= 3 * se


def test_mc_matches_closed_form_across_rho():
    for rho in (0.1, 0.3, 0.5, 0.8):
        cf = consensus_accuracy_closed_form(ALPHA_C, rho)
        mc = simulate_consensus_accuracy(ALPHA_C, rho, 100_000, seed=3)
        se = (cf * (1 - cf) / 100_000) ** 0.5
        assert abs(mc - cf) <= 4 * se


def test_consensus_accuracy_nonincreasing_in_rho():
    grid = [simulate_consensus_accuracy(ALPHA_C, r / 10, 50_000, seed=7) for r in range(11)]
    noise = 3 * (0.25 / 50_000) ** 0.5
    assert all(b <= a + noise for a, b in zip(grid, grid[1:]))
    assert grid[0] == pytest.approx(estimate_consensus_accuracy(ALPHA_C), abs=0.005)
    assert grid[-1] == pytest.approx(ALPHA_C, abs=0.005)


def test_experiment_consensus_agrees_with_mc():
    # object-level pipeline and the vectorized estimator tell the same story
    items = items_of(20000, C)
    votes = run_experiment(uniform_workers(5), items, difficulty=DifficultyModel(rho=0.5), seed=23)
    ballots = group_ballots(votes)
    correct = sum(aggregate(b).label is C for b in ballots.values())
    observed = correct / len(items)
    expected = consensus_accuracy_closed_form(ALPHA_C, 0.5)
    se = (expected * (1 - expected) / len(items)) ** 0.5
    assert abs(observed - expected) <= 4 * se


# ---------------------------------------------------------------- calibration

def test_calibrate_recovers_independence_for_tail_target():
    target = estimate_consensus_accuracy(ALPHA_C)
    result = calibrate_rho(target, ALPHA_C, n_items=50_000, seed=2)
    assert result.rho < 0.12


def test_calibrate_hits_observed_consensus_accuracy():
    result = calibrate_rho(0.9173, ALPHA_C, n_items=100_000, seed=11)
    assert result.rho > 0.1
    fresh = simulate_consensus_accuracy(ALPHA_C, result.rho, 100_000, seed=999)
    assert fresh == pytest.approx(0.9173, abs=0.02)
    assert result.half_width > 0.0


def test_calibrate_unreachable_targets():
    with pytest.raises(TargetUnreachable):
        calibrate_rho(0.999, ALPHA_C, n_items=20_000)
    with pytest.raises(TargetUnreachable):
        calibrate_rho(0.5, ALPHA_C, n_items=20_000)


def test_calibrate_all_three_classes():
    targets = {C: 0.9173, E: 0.7072, O: 0.6400}
    results = calibrate_correlation(targets, DEFAULT_ACCURACY, n_items=50_000, seed=5)
    for cls, result in results.items():
        assert 0.0 < result.rho < 1.0
        cf = consensus_accuracy_closed_form(DEFAULT_ACCURACY[cls], result.rho)
        assert cf == pytest.approx(targets[cls], abs=0.02)
