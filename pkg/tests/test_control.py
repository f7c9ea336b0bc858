import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _instances import exhaustive_optimum, random_inputs
from fedhp.consensus import DistanceLedger, average_bound
from fedhp.control import (ControlInputs, assign_frequencies, closed_form_tau, evaluate_candidate,
                           floor_ratio_holds, greedy_search, tau_formula, uniform_plan)
from fedhp.graphtopo import Topology, is_connected
from fedhp.simnet import max_neighbor_beta


def make_inputs(mu, B, base, d_max=1e9, H=10, **kw):
    n = len(mu)
    params = dict(L_hat=1.0, sigma_hat=1.0, eta=0.1, f1=1.0)
    params.update(kw)
    return ControlInputs(mu=np.asarray(mu, float), B=np.asarray(B, float), ledger=DistanceLedger(n),
                         d_max=d_max, H_remaining=H, base_topology=base, **params)


def test_closed_form_tau_example():
    inputs = make_inputs([1, 1, 1, 1], np.ones((4, 4)) - np.eye(4), Topology.full(4), H=100)
    assert closed_form_tau(inputs) == 2


def test_zero_sigma_hits_cap():
    inputs = make_inputs([1, 1], [[0, 1], [1, 0]], Topology.full(2), sigma_hat=0.0)
    assert closed_form_tau(inputs) == 64


def test_tau_decreases_with_H():
    taus = [tau_formula(4, 1.0, 1.0, H, 0.01, 1.0) for H in (1, 10, 100, 1000)]
    assert all(b < a for a, b in zip(taus, taus[1:]))


def test_evaluate_candidate_example():
    inputs = make_inputs([1, 2], [[0, 1], [1, 0]], Topology.full(2), H=10)
    assert evaluate_candidate(Topology.full(2), inputs, tau=3) == (0, 3, 40.0)


def test_homogeneous_ring_ties_to_zero():
    inputs = make_inputs([0.5] * 5, np.ones((5, 5)), Topology.ring(5))
    assert evaluate_candidate(Topology.ring(5), inputs)[0] == 0


def test_evaluate_candidate_matches_argmin_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        inputs = random_inputs(rng, n=4)
        t = inputs.base_topology
        l, tau, T = evaluate_candidate(t, inputs)
        totals = [inputs.H_remaining * (tau * inputs.mu[i] + max(inputs.B[i, j] for j in t.neighbors(i)))
                  for i in range(4)]
        assert l == min(range(4), key=lambda i: (totals[i], i))
        assert T == pytest.approx(totals[l], rel=1e-14)


def test_tree_at_threshold_is_unchanged():
    base = Topology.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    inputs = make_inputs([0.1, 0.2, 0.3, 0.4], np.ones((4, 4)), base)
    inputs.ledger.D[:] = 1.0
    np.fill_diagonal(inputs.ledger.D, 0)
    inputs.d_max = average_bound(inputs.ledger, base)
    assert greedy_search(inputs).topology == base


def test_k3_slow_link_is_pruned():
    B = np.array([[0, 100, 1], [100, 0, 1], [1, 1, 0]], dtype=float)
    # worker 2 computes slowly, so an endpoint of the slow link paces the round
    inputs = make_inputs([0.1, 0.1, 30.0], B, Topology.full(3), d_max=10.0)
    inputs.ledger.D[:] = 0.5
    plan = greedy_search(inputs)
    assert not plan.topology.has_edge(0, 1)
    assert plan.pacing_worker == 0
    assert plan.predicted_total_time < evaluate_candidate(Topology.full(3), inputs)[2]
    best_T, _ = exhaustive_optimum(inputs)
    assert plan.predicted_total_time == pytest.approx(best_T, rel=1e-14)


def test_random_instance_invariants():
    rng = np.random.default_rng(42)
    for _ in range(200):
        inputs = random_inputs(rng)
        plan = greedy_search(inputs)
        base_T = evaluate_candidate(inputs.base_topology, inputs)[2]
        assert is_connected(plan.topology)
        assert average_bound(inputs.ledger, plan.topology) <= inputs.d_max + 1e-9
        assert plan.predicted_total_time <= base_T
        assert all(b < a for a, b in zip(plan.accepted_T, plan.accepted_T[1:]))
        assert all(plan.topology.adjacency[i, j] <= inputs.base_topology.adjacency[i, j]
                   for i in range(inputs.n) for j in range(inputs.n))
        if inputs.n <= 5:
            best_T, _ = exhaustive_optimum(inputs)
            assert best_T - 1e-12 <= plan.predicted_total_time


def test_assign_frequencies_example():
    B = np.array([[0, 2], [2, 0]], dtype=float)
    inputs = make_inputs([1, 2], B, Topology.full(2))
    tau, clamped, violations = assign_frequencies(Topology.full(2), 0, 10, inputs)
    assert tau.tolist() == [10, 5]
    assert not clamped.any() and violations == []
    assert math.floor(12 / (5 * 2 + 2)) == 1


def test_homogeneous_assignment():
    inputs = make_inputs([0.3] * 4, np.ones((4, 4)), Topology.ring(4))
    tau, _, _ = assign_frequencies(Topology.ring(4), 2, 7, inputs)
    assert tau.tolist() == [7, 7, 7, 7]


def test_very_slow_worker_clamped():
    inputs = make_inputs([0.01, 1000.0], [[0, 0.1], [0.1, 0]], Topology.full(2))
    tau, clamped, violations = assign_frequencies(Topology.full(2), 0, 5, inputs)
    assert tau[1] == 1 and clamped[1]
    assert violations == [1]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 100_000))
def test_unclamped_workers_within_factor_two(seed):
    inputs = random_inputs(np.random.default_rng(seed))
    plan = greedy_search(inputs)
    l = plan.pacing_worker
    t = plan.tau * inputs.mu + max_neighbor_beta(inputs.B, plan.topology)
    for i in range(inputs.n):
        ratio = t[l] / t[i]
        assert (i in plan.floor_violations) == (not floor_ratio_holds(t[l], t[i]))
        if plan.clamped[i]:
            continue
        assert ratio * (1 + 1e-9) >= 1
        if plan.tau[i] >= 2:
            assert ratio < 2 and i not in plan.floor_violations


def test_inputs_validation():
    with pytest.raises(ValueError):
        make_inputs([0.0, 1.0], [[0, 1], [1, 0]], Topology.full(2))
    with pytest.raises(ValueError):
        make_inputs([1.0, 1.0], [[0, 1], [2, 0]], Topology.full(2))
    with pytest.raises(ValueError):
        make_inputs([1.0, 1.0], [[0, np.inf], [np.inf, 0]], Topology.full(2))


def test_uniform_plan():
    plan = uniform_plan(Topology.ring(5), 3)
    assert plan.tau.tolist() == [3] * 5 and plan.pacing_worker == -1 and plan.u_max == 2
