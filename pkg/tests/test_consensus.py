import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedhp.consensus import (DisconnectedObservationsError, DistanceLedger, ThresholdState, average_bound,
                             update_threshold, worker_bound)
from fedhp.graphtopo import Topology


def test_record_and_overwrite():
    ledger = DistanceLedger(3)
    ledger.record_observed(1, 2, 0.0)
    assert ledger.D[1, 2] == 0.0
    ledger.record_observed(1, 2, 4.0)
    ledger.record_observed(2, 1, 5.0)
    assert ledger.D[1, 2] == ledger.D[2, 1] == 5.0


@pytest.mark.parametrize("args", [(1, 1, 1.0), (0, 1, -1.0), (0, 1, float("nan")), (0, 1, float("inf"))])
def test_record_rejects_bad_input(args):
    with pytest.raises(ValueError):
        DistanceLedger(3).record_observed(*args)


def test_two_hop_estimate():
    ledger = DistanceLedger(4, beta1=1.0)
    ledger.record_observed(1, 2, 1.0)
    ledger.record_observed(2, 3, 2.0)
    ledger.record_observed(0, 1, 1.0)
    ledger.estimate_unobserved()
    assert ledger.D[1, 3] == 3.0


def test_observed_pairs_are_not_shortcut():
    ledger = DistanceLedger(3, beta1=1.0)
    for i, j, d in [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 10.0)]:
        ledger.record_observed(i, j, d)
    ledger.estimate_unobserved()
    assert ledger.D[0, 2] == 10.0


def test_path_graph_ema():
    ledger = DistanceLedger(5, beta1=0.5)
    ledger.D[0, 4] = ledger.D[4, 0] = 2.0
    ledger.has_history[0, 4] = ledger.has_history[4, 0] = True
    for i in range(4):
        ledger.record_observed(i, i + 1, 1.0)
    ledger.estimate_unobserved()
    assert ledger.D[0, 4] == 3.0


def test_first_encounter_takes_estimate_whole():
    ledger = DistanceLedger(3, beta1=0.3)
    ledger.record_observed(0, 1, 1.0)
    ledger.record_observed(1, 2, 1.0)
    ledger.estimate_unobserved()
    assert ledger.D[0, 2] == 2.0


def test_disconnected_observations_raise():
    ledger = DistanceLedger(4)
    ledger.record_observed(0, 1, 1.0)
    ledger.record_observed(2, 3, 1.0)
    with pytest.raises(DisconnectedObservationsError):
        ledger.estimate_unobserved()


def random_points(seed, n):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, 3))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 8))
def test_shortest_paths_upper_bound_true_distance(seed, n):
    pts = random_points(seed, n)
    rng = np.random.default_rng(seed + 1)
    perm = rng.permutation(n)
    edges = {tuple(sorted((perm[k], perm[k + 1]))) for k in range(n - 1)}
    edges |= {e for e in itertools.combinations(range(n), 2) if rng.random() < 0.3}
    ledger = DistanceLedger(n, beta1=1.0)
    for i, j in edges:
        ledger.record_observed(int(i), int(j), float(np.linalg.norm(pts[i] - pts[j])))
    sp = ledger.estimate_unobserved()
    true = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    assert np.all(sp + 1e-9 >= true)
    # triangle inequality on the estimate
    for i, j, k in itertools.permutations(range(n), 3):
        assert sp[i, j] <= sp[i, k] + sp[k, j] + 1e-12


def test_bounds_examples():
    ledger = DistanceLedger(2)
    ledger.D[:] = [[0, 4], [4, 0]]
    empty = Topology.from_edges(2, [])
    assert worker_bound(ledger, empty, 0) == worker_bound(ledger, empty, 1) == 2.0
    assert average_bound(ledger, empty) == 2.0
    assert average_bound(ledger, Topology.full(2)) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_bounds_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = 4
    ledger = DistanceLedger(n)
    raw = np.triu(rng.uniform(0, 5, size=(n, n)), 1)
    ledger.D = raw + raw.T
    a = np.triu(rng.random((n, n)) < 0.5, 1).astype(int)
    t = Topology(a + a.T)
    for i in range(n):
        direct = sum((1 - t.adjacency[i, j]) * ledger.D[i, j] for j in range(n) if j != i) / n
        assert worker_bound(ledger, t, i) == pytest.approx(direct, rel=1e-12)
    total = sum((1 - t.adjacency[i, j]) * ledger.D[i, j] for i in range(n) for j in range(n) if i != j)
    assert average_bound(ledger, t) == pytest.approx(total / n ** 2, rel=1e-12)
    mean_of_workers = np.mean([worker_bound(ledger, t, i) for i in range(n)])
    assert average_bound(ledger, t) == pytest.approx(mean_of_workers, rel=1e-12)


def test_threshold_examples():
    ts = update_threshold(ThresholdState(0.1), 5.0)
    assert ts.d_max == 5.0
    assert update_threshold(ThresholdState(0.1, 1.0, True), 2.0).d_max == pytest.approx(1.1)
    ts = ThresholdState(0.1, 10.0, True)
    prev = ts.d_max
    for _ in range(200):
        ts = update_threshold(ts, 3.0)
        assert 3.0 <= ts.d_max <= prev
        prev = ts.d_max
    assert ts.d_max == pytest.approx(3.0, abs=1e-8)
    with pytest.raises(ValueError):
        update_threshold(ts, -1.0)


def test_dump_csv():
    ledger = DistanceLedger(3)
    ledger.record_observed(0, 2, 1.5)
    buf = io.StringIO()
    ledger.dump_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "i,j,distance,observed"
    assert "0,2,1.5,1" in lines
    assert len(lines) == 4
