"""Joint choice of per-worker local-update counts and the peer topology.

Each round the coordinator starts from the base topology and greedily drops
the slowest links while the graph stays connected and the estimated average
consensus distance stays under ``d_max``. A candidate is kept only if it
strictly shortens the predicted training time of the pacing worker; the
batch size ``s`` is reset to ``floor(sqrt(sum_ij a_ij))`` after an accepted
batch and halved otherwise, and the search stops when a batch of one link
fails. Every worker's count is then sized so it finishes no later than the
pacing worker.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .consensus import DistanceLedger, average_bound
from .graphtopo import Topology, is_connected
from .simnet import max_neighbor_beta

DEFAULT_TAU_CAP = 64
_FLOOR_EPS = 1e-9


@dataclass
class ControlInputs:
    mu: np.ndarray
    B: np.ndarray
    ledger: DistanceLedger
    d_max: float
    L_hat: float
    sigma_hat: float
    eta: float
    H_remaining: int
    base_topology: Topology
    f1: float
    tau_cap: int = DEFAULT_TAU_CAP

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        if np.any(self.mu <= 0):
            raise ValueError("per-iteration compute times must be positive")
        if not np.array_equal(self.B, self.B.T):
            raise ValueError("communication-time matrix must be symmetric")
        edges = self.base_topology.adjacency == 1
        if np.any(self.B[edges] < 0) or not np.all(np.isfinite(self.B[edges])):
            raise ValueError("every base link needs a finite, non-negative transfer time")

    @property
    def n(self) -> int:
        return len(self.mu)


@dataclass
class ControlPlan:
    topology: Topology
    tau: np.ndarray
    pacing_worker: int
    predicted_round_time: float
    predicted_total_time: float
    clamped: np.ndarray = field(default=None)
    floor_violations: list = field(default_factory=list)
    accepted_T: list = field(default_factory=list)

    @property
    def u_max(self) -> int:
        return int(self.topology.degrees().max()) if self.topology.n else 0


def tau_formula(n: int, f1: float, L: float, H: int, eta: float, sigma: float) -> float:
    """``sqrt(N f1 / (L H eta^2 sigma^2))``; +inf when the denominator vanishes."""
    denom = L * H * eta * eta * sigma * sigma
    if denom <= 0:
        return math.inf
    return math.sqrt(n * f1 / denom)


def clamp_tau(raw: float, tau_cap: int = DEFAULT_TAU_CAP) -> int:
    if math.isinf(raw):
        return tau_cap
    return int(min(max(round(raw), 1), tau_cap))


def closed_form_tau(inputs: ControlInputs) -> int:
    if inputs.H_remaining <= 0:
        raise ValueError("closed-form tau needs at least one remaining round")
    raw = tau_formula(inputs.n, inputs.f1, inputs.L_hat, inputs.H_remaining, inputs.eta, inputs.sigma_hat)
    return clamp_tau(raw, inputs.tau_cap)


def evaluate_candidate(topology: Topology, inputs: ControlInputs, tau: int | None = None) -> tuple[int, int, float]:
    """Pacing worker ``l`` (smallest predicted total time, lowest index on ties), its tau and T."""
    if tau is None:
        tau = closed_form_tau(inputs)
    t = tau * inputs.mu + max_neighbor_beta(inputs.B, topology)
    T = inputs.H_remaining * t
    l = int(np.argmin(T))
    return l, tau, float(T[l])


def floor_ratio_holds(t_l: float, t_i: float) -> bool:
    """``floor(t_l / t_i) == 1`` up to a relative 1e-9 slack."""
    return math.floor(t_l / t_i * (1.0 + _FLOOR_EPS)) == 1


def assign_frequencies(topology: Topology, l: int, tau_l: int, inputs: ControlInputs):
    """Largest tau per worker that finishes within the pacing worker's round time.

    Returns:
        (tau array, clamped mask, list of workers breaking the floor ratio)
    """
    mb = max_neighbor_beta(inputs.B, topology)
    t_l = tau_l * inputs.mu[l] + mb[l]
    raw = np.floor((t_l - mb) / inputs.mu + _FLOOR_EPS)
    clamped = raw < 1
    tau = np.maximum(raw, 1).astype(int)
    tau[l] = tau_l
    clamped[l] = False
    t_i = tau * inputs.mu + mb
    violations = [i for i in range(inputs.n) if not floor_ratio_holds(t_l, t_i[i])]
    return tau, clamped, violations


def _candidate_links(A: Topology, inputs: ControlInputs, s: int) -> list[tuple[int, int]]:
    n2 = inputs.n ** 2
    current = average_bound(inputs.ledger, A)
    D = inputs.ledger.D
    ok = [(i, j) for i, j in A.edges() if current + 2.0 * D[i, j] / n2 <= inputs.d_max]
    ok.sort(key=lambda e: (-inputs.B[e], e[0], e[1]))
    return ok[:s]


def _prune(A: Topology, links, inputs: ControlInputs) -> Topology:
    out = A
    for i, j in links:
        trial = out.without_edge(i, j)
        if not is_connected(trial):
            continue
        if average_bound(inputs.ledger, trial) > inputs.d_max:
            continue
        out = trial
    return out


def greedy_search(inputs: ControlInputs) -> ControlPlan:
    A = inputs.base_topology
    tau = closed_form_tau(inputs)
    l, tau, T = evaluate_candidate(A, inputs, tau)
    accepted = [T]
    s, flag, first = inputs.n, True, True
    while True:
        if not first:
            s = math.isqrt(int(A.adjacency.sum())) if flag else s // 2
        first = False
        if s < 1:
            break
        A_new = _prune(A, _candidate_links(A, inputs, s), inputs)
        l_new, _, T_new = evaluate_candidate(A_new, inputs, tau)
        if T_new < T:
            A, l, T, flag = A_new, l_new, T_new, True
            accepted.append(T)
        else:
            flag = False
        if not flag and s == 1:
            break
    taus, clamped, violations = assign_frequencies(A, l, tau, inputs)
    return ControlPlan(topology=A, tau=taus, pacing_worker=l,
                       predicted_round_time=T / inputs.H_remaining, predicted_total_time=T,
                       clamped=clamped, floor_violations=violations, accepted_T=accepted)


def uniform_plan(topology: Topology, tau: int) -> ControlPlan:
    """Fixed plan used before any timing or distance has been observed."""
    n = topology.n
    return ControlPlan(topology=topology, tau=np.full(n, int(tau)), pacing_worker=-1,
                       predicted_round_time=math.nan, predicted_total_time=math.nan,
                       clamped=np.zeros(n, dtype=bool))
