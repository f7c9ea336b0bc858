"""Synchronous round loop for FedHP and the D-PSGD / LD-SGD baselines.

Every round each worker runs its local SGD steps, ships the post-update
model to its current neighbours, and mixes with uniform weight
``1/(u_max+1)``. Timing runs on a virtual clock fed by ``simnet``. Under
FedHP the coordinator then folds the reported statistics into its distance
ledger and threshold and plans the next round.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import consensus, control, simnet
from .graphtopo import Topology, mixing_plan
from .learncore import Batch, GradEstimates, Model, accuracy, estimate_sigma, estimate_smoothness, \
    local_update, loss_and_gradient
from .numkit import Rng

ALGORITHMS = ("fedhp", "d-psgd", "ld-sgd")


class NumericalAbort(RuntimeError):
    """A model went non-finite; usually the learning rate is too high."""


@dataclass
class AlgorithmChoice:
    name: str
    tau: int | None = None          # fixed tau for the baselines; None = calibrated tau*
    ld_i1: int = 4
    ld_i2: int = 1

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.name!r}; choose from {ALGORITHMS}")
        if self.tau is not None and self.tau < 1:
            raise ValueError("tau must be positive")
        if self.ld_i1 < 1 or self.ld_i2 < 0:
            raise ValueError("LD-SGD needs I1 >= 1 and I2 >= 0")


@dataclass
class WorkerState:
    id: int
    model: Model
    shard: Batch
    batch_rng: Rng
    probe_rng: Rng
    estimates: GradEstimates | None = None
    inbox: dict = field(default_factory=dict)


@dataclass
class CoordinatorState:
    ledger: consensus.DistanceLedger
    threshold: consensus.ThresholdState
    base_topology: Topology
    H: int
    f1: float = math.nan
    L_hat: float = math.nan
    sigma_hat: float = math.nan
    plan: control.ControlPlan | None = None
    h: int = 0
    tau_cap: int = control.DEFAULT_TAU_CAP


@dataclass
class RoundMetrics:
    round: int
    t_round: float
    cum_time: float
    waiting_avg: float
    accuracy: float
    D_true: float
    D_bound_est: float
    d_max: float
    tau_min: float
    tau_med: float
    tau_max: float
    links: int
    # diagnostics outside the fixed CSV schema
    tau: tuple = ()
    t_i: tuple = ()
    pacing_worker: int = -1
    tau_l: int = 0
    predicted_T: float = math.nan
    clamped: tuple = ()
    floor_violations: tuple = ()
    gossip_only: bool = False
    mean_shift: float = 0.0
    audit_pairs: int = 0
    audit_upper_ok: int = 0
    mixing_check_err: float = math.nan


@dataclass
class Calibration:
    f1: float
    L_hat: float
    sigma_hat: float
    tau_star: int


def calibrate(workers: list[WorkerState], eta: float, batch_size: int, H: int, seed: int,
              tau_cap: int = control.DEFAULT_TAU_CAP, n_probes: int = 8) -> Calibration:
    """Pre-round estimates at the shared initial model; leaves every worker untouched.

    Each worker reports its full-shard loss, a one-step difference-quotient
    smoothness estimate and a probe-based noise estimate, all at ``x^1``.
    """
    losses, Ls, sigmas = [], [], []
    for w in workers:
        loss0, g0 = loss_and_gradient(w.model, w.shard)

        def grad(p, w=w):
            return loss_and_gradient(w.model.with_params(p), w.shard)[1]

        L = estimate_smoothness(grad, w.model.params, w.model.params - eta * g0)
        losses.append(loss0)
        Ls.append(L or 0.0)
        sigmas.append(estimate_sigma(w.model, w.shard, batch_size, Rng(seed, "calib", w.id), n_probes, g0))
    f1, L_hat, sigma_hat = (math.fsum(v) / len(v) for v in (losses, Ls, sigmas))
    tau_star = control.clamp_tau(control.tau_formula(len(workers), f1, L_hat, H, eta, sigma_hat), tau_cap)
    return Calibration(f1=f1, L_hat=L_hat, sigma_hat=sigma_hat, tau_star=tau_star)


def evaluate(workers: list[WorkerState], test: Batch) -> float:
    """Mean top-1 test accuracy over the workers' models."""
    if test.size < 1:
        raise ValueError("test set is empty")
    return math.fsum(accuracy(w.model, test.features, test.labels) for w in workers) / len(workers)


def average_consensus_distance(params: np.ndarray) -> float:
    """Mean distance of each row to the row average (rows are workers)."""
    mean = params.mean(axis=0)
    return float(np.mean(np.linalg.norm(params - mean, axis=1)))


def aggregate(workers: list[WorkerState], topology: Topology, post: np.ndarray) -> np.ndarray:
    """Neighbour exchange then ``x_i + w * sum_j (x_j - x_i)`` for every worker."""
    w = mixing_plan(topology).w
    for i, worker in enumerate(workers):
        worker.inbox = {j: post[j] for j in topology.neighbors(i)}
    new = np.empty_like(post)
    for i, worker in enumerate(workers):
        acc = post[i].copy()
        for j in sorted(worker.inbox):
            acc += w * (worker.inbox[j] - post[i])
        new[i] = acc
        worker.inbox = {}
    if not np.all(np.isfinite(new)):
        raise NumericalAbort("non-finite model after aggregation; lower the learning rate")
    return new


class Simulation:
    """One experiment: workers, virtual clock, and (under FedHP) the coordinator.

    ``audit`` records, per FedHP round, how often the raw shortest-path
    estimate upper-bounds the true distance of each unlinked pair.
    ``debug_mixing`` re-derives aggregation as a dense ``X W`` product (n <= 8).
    """

    def __init__(self, algorithm: AlgorithmChoice, workers: list[WorkerState], test: Batch,
                 profile: simnet.ComputeProfile, link: simnet.LinkModel, base_topology: Topology,
                 baseline_topology: Topology, H: int, eta: float, eta_decay: float, batch_size: int,
                 seed: int, beta1: float = consensus.DEFAULT_BETA1, beta2: float = consensus.DEFAULT_BETA2,
                 tau_cap: int = control.DEFAULT_TAU_CAP, eval_every: int = 1,
                 target_accuracy: float | None = None, sigma_probes: int = 8,
                 audit: bool = False, debug_mixing: bool = False):
        self.algorithm = algorithm
        self.workers = workers
        self.test = test
        self.profile = profile
        self.link = link
        self.base_topology = base_topology
        self.baseline_topology = baseline_topology
        self.H = H
        self.eta0 = eta
        self.eta_decay = eta_decay
        self.batch_size = batch_size
        self.seed = seed
        self.rng = Rng(seed)
        self.tau_cap = tau_cap
        self.eval_every = eval_every
        self.target_accuracy = target_accuracy
        self.sigma_probes = sigma_probes
        self.audit = audit
        self.debug_mixing = debug_mixing
        self.n = len(workers)
        self.cum_time = 0.0
        self.h = 0
        self.history: list[RoundMetrics] = []
        self.calibration = calibrate(workers, eta, batch_size, max(H, 1), seed, tau_cap, sigma_probes)
        self.coordinator = CoordinatorState(
            ledger=consensus.DistanceLedger(self.n, beta1),
            threshold=consensus.ThresholdState(beta2),
            base_topology=base_topology, H=H, f1=self.calibration.f1,
            L_hat=self.calibration.L_hat, sigma_hat=self.calibration.sigma_hat,
            plan=control.uniform_plan(base_topology, self.calibration.tau_star),
            tau_cap=tau_cap)
        self.fixed_tau = algorithm.tau if algorithm.tau is not None else self.calibration.tau_star

    def eta_at(self, h: int) -> float:
        return self.eta0 * self.eta_decay ** (h - 1)

    def params(self) -> np.ndarray:
        return np.stack([w.model.params for w in self.workers])

    # -- shared round mechanics -------------------------------------------------

    def _local_phase(self, taus, eta: float) -> tuple[np.ndarray, list]:
        post, ests = [], []
        for w, tau in zip(self.workers, taus):
            if tau == 0:
                post.append(w.model.params.copy())
                ests.append(None)
                continue
            prev_L = w.estimates.L if w.estimates else 0.0
            x_end, est, _ = local_update(w.model, w.shard, int(tau), eta, self.batch_size, w.batch_rng,
                                         w.probe_rng, self.sigma_probes, prev_L)
            if not np.all(np.isfinite(x_end)):
                raise NumericalAbort(f"worker {w.id} diverged during local updates; lower the learning rate")
            w.estimates = est
            post.append(x_end)
            ests.append(est)
        return np.stack(post), ests

    def _mix(self, topology: Topology, post: np.ndarray) -> tuple[np.ndarray, float]:
        new = aggregate(self.workers, topology, post)
        err = math.nan
        if self.debug_mixing and self.n <= 8:
            err = float(np.abs((post.T @ mixing_plan(topology).W).T - new).max())
        for w, p in zip(self.workers, new):
            w.model.params = p
        return new, err

    def _finish(self, h, timing, taus, topology, post, new, err, **extra) -> RoundMetrics:
        self.cum_time += timing.t_round
        acc = math.nan
        if self.eval_every and (h % self.eval_every == 0 or h == self.H):
            acc = evaluate(self.workers, self.test)
        taus = np.asarray(taus)
        m = RoundMetrics(
            round=h, t_round=timing.t_round, cum_time=self.cum_time, waiting_avg=timing.waiting_avg,
            accuracy=acc, D_true=average_consensus_distance(new),
            D_bound_est=extra.pop("D_bound_est", math.nan), d_max=extra.pop("d_max", math.nan),
            tau_min=float(taus.min()), tau_med=float(np.median(taus)), tau_max=float(taus.max()),
            links=topology.n_edges, tau=tuple(int(t) for t in taus), t_i=tuple(timing.t_i.tolist()),
            mean_shift=float(np.linalg.norm(new.mean(axis=0) - post.mean(axis=0))),
            mixing_check_err=err, **extra)
        self.history.append(m)
        return m

    def _draws(self, h: int):
        mu = simnet.sample_mu(self.profile, h, self.rng)
        bw = simnet.sample_bandwidth(self.link, self.n, h, self.rng)
        return mu, bw

    # -- algorithms -------------------------------------------------------------

    def run_round_fedhp(self) -> RoundMetrics:
        h = self.h = self.h + 1
        coord = self.coordinator
        plan = coord.plan
        topo = plan.topology
        eta = self.eta_at(h)
        mu, bw = self._draws(h)
        beta = simnet.beta_matrix(self.link, topo, bw)

        post, ests = self._local_phase(plan.tau, eta)
        new, err = self._mix(topo, post)
        timing = simnet.round_timing(plan.tau, mu, beta, topo)

        # coordinator side
        ledger = coord.ledger
        ledger.begin_round()
        for i, j in topo.edges():
            ledger.record_observed(i, j, float(np.linalg.norm(post[i] - post[j])))
        sp = ledger.estimate_unobserved()
        audit_pairs = audit_ok = 0
        if self.audit:
            for i in range(self.n):
                for j in range(i + 1, self.n):
                    if not topo.has_edge(i, j):
                        audit_pairs += 1
                        audit_ok += sp[i, j] + 1e-9 >= np.linalg.norm(post[i] - post[j])
        coord.L_hat = math.fsum(e.L for e in ests) / self.n
        coord.sigma_hat = math.fsum(e.sigma for e in ests) / self.n
        coord.threshold = consensus.update_threshold(coord.threshold, math.fsum(e.g_norm for e in ests) / self.n)
        bound_est = consensus.average_bound(ledger, topo)
        coord.h = h
        if h < self.H:
            inputs = control.ControlInputs(
                mu=mu, B=simnet.beta_matrix(self.link, self.base_topology, bw), ledger=ledger,
                d_max=coord.threshold.d_max, L_hat=coord.L_hat, sigma_hat=coord.sigma_hat,
                eta=self.eta_at(h + 1), H_remaining=self.H - h, base_topology=self.base_topology,
                f1=coord.f1, tau_cap=self.tau_cap)
            coord.plan = control.greedy_search(inputs)

        return self._finish(h, timing, plan.tau, topo, post, new, err,
                            D_bound_est=bound_est, d_max=coord.threshold.d_max,
                            pacing_worker=plan.pacing_worker,
                            tau_l=int(plan.tau[plan.pacing_worker]) if plan.pacing_worker >= 0 else 0,
                            predicted_T=plan.predicted_total_time,
                            clamped=tuple(bool(c) for c in plan.clamped),
                            floor_violations=tuple(plan.floor_violations),
                            audit_pairs=audit_pairs, audit_upper_ok=int(audit_ok))

    def run_round_dpsgd(self) -> RoundMetrics:
        h = self.h = self.h + 1
        topo = self.baseline_topology
        taus = np.full(self.n, self.fixed_tau)
        mu, bw = self._draws(h)
        post, _ = self._local_phase(taus, self.eta_at(h))
        new, err = self._mix(topo, post)
        timing = simnet.round_timing(taus, mu, simnet.beta_matrix(self.link, topo, bw), topo)
        return self._finish(h, timing, taus, topo, post, new, err)

    def run_round_ldsgd(self) -> RoundMetrics:
        h = self.h = self.h + 1
        a = self.algorithm
        position = (h - 1) % (a.ld_i1 + a.ld_i2)
        gossip_only = position >= a.ld_i1
        topo = self.baseline_topology
        taus = np.full(self.n, 0 if gossip_only else self.fixed_tau)
        mu, bw = self._draws(h)
        post, _ = self._local_phase(taus, self.eta_at(h))
        new, err = self._mix(topo, post)
        timing = simnet.round_timing(taus, mu, simnet.beta_matrix(self.link, topo, bw), topo)
        return self._finish(h, timing, taus, topo, post, new, err, gossip_only=gossip_only)

    def run_round(self) -> RoundMetrics:
        name = self.algorithm.name
        if name == "fedhp":
            return self.run_round_fedhp()
        if name == "d-psgd":
            return self.run_round_dpsgd()
        return self.run_round_ldsgd()

    def run(self, on_round=None) -> list[RoundMetrics]:
        while self.h < self.H:
            m = self.run_round()
            if on_round is not None:
                on_round(m)
            if (self.target_accuracy is not None and not math.isnan(m.accuracy)
                    and m.accuracy >= self.target_accuracy):
                break
        return self.history
