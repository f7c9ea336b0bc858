"""Build a simulation from a config, run it, and write the metrics CSV."""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import simnet
from .config import ExperimentConfig, dump_config
from .dataprep import PartitionSpec, SyntheticSpec, export_shards_csv, generate, partition
from .graphtopo import Topology, read_edge_list
from .learncore import Batch, Model, accuracy, init_model, loss_and_gradient
from .numkit import Rng
from .protocol import AlgorithmChoice, RoundMetrics, Simulation, WorkerState

log = logging.getLogger(__name__)

SCHEMA_TAG = "fedhp-metrics/1"
COLUMNS = ("round", "t_round", "cum_time", "waiting_avg", "accuracy", "D_true", "D_bound_est",
           "d_max", "tau_min", "tau_med", "tau_max", "links")
VERBOSE_COLUMNS = ("pacing_worker", "tau_l", "predicted_T", "floor_violations")
OUTPUT_DIR_ENV = "FEDHP_OUTPUT_DIR"


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.9g}"


def synthetic_spec(cfg: ExperimentConfig) -> SyntheticSpec:
    return SyntheticSpec(classes=cfg.classes, features=cfg.features,
                         samples_per_class=cfg.samples_per_class, cluster_spread=cfg.cluster_spread,
                         class_sep=cfg.class_sep, seed=cfg.seed)


def make_base_topology(cfg: ExperimentConfig) -> Topology:
    if cfg.base_topology == "full":
        return Topology.full(cfg.workers)
    if cfg.base_topology == "ring":
        return Topology.ring(cfg.workers)
    return read_edge_list(cfg.base_topology, n=cfg.workers)


def new_model(cfg: ExperimentConfig) -> Model:
    hidden = cfg.hidden if cfg.model == "mlp" else 0
    return init_model(cfg.model, cfg.features, cfg.classes, hidden, Rng(cfg.seed, "init"))


def build_simulation(cfg: ExperimentConfig, audit: bool = False, debug_mixing: bool = False) -> Simulation:
    train, test = generate(synthetic_spec(cfg))
    shards = partition(train, PartitionSpec(p=cfg.p, workers=cfg.workers), Rng(cfg.seed, "partition"))
    if cfg.shards_csv:
        export_shards_csv(shards, cfg.shards_csv)
    root = Rng(cfg.seed)
    init = new_model(cfg)
    workers = [WorkerState(id=i, model=init.copy(), shard=s, batch_rng=root.child("batch", i),
                           probe_rng=root.child("probe", i)) for i, s in enumerate(shards)]
    profile = simnet.make_profile(cfg.workers, cfg.heterogeneity, cfg.base_compute_time, root)
    link = simnet.LinkModel.for_dim(init.dim)
    base = make_base_topology(cfg)
    algorithm = AlgorithmChoice(cfg.algorithm, cfg.fixed_tau, cfg.ld_i1, cfg.ld_i2)
    baseline = Topology.ring(cfg.workers) if cfg.algorithm == "d-psgd" else base
    return Simulation(algorithm, workers, test, profile, link, base, baseline, H=cfg.rounds,
                      eta=cfg.eta, eta_decay=cfg.eta_decay, batch_size=cfg.batch_size, seed=cfg.seed,
                      beta1=cfg.beta1, beta2=cfg.beta2, tau_cap=cfg.tau_cap, eval_every=cfg.eval_every,
                      target_accuracy=cfg.target_accuracy, sigma_probes=cfg.sigma_probes,
                      audit=audit, debug_mixing=debug_mixing)


def single_worker_oracle(cfg: ExperimentConfig, steps: int = 2000) -> float:
    """Plain mini-batch SGD on the pooled training set; returns test accuracy."""
    train, test = generate(synthetic_spec(cfg))
    model = new_model(cfg)
    rng = Rng(cfg.seed, "oracle")
    for _ in range(steps):
        idx = rng.choice_without_replacement(train.size, cfg.batch_size)
        _, g = loss_and_gradient(model, Batch(train.features[idx], train.labels[idx]))
        model.params = model.params - cfg.eta * g
    return accuracy(model, test.features, test.labels)


def metrics_row(m: RoundMetrics, verbose: bool = False) -> list[str]:
    row = [fmt(getattr(m, c)) for c in COLUMNS]
    if verbose:
        row += [fmt(m.pacing_worker), fmt(m.tau_l), fmt(m.predicted_T), fmt(len(m.floor_violations))]
    return row


def resolve_output(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output)
    override = os.environ.get(OUTPUT_DIR_ENV)
    if override:
        out = Path(override) / out.name
    return out


def header_block(cfg: ExperimentConfig) -> str:
    lines = [f"# schema: {SCHEMA_TAG}", "# config:"]
    lines += [f"#   {line}" for line in dump_config(cfg).splitlines()]
    return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    path: Path
    history: list
    simulation: Simulation


def run_experiment(cfg: ExperimentConfig, audit: bool = False, debug_mixing: bool = False) -> RunResult:
    """Run ``cfg`` to completion and write the CSV (header, config block, one row per round)."""
    out = resolve_output(cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    sim = build_simulation(cfg, audit=audit, debug_mixing=debug_mixing)
    buf = io.StringIO()
    buf.write(header_block(cfg))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(COLUMNS) + (list(VERBOSE_COLUMNS) if cfg.verbose else []))

    def on_round(m: RoundMetrics):
        writer.writerow(metrics_row(m, cfg.verbose))
        if m.round % 25 == 0:
            log.info("round %d: acc=%.4f t=%.3f wait=%.4f", m.round, m.accuracy, m.cum_time, m.waiting_avg)

    try:
        sim.run(on_round)
    finally:
        out.write_text(buf.getvalue())
    if cfg.ledger_csv and cfg.algorithm == "fedhp":
        sim.coordinator.ledger.dump_csv(cfg.ledger_csv)
    return RunResult(path=out, history=sim.history, simulation=sim)


# -- comparison ----------------------------------------------------------------

DATASET_KEYS = ("classes", "features", "samples_per_class", "cluster_spread", "class_sep", "p",
                "workers", "seed")


def read_metrics(path) -> tuple[dict, list[dict]]:
    """Parse a metrics CSV into (embedded config dict, rows as dicts of floats)."""
    config, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            text = line[1:].strip()
            if "=" in text:
                k, v = (s.strip() for s in text.split("=", 1))
                config[k] = v
            continue
        body.append(line)
    rows = []
    for rec in csv.DictReader(body):
        rows.append({k: float(v) for k, v in rec.items()})
    return config, rows


@dataclass
class RunSummary:
    algorithm: str
    time_to_target: float | None
    final_accuracy: float
    mean_waiting: float


def summarize(config: dict, rows: list[dict], target: float | None) -> RunSummary:
    accs = [r["accuracy"] for r in rows if not math.isnan(r["accuracy"])]
    reached = None
    if target is not None:
        for r in rows:
            if not math.isnan(r["accuracy"]) and r["accuracy"] >= target:
                reached = r["cum_time"]
                break
    waits = [r["waiting_avg"] for r in rows]
    return RunSummary(algorithm=config.get("algorithm", "?"), time_to_target=reached,
                      final_accuracy=accs[-1] if accs else math.nan,
                      mean_waiting=math.fsum(waits) / len(waits) if waits else math.nan)


def compare(paths, target: float | None = None) -> list[RunSummary]:
    if len(paths) < 2:
        raise ValueError("compare needs at least two metrics files")
    parsed = [read_metrics(p) for p in paths]
    ref = {k: parsed[0][0].get(k) for k in DATASET_KEYS}
    for path, (cfg, _) in zip(paths[1:], parsed[1:]):
        diff = [k for k in DATASET_KEYS if cfg.get(k) != ref[k]]
        if diff:
            raise ValueError(f"{path} uses a different dataset/seed ({', '.join(diff)})")
    if target is None:
        t = parsed[0][0].get("target_accuracy", "none")
        target = None if t == "none" else float(t)
    return [summarize(cfg, rows, target) for cfg, rows in parsed]


def format_summary(summaries: list[RunSummary]) -> str:
    lines = [f"{'algorithm':<10} {'time_to_target':>16} {'final_accuracy':>15} {'mean_waiting':>14}"]
    for s in summaries:
        ttt = "not reached" if s.time_to_target is None else fmt(s.time_to_target)
        lines.append(f"{s.algorithm:<10} {ttt:>16} {fmt(s.final_accuracy):>15} {fmt(s.mean_waiting):>14}")
    return "\n".join(lines)
