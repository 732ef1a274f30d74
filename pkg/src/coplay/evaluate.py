"""Hidden-link evaluation: edge splits, random-walk samples and ranking metrics."""

from __future__ import annotations

import csv
import logging
import math
import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .models import (
    MODEL_NAMES,
    IdealPredictor,
    TrainConfig,
    TrainingDivergence,
    baseline_average,
    fit_model,
)
from .perfnet import EdgeArrays, PerformanceNetwork

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 2, 5, 10, 20, 50, 100)
ERROR_METRICS = ("mse", "mane")


@dataclass(frozen=True)
class SplitSpec:
    hide_fraction: float = 0.20
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.hide_fraction < 1:
            raise ValueError("hide_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class SampleSpec:
    target_nodes: int = 1024
    restart_probability: float = 0.15
    samples: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.target_nodes < 2:
            raise ValueError("target_nodes must be >= 2")
        if not 0 < self.restart_probability < 1:
            raise ValueError("restart_probability must lie in (0, 1)")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


def substream(seed: int, *names) -> np.random.Generator:
    """Independent generator for a named sub-task of a seeded run."""
    keys = [zlib.crc32(str(n).encode()) for n in names]
    return np.random.default_rng([int(seed)] + keys)


# -- split and sampling ------------------------------------------------------------

def hidden_count(n_edges: int, fraction: float) -> int:
    return int(math.floor(fraction * n_edges + 0.5))


def split_edges(net: PerformanceNetwork, spec: SplitSpec = SplitSpec()):
    """Hide a uniformly random fraction of links.

    Returns ``(train_net, test)`` where ``train_net`` keeps every node and
    ``test`` is an :class:`EdgeArrays` over the same node indexing, in edge-id
    order. The training network may be disconnected.
    """
    edges = net.edge_arrays()
    m = len(edges)
    k = hidden_count(m, spec.hide_fraction)
    if k == 0 or k == m:
        raise ValueError(f"hiding {spec.hide_fraction:.0%} of {m} links leaves "
                         f"{'nothing to test' if k == 0 else 'nothing to train on'}")
    rng = np.random.default_rng(spec.seed)
    hidden = np.zeros(m, dtype=bool)
    hidden[rng.choice(m, k, replace=False)] = True
    train = PerformanceNetwork.from_arrays(net.kind, net.nodes, edges.take(~hidden))
    return train, edges.take(hidden)


def undirected_neighbors(n: int, src, dst) -> list[np.ndarray]:
    pairs = np.unique(np.concatenate([np.stack([src, dst], 1), np.stack([dst, src], 1)]), axis=0)
    starts = np.searchsorted(pairs[:, 0], np.arange(n + 1))
    return [pairs[starts[i]:starts[i + 1], 1] for i in range(n)]


def sample_subnetwork(net: PerformanceNetwork, spec: SampleSpec = SampleSpec(),
                      rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Node indices visited by a random walk with restarts.

    The walk starts at a uniformly random node, moves over the undirected
    version of the network and jumps back to its start with probability
    ``restart_probability`` at every step, until ``target_nodes`` distinct
    nodes are collected. Returns the sorted node indices.
    """
    n = net.n_nodes
    if spec.target_nodes > n:
        raise ValueError(f"target_nodes={spec.target_nodes} exceeds {n} nodes")
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    e = net.edge_arrays()
    nbrs = undirected_neighbors(n, e.src, e.dst)
    start = int(rng.integers(n))
    current = start
    visited = {start}
    stall, stall_limit = 0, 100 * n
    while len(visited) < spec.target_nodes:
        coins = rng.random(4096)
        picks = rng.random(4096)
        for coin, pick in zip(coins, picks):
            if coin < spec.restart_probability or len(nbrs[current]) == 0:
                current = start
            else:
                options = nbrs[current]
                current = int(options[int(pick * len(options))])
                if current not in visited:
                    visited.add(current)
                    stall = 0
                    if len(visited) >= spec.target_nodes:
                        break
                    continue
            stall += 1
        if stall > stall_limit:
            raise RuntimeError(f"random walk stalled at {len(visited)} nodes; "
                               "is the network connected?")
    return np.array(sorted(visited), dtype=np.int64)


def within(edges: EdgeArrays, nodes) -> np.ndarray:
    """Boolean mask of links whose endpoints both lie in ``nodes``."""
    keep = np.zeros(int(max(edges.src.max(initial=0), edges.dst.max(initial=0),
                            np.max(nodes, initial=0))) + 1, dtype=bool)
    keep[np.asarray(nodes, dtype=np.int64)] = True
    return keep[edges.src] & keep[edges.dst]


# -- metrics -------------------------------------------------------------------------

def mse(test_weights, predicted_weights, literal_sum: bool = False) -> float:
    """Mean squared error; ``literal_sum=True`` returns the squared norm instead."""
    t = np.asarray(test_weights, dtype=float)
    p = np.asarray(predicted_weights, dtype=float)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise ValueError("mse of an empty test set")
    total = float(np.sum((t - p) ** 2))
    return total if literal_sum else total / t.size


def rank_order(predicted) -> np.ndarray:
    """Indices sorted by predicted weight descending, ties by position."""
    p = np.asarray(predicted, dtype=float)
    return np.lexsort((np.arange(len(p)), -p))


def avg_rec_at_k(test_weights, predicted_weights, k: int) -> float:
    """Mean true weight of the ``k`` links ranked highest by the predictor.

    Links are identified by position (edge-id order); that position breaks
    ties in the predicted weight.
    """
    t = np.asarray(test_weights, dtype=float)
    if not 1 <= k <= len(t):
        raise ValueError(f"k={k} out of range for {len(t)} test links")
    order = rank_order(predicted_weights)
    return float(t[order[:k]].mean())


def avg_rec_curve(test_weights, predicted_weights, ks: Iterable[int]) -> dict[int, float]:
    t = np.asarray(test_weights, dtype=float)
    order = rank_order(predicted_weights)
    top = np.cumsum(t[order])
    return {k: float(top[k - 1] / k) for k in ks if 1 <= k <= len(t)}


@dataclass
class ManeResult:
    value: float
    per_node: dict
    skipped: int


def mane_detail(test: EdgeArrays, train: EdgeArrays, predicted) -> ManeResult:
    """Per-node normalized rank displacement of test links among a node's links.

    For node ``i`` its train and test out-links are ranked together twice:
    once with test links scored by the prediction, once by their true weight.
    Train links always carry their observed weight. Ties fall back to the
    target node index. ``MANE(i) = sum_j |rank_pred(j) - rank_true(j)| /
    (|E_i^train| * |E_i^test|)``; nodes lacking train or test links are skipped.
    """
    predicted = np.asarray(predicted, dtype=float)
    if len(predicted) != len(test):
        raise ValueError("one prediction per test link is required")
    by_train = defaultdict(list)
    for s, d, w in zip(train.src.tolist(), train.dst.tolist(), train.weight.tolist()):
        by_train[s].append((d, w))
    by_test = defaultdict(list)
    for s, d, w, p in zip(test.src.tolist(), test.dst.tolist(),
                          test.weight.tolist(), predicted.tolist()):
        by_test[s].append((d, w, p))

    per_node = {}
    skipped = 0
    for i in sorted(set(by_train) | set(by_test)):
        tr, te = by_train.get(i, []), by_test.get(i, [])
        if not tr or not te:
            skipped += 1
            continue
        targets = [d for d, _ in tr] + [d for d, _, _ in te]
        true_score = [w for _, w in tr] + [w for _, w, _ in te]
        pred_score = [w for _, w in tr] + [p for _, _, p in te]
        tgt = np.array(targets)
        rank_true = np.empty(len(tgt), dtype=np.int64)
        rank_pred = np.empty(len(tgt), dtype=np.int64)
        rank_true[np.lexsort((tgt, -np.array(true_score)))] = np.arange(len(tgt))
        rank_pred[np.lexsort((tgt, -np.array(pred_score)))] = np.arange(len(tgt))
        test_pos = slice(len(tr), len(tgt))
        disp = np.abs(rank_pred[test_pos] - rank_true[test_pos]).sum()
        per_node[i] = float(disp) / (len(tr) * len(te))
    if not per_node:
        raise ValueError("no node has both train and test links")
    return ManeResult(float(np.mean(list(per_node.values()))), per_node, skipped)


def mane(test: EdgeArrays, train: EdgeArrays, predicted) -> float:
    return mane_detail(test, train, predicted).value


# -- benchmark ---------------------------------------------------------------------

@dataclass
class EvalReport:
    kind: str
    records: list = field(default_factory=list)  # model, kind, d, sample, metric, value
    failures: list = field(default_factory=list)
    ks: tuple = DEFAULT_KS

    def values(self, model: str, d: int, metric: str) -> dict[int, float]:
        return {r["sample"]: r["value"] for r in self.records
                if r["model"] == model and r["d"] == d and r["metric"] == metric}

    def gains(self, model: str, d: int, metric: str) -> np.ndarray:
        """Per-sample ``100 * (baseline - model) / baseline``."""
        base = self.values("baseline", 0, metric)
        mine = self.values(model, d, metric)
        return np.array([100.0 * (base[s] - v) / base[s] for s, v in sorted(mine.items())
                         if s in base and base[s] != 0 and math.isfinite(v)])

    def cells(self) -> list[tuple[str, int]]:
        seen = []
        for r in self.records:
            key = (r["model"], r["d"])
            if key not in seen:
                seen.append(key)
        return seen

    def aggregate(self) -> list[dict]:
        rows = []
        metrics = []
        for r in self.records:
            if r["metric"] not in metrics:
                metrics.append(r["metric"])
        for model, d in self.cells():
            for metric in metrics:
                vals = np.array([v for v in self.values(model, d, metric).values()
                                 if math.isfinite(v)])
                if vals.size == 0:
                    continue
                row = {"model": model, "kind": self.kind, "d": d, "metric": metric,
                       "mean": float(vals.mean()), "std": float(vals.std()),
                       "gain_mean": float("nan"), "gain_std": float("nan")}
                if metric in ERROR_METRICS:
                    g = self.gains(model, d, metric)
                    if g.size:
                        row["gain_mean"], row["gain_std"] = float(g.mean()), float(g.std())
                rows.append(row)
        return rows

    def curves(self) -> list[dict]:
        """Mean AvgRec@k per model label, ``name`` or ``name@d``."""
        rows = []
        for model, d in self.cells():
            label = model if d == 0 else f"{model}@{d}"
            for k in self.ks:
                vals = [v for v in self.values(model, d, f"avgrec@{k}").values()
                        if math.isfinite(v)]
                if vals:
                    rows.append({"k": k, "model": label, "value": float(np.mean(vals))})
        return rows


def _evaluate_sample(report, model_name, d, sample_id, predictor, test_s, train_s, ks):
    pred = predictor.predict(test_s.src, test_s.dst)
    rec = report.records
    base = {"model": model_name, "kind": report.kind, "d": d, "sample": sample_id}
    rec.append({**base, "metric": "mse", "value": mse(test_s.weight, pred)})
    try:
        value = mane(test_s, train_s, pred)
    except ValueError:
        value = float("nan")
    rec.append({**base, "metric": "mane", "value": value})
    for k, v in avg_rec_curve(test_s.weight, pred, ks).items():
        rec.append({**base, "metric": f"avgrec@{k}", "value": v})


def run_benchmark(net: PerformanceNetwork, models: Sequence[str] = MODEL_NAMES[1:],
                  split: SplitSpec = SplitSpec(), sample: SampleSpec = SampleSpec(),
                  dims: Sequence[int] = (64,), runs: int = 1,
                  train_cfgs: Optional[dict] = None, lam: float = 1e-4,
                  ks: Sequence[int] = DEFAULT_KS, include_ideal: bool = True,
                  trained: Optional[dict] = None) -> EvalReport:
    """Train every model on the visible links and score it on hidden links.

    For each run a fresh split is drawn; every ``(model, d)`` is trained on the
    training network and evaluated on ``sample.samples`` random-walk samples.
    Within a sample, test links with both endpoints sampled are scored. The
    average baseline is always evaluated (recorded with ``d = 0``); a failing
    model records ``nan`` metrics and an entry in ``report.failures``.

    ``trained`` may map ``(run, model, d)`` to an already trained predictor.
    """
    report = EvalReport(net.kind, ks=tuple(ks))
    train_cfgs = train_cfgs or {}
    truth = net.adjacency()
    n = net.n_nodes
    target = min(sample.target_nodes, n)
    for run in range(runs):
        split_seed = split.seed if runs == 1 else int(substream(split.seed, "split", run).integers(2**31))
        train_net, test = split_edges(net, SplitSpec(split.hide_fraction, split_seed))
        tr = train_net.edge_arrays()
        predictors = {("baseline", 0): baseline_average(tr.weight, n)}
        if include_ideal:
            predictors[("ideal", 0)] = IdealPredictor(truth)
        for d in dims:
            for name in models:
                if name == "baseline":
                    continue
                key = (run, name, d)
                try:
                    if trained is not None and key in trained:
                        model = trained[key]
                    else:
                        cfg = train_cfgs.get(name)
                        if cfg is not None:
                            cfg = _reseed(cfg, run)
                        model = fit_model(name, n, tr.src, tr.dst, tr.weight, d, cfg, lam)
                    predictors[(name, d)] = model
                except (TrainingDivergence, FloatingPointError, ValueError) as err:
                    logger.warning("model %s d=%d run %d failed: %s", name, d, run, err)
                    report.failures.append({"model": name, "d": d, "run": run, "error": str(err)})
        for s in range(sample.samples):
            sample_id = run * sample.samples + s
            rng = substream(sample.seed, "sample", run, s)
            nodes = sample_subnetwork(net, SampleSpec(target, sample.restart_probability, 1,
                                                      sample.seed), rng)
            test_s = test.take(within(test, nodes))
            train_s = tr.take(within(tr, nodes))
            if len(test_s) == 0:
                continue
            for (name, d), predictor in predictors.items():
                _evaluate_sample(report, name, d, sample_id, predictor, test_s, train_s, ks)
            for name in models:
                for d in dims:
                    if (name, d) not in predictors and name != "baseline":
                        base = {"model": name, "kind": net.kind, "d": d, "sample": sample_id}
                        for metric in ("mse", "mane"):
                            report.records.append({**base, "metric": metric, "value": float("nan")})
    return report


def _reseed(cfg: TrainConfig, run: int) -> TrainConfig:
    from dataclasses import replace
    return replace(cfg, seed=int(substream(cfg.seed, "train", run).integers(2**31)))


# -- files -----------------------------------------------------------------------------

def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def write_report(report: EvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["model", "kind", "d", "sample", "metric", "value"])
        for r in report.records:
            writer.writerow([r["model"], r["kind"], r["d"], r["sample"], r["metric"], _fmt(r["value"])])


def write_aggregate(rows: Iterable[dict], path) -> None:
    cols = ["model", "kind", "d", "metric", "mean", "std", "gain_mean", "gain_std"]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(cols)
        for r in rows:
            writer.writerow([_fmt(r[c]) for c in cols])


def write_curves(rows: Iterable[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["k", "model", "value"])
        for r in rows:
            writer.writerow([r["k"], r["model"], _fmt(r["value"])])


def read_report(path) -> EvalReport:
    records = []
    kind = None
    with open(path, newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            kind = row["kind"]
            records.append({"model": row["model"], "kind": row["kind"], "d": int(row["d"]),
                            "sample": int(row["sample"]), "metric": row["metric"],
                            "value": float(row["value"])})
    ks = sorted({int(r["metric"].split("@")[1]) for r in records if r["metric"].startswith("avgrec@")})
    return EvalReport(kind or "SPN", records, ks=tuple(ks) or DEFAULT_KS)
