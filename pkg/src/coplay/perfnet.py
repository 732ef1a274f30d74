"""Short- and long-term performance networks built from rating timelines.

A directed edge ``p -> t`` accumulates player ``p``'s per-match change in
mean rating. In the short-term network (SPN) only matches where ``t`` is on
``p``'s team contribute. In the long-term network (LPN) every match after
the first co-play contributes, discounted by ``exp(-(i - i_pt))`` where
``i_pt`` is the most recent co-play index.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .ingest import PlayerHistory
from .rating import MU0, RatingTimeline

SPN = "SPN"
LPN = "LPN"
KINDS = (SPN, LPN)
DEFAULT_MIN_COUNT = 3


@dataclass(frozen=True)
class DecayConfig:
    """Long-term discounting.

    ``horizon`` cuts contributions more than that many matches after the last
    co-play. ``growth=True`` uses ``exp(+(i - i_pt))`` instead of the decaying
    factor; it exists only for comparison runs.
    """

    horizon: Optional[int] = 50
    growth: bool = False

    def __post_init__(self):
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    def factor(self, gap: int) -> float:
        return math.exp(gap) if self.growth else math.exp(-gap)


class EdgeArrays(NamedTuple):
    """Edges as parallel arrays of node indices, sorted by ``(src, dst)``.

    The position of an edge in these arrays is its edge id.
    """

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    count: np.ndarray

    def __len__(self):
        return len(self.src)

    def take(self, idx) -> "EdgeArrays":
        return EdgeArrays(self.src[idx], self.dst[idx], self.weight[idx], self.count[idx])


@dataclass
class PerformanceNetwork:
    kind: str
    nodes: tuple[str, ...]
    edges: dict[tuple[str, str], tuple[float, int]] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = tuple(sorted(set(self.nodes)))
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def index(self) -> dict[str, int]:
        return {p: i for i, p in enumerate(self.nodes)}

    def sorted_edges(self) -> list[tuple[str, str]]:
        idx = self.index()
        return sorted(self.edges, key=lambda e: (idx[e[0]], idx[e[1]]))

    def edge_arrays(self) -> EdgeArrays:
        idx = self.index()
        keys = self.sorted_edges()
        return EdgeArrays(
            np.array([idx[p] for p, _ in keys], dtype=np.int64),
            np.array([idx[t] for _, t in keys], dtype=np.int64),
            np.array([self.edges[k][0] for k in keys], dtype=float),
            np.array([self.edges[k][1] for k in keys], dtype=np.int64),
        )

    def adjacency(self) -> np.ndarray:
        """Dense weighted adjacency matrix over ``nodes``."""
        W = np.zeros((self.n_nodes, self.n_nodes))
        e = self.edge_arrays()
        W[e.src, e.dst] = e.weight
        return W

    def subgraph(self, nodes) -> "PerformanceNetwork":
        keep = set(nodes)
        return PerformanceNetwork(
            self.kind, tuple(keep),
            {k: v for k, v in self.edges.items() if k[0] in keep and k[1] in keep})

    def out_edges(self) -> dict[str, list[tuple[str, float]]]:
        out = defaultdict(list)
        for (p, t) in self.sorted_edges():
            out[p].append((t, self.edges[(p, t)][0]))
        return out

    @classmethod
    def from_arrays(cls, kind, nodes: Sequence[str], arrays: EdgeArrays) -> "PerformanceNetwork":
        nodes = tuple(sorted(nodes))
        edges = {(nodes[s], nodes[d]): (float(w), int(c))
                 for s, d, w, c in zip(arrays.src, arrays.dst, arrays.weight, arrays.count)}
        return cls(kind, nodes, edges)


# -- per-match weights -------------------------------------------------------

def rating_deltas(history: PlayerHistory, timeline: RatingTimeline,
                  mu0: float = MU0) -> list[float]:
    """Per-match change in mean rating; the first match is measured from ``mu0``."""
    if len(timeline.points) < len(history.matches):
        raise ValueError(f"rating gap for {history.account_id}: "
                         f"{len(timeline.points)} points for {len(history.matches)} matches")
    mus = [r.mu for _, r in timeline.points[:len(history.matches)]]
    return [mu - prev for mu, prev in zip(mus, [mu0] + mus[:-1])]


def short_term_weight(history: PlayerHistory, timeline: RatingTimeline, i: int,
                      t: str, mu0: float = MU0) -> float:
    if t not in history.matches[i].teammates:
        raise ValueError(f"{t} is not a teammate of {history.account_id} at match {i}")
    return rating_deltas(history, timeline, mu0)[i]


def last_coplay(history: PlayerHistory, i: int, t: str) -> Optional[int]:
    for j in range(i, -1, -1):
        if t in history.matches[j].teammates:
            return j
    return None


def long_term_weight(history: PlayerHistory, timeline: RatingTimeline, i: int, t: str,
                     cfg: DecayConfig = DecayConfig(), mu0: float = MU0) -> float:
    j = last_coplay(history, i, t)
    if j is None:
        return 0.0
    gap = i - j
    if cfg.horizon is not None and gap > cfg.horizon:
        return 0.0
    return cfg.factor(gap) * rating_deltas(history, timeline, mu0)[i]


# -- aggregation -------------------------------------------------------------

def aggregate_network(histories: Mapping[str, PlayerHistory],
                      timelines: Mapping[str, RatingTimeline],
                      kind: str = SPN, cfg: DecayConfig = DecayConfig(),
                      mu0: float = MU0) -> PerformanceNetwork:
    """Sum per-match weights into a directed network over retained players.

    Edges only connect players that both have a history; co-play counts are
    the same for both kinds, only the weights differ.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    retained = set(histories)
    edges: dict[tuple[str, str], tuple[float, int]] = {}
    for p in sorted(histories):
        h = histories[p]
        tl = timelines.get(p)
        if tl is None:
            raise ValueError(f"rating gap: no timeline for {p}")
        deltas = rating_deltas(h, tl, mu0)
        weight: dict[str, float] = {}
        count: dict[str, int] = {}
        last: dict[str, int] = {}
        for entry, delta in zip(h.matches, deltas):
            i = entry.index
            for t in entry.teammates:
                if t in retained:
                    count[t] = count.get(t, 0) + 1
                    last[t] = i
            if kind == SPN:
                for t in entry.teammates:
                    if t in retained:
                        weight[t] = weight.get(t, 0.0) + delta
            else:
                expired = []
                for t, j in last.items():
                    gap = i - j
                    if cfg.horizon is not None and gap > cfg.horizon:
                        expired.append(t)  # revived by the next co-play
                        continue
                    weight[t] = weight.get(t, 0.0) + cfg.factor(gap) * delta
                for t in expired:
                    del last[t]
        for t in count:
            edges[(p, t)] = (weight.get(t, 0.0), count[t])
    return PerformanceNetwork(kind, tuple(retained), edges)


def threshold_edges(net: PerformanceNetwork, min_count: int = DEFAULT_MIN_COUNT) -> PerformanceNetwork:
    """Drop edges co-played fewer than ``min_count`` times; keep every node."""
    return PerformanceNetwork(
        net.kind, net.nodes,
        {k: v for k, v in net.edges.items() if v[1] >= min_count})


def weak_components(net: PerformanceNetwork) -> list[tuple[str, ...]]:
    """Weakly connected components, largest first, ties by smallest member."""
    n = net.n_nodes
    if n == 0:
        return []
    e = net.edge_arrays()
    graph = coo_matrix((np.ones(len(e.src)), (e.src, e.dst)), shape=(n, n))
    _, labels = connected_components(graph, directed=True, connection="weak")
    comps: dict[int, list[str]] = defaultdict(list)
    for node, lab in zip(net.nodes, labels):
        comps[lab].append(node)
    return sorted((tuple(c) for c in comps.values()), key=lambda c: (-len(c), c[0]))


def largest_connected_component(net: PerformanceNetwork) -> PerformanceNetwork:
    comps = weak_components(net)
    if not comps:
        return PerformanceNetwork(net.kind, ())
    return net.subgraph(comps[0])


# -- rank correlation --------------------------------------------------------

def _tie_pairs(sorted_values: np.ndarray) -> int:
    if len(sorted_values) == 0:
        return 0
    _, runs = np.unique(sorted_values, return_counts=True)
    return int((runs * (runs - 1) // 2).sum())


def _count_inversions(ranks: np.ndarray) -> int:
    """Pairs ``i < j`` with ``ranks[i] > ranks[j]`` (Fenwick tree)."""
    size = int(ranks.max()) + 1 if len(ranks) else 0
    tree = [0] * (size + 1)
    inversions = 0
    seen = 0
    for r in ranks.tolist():
        # elements seen so far with rank <= r
        k, le = r + 1, 0
        while k > 0:
            le += tree[k]
            k -= k & -k
        inversions += seen - le
        k = r + 1
        while k <= size:
            tree[k] += 1
            k += k & -k
        seen += 1
    return inversions


def kendall_tau_b(x, y) -> float:
    """Kendall's tau-b with tie correction, in ``O(n log n)``.

    Returns ``nan`` when either input is constant.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    n = len(x)
    if n < 2:
        raise ValueError("Kendall's tau needs at least 2 observations")
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xs)
    n2 = _tie_pairs(np.sort(ys))
    same = np.concatenate(([False], (xs[1:] == xs[:-1]) & (ys[1:] == ys[:-1])))
    run_ids = np.cumsum(~same)
    _, joint = np.unique(run_ids, return_counts=True)
    n3 = int((joint * (joint - 1) // 2).sum())
    ranks = np.unique(ys, return_inverse=True)[1]
    discordant = _count_inversions(ranks)
    denom = (n0 - n1) * (n0 - n2)
    if denom == 0:
        return float("nan")
    return (n0 - n1 - n2 + n3 - 2 * discordant) / math.sqrt(denom)


def _check_same_edges(spn: PerformanceNetwork, lpn: PerformanceNetwork) -> None:
    if set(spn.edges) != set(lpn.edges):
        raise ValueError("networks must share the same edge set")


def kendall_tau_global(spn: PerformanceNetwork, lpn: PerformanceNetwork) -> float:
    """Tau-b between the two networks' weights over their common edge list."""
    _check_same_edges(spn, lpn)
    keys = spn.sorted_edges()
    if len(keys) < 2:
        raise ValueError("Kendall's tau is undefined for fewer than 2 edges")
    return kendall_tau_b([spn.edges[k][0] for k in keys], [lpn.edges[k][0] for k in keys])


@dataclass
class PerPlayerTau:
    taus: dict[str, float]
    skipped_few_edges: int = 0
    skipped_undefined: int = 0


def kendall_tau_per_player(spn: PerformanceNetwork, lpn: PerformanceNetwork) -> PerPlayerTau:
    """Tau-b between each player's out-edge weights in the two networks.

    Players with fewer than two out-edges are skipped, as are players whose
    weights are constant in either network (tau undefined).
    """
    _check_same_edges(spn, lpn)
    result = PerPlayerTau({})
    out = spn.out_edges()
    for p in spn.nodes:
        links = out.get(p, [])
        if len(links) < 2:
            result.skipped_few_edges += 1
            continue
        tau = kendall_tau_b([w for _, w in links], [lpn.edges[(p, t)][0] for t, _ in links])
        if math.isnan(tau):
            result.skipped_undefined += 1
        else:
            result.taus[p] = tau
    return result


# -- histograms and files ------------------------------------------------------

def histogram(values, bins=20, value_range=None) -> list[tuple[float, float, int]]:
    """``(bin_low, bin_high, count)`` rows for plot-ready CSV output."""
    values = np.asarray(list(values), dtype=float)
    if value_range is None and len(values) == 0:
        value_range = (0.0, 1.0)
    counts, edges = np.histogram(values, bins=bins, range=value_range)
    return [(float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


def write_histogram(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["bin_low", "bin_high", "count"])
        for lo, hi, c in rows:
            writer.writerow([repr(lo), repr(hi), c])


def write_network(net: PerformanceNetwork, path) -> None:
    """TSV edge list ``src dst weight co_play_count`` after a one-line header."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"# kind={net.kind}\tnodes={net.n_nodes}\n")
        for p, t in net.sorted_edges():
            w, c = net.edges[(p, t)]
            handle.write(f"{p}\t{t}\t{w!r}\t{c}\n")


def read_network(path) -> PerformanceNetwork:
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().lstrip("#").split()
        meta = dict(item.split("=", 1) for item in header)
        edges = {}
        nodes = set()
        for line in handle:
            if not line.strip():
                continue
            p, t, w, c = line.rstrip("\n").split("\t")
            edges[(p, t)] = (float(w), int(c))
            nodes.update((p, t))
    # isolated nodes are not representable in an edge list
    if len(nodes) > int(meta["nodes"]):
        raise ValueError(f"{path}: header declares {meta['nodes']} nodes, "
                         f"edge list covers {len(nodes)}")
    return PerformanceNetwork(meta["kind"], tuple(nodes), edges)
