"""Synthetic match logs and planted networks with known ground truth."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ingest import MatchRecord, PlayerSlot
from .perfnet import LPN, SPN, PerformanceNetwork, largest_connected_component

POLICIES = ("uniform", "skill-sorted")
NONLINEARITIES = ("none", "odd-power")
FACTOR_LAWS = ("gaussian", "sphere")
WIN_SLOPE = 0.1
EPOCH_2015 = 1_420_070_400


@dataclass(frozen=True)
class SynthConfig:
    players: int = 200
    matches: int = 3000
    skill_mean: float = 25.0
    skill_sd: float = 8.0
    transfer: float = 0.0
    policy: str = "uniform"
    seed: int = 0
    activity_shape: float = 1.5  # Pareto shape of per-player activity; smaller = heavier tail
    window: int = 20  # candidate pool width for skill-sorted assembly
    fixed_skills: tuple = ()  # ((player_index, skill), ...)

    def __post_init__(self):
        if self.players < 10:
            raise ValueError("need at least 10 players")
        if self.matches < 1:
            raise ValueError("need at least 1 match")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")


@dataclass
class SynthLog:
    matches: list[MatchRecord]
    initial_skill: dict[str, float]
    final_skill: dict[str, float]
    config: SynthConfig

    def match_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for m in self.matches:
            for s in m.players:
                counts[s.account_id] = counts.get(s.account_id, 0) + 1
        return counts


def player_id(i: int) -> str:
    return f"p{i:05d}"


def generate_match_log(cfg: SynthConfig) -> SynthLog:
    """Simulate 5v5 matches between players with latent skills.

    Team A wins with probability ``1 / (1 + exp(-0.1 * (sum_A - sum_B)))``
    over latent skills. After each match every player's skill moves by
    ``transfer * (s_t - s_p)`` for each of its four teammates ``t``.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.players
    skill = rng.normal(cfg.skill_mean, cfg.skill_sd, n)
    for idx, value in cfg.fixed_skills:
        skill[idx] = value
    pinned = {idx for idx, _ in cfg.fixed_skills}
    activity = rng.pareto(cfg.activity_shape, n) + 1.0
    activity /= activity.sum()
    ids = [player_id(i) for i in range(n)]
    initial = dict(zip(ids, skill.tolist()))

    matches = []
    for k in range(cfg.matches):
        if cfg.policy == "uniform":
            chosen = rng.choice(n, 10, replace=False, p=activity)
        else:
            anchor = rng.choice(n, p=activity)
            order = np.argsort(np.abs(skill - skill[anchor]), kind="stable")
            pool = order[:max(cfg.window, 10)]
            weights = activity[pool] / activity[pool].sum()
            chosen = rng.choice(pool, 10, replace=False, p=weights)
        chosen = rng.permutation(chosen)
        team_a, team_b = chosen[:5], chosen[5:]
        diff = skill[team_a].sum() - skill[team_b].sum()
        a_wins = bool(rng.random() < 1.0 / (1.0 + math.exp(-WIN_SLOPE * diff)))
        slots = tuple(PlayerSlot(ids[i], "A", 0) for i in team_a) + \
            tuple(PlayerSlot(ids[i], "B", 0) for i in team_b)
        matches.append(MatchRecord(f"m{k:07d}", EPOCH_2015 + 600 * k,
                                   int(rng.integers(900, 3600)), a_wins, slots))
        if cfg.transfer:
            for team in (team_a, team_b):
                s = skill[team]
                moved = s + cfg.transfer * (s.sum() - 5 * s)
                for i, v in zip(team, moved):
                    if i not in pinned:
                        skill[i] = v
    return SynthLog(matches, initial, dict(zip(ids, skill.tolist())), cfg)


# -- planted networks --------------------------------------------------------------

@dataclass
class PlantedNetwork:
    net: PerformanceNetwork
    truth: np.ndarray  # noise-free weight for every ordered pair
    source_factors: np.ndarray
    target_factors: np.ndarray
    noise: float
    meta: dict = field(default_factory=dict)


def odd_power(x: np.ndarray, d_true: Optional[int] = None) -> np.ndarray:
    """Cubic link with its linear part removed, scaled to unit variance.

    With ``d_true=None`` the inner product is taken as standard normal and the
    result is ``(x**3 - 3x) / sqrt(6)``. With ``d_true`` given, ``x`` is the
    inner product of two vectors of norm ``d_true**0.25`` drawn uniformly on
    the sphere; the linear projection ``3 d / (d + 2) * x`` is removed instead.
    Either way a linear function of ``x`` explains none of the variance.
    """
    x = np.asarray(x, dtype=float)
    if d_true is None:
        return (x ** 3 - 3.0 * x) / math.sqrt(6.0)
    k = 3.0 * d_true / (d_true + 2.0)
    var = 15.0 * d_true ** 2 / ((d_true + 2.0) * (d_true + 4.0)) - k * k
    return (x ** 3 - k * x) / math.sqrt(var)


def generate_planted_network(nodes: int, d_true: int, noise: float = 0.0,
                             density: float = 1.0, nonlinearity: str = "none",
                             seed: int = 0, kind: str = SPN,
                             co_play_count: int = 3,
                             factor_law: str = "gaussian") -> PlantedNetwork:
    """Directed network with weights ``phi(<a_i, b_j>) + noise * N(0, 1)``.

    Factors are drawn so that ``<a_i, b_j>`` is approximately standard normal.
    Each ordered pair ``i != j`` is an edge independently with probability
    ``density``.
    """
    if d_true < 1:
        raise ValueError("d_true must be >= 1")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    if nonlinearity not in NONLINEARITIES:
        raise ValueError(f"nonlinearity must be one of {NONLINEARITIES}")
    if factor_law not in FACTOR_LAWS:
        raise ValueError(f"factor_law must be one of {FACTOR_LAWS}")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((nodes, d_true))
    b = rng.standard_normal((nodes, d_true))
    if factor_law == "sphere":
        # fixed norm d_true**0.25 bounds |<a, b>| by sqrt(d_true), variance stays 1
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        b /= np.linalg.norm(b, axis=1, keepdims=True)
        a *= d_true ** 0.25
        b *= d_true ** 0.25
    else:
        a *= d_true ** -0.25
        b *= d_true ** -0.25
    inner = a @ b.T
    if nonlinearity == "odd-power":
        truth = odd_power(inner, d_true if factor_law == "sphere" else None)
    else:
        truth = inner
    np.fill_diagonal(truth, 0.0)
    present = rng.random((nodes, nodes)) < density
    np.fill_diagonal(present, False)
    noisy = truth + noise * rng.standard_normal((nodes, nodes))
    ids = [f"n{i:05d}" for i in range(nodes)]
    src, dst = np.nonzero(present)
    edges = {(ids[i], ids[j]): (float(noisy[i, j]), co_play_count)
             for i, j in zip(src.tolist(), dst.tolist())}
    net = PerformanceNetwork(kind, tuple(ids), edges)
    return PlantedNetwork(net, truth, a, b, noise,
                          {"d_true": d_true, "density": density,
                           "nonlinearity": nonlinearity, "seed": seed,
                           "factor_law": factor_law})


def generate_heavy_tailed_network(nodes: int = 5000, mean_degree: float = 10.0,
                                  exponent: float = 2.5, seed: int = 0,
                                  kind: str = SPN) -> PerformanceNetwork:
    """Chung-Lu directed graph with power-law expected degrees.

    Link weights are Student-t (3 degrees of freedom) scaled to the range
    seen in co-play networks. Returns the largest weakly connected component.
    """
    rng = np.random.default_rng(seed)
    expected = (rng.pareto(exponent - 1.0, nodes) + 1.0)
    expected *= mean_degree / expected.mean()
    total = expected.sum()
    m = rng.poisson(mean_degree * nodes)
    src = rng.choice(nodes, m, p=expected / total)
    dst = rng.choice(nodes, m, p=expected / total)
    keep = src != dst
    pairs = np.unique(np.stack([src[keep], dst[keep]], axis=1), axis=0)
    weights = 0.1 * rng.standard_t(3, len(pairs))
    counts = 3 + rng.geometric(0.3, len(pairs)) - 1
    ids = [f"n{i:05d}" for i in range(nodes)]
    edges = {(ids[i], ids[j]): (float(w), int(c))
             for (i, j), w, c in zip(pairs.tolist(), weights, counts)}
    return largest_connected_component(PerformanceNetwork(kind, tuple(ids), edges))


def write_ground_truth(planted: PlantedNetwork, path) -> None:
    """JSON sidecar with the factors and noise-free weights."""
    doc = {
        "nodes": list(planted.net.nodes),
        "noise": planted.noise,
        "meta": planted.meta,
        "source_factors": planted.source_factors.tolist(),
        "target_factors": planted.target_factors.tolist(),
        "truth": planted.truth.tolist(),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle)


__all__ = [
    "SynthConfig", "SynthLog", "generate_match_log", "PlantedNetwork",
    "generate_planted_network", "generate_heavy_tailed_network", "odd_power",
    "write_ground_truth", "LPN", "SPN",
]
