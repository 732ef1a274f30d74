import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from coplay import ingest, perfnet, rating
from coplay.perfnet import LPN, SPN, DecayConfig, PerformanceNetwork

from conftest import make_match, random_log


def brute_force_network(log, retained, kind, cfg=DecayConfig(), mu0=rating.MU0):
    """Double loop over (player, teammate) pairs and every match of the player."""
    hist = ingest.build_histories(log, retained)
    tl = rating.rate_dataset(log, hist)
    edges = {}
    for p in sorted(retained):
        matches = hist[p].matches
        mus = [r.mu for _, r in tl[p].points]
        for t in sorted(retained):
            if t == p:
                continue
            together = [i for i, e in enumerate(matches) if t in e.teammates]
            if not together:
                continue
            w = 0.0
            for i in range(len(matches)):
                delta = mus[i] - (mus[i - 1] if i else mu0)
                past = [j for j in together if j <= i]
                if kind == SPN:
                    if i in together:
                        w = w + delta
                elif past:
                    gap = i - past[-1]
                    if cfg.horizon is None or gap <= cfg.horizon:
                        w = w + cfg.factor(gap) * delta
            edges[(p, t)] = (w, len(together))
    return edges, hist, tl


def small_log(seed):
    rng = np.random.default_rng(seed)
    n_players = int(rng.integers(10, 11))
    log = random_log(rng, n_players, int(rng.integers(1, 21)))
    ids = sorted({s.account_id for m in log for s in m.players})
    retained = [p for p in ids if rng.random() < 0.8] or ids[:1]
    return log, retained, rng


class TestAggregationOracle:
    @pytest.mark.parametrize("kind", [SPN, LPN])
    def test_hundred_seeds_exact(self, kind):
        for seed in range(100):
            log, retained, rng = small_log(seed)
            cfg = DecayConfig(horizon=int(rng.integers(1, 8)))
            expected, hist, tl = brute_force_network(log, retained, kind, cfg)
            net = perfnet.aggregate_network(hist, tl, kind, cfg)
            assert net.edges == expected, f"seed {seed}"
            assert net.nodes == tuple(sorted(retained))

    def test_horizon_none_and_growth(self):
        log, retained, _ = small_log(7)
        for cfg in (DecayConfig(horizon=None), DecayConfig(horizon=5, growth=True)):
            expected, hist, tl = brute_force_network(log, retained, LPN, cfg)
            assert perfnet.aggregate_network(hist, tl, LPN, cfg).edges == expected

    def test_weight_functions_agree_with_network(self):
        log, retained, _ = small_log(3)
        hist = ingest.build_histories(log, retained)
        tl = rating.rate_dataset(log, hist)
        spn = perfnet.aggregate_network(hist, tl, SPN)
        lpn = perfnet.aggregate_network(hist, tl, LPN)
        for (p, t), (w, _) in spn.edges.items():
            h = hist[p]
            short = sum(perfnet.short_term_weight(h, tl[p], i, t)
                        for i, e in enumerate(h.matches) if t in e.teammates)
            long = sum(perfnet.long_term_weight(h, tl[p], i, t) for i in range(len(h)))
            np.testing.assert_allclose(short, w, atol=1e-12)
            np.testing.assert_allclose(long, lpn.edges[(p, t)][0], atol=1e-12)

    def test_short_term_rejects_non_teammate(self):
        log, retained, _ = small_log(4)
        hist = ingest.build_histories(log, retained)
        tl = rating.rate_dataset(log, hist)
        p = retained[0]
        outsider = next(s.account_id for s in log[0].players
                        if s.account_id not in hist[p].matches[0].teammates and s.account_id != p)
        with pytest.raises(ValueError, match="not a teammate"):
            perfnet.short_term_weight(hist[p], tl[p], 0, outsider)


class TestLongTermConsistency:
    def test_fixed_teams_make_networks_equal(self):
        a, b = [f"a{i}" for i in range(5)], [f"b{i}" for i in range(5)]
        rng = np.random.default_rng(0)
        log = [make_match(f"m{k:03d}", a, b, bool(rng.random() < 0.5)) for k in range(15)]
        hist = ingest.build_histories(log, a + b)
        tl = rating.rate_dataset(log, hist)
        spn = perfnet.aggregate_network(hist, tl, SPN)
        lpn = perfnet.aggregate_network(hist, tl, LPN)
        assert spn.edges == lpn.edges

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 60))
    def test_decayed_weight_bounded_by_total_change(self, seed, horizon):
        rng = np.random.default_rng(seed)
        log = random_log(rng, 14, 30)
        players, _ = ingest.filter_experienced_players(log, 1)
        hist = ingest.build_histories(log, players)
        tl = rating.rate_dataset(log, hist)
        lpn = perfnet.aggregate_network(hist, tl, LPN, DecayConfig(horizon))
        for (p, _), (w, _) in lpn.edges.items():
            bound = sum(abs(d) for d in perfnet.rating_deltas(hist[p], tl[p]))
            assert abs(w) <= bound + 1e-12

    def test_growth_is_not_bounded(self):
        """The literal growth factor can exceed the total change; it is opt-in only."""
        a = [f"a{i}" for i in range(5)]
        others = [f"o{i}" for i in range(30)]
        log = [make_match("m000", a, others[:5])]
        log += [make_match(f"m{k:03d}", [a[0]] + others[5 + k % 20:9 + k % 20], others[:5], True)
                for k in range(1, 8)]
        hist = ingest.build_histories(log, a + others)
        tl = rating.rate_dataset(log, hist)
        lpn = perfnet.aggregate_network(hist, tl, LPN, DecayConfig(horizon=None, growth=True))
        bound = sum(abs(d) for d in perfnet.rating_deltas(hist["a0"], tl["a0"]))
        assert abs(lpn.edges[("a0", "a1")][0]) > bound


def flood_fill_components(net):
    adj = {p: set() for p in net.nodes}
    for p, t in net.edges:
        adj[p].add(t)
        adj[t].add(p)
    seen, comps = set(), []
    for start in net.nodes:
        if start in seen:
            continue
        queue, comp = deque([start]), []
        seen.add(start)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in adj[u] - seen:
                seen.add(v)
                queue.append(v)
        comps.append(tuple(sorted(comp)))
    return sorted(comps, key=lambda c: (-len(c), c[0]))


def random_sparse_net(rng, n, m):
    nodes = [f"n{i:03d}" for i in range(n)]
    edges = {}
    for _ in range(m):
        i, j = rng.choice(n, 2, replace=False)
        edges[(nodes[i], nodes[j])] = (float(rng.normal()), int(rng.integers(1, 6)))
    return PerformanceNetwork(SPN, tuple(nodes), edges)


class TestComponents:
    def test_against_flood_fill(self, rng):
        for _ in range(30):
            net = random_sparse_net(rng, int(rng.integers(1, 40)), int(rng.integers(0, 40)))
            assert perfnet.weak_components(net) == flood_fill_components(net)

    def test_tie_broken_by_smallest_id(self):
        net = PerformanceNetwork(SPN, ("c", "d", "a", "b"), {("d", "c"): (1.0, 3), ("b", "a"): (1.0, 3)})
        assert perfnet.largest_connected_component(net).nodes == ("a", "b")

    def test_threshold_keeps_nodes(self):
        net = PerformanceNetwork(SPN, ("a", "b", "c"), {("a", "b"): (1.0, 2), ("b", "c"): (0.5, 3)})
        kept = perfnet.threshold_edges(net, 3)
        assert kept.nodes == ("a", "b", "c")
        assert list(kept.edges) == [("b", "c")]

    def test_empty_network(self):
        assert perfnet.largest_connected_component(PerformanceNetwork(SPN, ())).n_nodes == 0


def tau_oracle(x, y):
    """Tau-b from an explicit loop over all pairs."""
    n = len(x)
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = np.sign(x[i] - x[j]), np.sign(y[i] - y[j])
            if dx == 0:
                tx += 1
            if dy == 0:
                ty += 1
            if dx * dy > 0:
                conc += 1
            elif dx * dy < 0:
                disc += 1
    n0 = n * (n - 1) // 2
    denom = (n0 - tx) * (n0 - ty)
    return float("nan") if denom == 0 else (conc - disc) / math.sqrt(denom)


class TestKendall:
    def test_twenty_fixtures_exact(self):
        rng = np.random.default_rng(99)
        for k in range(20):
            n = int(rng.integers(2, 60))
            levels = int(rng.integers(2, 8))
            x = rng.integers(0, levels, n).astype(float) if k % 2 else rng.normal(size=n)
            y = rng.integers(0, levels, n).astype(float) if k % 3 else rng.normal(size=n)
            got, want = perfnet.kendall_tau_b(x, y), tau_oracle(x, y)
            assert got == want or (math.isnan(got) and math.isnan(want))

    def test_matches_scipy(self, rng):
        x, y = rng.integers(0, 5, 200), rng.integers(0, 7, 200)
        np.testing.assert_allclose(perfnet.kendall_tau_b(x, y), stats.kendalltau(x, y).statistic,
                                   rtol=1e-12)

    def test_identical_and_reversed(self, rng):
        x = rng.normal(size=30)
        assert perfnet.kendall_tau_b(x, x) == 1.0
        assert perfnet.kendall_tau_b(x, -x) == -1.0

    def test_degenerate(self):
        assert math.isnan(perfnet.kendall_tau_b([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]))
        with pytest.raises(ValueError):
            perfnet.kendall_tau_b([1.0], [2.0])

    def test_network_level_against_oracle(self):
        log, retained, _ = small_log(11)
        hist = ingest.build_histories(log, retained)
        tl = rating.rate_dataset(log, hist)
        spn = perfnet.aggregate_network(hist, tl, SPN)
        lpn = perfnet.aggregate_network(hist, tl, LPN, DecayConfig(horizon=3))
        keys = spn.sorted_edges()
        assert perfnet.kendall_tau_global(spn, lpn) == tau_oracle(
            [spn.edges[k][0] for k in keys], [lpn.edges[k][0] for k in keys])
        per = perfnet.kendall_tau_per_player(spn, lpn)
        for p, tau in per.taus.items():
            ks = [k for k in keys if k[0] == p]
            assert tau == tau_oracle([spn.edges[k][0] for k in ks], [lpn.edges[k][0] for k in ks])
        assert len(per.taus) + per.skipped_few_edges + per.skipped_undefined == spn.n_nodes

    def test_identical_networks_give_one(self):
        net = random_sparse_net(np.random.default_rng(5), 20, 60)
        assert perfnet.kendall_tau_global(net, net) == 1.0
        reversed_net = PerformanceNetwork(LPN, net.nodes,
                                          {k: (-w, c) for k, (w, c) in net.edges.items()})
        assert perfnet.kendall_tau_global(net, reversed_net) == -1.0

    def test_edge_sets_must_match(self):
        a = PerformanceNetwork(SPN, ("a", "b"), {("a", "b"): (1.0, 3)})
        b = PerformanceNetwork(LPN, ("a", "b"), {("b", "a"): (1.0, 3)})
        with pytest.raises(ValueError, match="same edge set"):
            perfnet.kendall_tau_global(a, b)


class TestFiles:
    def test_network_roundtrip(self, tmp_path, rng):
        net = perfnet.largest_connected_component(random_sparse_net(rng, 30, 80))
        perfnet.write_network(net, tmp_path / "n.tsv")
        back = perfnet.read_network(tmp_path / "n.tsv")
        assert back.kind == net.kind and back.nodes == net.nodes and back.edges == net.edges

    def test_histogram_counts(self):
        rows = perfnet.histogram([0.0, 0.5, 1.0, 1.0], bins=2, value_range=(0.0, 1.0))
        assert [c for _, _, c in rows] == [1, 3]
