import numpy as np
import pytest
from scipy import stats

from coplay import evaluate
from coplay.evaluate import SampleSpec, SplitSpec
from coplay.models import TrainConfig
from coplay.perfnet import EdgeArrays
from coplay.synth import generate_heavy_tailed_network, generate_planted_network


def dyadic(rng, size, ties=False):
    """Weights that are multiples of 1/16, so every sum below is exact in any order."""
    top = 4 if ties else 400
    return rng.integers(-top, top, size) / 16.0


def edge_fixture(rng, n_nodes, m):
    pairs = [(i, j) for i in range(n_nodes) for j in range(n_nodes) if i != j]
    pick = np.sort(rng.choice(len(pairs), m, replace=False))
    src = np.array([pairs[k][0] for k in pick], dtype=np.int64)
    dst = np.array([pairs[k][1] for k in pick], dtype=np.int64)
    return src, dst


def naive_mse(t, p):
    total = 0.0
    for a, b in zip(t, p):
        total += (a - b) ** 2
    return total / len(t)


def naive_avg_rec(t, p, k):
    order = sorted(range(len(t)), key=lambda i: (-p[i], i))
    return sum(t[i] for i in order[:k]) / k


def naive_mane_per_node(train, test, pred):
    """Rank every out-link of a node twice by sorting explicit tuples."""
    out = {}
    for i in sorted(set(train.src.tolist()) | set(test.src.tolist())):
        tr = [(int(d), float(w)) for s, d, w in zip(train.src, train.dst, train.weight) if s == i]
        te = [(int(d), float(w), float(q))
              for s, d, w, q in zip(test.src, test.dst, test.weight, pred) if s == i]
        if not tr or not te:
            continue
        true_items = [(-w, d) for d, w in tr] + [(-w, d) for d, w, _ in te]
        pred_items = [(-w, d) for d, w in tr] + [(-q, d) for d, _, q in te]
        true_rank = {d: r for r, (_, d) in enumerate(sorted(true_items))}
        pred_rank = {d: r for r, (_, d) in enumerate(sorted(pred_items))}
        disp = sum(abs(pred_rank[d] - true_rank[d]) for d, _, _ in te)
        out[i] = disp / (len(tr) * len(te))
    return out


class TestMetricOracles:
    @pytest.mark.parametrize("seed", range(25))
    def test_all_metrics_exact(self, seed):
        rng = np.random.default_rng(seed)
        n_nodes = int(rng.integers(3, 7))
        m = int(rng.integers(4, min(20, n_nodes * (n_nodes - 1)) + 1))
        src, dst = edge_fixture(rng, n_nodes, m)
        ties = bool(seed % 2)
        w = dyadic(rng, m, ties)
        hidden = np.zeros(m, dtype=bool)
        hidden[rng.choice(m, max(1, m // 3), replace=False)] = True
        test = EdgeArrays(src[hidden], dst[hidden], w[hidden], np.full(hidden.sum(), 3))
        train = EdgeArrays(src[~hidden], dst[~hidden], w[~hidden], np.full((~hidden).sum(), 3))
        pred = dyadic(rng, len(test), ties)

        assert evaluate.mse(test.weight, pred) == naive_mse(test.weight, pred)
        for k in range(1, len(test) + 1):
            assert evaluate.avg_rec_at_k(test.weight, pred, k) == naive_avg_rec(test.weight, pred, k)
        curve = evaluate.avg_rec_curve(test.weight, pred, range(1, len(test) + 1))
        assert curve == {k: naive_avg_rec(test.weight, pred, k) for k in curve}
        expected = naive_mane_per_node(train, test, pred)
        if expected:
            got = evaluate.mane_detail(test, train, pred)
            assert got.per_node == expected
            assert got.value == float(np.mean(list(expected.values())))

    def test_literal_sum(self):
        assert evaluate.mse([1.0, 2.0], [0.0, 0.0], literal_sum=True) == 5.0

    def test_ideal_mane_is_zero(self, rng):
        src, dst = edge_fixture(rng, 6, 20)
        w = rng.normal(size=20)
        test = EdgeArrays(src[:8], dst[:8], w[:8], np.full(8, 3))
        train = EdgeArrays(src[8:], dst[8:], w[8:], np.full(12, 3))
        assert evaluate.mane(test, train, test.weight) == 0.0

    def test_errors(self):
        with pytest.raises(ValueError):
            evaluate.mse([], [])
        with pytest.raises(ValueError):
            evaluate.mse([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            evaluate.avg_rec_at_k([1.0, 2.0], [1.0, 2.0], 3)


class TestSplit:
    def test_counts_and_disjointness(self):
        net = generate_planted_network(30, 2, density=0.3, seed=1).net
        train, test = evaluate.split_edges(net, SplitSpec(0.2, 5))
        assert len(test) == evaluate.hidden_count(net.n_edges, 0.2)
        assert train.n_edges + len(test) == net.n_edges
        assert train.nodes == net.nodes
        nodes = net.nodes
        hidden = {(nodes[s], nodes[d]) for s, d in zip(test.src, test.dst)}
        assert not hidden & set(train.edges)

    def test_deterministic(self):
        net = generate_planted_network(20, 2, seed=2).net
        a = evaluate.split_edges(net, SplitSpec(0.2, 9))[1]
        b = evaluate.split_edges(net, SplitSpec(0.2, 9))[1]
        np.testing.assert_array_equal(a.src, b.src)

    def test_too_small(self):
        net = generate_planted_network(2, 1, seed=0).net
        with pytest.raises(ValueError, match="nothing to test"):
            evaluate.split_edges(net, SplitSpec(0.2))


class TestSampler:
    def test_collects_target_nodes(self):
        net = generate_heavy_tailed_network(800, seed=3)
        nodes = evaluate.sample_subnetwork(net, SampleSpec(200, 0.15, 1, 4))
        assert len(nodes) == 200 and np.all(np.diff(nodes) > 0)

    def test_target_too_large(self):
        net = generate_planted_network(10, 2, seed=0).net
        with pytest.raises(ValueError):
            evaluate.sample_subnetwork(net, SampleSpec(11))

    @pytest.mark.parametrize("seed", range(5))
    def test_weight_distribution_preserved(self, seed):
        net = generate_heavy_tailed_network(5000, seed=seed)
        nodes = evaluate.sample_subnetwork(net, SampleSpec(1024, 0.15, 1, seed))
        e = net.edge_arrays()
        inside = e.weight[evaluate.within(e, nodes)]
        assert stats.ks_2samp(inside, e.weight).statistic <= 0.1


class TestBenchmark:
    @pytest.fixture(scope="class")
    def report(self):
        net = generate_planted_network(40, 2, 0.1, 0.5, "odd-power", seed=0, factor_law="sphere").net
        cfg = TrainConfig(epochs=20, learning_rate=1e-2, optimizer="adam")
        cfgs = {"gf": cfg, "traditional_ae": cfg, "teammate_ae": cfg}
        return evaluate.run_benchmark(net, tuple(cfgs), SplitSpec(0.2, 0), SampleSpec(30, 0.15, 3, 0),
                                      dims=(4,), runs=2, train_cfgs=cfgs, ks=(1, 2, 5, 10))

    def test_ideal_bounds_every_model(self, report):
        ideal = {(r["sample"], r["metric"]): r["value"] for r in report.records
                 if r["model"] == "ideal"}
        checked = 0
        for r in report.records:
            if r["metric"].startswith("avgrec@") and r["model"] != "ideal":
                assert r["value"] <= ideal[(r["sample"], r["metric"])]
                checked += 1
        assert checked > 0

    def test_ideal_mane_zero(self, report):
        assert all(v == 0.0 for v in report.values("ideal", 0, "mane").values())

    def test_gains_and_aggregate(self, report):
        assert len(report.gains("teammate_ae", 4, "mse")) == 6
        rows = report.aggregate()
        base = [r for r in rows if r["model"] == "baseline" and r["metric"] == "mse"]
        assert base[0]["gain_mean"] == 0.0
        assert {r["model"] for r in report.curves()} >= {"baseline", "gf@4"}

    def test_report_roundtrip(self, report, tmp_path):
        evaluate.write_report(report, tmp_path / "r.csv")
        back = evaluate.read_report(tmp_path / "r.csv")
        assert len(back.records) == len(report.records)
        np.testing.assert_array_equal(back.gains("gf", 4, "mse"), report.gains("gf", 4, "mse"))

    def test_failures_recorded(self):
        net = generate_planted_network(20, 2, seed=0).net
        bad = {"gf": TrainConfig(learning_rate=1e6, epochs=5)}
        net.edges.update({k: (v[0] * 1e6, v[1]) for k, v in net.edges.items()})
        rep = evaluate.run_benchmark(net, ("gf",), SplitSpec(0.2, 0),
                                     sample=SampleSpec(20, 0.15, 1, 0), dims=(2,), train_cfgs=bad)
        assert rep.failures and rep.failures[0]["model"] == "gf"
        assert all(np.isnan(v) for v in rep.values("gf", 2, "mse").values())


def test_substreams_are_independent():
    a = evaluate.substream(1, "split").random()
    assert a == evaluate.substream(1, "split").random()
    assert a != evaluate.substream(1, "sample").random()
