import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from coplay import rating
from coplay.rating import Outcome, Rating, RatingConfig, update_two_team

from conftest import make_match, random_log


def quadrature_posterior(team_a, team_b, outcome, cfg=RatingConfig()):
    """Posterior moments by integrating the performance difference numerically.

    ``d = sum(perf_A) - sum(perf_B)`` is Gaussian; the outcome restricts it to
    a region. Every skill is jointly Gaussian with ``d``, so its posterior
    moments follow from the first two moments of the truncated ``d``.
    """
    var_a = [r.sigma ** 2 + cfg.tau ** 2 for r in team_a]
    var_b = [r.sigma ** 2 + cfg.tau ** 2 for r in team_b]
    m = sum(r.mu for r in team_a) - sum(r.mu for r in team_b)
    c2 = sum(var_a) + sum(var_b) + 10 * cfg.beta ** 2
    c = math.sqrt(c2)
    margin = stats.norm.ppf((1 + cfg.draw_probability) / 2) * math.sqrt(10) * cfg.beta
    if outcome is Outcome.A_WINS:
        lo, hi = (margin - m) / c, np.inf
    elif outcome is Outcome.B_WINS:
        lo, hi = -np.inf, (-margin - m) / c
    else:
        lo, hi = (-margin - m) / c, (margin - m) / c
    kw = dict(epsabs=1e-14, epsrel=1e-12, limit=200)
    mass = integrate.quad(stats.norm.pdf, lo, hi, **kw)[0]
    mean_z = integrate.quad(lambda z: z * stats.norm.pdf(z), lo, hi, **kw)[0] / mass
    second = integrate.quad(lambda z: z * z * stats.norm.pdf(z), lo, hi, **kw)[0] / mass
    mean_d = m + c * mean_z
    var_d = c2 * (second - mean_z ** 2)

    def post(team, variances, sign):
        out = []
        for r, s2 in zip(team, variances):
            gain = sign * s2 / c2
            mu = r.mu + gain * (mean_d - m)
            var = s2 - s2 * s2 / c2 + gain * gain * var_d
            out.append((mu, math.sqrt(var)))
        return out

    return post(team_a, var_a, 1.0), post(team_b, var_b, -1.0)


def random_fixture(rng):
    team = lambda: tuple(Rating(rng.uniform(10, 40), rng.uniform(1.0, 25 / 3)) for _ in range(5))
    outcome = [Outcome.A_WINS, Outcome.B_WINS, Outcome.DRAW][rng.integers(3)]
    return team(), team(), outcome


class TestQuadratureOracle:
    def test_fifty_fixtures(self):
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        worst = 0.0
        for _ in range(50):
            a, b, outcome = random_fixture(rng)
            new_a, new_b = update_two_team(a, b, outcome)
            exp_a, exp_b = quadrature_posterior(a, b, outcome)
            for got, want in zip(new_a + new_b, exp_a + exp_b):
                worst = max(worst, abs(got.mu - want[0]), abs(got.sigma - want[1]))
        assert worst <= 1e-6
        assert time.perf_counter() - start < 30

    def test_default_prior_values(self):
        """Frozen reference for the all-default decisive match."""
        team = [rating.initial_rating()] * 5
        new_a, new_b = update_two_team(team, team, Outcome.A_WINS)
        exp_a, exp_b = quadrature_posterior(team, team, Outcome.A_WINS)
        np.testing.assert_allclose([r.mu for r in new_a], [e[0] for e in exp_a], atol=1e-9)
        np.testing.assert_allclose(new_a[0].mu, 26.965875696635, atol=1e-9)
        np.testing.assert_allclose(new_a[0].sigma, 8.114624092416, atol=1e-9)


class TestSymmetry:
    def test_default_decisive_is_antisymmetric(self):
        team = [rating.initial_rating()] * 5
        new_a, new_b = update_two_team(team, team, Outcome.A_WINS)
        for ra, rb in zip(new_a, new_b):
            assert abs((ra.mu - 25.0) + (rb.mu - 25.0)) <= 1e-9
            assert ra.mu > 25.0 > rb.mu
            assert ra.sigma < 25 / 3 and rb.sigma < 25 / 3

    def test_b_wins_mirrors_a_wins(self, rng):
        a, b, _ = random_fixture(rng)
        x_a, x_b = update_two_team(a, b, Outcome.B_WINS)
        y_b, y_a = update_two_team(b, a, Outcome.A_WINS)
        assert x_a == y_a and x_b == y_b

    def test_draw_between_equals_leaves_means(self):
        team = [rating.initial_rating()] * 5
        new_a, new_b = update_two_team(team, team, Outcome.DRAW)
        np.testing.assert_allclose([r.mu for r in new_a + new_b], 25.0, atol=1e-12)


class TestCorrectionFunctions:
    @pytest.mark.parametrize("t", [-4.0, -1.0, 0.0, 0.7, 3.0])
    @pytest.mark.parametrize("eps", [0.0, 0.1, 0.5])
    def test_win_functions_are_log_cdf_derivatives(self, t, eps):
        h = 1e-5
        log_cdf = lambda x: stats.norm.logcdf(x - eps)
        v_fd = (log_cdf(t + h) - log_cdf(t - h)) / (2 * h)
        np.testing.assert_allclose(rating.v_win(t, eps), v_fd, rtol=1e-6)
        w_fd = -(rating.v_win(t + h, eps) - rating.v_win(t - h, eps)) / (2 * h)
        np.testing.assert_allclose(rating.w_win(t, eps), w_fd, rtol=1e-5)

    @pytest.mark.parametrize("t", [-2.0, -0.3, 0.0, 0.4, 1.5])
    @pytest.mark.parametrize("eps", [0.1, 0.5, 1.0])
    def test_draw_functions_are_log_mass_derivatives(self, t, eps):
        h = 1e-5
        log_mass = lambda x: math.log(stats.norm.cdf(eps - x) - stats.norm.cdf(-eps - x))
        v_fd = (log_mass(t + h) - log_mass(t - h)) / (2 * h)
        np.testing.assert_allclose(rating.v_draw(t, eps), v_fd, rtol=1e-5, atol=1e-9)
        w_fd = -(rating.v_draw(t + h, eps) - rating.v_draw(t - h, eps)) / (2 * h)
        np.testing.assert_allclose(rating.w_draw(t, eps), w_fd, rtol=1e-5, atol=1e-9)

    def test_extreme_upset_stays_finite(self):
        assert math.isfinite(rating.v_win(-40.0, 0.0))
        np.testing.assert_allclose(rating.v_win(-40.0, 0.0), 40.0, rtol=1e-2)

    def test_lopsided_draw_stays_finite(self):
        strong = [Rating(200.0, 1.0)] * 5
        weak = [Rating(0.0, 1.0)] * 5
        new_a, new_b = update_two_team(strong, weak, Outcome.DRAW)
        assert all(math.isfinite(r.mu) and r.sigma > 0 for r in new_a + new_b)
        assert new_a[0].mu < 200.0 < new_b[0].mu + 200.0

    def test_w_in_unit_interval(self):
        for t in np.linspace(-30, 30, 121):
            assert 0 < rating.w_win(t, 0.1) < 1
            assert 0 < rating.w_draw(t, 0.3) < 1


class TestValidation:
    def test_team_size(self):
        with pytest.raises(ValueError, match="exactly 5"):
            update_two_team([Rating()] * 4, [Rating()] * 5, Outcome.A_WINS)

    @pytest.mark.parametrize("kwargs", [dict(sigma=0.0), dict(mu=float("nan")),
                                        dict(sigma=float("inf"))])
    def test_bad_rating(self, kwargs):
        with pytest.raises(ValueError):
            Rating(**kwargs)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            RatingConfig(draw_probability=1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=10, max_size=10),
       st.lists(st.floats(0.5, 10), min_size=10, max_size=10),
       st.sampled_from(list(Outcome)))
def test_update_properties(mus, sigmas, outcome):
    a = tuple(Rating(m, s) for m, s in zip(mus[:5], sigmas[:5]))
    b = tuple(Rating(m, s) for m, s in zip(mus[5:], sigmas[5:]))
    cfg = RatingConfig()
    new_a, new_b = update_two_team(a, b, outcome, cfg)
    for old, new in zip(a + b, new_a + new_b):
        assert new.sigma <= math.sqrt(old.sigma ** 2 + cfg.tau ** 2) + 1e-12
    if outcome is Outcome.A_WINS:
        assert all(n.mu >= o.mu for o, n in zip(a, new_a))
        assert all(n.mu <= o.mu for o, n in zip(b, new_b))
    # mean shifts are proportional to inflated variance within a team
    shifts = [(n.mu - o.mu) / (o.sigma ** 2 + cfg.tau ** 2) for o, n in zip(a, new_a)]
    np.testing.assert_allclose(shifts, shifts[0], rtol=1e-7, atol=1e-14)


class TestDataset:
    def test_timelines_align_with_histories(self, rng):
        from coplay import ingest
        log = random_log(rng, 15, 40)
        players, _ = ingest.filter_experienced_players(log, 10)
        hist = ingest.build_histories(log, players)
        tl = rating.rate_dataset(log, hist)
        assert set(tl) == set(hist)
        for p in hist:
            assert [i for i, _ in tl[p].points] == list(range(len(hist[p])))

    def test_replay_matches_manual_updates(self):
        ids = [f"p{i}" for i in range(10)]
        log = [make_match("m001", ids[:5], ids[5:]), make_match("m002", ids[::2], ids[1::2], False)]
        from coplay import ingest
        tl = rating.rate_dataset(log, ingest.build_histories(log, ids))
        prior = [rating.initial_rating()] * 5
        a1, b1 = update_two_team(prior, prior, Outcome.A_WINS)
        after = dict(zip(ids, a1 + b1))
        a2, b2 = update_two_team([after[p] for p in ids[::2]], [after[p] for p in ids[1::2]],
                                 Outcome.B_WINS)
        assert tl["p0"].points[1][1] == a2[0]
        assert tl["p1"].points[1][1] == b2[0]

    def test_decile_groups_and_report(self):
        tls = {f"p{i:02d}": rating.RatingTimeline(f"p{i:02d}", [(0, Rating(float(i), 1.0))])
               for i in range(20)}
        groups = rating.decile_groups(tls)
        assert groups["bottom"] == ["p00", "p01"]
        assert groups["top"] == ["p18", "p19"]
        assert groups["median"] == ["p09", "p10"]
        rows = rating.decile_timeline_report(tls)
        assert rows[0] == {"group": "bottom", "match_index": 0, "mean_mu": 0.5, "std_mu": 0.5}

    def test_small_population(self):
        tls = {f"p{i}": rating.RatingTimeline(f"p{i}", [(0, Rating())]) for i in range(9)}
        with pytest.raises(ValueError, match="insufficient population"):
            rating.decile_groups(tls)

    def test_timeline_file_roundtrip(self, tmp_path, rng):
        tls = {p: rating.RatingTimeline(p, [(i, Rating(rng.normal(25, 3), rng.uniform(1, 8)))
                                            for i in range(5)]) for p in ("x", "y")}
        rating.write_timelines(tls, tmp_path / "t.csv")
        back = rating.read_timelines(tmp_path / "t.csv")
        assert {p: t.points for p, t in back.items()} == {p: t.points for p, t in tls.items()}
