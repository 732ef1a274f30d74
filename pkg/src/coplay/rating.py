"""Two-team Gaussian skill rating (TrueSkill-style) and rating timelines.

Each player carries a Gaussian belief ``N(mu, sigma**2)``. After a 5v5 match
the beliefs are updated by moment matching the truncated Gaussian of the
team performance difference. With exactly two teams there is a single
difference factor, so the update below is the exact posterior mean and
variance of every skill under the Gaussian performance model.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import log_ndtr, ndtri

from .ingest import MatchRecord, PlayerHistory, sort_matches

MU0 = 25.0
SIGMA0 = MU0 / 3.0
PDF_FLOOR = 1e-300
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class Outcome(enum.Enum):
    A_WINS = "A_wins"
    B_WINS = "B_wins"
    DRAW = "draw"


@dataclass(frozen=True)
class Rating:
    mu: float = MU0
    sigma: float = SIGMA0

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValueError(f"rating mean must be finite, got {self.mu}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"rating sigma must be finite and > 0, got {self.sigma}")


@dataclass(frozen=True)
class RatingConfig:
    mu0: float = MU0
    sigma0: float = SIGMA0
    beta: float = SIGMA0 / 2.0
    tau: float = SIGMA0 / 100.0
    draw_probability: float = 0.10

    def __post_init__(self):
        if not math.isfinite(self.mu0):
            raise ValueError("mu0 must be finite")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be > 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if not self.tau >= 0:
            raise ValueError("tau must be >= 0")
        if not 0 <= self.draw_probability < 1:
            raise ValueError("draw_probability must lie in [0, 1)")

    def draw_margin(self, n_players: int = 10) -> float:
        """Performance-difference margin below which a match is a draw."""
        return float(ndtri((1.0 + self.draw_probability) / 2.0)
                     * math.sqrt(n_players) * self.beta)


@dataclass
class RatingTimeline:
    account_id: str
    points: list[tuple[int, Rating]] = field(default_factory=list)

    def mus(self) -> np.ndarray:
        return np.array([r.mu for _, r in self.points])


def initial_rating(config: RatingConfig = RatingConfig()) -> Rating:
    return Rating(config.mu0, config.sigma0)


# -- truncated Gaussian corrections ------------------------------------------

def _log_pdf(x: float) -> float:
    return -0.5 * x * x - _LOG_SQRT_2PI


def v_win(t: float, eps: float) -> float:
    """Mean shift of a standard normal truncated to ``z > eps - t``."""
    x = t - eps
    return math.exp(_log_pdf(x) - float(log_ndtr(x)))


def w_win(t: float, eps: float) -> float:
    v = v_win(t, eps)
    return v * (v + t - eps)


def _log_draw_mass(t: float, eps: float) -> float:
    """``log(Phi(eps - t) - Phi(-eps - t))`` without cancellation in either tail."""
    lo, hi = -eps - t, eps - t
    if lo > 0:
        # same mass from the reflected interval, where both cdfs are small
        lo, hi = -hi, -lo
    log_hi, log_lo = float(log_ndtr(hi)), float(log_ndtr(lo))
    if not log_lo < log_hi:
        return math.log(PDF_FLOOR)
    return log_hi + math.log1p(-math.exp(log_lo - log_hi))


def v_draw(t: float, eps: float) -> float:
    """Mean shift of a standard normal truncated to ``|z + t| <= eps``."""
    log_mass = _log_draw_mass(t, eps)
    return (math.exp(_log_pdf(-eps - t) - log_mass)
            - math.exp(_log_pdf(eps - t) - log_mass))


def w_draw(t: float, eps: float) -> float:
    log_mass = _log_draw_mass(t, eps)
    v = v_draw(t, eps)
    tail = ((eps - t) * math.exp(_log_pdf(eps - t) - log_mass)
            + (eps + t) * math.exp(_log_pdf(eps + t) - log_mass))
    return v * v + tail


# -- update ------------------------------------------------------------------

def _check_team(team: Sequence[Rating], name: str) -> None:
    if len(team) != 5:
        raise ValueError(f"team {name} must hold exactly 5 ratings, got {len(team)}")
    for r in team:
        if not (math.isfinite(r.mu) and math.isfinite(r.sigma)):
            raise ValueError(f"non-finite rating in team {name}: {r}")


def update_two_team(team_a: Sequence[Rating], team_b: Sequence[Rating],
                    outcome: Outcome, config: RatingConfig = RatingConfig()):
    """Posterior ratings of both teams after one match.

    Args:
        team_a, team_b: the five prior ratings of each side.
        outcome: which side won, or a draw.
        config: dynamics noise ``tau``, performance noise ``beta`` and the
            draw probability that sets the draw margin.

    Returns:
        ``(new_a, new_b)``, tuples of five :class:`Rating`.
    """
    _check_team(team_a, "A")
    _check_team(team_b, "B")
    outcome = Outcome(outcome)
    if outcome is Outcome.B_WINS:
        new_b, new_a = update_two_team(team_b, team_a, Outcome.A_WINS, config)
        return new_a, new_b

    tau2 = config.tau ** 2
    var_a = [r.sigma ** 2 + tau2 for r in team_a]
    var_b = [r.sigma ** 2 + tau2 for r in team_b]
    n = len(var_a) + len(var_b)
    c = math.sqrt(sum(var_a) + sum(var_b) + n * config.beta ** 2)
    t = (sum(r.mu for r in team_a) - sum(r.mu for r in team_b)) / c
    eps = config.draw_margin(n) / c

    if outcome is Outcome.A_WINS:
        v, w = v_win(t, eps), w_win(t, eps)
    else:
        v, w = v_draw(t, eps), w_draw(t, eps)

    def post(team, variances, sign):
        out = []
        for r, s2 in zip(team, variances):
            mu = r.mu + sign * s2 / c * v
            var = s2 * (1.0 - s2 / (c * c) * w)
            out.append(Rating(mu, math.sqrt(var)))
        return tuple(out)

    return post(team_a, var_a, 1.0), post(team_b, var_b, -1.0)


def outcome_of(match: MatchRecord) -> Outcome:
    if match.radiant_win is None:
        raise ValueError(f"match {match.match_id} has no winner")
    return Outcome.A_WINS if match.radiant_win else Outcome.B_WINS


def rate_dataset(matches: Iterable[MatchRecord],
                 histories: Mapping[str, PlayerHistory],
                 config: RatingConfig = RatingConfig()) -> dict[str, RatingTimeline]:
    """Replay every match in temporal order and record retained players' ratings.

    All ten participants are rated; players never seen before start at the
    initial rating. Timelines are kept only for players with a history, and
    their point indices line up with the history entries.
    """
    state: dict[str, Rating] = {}
    timelines = {p: RatingTimeline(p) for p in histories}
    prior = initial_rating(config)
    for m in sort_matches(matches):
        side_a, side_b = m.team("A"), m.team("B")
        team_a = [state.get(p, prior) for p in side_a]
        team_b = [state.get(p, prior) for p in side_b]
        new_a, new_b = update_two_team(team_a, team_b, outcome_of(m), config)
        for p, r in zip(side_a + side_b, new_a + new_b):
            state[p] = r
            tl = timelines.get(p)
            if tl is not None:
                tl.points.append((len(tl.points), r))

    for p, tl in timelines.items():
        if len(tl.points) != len(histories[p].matches):
            raise ValueError(f"rating gap for {p}: {len(tl.points)} points "
                             f"vs {len(histories[p].matches)} history entries")
    return timelines


# -- reports -----------------------------------------------------------------

DECILE_GROUPS = ("bottom", "median", "top")


def decile_groups(timelines: Mapping[str, RatingTimeline]) -> dict[str, list[str]]:
    """Split players by final mean rating into bottom 10%, 45-55% and top 10%."""
    ranked = sorted((tl for tl in timelines.values() if tl.points),
                    key=lambda tl: (tl.points[-1][1].mu, tl.account_id))
    n = len(ranked)
    if n < 10:
        raise ValueError(f"insufficient population: {n} players, need >= 10")
    tenth = n // 10
    lo, hi = int(math.floor(0.45 * n)), int(math.ceil(0.55 * n))
    ids = [tl.account_id for tl in ranked]
    return {"bottom": ids[:tenth], "median": ids[lo:hi], "top": ids[n - tenth:]}


def decile_timeline_report(timelines: Mapping[str, RatingTimeline]) -> list[dict]:
    """Mean and standard deviation of ``mu`` per match index for each group.

    Rows are dicts with keys ``group, match_index, mean_mu, std_mu``.
    """
    rows = []
    for group, members in decile_groups(timelines).items():
        series = [timelines[p].mus() for p in members]
        length = max(len(s) for s in series)
        for i in range(length):
            vals = np.array([s[i] for s in series if len(s) > i])
            rows.append({"group": group, "match_index": i,
                         "mean_mu": float(vals.mean()), "std_mu": float(vals.std())})
    return rows


def write_timelines(timelines: Mapping[str, RatingTimeline], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["account_id", "match_index", "mu", "sigma"])
        for p in sorted(timelines):
            for i, r in timelines[p].points:
                writer.writerow([p, i, repr(r.mu), repr(r.sigma)])


def read_timelines(path) -> dict[str, RatingTimeline]:
    timelines: dict[str, RatingTimeline] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            tl = timelines.setdefault(row["account_id"], RatingTimeline(row["account_id"]))
            tl.points.append((int(row["match_index"]),
                              Rating(float(row["mu"]), float(row["sigma"]))))
    for tl in timelines.values():
        tl.points.sort(key=lambda pt: pt[0])
    return timelines


def write_decile_report(rows: Iterable[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["group", "match_index", "mean_mu", "std_mu"])
        for r in rows:
            writer.writerow([r["group"], r["match_index"], repr(r["mean_mu"]), repr(r["std_mu"])])
