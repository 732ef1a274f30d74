"""Shared builders for small hand-made match logs."""

import json

import numpy as np
import pytest

from coplay.ingest import MatchRecord, PlayerSlot


def make_match(match_id, team_a, team_b, a_wins=True, start=None, leavers=()):
    slots = tuple(PlayerSlot(p, "A", 1 if p in leavers else 0) for p in team_a) + \
        tuple(PlayerSlot(p, "B", 1 if p in leavers else 0) for p in team_b)
    start = int(match_id[1:]) if start is None else start
    return MatchRecord(match_id, start, 1800, a_wins, slots)


def random_log(rng, n_players, n_matches):
    """Random 5v5 matches over ``n_players`` ids ``q00..``; ids sort by index."""
    ids = [f"q{i:02d}" for i in range(n_players)]
    out = []
    for k in range(n_matches):
        chosen = rng.choice(n_players, 10, replace=False)
        out.append(make_match(f"m{k:04d}", [ids[i] for i in chosen[:5]],
                              [ids[i] for i in chosen[5:]], bool(rng.random() < 0.5), start=k))
    return out


def write_jsonl(path, objs):
    with open(path, "w", encoding="utf-8") as handle:
        for obj in objs:
            handle.write((obj if isinstance(obj, str) else json.dumps(obj)) + "\n")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
