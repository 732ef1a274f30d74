"""Match-log parsing, validation, filtering and per-player histories.

Two input formats are accepted:

* ``jsonl``: one match object per line with ``match_id``, ``start_time``,
  ``duration``, ``radiant_win`` (true/false/null) and a ``players`` array of
  ten ``{account_id, team, leaver_status}`` objects.
* ``csv``: one row per (match, slot) with the mandatory header
  ``match_id,start_time,duration,radiant_win,account_id,team,leaver_status``.

Leaver status ``0`` means the player stayed until the end of the match. Any
other code marks a leaver and the whole match is dropped by
:func:`filter_valid_matches`.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

logger = logging.getLogger(__name__)

TEAM_SIZE = 5
SLOTS = 2 * TEAM_SIZE
STAYED = 0
DEFAULT_MIN_MATCHES = 46

CSV_COLUMNS = (
    "match_id",
    "start_time",
    "duration",
    "radiant_win",
    "account_id",
    "team",
    "leaver_status",
)
FORMATS = ("jsonl", "csv")


class IngestError(Exception):
    """Fatal ingestion problem (unreadable file, unknown format)."""


class RecordError(ValueError):
    """A single malformed record; carries a short reason code."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class PlayerSlot:
    account_id: str
    team: str  # "A" (radiant) or "B" (dire)
    leaver_status: int = STAYED


@dataclass(frozen=True)
class MatchRecord:
    match_id: str
    start_time: int
    duration: int
    radiant_win: Optional[bool]
    players: tuple[PlayerSlot, ...]

    def __post_init__(self):
        if len(self.players) != SLOTS:
            raise RecordError("bad-slot-count", f"{len(self.players)} slots")
        counts = Counter(s.team for s in self.players)
        if counts.get("A", 0) != TEAM_SIZE or counts.get("B", 0) != TEAM_SIZE:
            raise RecordError("bad-team-split", dict(counts).__repr__())
        ids = [s.account_id for s in self.players]
        if len(set(ids)) != SLOTS:
            raise RecordError("duplicate-player")

    @property
    def sort_key(self) -> tuple[int, str]:
        return (self.start_time, self.match_id)

    def team(self, side: str) -> tuple[str, ...]:
        return tuple(s.account_id for s in self.players if s.team == side)

    def side_of(self, account_id: str) -> str:
        for s in self.players:
            if s.account_id == account_id:
                return s.team
        raise KeyError(account_id)

    def teammates(self, account_id: str) -> tuple[str, ...]:
        side = self.side_of(account_id)
        return tuple(s.account_id for s in self.players
                     if s.team == side and s.account_id != account_id)

    def to_json(self) -> dict:
        return {
            "match_id": self.match_id,
            "start_time": self.start_time,
            "duration": self.duration,
            "radiant_win": self.radiant_win,
            "players": [
                {"account_id": s.account_id, "team": s.team,
                 "leaver_status": s.leaver_status}
                for s in self.players
            ],
        }


@dataclass(frozen=True)
class HistoryEntry:
    index: int
    match_id: str
    teammates: tuple[str, str, str, str]
    rating_after: Optional[float] = None


@dataclass
class PlayerHistory:
    account_id: str
    matches: list[HistoryEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.matches)


@dataclass(frozen=True)
class Reject:
    record_ordinal: int
    reason: str


# -- field coercion ---------------------------------------------------------

def _as_id(value, what: str) -> str:
    if value is None or isinstance(value, bool):
        raise RecordError(f"bad-{what}", repr(value))
    if isinstance(value, float):
        if not value.is_integer():
            raise RecordError(f"bad-{what}", repr(value))
        value = int(value)
    text = str(value).strip()
    if not text:
        raise RecordError(f"bad-{what}", "empty")
    return text


def _as_int(value, what: str) -> int:
    if isinstance(value, bool):
        raise RecordError(f"bad-{what}", repr(value))
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            pass
    raise RecordError(f"bad-{what}", repr(value))


def _as_winner(value) -> Optional[bool]:
    if value is None or isinstance(value, bool):
        return value
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("", "null", "none", "nan"):
            return None
        if text in ("true", "1"):
            return True
        if text in ("false", "0"):
            return False
    raise RecordError("bad-radiant_win", repr(value))


def _as_team(value) -> str:
    if isinstance(value, bool):
        raise RecordError("bad-team", repr(value))
    text = str(value).strip().upper()
    if text in ("A", "0"):
        return "A"
    if text in ("B", "1"):
        return "B"
    raise RecordError("bad-team", repr(value))


def _slot(obj) -> PlayerSlot:
    if not isinstance(obj, dict):
        raise RecordError("bad-slot", repr(obj))
    for key in ("account_id", "team", "leaver_status"):
        if key not in obj:
            raise RecordError("missing-field", key)
    return PlayerSlot(
        account_id=_as_id(obj["account_id"], "account_id"),
        team=_as_team(obj["team"]),
        leaver_status=_as_int(obj["leaver_status"], "leaver_status"),
    )


def match_from_json(obj) -> MatchRecord:
    """Build a validated :class:`MatchRecord` from a decoded JSON object."""
    if not isinstance(obj, dict):
        raise RecordError("bad-record", type(obj).__name__)
    for key in ("match_id", "start_time", "duration", "radiant_win", "players"):
        if key not in obj:
            raise RecordError("missing-field", key)
    players = obj["players"]
    if not isinstance(players, list):
        raise RecordError("bad-players", type(players).__name__)
    if len(players) != SLOTS:
        raise RecordError("bad-slot-count", f"{len(players)} slots")
    duration = _as_int(obj["duration"], "duration")
    if duration < 0:
        raise RecordError("bad-duration", str(duration))
    return MatchRecord(
        match_id=_as_id(obj["match_id"], "match_id"),
        start_time=_as_int(obj["start_time"], "start_time"),
        duration=duration,
        radiant_win=_as_winner(obj["radiant_win"]),
        players=tuple(_slot(p) for p in players),
    )


# -- parsing ----------------------------------------------------------------

def _parse_jsonl(handle) -> tuple[list[MatchRecord], list[Reject]]:
    matches, rejects = [], []
    for ordinal, line in enumerate(handle, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            rejects.append(Reject(ordinal, "bad-json"))
            continue
        try:
            matches.append((ordinal, match_from_json(obj)))
        except RecordError as err:
            rejects.append(Reject(ordinal, err.reason))
    return matches, rejects


def _parse_csv(handle) -> tuple[list[MatchRecord], list[Reject]]:
    reader = csv.DictReader(handle)
    if reader.fieldnames is None:
        return [], []
    header = tuple(name.strip() for name in reader.fieldnames)
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise IngestError(f"CSV header lacks columns {missing}")

    groups: dict[str, list[dict]] = {}
    for row in reader:
        row = {k.strip(): (v if v is not None else "") for k, v in row.items() if k}
        key = (row.get("match_id") or "").strip()
        groups.setdefault(key, []).append(row)

    matches, rejects = [], []
    for ordinal, (key, rows) in enumerate(groups.items(), start=1):
        try:
            if not key:
                raise RecordError("bad-match_id", "empty")
            head = rows[0]
            shared = ("start_time", "duration", "radiant_win")
            if any(r[c] != head[c] for r in rows for c in shared):
                raise RecordError("inconsistent-match-fields")
            obj = {c: head[c] for c in ("match_id",) + shared}
            obj["players"] = [
                {"account_id": r["account_id"], "team": r["team"],
                 "leaver_status": r["leaver_status"]}
                for r in rows
            ]
            matches.append((ordinal, match_from_json(obj)))
        except RecordError as err:
            rejects.append(Reject(ordinal, err.reason))
    return matches, rejects


def parse_match_log(path, fmt: str = "jsonl") -> tuple[list[MatchRecord], list[Reject]]:
    """Parse a match log into validated records plus a list of rejects.

    Malformed records never abort parsing; they are tallied with a reason
    code. Duplicate match ids keep the first occurrence. The returned
    matches are ordered by ``(start_time, match_id)``.

    Raises:
        IngestError: unknown format or unreadable file.
    """
    if fmt not in FORMATS:
        raise IngestError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            if fmt == "jsonl":
                matches, rejects = _parse_jsonl(handle)
            else:
                matches, rejects = _parse_csv(handle)
    except OSError as err:
        raise IngestError(f"cannot read {path}: {err.strerror or err}") from err
    except UnicodeDecodeError as err:
        raise IngestError(f"cannot decode {path}: {err}") from err

    seen: set[str] = set()
    unique = []
    for ordinal, match in matches:
        if match.match_id in seen:
            rejects.append(Reject(ordinal, "duplicate-match-id"))
            continue
        seen.add(match.match_id)
        unique.append(match)
    rejects.sort(key=lambda r: r.record_ordinal)
    if rejects:
        logger.info("%s: %d records rejected", path, len(rejects))
    return sort_matches(unique), rejects


def parse_match_logs(paths: Iterable, fmt: str = "jsonl"):
    """Parse several shards; output is independent of shard order."""
    matches, rejects = [], []
    seen: set[str] = set()
    for path in sorted(str(p) for p in paths):
        shard, shard_rejects = parse_match_log(path, fmt)
        rejects.extend(shard_rejects)
        for m in shard:
            if m.match_id in seen:
                rejects.append(Reject(-1, "duplicate-match-id"))
            else:
                seen.add(m.match_id)
                matches.append(m)
    return sort_matches(matches), rejects


def sort_matches(matches: Iterable[MatchRecord]) -> list[MatchRecord]:
    return sorted(matches, key=lambda m: m.sort_key)


def write_rejects(rejects: Iterable[Reject], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["record_ordinal", "reason"])
        for r in rejects:
            writer.writerow([r.record_ordinal, r.reason])


def write_jsonl(matches: Iterable[MatchRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for m in matches:
            handle.write(json.dumps(m.to_json(), sort_keys=True) + "\n")


def write_csv(matches: Iterable[MatchRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for m in matches:
            win = "" if m.radiant_win is None else str(m.radiant_win).lower()
            for s in m.players:
                writer.writerow([m.match_id, m.start_time, m.duration, win,
                                 s.account_id, s.team, s.leaver_status])


# -- filtering --------------------------------------------------------------

def is_valid(match: MatchRecord) -> bool:
    return match.radiant_win is not None and all(
        s.leaver_status == STAYED for s in match.players)


def filter_valid_matches(matches: Iterable[MatchRecord]) -> list[MatchRecord]:
    """Drop matches without a winner or with at least one leaver."""
    return [m for m in matches if is_valid(m)]


def match_counts(matches: Iterable[MatchRecord]) -> Counter:
    counts: Counter = Counter()
    for m in matches:
        counts.update(s.account_id for s in m.players)
    return counts


def filter_experienced_players(matches, min_matches: int = DEFAULT_MIN_MATCHES):
    """Return ``(players, matches)`` where players have ``>= min_matches`` games.

    Matches are not dropped: a retained player's games against or with
    non-retained players still drive the rating updates.
    """
    matches = list(matches)
    counts = match_counts(matches)
    players = frozenset(p for p, c in counts.items() if c >= min_matches)
    return players, matches


def build_histories(matches, players) -> dict[str, PlayerHistory]:
    """Temporally ordered match histories for every retained player."""
    players = set(players)
    histories = {p: PlayerHistory(p) for p in sorted(players)}
    for m in sort_matches(matches):
        for side in ("A", "B"):
            team = m.team(side)
            for p in team:
                if p not in players:
                    continue
                h = histories[p]
                mates = tuple(t for t in team if t != p)
                h.matches.append(HistoryEntry(len(h.matches), m.match_id, mates))
    return histories


def write_histories(histories: Mapping[str, PlayerHistory], path) -> None:
    """One JSON object per retained player, players in id order."""
    with open(path, "w", encoding="utf-8") as handle:
        for p in sorted(histories):
            entries = [{"index": e.index, "match_id": e.match_id, "teammates": list(e.teammates)}
                       for e in histories[p].matches]
            handle.write(json.dumps({"account_id": p, "matches": entries}, sort_keys=True) + "\n")


def read_histories(path) -> dict[str, PlayerHistory]:
    histories: dict[str, PlayerHistory] = {}
    try:
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                obj = json.loads(line)
                entries = [HistoryEntry(int(e["index"]), str(e["match_id"]), tuple(e["teammates"]))
                           for e in obj["matches"]]
                histories[obj["account_id"]] = PlayerHistory(obj["account_id"], entries)
    except OSError as err:
        raise IngestError(f"cannot read {path}: {err.strerror or err}") from err
    except (ValueError, KeyError) as err:
        raise IngestError(f"malformed history store {path}: {err}") from err
    return histories
