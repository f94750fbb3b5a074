"""File formats: JSON games, performance matrices, delimited output."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (CardinalGame, ContextOrdinalGame, PreferenceRelation, RankingLottery,
                   cog_from_cardinal, preference_from_tiers)
from .errors import ValidationError
from .voting import grade_by_quantiles


@dataclass
class LoadedGame:
    cog: ContextOrdinalGame
    cardinal: CardinalGame | None
    action_names: list | None


def _preference_entry(entry):
    if "lottery" in entry:
        return RankingLottery(tuple((float(item["weight"]), preference_from_tiers(item["tiers"]))
                                    for item in entry["lottery"]))
    return preference_from_tiers(entry["tiers"])


def parse_game(data: dict) -> LoadedGame:
    """Build a game from its JSON form; cardinal and ordinal layouts are told apart by keys.

    Ordinal games may also carry ``scores``, ``grades`` with ``num_grades``,
    ``action_names`` and ``player_names``.
    """
    names = data.get("action_names")
    if "payoffs" in data:
        game = CardinalGame(tuple(np.asarray(u, dtype=float) for u in data["payoffs"]))
        cog = cog_from_cardinal(game)
        cog.action_names = names
        return LoadedGame(cog, game, names)
    if "preferences" not in data or "actions" not in data:
        raise ValidationError("game JSON needs either 'payoffs' or 'actions' and 'preferences'")
    counts = [int(m) for m in data["actions"]]
    n = int(data.get("players", len(counts)))
    if n != len(counts):
        raise ValidationError(f"'players' is {n} but {len(counts)} action counts are given")
    rho = [{} for _ in range(n)]
    for k, entry in enumerate(data["preferences"]):
        try:
            i = int(entry["player"])
            ctx = tuple(int(a) for a in entry["context"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"preference entry {k}: {exc}") from None
        if not 0 <= i < n:
            raise ValidationError(f"preference entry {k}: no player {i}")
        if ctx in rho[i]:
            raise ValidationError(f"preference entry {k}: duplicate context {list(ctx)} for player {i}")
        rho[i][ctx] = _preference_entry(entry)
    scores = data.get("scores")
    grades = data.get("grades")
    try:
        cog = ContextOrdinalGame(counts, rho, scores=scores, grades=grades,
                                 num_grades=data.get("num_grades"), action_names=names,
                                 player_names=data.get("player_names"))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return LoadedGame(cog, None, names)


def load_game(path) -> LoadedGame:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return parse_game(data)


def game_to_json(cog: ContextOrdinalGame) -> dict:
    """Ordinal JSON layout of a COG with deterministic or lottery preferences."""
    prefs = []
    for i in range(cog.num_players):
        for c in cog.contexts(i):
            p = cog.preference(i, c)
            entry = {"player": i, "context": list(c)}
            if isinstance(p, PreferenceRelation):
                entry["tiers"] = [sorted(t) for t in p.tiers]
            elif isinstance(p, RankingLottery):
                entry["lottery"] = [{"weight": w, "tiers": [sorted(t) for t in r.tiers]}
                                    for w, r in p.entries]
            else:
                raise ValidationError("outcome-lottery preferences have no JSON form")
            prefs.append(entry)
    out = {"players": cog.num_players, "actions": list(cog.action_counts), "preferences": prefs}
    if cog.action_names:
        out["action_names"] = cog.action_names
    if cog.player_names:
        out["player_names"] = cog.player_names
    if cog.scores is not None:
        out["scores"] = [s.tolist() for s in cog.scores]
    if cog.grades is not None:
        out["grades"] = [g.tolist() for g in cog.grades]
        out["num_grades"] = cog.num_grades
    return out


# --------------------------------------------------------- performance data


@dataclass
class PerformanceMatrix:
    agents: list
    tasks: list
    values: np.ndarray


def read_performance_csv(path) -> PerformanceMatrix:
    """Header ``agent,<task>...``; one row per agent with numeric scores."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise ValidationError(f"{path}: need a header and at least one agent row")
    header = [h.strip() for h in rows[0]]
    tasks = header[1:]
    if not tasks:
        raise ValidationError(f"{path}: header lists no tasks")
    agents, values = [], []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValidationError(f"{path}:{line}: expected {len(header)} cells, got {len(row)}")
        try:
            vals = [float(cell) for cell in row[1:]]
        except ValueError:
            raise ValidationError(f"{path}:{line}: non-numeric score in {row[1:]}") from None
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError(f"{path}:{line}: scores must be finite")
        agents.append(row[0].strip())
        values.append(vals)
    return PerformanceMatrix(agents, tasks, np.array(values))


def performance_cog(A, num_grades: int = 4, agents=None, tasks=None) -> ContextOrdinalGame:
    """Agent-versus-task COG from a performance matrix (rows agents, columns tasks).

    The agent player ranks agents by score on the task played and grades them by quantile
    bins of that task column.  The task player is adversarial: for each agent it ranks
    tasks by ascending score and grades them by quantile bins of the negated row.
    Score ballots are ``A`` and ``-A``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise ValidationError("performance matrix must be a non-empty 2-D array")
    na, nt = A.shape
    agent_rho = {(t,): PreferenceRelation.from_levels(-A[:, t]) for t in range(nt)}
    task_rho = {(a,): PreferenceRelation.from_levels(A[a, :]) for a in range(na)}
    g_agent = np.column_stack([grade_by_quantiles(A[:, t], num_grades) for t in range(nt)])
    g_task = np.vstack([grade_by_quantiles(-A[a, :], num_grades) for a in range(na)])
    names = None
    if agents is not None and tasks is not None:
        names = [list(agents), list(tasks)]
    return ContextOrdinalGame((na, nt), [agent_rho, task_rho], scores=(A, -A),
                              grades=(g_agent, g_task), num_grades=num_grades,
                              action_names=names, player_names=["agent", "task"])


def ingest_performance_csv(path, num_grades: int = 4) -> ContextOrdinalGame:
    pm = read_performance_csv(path)
    return performance_cog(pm.values, num_grades, pm.agents, pm.tasks)


# ------------------------------------------------------------- delimited out


def format_value(v) -> str:
    """Floats get 17 significant digits so they read back bit for bit."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format_value(v) for v in r])


def read_csv(path) -> tuple:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
