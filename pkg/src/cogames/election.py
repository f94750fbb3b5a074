"""Four-person leader election decided by a runoff.

Each participant submits a willingness to lead (wtl, 0..10) and a strict ranking of
the three others.  The two highest wtl values become candidates (ties in random
order); the two non-candidates' rankings decide the runoff, and a split vote is a
coin flip.  A participant's action is one of 11 * 6 = 66 (wtl, vote) pairs, indexed
``wtl * 6 + k`` where ``k`` enumerates permutations of the other participants
(sorted ascending) in ``itertools.permutations`` order.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .best_response import best_response, make_rng
from .core import CardinalGame, ContextOrdinalGame, OutcomeBallot
from .errors import ValidationError
from .metrics import Verdict, VerificationReport
from .solvers import lle_solve
from .voting import ExplicitLottery, get_rule

NUM_PARTICIPANTS = 4
NUM_WTL = 11
NUM_VOTES = 6
NUM_ACTIONS = NUM_WTL * NUM_VOTES
PAIRS = tuple(itertools.combinations(range(NUM_PARTICIPANTS), 2))


def vote_orders(participant: int) -> list:
    others = [j for j in range(NUM_PARTICIPANTS) if j != participant]
    return list(itertools.permutations(others))


@dataclass(frozen=True)
class ElectionAction:
    wtl: int
    vote: tuple  # the three other participants, best first

    def __post_init__(self):
        if not 0 <= int(self.wtl) <= 10:
            raise ValidationError(f"wtl must be in 0..10, got {self.wtl}")
        object.__setattr__(self, "wtl", int(self.wtl))
        object.__setattr__(self, "vote", tuple(int(v) for v in self.vote))
        if len(self.vote) != 3 or len(set(self.vote)) != 3:
            raise ValidationError(f"vote must rank three distinct participants, got {self.vote}")

    def index(self, participant: int) -> int:
        orders = vote_orders(participant)
        if self.vote not in orders:
            raise ValidationError(f"participant {participant} cannot vote {self.vote}")
        return self.wtl * NUM_VOTES + orders.index(self.vote)

    @classmethod
    def from_index(cls, participant: int, index: int) -> ElectionAction:
        if not 0 <= index < NUM_ACTIONS:
            raise ValidationError(f"action index must be in 0..{NUM_ACTIONS - 1}")
        wtl, k = divmod(int(index), NUM_VOTES)
        return cls(wtl, vote_orders(participant)[k])


@dataclass(frozen=True)
class ElectionRecord:
    """Observed actions and outcome preferences of four participants.

    A preference is a strict order of participant indices, best first, or a list of
    indifference tiers (lists of indices), best tier first.
    """

    actions: tuple
    prefs: tuple
    names: tuple = ("P0", "P1", "P2", "P3")
    election_id: str = ""

    def __post_init__(self):
        if len(self.actions) != NUM_PARTICIPANTS or len(self.prefs) != NUM_PARTICIPANTS:
            raise ValidationError("an election record needs exactly four participants")
        prefs = []
        for i, p in enumerate(self.prefs):
            tiers = tuple((int(v),) if np.isscalar(v) else tuple(int(u) for u in v) for v in p)
            flat = sorted(v for t in tiers for v in t)
            if flat != list(range(NUM_PARTICIPANTS)) or not all(tiers):
                raise ValidationError(f"pref of participant {i} must cover all four exactly once")
            strict = all(len(t) == 1 for t in tiers)
            prefs.append(tuple(t[0] for t in tiers) if strict else tiers)
        for i, a in enumerate(self.actions):
            a.index(i)
        object.__setattr__(self, "prefs", tuple(prefs))

    def action_indices(self) -> tuple:
        return tuple(a.index(i) for i, a in enumerate(self.actions))

    def outcome_levels(self, participant: int) -> np.ndarray:
        """Preference level of each possible winner for ``participant`` (0 = favourite)."""
        lv = np.empty(NUM_PARTICIPANTS, dtype=int)
        for level, tier in enumerate(self.prefs[participant]):
            lv[list(tier) if isinstance(tier, tuple) else tier] = level
        return lv


# ------------------------------------------------------------- mechanism


@lru_cache(maxsize=None)
def _orderings():
    return list(itertools.permutations(range(NUM_PARTICIPANTS)))


def candidate_pair_probs(wtls) -> np.ndarray:
    """Probability of each unordered candidate pair (``PAIRS`` order), ties broken uniformly."""
    wtls = tuple(int(w) for w in wtls)
    counts = np.zeros(len(PAIRS))
    n = 0
    for perm in _orderings():
        if all(wtls[perm[k]] >= wtls[perm[k + 1]] for k in range(NUM_PARTICIPANTS - 1)):
            counts[PAIRS.index(tuple(sorted(perm[:2])))] += 1
            n += 1
    return counts / n


def runoff(pair, votes) -> np.ndarray:
    """Winner distribution of a runoff between ``pair`` given every participant's vote."""
    c1, c2 = pair
    out = np.zeros(NUM_PARTICIPANTS)
    score = 0
    for j in range(NUM_PARTICIPANTS):
        if j in pair:
            continue
        v = votes[j]
        score += 1 if v.index(c1) < v.index(c2) else -1
    if score > 0:
        out[c1] = 1.0
    elif score < 0:
        out[c2] = 1.0
    else:
        out[c1] = out[c2] = 0.5
    return out


def outcome_distribution(actions) -> np.ndarray:
    """Exact probability that each participant is elected."""
    if len(actions) != NUM_PARTICIPANTS:
        raise ValidationError("four actions are required")
    pp = candidate_pair_probs([a.wtl for a in actions])
    votes = [a.vote for a in actions]
    return sum(p * runoff(pair, votes) for p, pair in zip(pp, PAIRS) if p > 0)


# --------------------------------------------------- vectorised tables


@lru_cache(maxsize=1)
def _pair_table() -> np.ndarray:
    """Candidate-pair probabilities for every wtl profile, shape (11,)*4 + (6,)."""
    out = np.empty((NUM_WTL,) * NUM_PARTICIPANTS + (len(PAIRS),))
    for w in itertools.product(range(NUM_WTL), repeat=NUM_PARTICIPANTS):
        out[w] = candidate_pair_probs(w)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=1)
def _runoff_table() -> np.ndarray:
    """Winner distribution per vote profile and pair, shape (6,)*4 + (6 pairs, 4)."""
    orders = [vote_orders(i) for i in range(NUM_PARTICIPANTS)]
    out = np.empty((NUM_VOTES,) * NUM_PARTICIPANTS + (len(PAIRS), NUM_PARTICIPANTS))
    for k in itertools.product(range(NUM_VOTES), repeat=NUM_PARTICIPANTS):
        votes = [orders[i][k[i]] for i in range(NUM_PARTICIPANTS)]
        for p, pair in enumerate(PAIRS):
            out[k + (p,)] = runoff(pair, votes)
    out.setflags(write=False)
    return out


def outcome_table(dtype=np.float64) -> np.ndarray:
    """Winner distribution for every joint action profile, shape (66,)*4 + (4,)."""
    pairs = _pair_table().reshape(NUM_WTL ** 4, len(PAIRS)).astype(dtype)
    run = _runoff_table().reshape(NUM_VOTES ** 4, len(PAIRS), NUM_PARTICIPANTS).astype(dtype)
    full = np.einsum("wp,vpo->wvo", pairs, run)
    full = full.reshape((NUM_WTL,) * 4 + (NUM_VOTES,) * 4 + (NUM_PARTICIPANTS,))
    full = full.transpose(0, 4, 1, 5, 2, 6, 3, 7, 8)
    return np.ascontiguousarray(full).reshape((NUM_ACTIONS,) * 4 + (NUM_PARTICIPANTS,))


def outcomes_for_context(player: int, context) -> np.ndarray:
    """Winner distribution of each of ``player``'s 66 actions, co-players fixed at ``context``."""
    ctx = [ElectionAction.from_index(j, c) for j, c in
           zip([j for j in range(NUM_PARTICIPANTS) if j != player], context)]
    out = np.empty((NUM_ACTIONS, NUM_PARTICIPANTS))
    for a in range(NUM_ACTIONS):
        acts = list(ctx)
        acts.insert(player, ElectionAction.from_index(player, a))
        out[a] = outcome_distribution(acts)
    return out


# ------------------------------------------------------------------ games


def election_cog(record: ElectionRecord) -> ContextOrdinalGame:
    """66-action COG; each context's preference is a stochastic ranking from outcome lotteries.

    Preferences are built lazily, so only the contexts actually visited are computed.
    """

    def make_rho(i):
        levels = record.outcome_levels(i)

        @lru_cache(maxsize=4096)
        def rho(context):
            return OutcomeBallot(outcomes_for_context(i, context), levels)

        return rho

    names = [[str(ElectionAction.from_index(i, a).wtl) + ":" +
              ">".join(record.names[v] for v in ElectionAction.from_index(i, a).vote)
              for a in range(NUM_ACTIONS)] for i in range(NUM_PARTICIPANTS)]
    return ContextOrdinalGame((NUM_ACTIONS,) * NUM_PARTICIPANTS,
                              [make_rho(i) for i in range(NUM_PARTICIPANTS)],
                              action_names=names, player_names=list(record.names))


def borda_election_nfg(record: ElectionRecord, outcomes: np.ndarray | None = None) -> CardinalGame:
    """Borda-induced normal-form game of the election (payoffs in 0..65).

    The Borda score of action ``a`` is the expected number of other own actions it
    beats, ties counting one half, with outcomes drawn independently per action.
    """
    if outcomes is None:
        outcomes = outcome_table()
    payoffs = []
    for i in range(NUM_PARTICIPANTS):
        levels = record.outcome_levels(i)
        # outcome -> preference level (best first); tied outcomes share a column
        group = np.zeros((NUM_PARTICIPANTS, levels.max() + 1))
        group[np.arange(NUM_PARTICIPANTS), levels] = 1.0
        u = np.empty((NUM_ACTIONS,) * NUM_PARTICIPANTS)
        # slice along a co-player axis to keep temporaries small
        j = 0 if i != 0 else 1
        own = i if i < j else i - 1
        for k in range(NUM_ACTIONS):
            sl = np.take(outcomes, k, axis=j) @ group
            d = np.moveaxis(sl, own, -2)
            rest = d.sum(axis=-2, keepdims=True) - d
            # mass of other actions landing strictly below each outcome level
            below = np.cumsum(rest[..., ::-1], axis=-1)[..., ::-1]
            below = np.concatenate([below[..., 1:], np.zeros_like(below[..., :1])], axis=-1)
            score = np.einsum("...k,...k->...", d, below + 0.5 * rest)
            idx = [slice(None)] * NUM_PARTICIPANTS
            idx[j] = k
            u[tuple(idx)] = np.moveaxis(score, -1, own)
        payoffs.append(u)
    return CardinalGame(tuple(payoffs))


def winner_probabilities(profile) -> np.ndarray:
    """Exact probability that each participant is elected under independent mixed strategies."""
    xs = [np.asarray(x, dtype=float).reshape(NUM_WTL, NUM_VOTES) for x in profile]
    if len(xs) != NUM_PARTICIPANTS:
        raise ValidationError("four strategies are required")
    return np.einsum("ab,cd,ef,gh,acegp,bdfhpo->o", *xs, _pair_table(), _runoff_table(),
                     optimize="greedy")


def simulate_elections(profile, num_elections: int = 10_000, seed: int = 0) -> np.ndarray:
    """Sample actions from ``profile`` and then a winner; returns winner frequencies."""
    rng = make_rng(seed, 66)
    acts = np.stack([rng.choice(NUM_ACTIONS, size=num_elections, p=np.asarray(x) / np.sum(x))
                     for x in profile], axis=1)
    wtl, vote = np.divmod(acts, NUM_VOTES)
    pairs = _pair_table()[tuple(wtl.T)]
    dist = np.einsum("sp,spo->so", pairs, _runoff_table()[tuple(vote.T)])
    u = rng.random(num_elections)[:, None]
    winners = (np.cumsum(dist, axis=1) < u).sum(axis=1)
    winners = np.minimum(winners, NUM_PARTICIPANTS - 1)
    return np.bincount(winners, minlength=NUM_PARTICIPANTS) / num_elections


def verify_recorded_election(record: ElectionRecord, rule="maximal_lottery") -> VerificationReport:
    """Is each participant's recorded action a best response to the others' recorded actions?

    Only the single observed context carries weight, so the outcome ballot is built for
    that context alone.  A lottery rule passes when the action is in the lottery's support;
    the failing witness is the highest-probability action (lowest index on ties).
    """
    rule = get_rule(rule)
    cog = election_cog(record)
    idx = record.action_indices()
    report = VerificationReport()
    for i in range(NUM_PARTICIPANTS):
        others = [np.eye(NUM_ACTIONS)[a] for j, a in enumerate(idx) if j != i]
        br = best_response(cog, i, others, rule)
        ok = idx[i] in br.support
        eps = br.distance(np.eye(NUM_ACTIONS)[idx[i]])
        witness = None
        if not ok:
            if isinstance(br, ExplicitLottery):
                witness = int(np.argmax(br.canonical()))
            else:
                witness = int(br.winners[0])
        report.verdicts.append(Verdict(i, ok, eps, witness, idx[i]))
    return report


def solve_election(record: ElectionRecord, outcomes: np.ndarray | None = None, **lle_kw) -> list:
    """Logit-homotopy equilibrium of the Borda-induced election game."""
    return lle_solve(borda_election_nfg(record, outcomes), **lle_kw)


# ------------------------------------------------------------------ input

ELECTION_COLUMNS = ("election_id", "participant", "wtl", "vote_rank1", "vote_rank2",
                    "vote_rank3", "pref_rank1", "pref_rank2", "pref_rank3", "pref_rank4")


def load_elections_csv(path) -> list:
    """Read election records; four rows per election id, names resolved within the election."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        missing = [c for c in ELECTION_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        groups: dict = {}
        for row in reader:
            groups.setdefault(row["election_id"].strip(), []).append((reader.line_num, row))
    records = []
    for eid, rows in groups.items():
        if len(rows) != NUM_PARTICIPANTS:
            raise ValidationError(f"{path}: election {eid!r} has {len(rows)} rows, expected 4")
        names = [r["participant"].strip() for _, r in rows]
        if len(set(names)) != NUM_PARTICIPANTS:
            raise ValidationError(f"{path}: election {eid!r} repeats a participant name")
        pos = {n: k for k, n in enumerate(names)}
        actions, prefs = [], []
        for k, (line, r) in enumerate(rows):
            def lookup(col):
                name = r[col].strip()
                if name not in pos:
                    raise ValidationError(f"{path}:{line}: unknown participant {name!r} in {col}")
                return pos[name]
            try:
                wtl = int(r["wtl"])
            except ValueError:
                raise ValidationError(f"{path}:{line}: wtl {r['wtl']!r} is not an integer") from None
            vote = tuple(lookup(f"vote_rank{j}") for j in (1, 2, 3))
            if k in vote:
                raise ValidationError(f"{path}:{line}: a participant cannot vote for themselves")
            try:
                actions.append(ElectionAction(wtl, vote))
            except ValidationError as exc:
                raise ValidationError(f"{path}:{line}: {exc}") from None
            prefs.append(tuple(lookup(f"pref_rank{j}") for j in (1, 2, 3, 4)))
        try:
            records.append(ElectionRecord(tuple(actions), tuple(prefs), tuple(names), eid))
        except ValidationError as exc:
            raise ValidationError(f"{path}: election {eid!r}: {exc}") from None
    return records


def bundled_record(name: str) -> ElectionRecord:
    """One of the two packaged example elections, ``"table1"`` or ``"table2"``."""
    from importlib.resources import files
    path = files("cogames") / "data" / f"{name}.csv"
    if not path.is_file():
        raise ValidationError(f"no bundled election {name!r}")
    return load_elections_csv(path)[0]
