"""Game representations: preference relations, context-ordinal games, vote populations.

A context-ordinal game (COG) gives every player a ranking of their *own* actions for
each joint action of the co-players.  Rankings are total weak orders stored as ordered
indifference tiers.  The helpers here convert between cardinal games and COGs, induce
normal-form games from positional scores and build the population of ballots a
player casts against a mixed co-player profile.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

SIMPLEX_TOL = 1e-9
ROUND_DIGITS = 12

Context = tuple  # co-player pure profile, co-players in player order


@dataclass(frozen=True)
class PreferenceRelation:
    """Total weak order over ``range(m)``; ``tiers[0]`` is the most preferred tier."""

    tiers: tuple

    def __post_init__(self):
        tiers = tuple(frozenset(int(a) for a in t) for t in self.tiers)
        if not tiers:
            raise ValidationError("a preference relation needs at least one tier")
        seen = set()
        for t in tiers:
            if not t:
                raise ValidationError("empty tier in preference relation")
            if seen & t:
                raise ValidationError(f"actions {sorted(seen & t)} appear in several tiers")
            seen |= t
        m = len(seen)
        if seen != set(range(m)):
            raise ValidationError(f"tiers must cover 0..{m - 1} exactly, got {sorted(seen)}")
        object.__setattr__(self, "tiers", tiers)
        levels = [0] * m
        for k, t in enumerate(tiers):
            for a in t:
                levels[a] = k
        object.__setattr__(self, "_levels", tuple(levels))

    @classmethod
    def from_levels(cls, levels: Sequence) -> PreferenceRelation:
        """Build from a per-action rank level (smaller is better, gaps allowed)."""
        levels = np.asarray(levels)
        return cls(tuple(frozenset(np.flatnonzero(levels == v).tolist()) for v in np.unique(levels)))

    @classmethod
    def from_order(cls, order: Sequence[int]) -> PreferenceRelation:
        """Strict ranking, best first."""
        return cls(tuple(frozenset([a]) for a in order))

    @property
    def num_actions(self) -> int:
        return len(self._levels)

    @property
    def levels(self) -> np.ndarray:
        return np.array(self._levels)

    def prefers(self, a: int, b: int) -> bool:
        return self._levels[a] < self._levels[b]

    def is_strict(self) -> bool:
        return len(self.tiers) == self.num_actions

    def positional_scores(self, vector: Sequence[float]) -> np.ndarray:
        """Score every action by its position; a tier gets the mean score of the slots it spans."""
        vector = np.asarray(vector, dtype=float)
        if len(vector) != self.num_actions:
            raise ValidationError("scoring vector length must equal the number of actions")
        out = np.empty(self.num_actions)
        pos = 0
        for t in self.tiers:
            out[list(t)] = vector[pos:pos + len(t)].mean()
            pos += len(t)
        return out

    def pairwise(self) -> np.ndarray:
        """``P[a, b] = +1`` if a is above b, ``-1`` if below, 0 if indifferent."""
        lv = self.levels
        return np.sign(lv[None, :] - lv[:, None]).astype(float)

    def format(self, names: Sequence[str] | None = None) -> str:
        name = (lambda a: str(a)) if names is None else (lambda a: names[a])
        return " > ".join(" ~ ".join(name(a) for a in sorted(t)) for t in self.tiers)

    def __str__(self):
        return self.format()


def preference_from_tiers(tiers: Iterable[Iterable[int]]) -> PreferenceRelation:
    return PreferenceRelation(tuple(frozenset(t) for t in tiers))


@dataclass(frozen=True)
class RankingLottery:
    """Finitely supported lottery over preference relations (a stochastic preference)."""

    entries: tuple

    def __post_init__(self):
        entries = tuple((float(w), r) for w, r in self.entries)
        if not entries:
            raise ValidationError("empty ranking lottery")
        ws = np.array([w for w, _ in entries])
        if (ws < 0).any() or not abs(ws.sum() - 1.0) <= SIMPLEX_TOL:
            raise ValidationError("ranking lottery weights must be non-negative and sum to 1")
        if len({r.num_actions for _, r in entries}) != 1:
            raise ValidationError("ranking lottery mixes relations over different action sets")
        object.__setattr__(self, "entries", entries)

    @property
    def num_actions(self) -> int:
        return self.entries[0][1].num_actions

    def positional_scores(self, vector) -> np.ndarray:
        return sum(w * r.positional_scores(vector) for w, r in self.entries)

    def pairwise(self) -> np.ndarray:
        return sum(w * r.pairwise() for w, r in self.entries)


class OutcomeBallot:
    """Ranking induced by independent random outcomes, one per candidate.

    Candidate ``a`` leads to outcome ``k`` with probability ``lotteries[a, k]``;
    draws are independent across candidates, and candidates are ranked by the
    preference level of their realised outcome (``outcome_levels``, 0 = best).
    The ballot is itself a lottery over rankings.  Pairwise statistics are exact
    without enumerating the product space; ``expand`` enumerates it when needed.
    """

    def __init__(self, lotteries, outcome_levels):
        lot = np.asarray(lotteries, dtype=float)
        lv = np.asarray(outcome_levels)
        if lot.ndim != 2 or lot.shape[1] != len(lv):
            raise ValidationError("outcome lotteries must be (candidates, outcomes)")
        if (lot < -SIMPLEX_TOL).any() or not np.abs(lot.sum(1) - 1).max() <= SIMPLEX_TOL:
            raise ValidationError("each outcome lottery must lie on the simplex")
        self.lotteries = lot
        self.outcome_levels = lv
        uniq = np.unique(lv)
        # probability mass of each candidate on each preference level, best level first
        self._level_mass = np.stack([lot[:, lv == u].sum(1) for u in uniq], axis=1)
        self._win = None

    @property
    def num_actions(self) -> int:
        return self.lotteries.shape[0]

    def is_deterministic(self) -> bool:
        return bool(np.isclose(self._level_mass.max(1), 1.0, atol=SIMPLEX_TOL).all())

    def to_relation(self) -> PreferenceRelation:
        if not self.is_deterministic():
            raise ValidationError("ballot is stochastic")
        return PreferenceRelation.from_levels(self._level_mass.argmax(1))

    def win_tie(self) -> tuple[np.ndarray, np.ndarray]:
        """``win[a, b] = P(a strictly above b)``, ``tie[a, b] = P(a ~ b)`` (diagonal: tie 1)."""
        if self._win is None:
            d = self._level_mass
            L = d.shape[1]
            upper = np.triu(np.ones((L, L)), 1)
            win = d @ upper @ d.T
            tie = d @ d.T
            np.fill_diagonal(win, 0.0)
            np.fill_diagonal(tie, 1.0)
            self._win, self._tie = win, tie
        return self._win, self._tie

    def pairwise(self) -> np.ndarray:
        win, _ = self.win_tie()
        return win - win.T

    def borda_scores(self) -> np.ndarray:
        """Expected tie-averaged Borda score; equals sum over rivals of P(win) + P(tie)/2."""
        win, tie = self.win_tie()
        return win.sum(1) + 0.5 * (tie.sum(1) - 1.0)

    def expand(self, cap: int = 10**6, num_samples: int = 10**5, seed: int = 0):
        """Enumerate the joint outcome draws as ``(weights, relations, exact)``.

        Beyond ``cap`` joint draws a Monte Carlo sample of ``num_samples`` draws is used.
        """
        d = self._level_mass
        m, L = d.shape
        support = [np.flatnonzero(d[a] > 0) for a in range(m)]
        size = math.prod(len(s) for s in support)
        if size <= cap:
            draws = np.array(list(itertools.product(*support)), dtype=np.int64).reshape(-1, m)
            probs = np.prod(d[np.arange(m)[None, :], draws], axis=1)
            exact = True
        else:
            rng = np.random.Generator(np.random.Philox(seed))
            cum = np.cumsum(d, axis=1)
            u = rng.random((num_samples, m))
            draws = (u[:, :, None] > cum[None, :, :]).sum(2)
            draws = np.minimum(draws, L - 1)
            probs = np.full(num_samples, 1.0 / num_samples)
            exact = False
        rows, inv = np.unique(draws, axis=0, return_inverse=True)
        weights = np.bincount(inv.ravel(), weights=probs, minlength=len(rows))
        keep = weights > 0
        rels = [PreferenceRelation.from_levels(r) for r in rows[keep]]
        return weights[keep] / weights[keep].sum(), rels, exact


@dataclass(frozen=True)
class Scores:
    """Cardinal score ballot, one value per candidate."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def num_actions(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Grades:
    """Grade ballot: ``grades[a]`` in ``0..num_grades-1``, higher is better."""

    grades: tuple
    num_grades: int

    def __post_init__(self):
        g = tuple(int(v) for v in self.grades)
        if any(v < 0 or v >= self.num_grades for v in g):
            raise ValidationError(f"grades must lie in 0..{self.num_grades - 1}")
        object.__setattr__(self, "grades", g)

    @property
    def num_actions(self) -> int:
        return len(self.grades)


def ballot_kind(ballot) -> str:
    if isinstance(ballot, (PreferenceRelation, RankingLottery, OutcomeBallot)):
        return "ranking"
    if isinstance(ballot, Scores):
        return "scores"
    if isinstance(ballot, Grades):
        return "grades"
    raise ValidationError(f"not a ballot: {ballot!r}")


@dataclass(frozen=True)
class VotePopulation:
    """Finitely supported lottery over ballots of a single kind."""

    entries: tuple
    candidate_count: int
    exact: bool = True
    num_samples: int | None = None

    def __post_init__(self):
        entries = tuple((float(w), b) for w, b in self.entries)
        if not entries:
            raise ValidationError("empty vote population")
        ws = np.array([w for w, _ in entries])
        if (ws < 0).any() or not abs(ws.sum() - 1.0) <= SIMPLEX_TOL:
            raise ValidationError(f"ballot weights must be non-negative and sum to 1 (sum={ws.sum()})")
        kinds = {ballot_kind(b) for _, b in entries}
        if len(kinds) != 1:
            raise ValidationError(f"population mixes ballot kinds {sorted(kinds)}")
        if any(b.num_actions != self.candidate_count for _, b in entries):
            raise ValidationError("ballot length differs from candidate count")
        object.__setattr__(self, "entries", entries)

    @property
    def kind(self) -> str:
        return ballot_kind(self.entries[0][1])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.entries])

    @property
    def ballots(self) -> list:
        return [b for _, b in self.entries]

    def merged(self) -> VotePopulation:
        """Sum the weights of identical ballots (first-seen order kept)."""
        acc: dict = {}
        for w, b in self.entries:
            key = b if not isinstance(b, OutcomeBallot) else id(b)
            if key in acc:
                acc[key][0] += w
            else:
                acc[key] = [w, b]
        return VotePopulation(tuple((w, b) for w, b in acc.values()), self.candidate_count,
                              self.exact, self.num_samples)


# --------------------------------------------------------------------------- games


@dataclass(frozen=True)
class CardinalGame:
    """Normal-form game; ``payoffs[i]`` is indexed by the joint pure action."""

    payoffs: tuple

    def __post_init__(self):
        pays = tuple(np.asarray(u, dtype=float) for u in self.payoffs)
        if not pays:
            raise ValidationError("a game needs at least one player")
        shape = pays[0].shape
        if len(shape) != len(pays):
            raise ValidationError(f"{len(pays)} players but payoff tensors have {len(shape)} axes")
        if any(u.shape != shape for u in pays):
            raise ValidationError("payoff tensors must share one shape")
        if any(s < 1 for s in shape):
            raise ValidationError("every player needs at least one action")
        object.__setattr__(self, "payoffs", pays)

    @property
    def num_players(self) -> int:
        return len(self.payoffs)

    @property
    def action_counts(self) -> tuple:
        return self.payoffs[0].shape

    def expected_payoffs(self, player: int, profile: Sequence[np.ndarray]) -> np.ndarray:
        """Payoff of each pure action of ``player`` against the others' mixed strategies."""
        u = self.payoffs[player]
        # contract an outer axis first so the big tensor is read in place, never transposed
        shift = 0
        if player != 0:
            u = np.tensordot(profile[0], u, axes=([0], [0]))
            shift = 1
        for j in reversed(range(1, self.num_players)):
            if j != player:
                u = np.tensordot(u, profile[j], axes=([j - shift], [0]))
        return u


class ContextOrdinalGame:
    """Players rank their own actions conditionally on each co-player pure profile.

    Parameters
    ----------
    action_counts : sequence of int
    rho : sequence, one entry per player
        Either a mapping from co-player context (tuple of co-player actions, in
        player order) to a preference, or a callable ``context -> preference``.
        A preference is a :class:`PreferenceRelation`, a :class:`RankingLottery`
        or an :class:`OutcomeBallot`.
    scores : optional sequence of payoff tensors
        Score ballots for score voting (``scores[i][a]`` is player i's score of
        ``a_i`` in context ``a_{-i}``).
    grades : optional sequence of integer tensors, with ``num_grades``
        Grade ballots for social grading functions.
    """

    def __init__(self, action_counts, rho, scores=None, grades=None, num_grades=None,
                 action_names=None, player_names=None):
        self.action_counts = tuple(int(m) for m in action_counts)
        if any(m < 1 for m in self.action_counts):
            raise ValidationError("every player needs at least one action")
        n = len(self.action_counts)
        if len(rho) != n:
            raise ValidationError(f"rho has {len(rho)} entries for {n} players")
        self._rho = list(rho)
        for i, r in enumerate(self._rho):
            if isinstance(r, Mapping):
                self._rho[i] = {tuple(int(a) for a in k): v for k, v in r.items()}
                missing = [c for c in self.contexts(i) if c not in self._rho[i]]
                if missing:
                    raise ValidationError(f"player {i} has no preference for context {missing[0]}")
                for c, v in self._rho[i].items():
                    _check_preference(v, self.action_counts[i], i, c)
            elif not callable(r):
                raise ValidationError("rho entries must be mappings or callables")
        self.scores = None if scores is None else tuple(np.asarray(s, dtype=float) for s in scores)
        if self.scores is not None and any(s.shape != self.action_counts for s in self.scores):
            raise ValidationError("score tensors must have shape action_counts")
        self.grades = None if grades is None else tuple(np.asarray(g, dtype=int) for g in grades)
        self.num_grades = num_grades
        if self.grades is not None:
            if num_grades is None:
                raise ValidationError("grades need num_grades")
            if any(g.shape != self.action_counts for g in self.grades):
                raise ValidationError("grade tensors must have shape action_counts")
        self.action_names = action_names
        self.player_names = player_names
        self._cache: dict = {}

    @property
    def num_players(self) -> int:
        return len(self.action_counts)

    def co_player_counts(self, player: int) -> tuple:
        return tuple(m for j, m in enumerate(self.action_counts) if j != player)

    def contexts(self, player: int) -> Iterator[Context]:
        """Co-player pure profiles in row-major order (player index, then action index)."""
        return itertools.product(*(range(m) for m in self.co_player_counts(player)))

    def num_contexts(self, player: int) -> int:
        return math.prod(self.co_player_counts(player))

    def preference(self, player: int, context: Context):
        r = self._rho[player]
        if isinstance(r, dict):
            return r[tuple(context)]
        pref = r(tuple(context))
        _check_preference(pref, self.action_counts[player], player, context)
        return pref

    def is_deterministic(self) -> bool:
        return all(isinstance(self.preference(i, c), PreferenceRelation)
                   for i in range(self.num_players) for c in self.contexts(i))

    def _slice(self, tensors, player, context):
        idx = list(context)
        idx.insert(player, slice(None))
        return tensors[player][tuple(idx)]

    def ballot(self, player: int, context: Context, kind: str = "ranking"):
        """The ballot ``player`` casts in ``context`` for rules of the given ballot kind."""
        if kind == "ranking":
            return self.preference(player, context)
        if kind == "scores":
            if self.scores is None:
                raise ValidationError("this game carries no score ballots")
            return Scores(tuple(self._slice(self.scores, player, context)))
        if kind == "grades":
            if self.grades is None:
                raise ValidationError("this game carries no grade ballots")
            return Grades(tuple(self._slice(self.grades, player, context)), self.num_grades)
        raise ValidationError(f"unknown ballot kind {kind!r}")

    def __repr__(self):
        return f"ContextOrdinalGame(action_counts={self.action_counts})"


def _check_preference(pref, m, player, context):
    if not isinstance(pref, (PreferenceRelation, RankingLottery, OutcomeBallot)):
        raise ValidationError(f"player {player}, context {context}: not a preference: {pref!r}")
    if pref.num_actions != m:
        raise ValidationError(f"player {player}, context {context}: preference over "
                              f"{pref.num_actions} actions, expected {m}")


# ------------------------------------------------------------------ strategies


def as_strategy(probs, m: int | None = None) -> np.ndarray:
    x = np.asarray(probs, dtype=float)
    if x.ndim != 1 or (m is not None and len(x) != m):
        raise ValidationError(f"strategy must be a vector of length {m}")
    if (x < -SIMPLEX_TOL).any() or not abs(x.sum() - 1.0) <= SIMPLEX_TOL:
        raise ValidationError(f"strategy {x} is not on the simplex")
    return x


def as_profile(profile, action_counts) -> list:
    if len(profile) != len(action_counts):
        raise ValidationError("profile needs one strategy per player")
    return [as_strategy(x, m) for x, m in zip(profile, action_counts)]


def uniform(m: int) -> np.ndarray:
    return np.full(m, 1.0 / m)


def context_weights(counts: Sequence[int], x_minus_i) -> np.ndarray:
    """Joint co-player distribution as a tensor of shape ``counts``.

    ``x_minus_i`` is either a list of co-player strategies (independent play) or an
    explicit joint tensor.
    """
    counts = tuple(counts)
    if isinstance(x_minus_i, np.ndarray) and x_minus_i.shape == counts and len(counts) != 1:
        w = x_minus_i.astype(float)
    elif len(counts) == 1 and isinstance(x_minus_i, np.ndarray) and x_minus_i.ndim == 1:
        w = as_strategy(x_minus_i, counts[0])
    else:
        if len(x_minus_i) != len(counts):
            raise ValidationError(f"expected {len(counts)} co-player strategies, got {len(x_minus_i)}")
        w = np.ones(())
        for x, m in zip(x_minus_i, counts):
            w = np.multiply.outer(w, as_strategy(x, m))
    if (w < -SIMPLEX_TOL).any() or not abs(w.sum() - 1.0) <= SIMPLEX_TOL:
        raise ValidationError("co-player distribution is not a probability distribution")
    return np.clip(w, 0.0, None)


def vote_population(cog: ContextOrdinalGame, player: int, x_minus_i, kind: str = "ranking",
                    merge: bool = True) -> VotePopulation:
    """Ballots cast by ``player``: context ``a_{-i}`` contributes its ballot with weight ``x_{-i}(a_{-i})``.

    Stochastic preferences given as :class:`RankingLottery` are expanded, multiplying
    weights; :class:`OutcomeBallot` preferences stay compound.
    """
    w = context_weights(cog.co_player_counts(player), x_minus_i).ravel()
    entries = []
    for c, wc in zip(cog.contexts(player), w):
        if wc <= 0:
            continue
        b = cog.ballot(player, c, kind)
        if isinstance(b, RankingLottery):
            entries.extend((wc * wb, r) for wb, r in b.entries if wb > 0)
        else:
            entries.append((wc, b))
    total = sum(e[0] for e in entries)
    pop = VotePopulation(tuple((e[0] / total, e[1]) for e in entries), cog.action_counts[player])
    return pop.merged() if merge else pop


# -------------------------------------------------------------- conversions


def _round_sig(a: np.ndarray, digits: int = ROUND_DIGITS) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    out = a.copy()
    nz = a != 0
    mag = np.floor(np.log10(np.abs(a[nz])))
    # the scale is applied in two halves so neither factor overflows for extreme magnitudes
    e = digits - 1 - mag
    s1 = 10.0 ** np.floor(e / 2)
    s2 = 10.0 ** (e - np.floor(e / 2))
    out[nz] = np.round(a[nz] * s1 * s2) / s1 / s2
    return out


def cog_from_cardinal(game: CardinalGame) -> ContextOrdinalGame:
    """Rank each payoff slice ``U_i(., a_{-i})`` by descending payoff.

    Payoffs are compared after rounding to 12 significant digits; equal values share a tier.
    The payoffs themselves are kept as score ballots.
    """
    rho = []
    for i in range(game.num_players):
        u = np.moveaxis(_round_sig(game.payoffs[i]), i, -1)
        prefs = {}
        for c in itertools.product(*(range(m) for m in u.shape[:-1])):
            vals = u[c]
            prefs[c] = PreferenceRelation.from_levels(-vals)
        rho.append(prefs)
    return ContextOrdinalGame(game.action_counts, rho, scores=game.payoffs)


def borda_vector(m: int) -> np.ndarray:
    return np.arange(m - 1, -1, -1, dtype=float)


def _is_affine_in_position(v: np.ndarray) -> bool:
    return len(v) < 3 or np.allclose(np.diff(v), v[1] - v[0], rtol=0, atol=1e-12)


def expected_positional(pref, vector) -> np.ndarray:
    """Expected positional score of each action under a (possibly stochastic) preference."""
    vector = np.asarray(vector, dtype=float)
    if isinstance(pref, OutcomeBallot):
        m = pref.num_actions
        if _is_affine_in_position(vector):
            step = vector[0] - vector[1] if m > 1 else 0.0
            return vector[-1] + step * pref.borda_scores()
        ws, rels, _ = pref.expand()
        return sum(w * r.positional_scores(vector) for w, r in zip(ws, rels))
    return pref.positional_scores(vector)


def induce_nfg(cog: ContextOrdinalGame, scoring="borda") -> CardinalGame:
    """Normal-form game whose payoff slices are the positional scores of each preference.

    ``scoring`` is ``"borda"``, one score vector used for every player, a list of
    per-player vectors or a callable ``m -> vector``.  Stochastic preferences
    contribute their expected scores.
    """
    n = cog.num_players
    vectors = []
    for i, m in enumerate(cog.action_counts):
        if isinstance(scoring, str):
            if scoring != "borda":
                raise ValidationError(f"unknown scoring {scoring!r}")
            v = borda_vector(m)
        elif callable(scoring):
            v = np.asarray(scoring(m), dtype=float)
        elif len(scoring) > 0 and np.ndim(scoring[0]) == 1:
            v = np.asarray(scoring[i], dtype=float)
        else:
            v = np.asarray(scoring, dtype=float)
        if len(v) != m:
            raise ValidationError(f"player {i}: scoring vector of length {len(v)} for {m} actions")
        if (np.diff(v) > 0).any():
            raise ValidationError("positional score vectors must be non-increasing")
        vectors.append(v)
    payoffs = []
    for i in range(n):
        u = np.empty(cog.co_player_counts(i) + (cog.action_counts[i],))
        for c in cog.contexts(i):
            u[c] = expected_positional(cog.preference(i, c), vectors[i])
        payoffs.append(np.moveaxis(u, -1, i))
    return CardinalGame(tuple(payoffs))


def context_index(player: int, profile: Sequence[int]) -> tuple:
    """Drop ``player``'s own action from a joint pure profile."""
    return tuple(a for j, a in enumerate(profile) if j != player)


def make_cog(action_counts, prefs: Callable[[int, Context], PreferenceRelation], **kw) -> ContextOrdinalGame:
    """Materialise a COG from a preference function."""
    counts = tuple(action_counts)
    rho = []
    for i in range(len(counts)):
        others = [m for j, m in enumerate(counts) if j != i]
        rho.append({c: prefs(i, c) for c in itertools.product(*(range(m) for m in others))})
    return ContextOrdinalGame(counts, rho, **kw)
