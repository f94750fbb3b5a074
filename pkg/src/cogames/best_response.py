"""Social-choice best responses and their Monte Carlo regularization.

The regularized response averages the canonical rule outcome over perturbed
populations: the co-player distribution is jittered by a Dirichlet draw, and
each context's ballot is replaced, with probability ``p``, by a "usurper" ballot
that puts one action (drawn from ``mu``) strictly first and ties the rest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (ContextOrdinalGame, Grades, OutcomeBallot, PreferenceRelation, Scores,
                   VotePopulation, as_strategy, context_weights, uniform)
from .errors import ValidationError
from .voting import Rule, get_rule

CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class RegularizationParams:
    """Settings of the regularized best response.

    ``p`` is the usurper replacement probability, ``q`` the Dirichlet smoothing
    scale (0 disables smoothing), ``mu`` the target strategy (uniform when None),
    ``num_samples`` the Monte Carlo count.
    """

    p: float = 0.0
    q: float = 0.0
    mu: tuple | None = None
    num_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"p must lie in [0, 1], got {self.p}")
        if self.q < 0:
            raise ValidationError(f"q must be non-negative, got {self.q}")
        if self.num_samples < 1:
            raise ValidationError("num_samples must be at least 1")
        if self.mu is not None:
            object.__setattr__(self, "mu", tuple(as_strategy(self.mu)))

    def target(self, m: int) -> np.ndarray:
        if self.mu is None:
            return uniform(m)
        return as_strategy(self.mu, m)

    def is_identity(self) -> bool:
        return self.p == 0.0 and self.q == 0.0


SPARSE_CONTEXT_LIMIT = 50_000


def make_rng(seed, *keys) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------- tabulation


def context_table(cog: ContextOrdinalGame, player: int, rule: Rule) -> np.ndarray:
    """Rule features of the ballot in every context, row-major over contexts (cached)."""
    key = (player, rule.id)
    table = cog._cache.get(key)
    if table is None:
        ballots = [cog.ballot(player, c, rule.kind) for c in cog.contexts(player)]
        table = rule.tabulate(ballots, cog.action_counts[player])
        table.setflags(write=False)
        cog._cache[key] = table
    return table


def usurper_ballot(cog: ContextOrdinalGame, player: int, action: int, kind: str):
    """Ballot with ``action`` strictly first and every other action tied below it.

    For score ballots the two levels are the player's extreme scores; for grade
    ballots the top and bottom grades.
    """
    m = cog.action_counts[player]
    if kind == "ranking":
        rest = frozenset(range(m)) - {action}
        return PreferenceRelation((frozenset([action]), rest) if rest else (frozenset([action]),))
    if kind == "scores":
        s = cog.scores[player]
        hi, lo = float(s.max()), float(s.min())
        return Scores(tuple(hi if a == action else lo for a in range(m)))
    if kind == "grades":
        top = cog.num_grades - 1
        return Grades(tuple(top if a == action else 0 for a in range(m)), cog.num_grades)
    raise ValidationError(f"unknown ballot kind {kind!r}")


def usurper_table(cog, player, rule) -> np.ndarray:
    m = cog.action_counts[player]
    return rule.tabulate([usurper_ballot(cog, player, u, rule.kind) for u in range(m)], m)


# --------------------------------------------------------------- responses


def best_response(cog: ContextOrdinalGame, player: int, x_minus_i, rule="borda"):
    """Apply ``rule`` to the population of ballots ``player`` casts against ``x_minus_i``."""
    rule = get_rule(rule)
    w = context_weights(cog.co_player_counts(player), x_minus_i).ravel()
    m = cog.action_counts[player]
    if (player, rule.id) not in cog._cache and w.size > SPARSE_CONTEXT_LIMIT:
        # too many contexts to tabulate: only look at the ones carrying weight
        idx = np.flatnonzero(w > 0)
        counts = cog.co_player_counts(player)
        ballots = [cog.ballot(player, tuple(int(v) for v in np.unravel_index(k, counts)), rule.kind)
                   for k in idx]
        table = rule.tabulate(ballots, m)
        return rule.decide(np.tensordot(w[idx], table, axes=1), m)
    table = context_table(cog, player, rule)
    return rule.decide(np.tensordot(w, table, axes=1), m)


def perturbed_population(cog: ContextOrdinalGame, player: int, profile_weights, usurper: int,
                         replaced, kind: str = "ranking") -> VotePopulation:
    """One draw of the regularization: ``profile_weights`` over contexts (row-major),
    with the ballots of the contexts flagged in ``replaced`` swapped for the usurper ballot."""
    w = np.asarray(profile_weights, dtype=float).ravel()
    replaced = np.asarray(replaced, dtype=bool).ravel()
    if len(w) != cog.num_contexts(player) or len(replaced) != len(w):
        raise ValidationError("one weight and one replacement flag per context are required")
    v_u = usurper_ballot(cog, player, usurper, kind)
    entries = [(wc, v_u if r else cog.ballot(player, c, kind))
               for wc, r, c in zip(w, replaced, cog.contexts(player)) if wc > 0]
    return VotePopulation(tuple(entries), cog.action_counts[player]).merged()


def regularized_best_response(cog: ContextOrdinalGame, player: int, x_minus_i, rule="borda",
                              params: RegularizationParams | None = None) -> np.ndarray:
    """Monte Carlo regularized best response; always a single mixed strategy.

    With ``p == q == 0`` the canonical member of the exact best response is returned.
    """
    rule = get_rule(rule)
    params = params or RegularizationParams()
    m = cog.action_counts[player]
    w = context_weights(cog.co_player_counts(player), x_minus_i).ravel()
    table = context_table(cog, player, rule)
    if params.is_identity():
        return rule.decide(np.tensordot(w, table, axes=1), m).canonical()
    full = np.concatenate([table, usurper_table(cog, player, rule)], axis=0)
    return _rbr_from_table(rule, full, w, m, params)


def _rbr_from_table(rule: Rule, full_table, w, m, params, rng=None) -> np.ndarray:
    """Shared sampler: ``full_table`` holds the context rows followed by ``m`` usurper rows."""
    C = len(w)
    mu = params.target(m)
    rng = rng or make_rng(params.seed)
    chunk = max(1, CHUNK_ELEMENTS // max(C, 1))
    total = np.zeros(m)
    done = 0
    while done < params.num_samples:
        S = min(chunk, params.num_samples - done)
        if params.q > 0:
            xs = rng.dirichlet(1.0 + w / params.q, size=S)
        else:
            xs = np.broadcast_to(w, (S, C))
        usurpers = rng.choice(m, size=S, p=mu)
        bits = rng.random((S, C)) < params.p
        W = np.zeros((S, C + m))
        W[:, :C] = np.where(bits, 0.0, xs)
        W[np.arange(S), C + usurpers] = np.where(bits, xs, 0.0).sum(1)
        total += rule.canonical_batch(W, full_table, m).sum(0)
        done += S
    out = total / params.num_samples
    return out / out.sum()


# --------------------------------------------------- stochastic outcomes


@dataclass(frozen=True)
class BallotExpansion:
    """Rankings induced by independent outcome draws, weights scaled by the context weight."""

    entries: tuple
    exact: bool
    num_samples: int | None

    def population(self) -> VotePopulation:
        total = sum(w for w, _ in self.entries)
        m = self.entries[0][1].num_actions
        return VotePopulation(tuple((w / total, r) for w, r in self.entries), m,
                              self.exact, self.num_samples)


def stochastic_vote_population(outcome_lotteries, pref: PreferenceRelation, weight: float = 1.0,
                               cap: int = 10**6, num_samples: int = 10**5,
                               seed: int = 0) -> BallotExpansion:
    """Expand per-action outcome lotteries into weighted rankings of the actions.

    Each action's outcome is drawn independently; actions are ranked by ``pref``
    over their realised outcomes, and actions whose outcomes tie share a tier.
    Above ``cap`` joint draws a Monte Carlo sample of ``num_samples`` is used.
    """
    ballot = OutcomeBallot(outcome_lotteries, pref.levels)
    ws, rels, exact = ballot.expand(cap=cap, num_samples=num_samples, seed=seed)
    return BallotExpansion(tuple((weight * w, r) for w, r in zip(ws, rels)), exact,
                           None if exact else num_samples)
