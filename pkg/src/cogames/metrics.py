"""Approximation metrics, equilibrium checks, distortion bounds, Shapley breakdowns, FSD."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .best_response import (RegularizationParams, best_response, context_table, make_rng,
                            regularized_best_response)
from .core import (CardinalGame, ContextOrdinalGame, OutcomeBallot, PreferenceRelation,
                   RankingLottery, as_profile, context_weights, make_cog)
from .errors import SolverError, UnsupportedRuleError, ValidationError
from .voting import ExplicitLottery, PositionalRule, ScoreRule, get_rule

DEFAULT_TOL = 1e-9


# ------------------------------------------------------------ exploitability


def classical_exploitability(nfg: CardinalGame, profile) -> tuple:
    """Per-player gain of the best pure deviation, and the maximum over players."""
    x = as_profile(profile, nfg.action_counts)
    eps = []
    for i in range(nfg.num_players):
        u = nfg.expected_payoffs(i, x)
        eps.append(max(0.0, float(u.max() - u @ x[i])))
    eps = np.array(eps)
    return eps, float(eps.max())


def emd_exploitability(cog: ContextOrdinalGame, rule, profile,
                       params: RegularizationParams | None = None) -> tuple:
    """Distance from each player's strategy to their (regularized) best response.

    Without regularization this is the mass on losing actions for winner-set rules and
    half the L1 distance to the lottery for lottery rules; with regularization it is
    half the L1 distance to the regularized response.
    """
    x = as_profile(profile, cog.action_counts)
    eps = []
    for i in range(cog.num_players):
        others = [v for j, v in enumerate(x) if j != i]
        if params is None or params.is_identity():
            eps.append(best_response(cog, i, others, rule).distance(x[i]))
        else:
            r = regularized_best_response(cog, i, others, rule, params)
            eps.append(float(0.5 * np.abs(r - x[i]).sum()))
    eps = np.array(eps)
    return eps, float(eps.max())


# -------------------------------------------------------------- verification


@dataclass
class Verdict:
    player: int
    in_best_response: bool
    epsilon: float
    witness: object = None
    action: int | None = None


@dataclass
class VerificationReport:
    verdicts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.in_best_response for v in self.verdicts)

    def failing(self) -> list:
        return [v for v in self.verdicts if not v.in_best_response]

    def to_rows(self) -> list:
        rows = []
        for v in self.verdicts:
            w = v.witness
            if isinstance(w, np.ndarray):
                w = " ".join(repr(float(a)) for a in w)
            rows.append({"player": v.player, "action": "" if v.action is None else v.action,
                         "in_best_response": v.in_best_response, "epsilon": v.epsilon,
                         "witness": "" if w is None else w})
        return rows


def _witness(br, x_i, tol):
    if isinstance(br, ExplicitLottery):
        return br.canonical()
    outside = [a for a in br.winners if x_i[a] <= tol]
    return outside[0] if outside else br.winners[0]


def verify_ne(cog: ContextOrdinalGame, rule, profile, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Check every player's strategy against their unregularized best response."""
    x = as_profile(profile, cog.action_counts)
    report = VerificationReport()
    for i in range(cog.num_players):
        br = best_response(cog, i, [v for j, v in enumerate(x) if j != i], rule)
        eps = br.distance(x[i])
        ok = eps <= tol
        report.verdicts.append(Verdict(i, ok, eps, None if ok else _witness(br, x[i], tol)))
    return report


def verify_ce(cog: ContextOrdinalGame, rule, joint, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Correlated-equilibrium check: each recommended action must be a best response to
    the co-player distribution conditioned on that recommendation."""
    joint = np.asarray(joint, dtype=float)
    if joint.shape != cog.action_counts:
        raise ValidationError(f"joint distribution must have shape {cog.action_counts}")
    if (joint < -tol).any() or not abs(joint.sum() - 1) <= 1e-9:
        raise ValidationError("joint distribution must be non-negative and sum to 1")
    report = VerificationReport()
    for i in range(cog.num_players):
        marg = joint.sum(axis=tuple(j for j in range(cog.num_players) if j != i))
        for a in range(cog.action_counts[i]):
            if marg[a] <= tol:
                continue
            cond = np.take(joint, a, axis=i) / marg[a]
            br = best_response(cog, i, cond, rule)
            ok = a in br.support
            eps = br.distance(np.eye(cog.action_counts[i])[a])
            report.verdicts.append(Verdict(i, ok, eps, None if ok else _witness(
                br, np.eye(cog.action_counts[i])[a], tol), action=a))
    return report


# ------------------------------------------------------- hindsight winrate


def win_probabilities(pref) -> np.ndarray:
    """``W[a, b]``: probability that a is strictly preferred to b."""
    if isinstance(pref, PreferenceRelation):
        return (pref.pairwise() > 0).astype(float)
    if isinstance(pref, RankingLottery):
        return sum(w * (r.pairwise() > 0) for w, r in pref.entries)
    if isinstance(pref, OutcomeBallot):
        return pref.win_tie()[0]
    raise ValidationError(f"not a preference: {pref!r}")


def _meta_game():
    # two meta-candidates (0 = hindsight, 1 = online); the dummy co-player's three
    # actions are the ballot types: hindsight first, online first, indifferent
    ballots = {(0,): PreferenceRelation.from_order([0, 1]),
               (1,): PreferenceRelation.from_order([1, 0]),
               (2,): PreferenceRelation((frozenset([0, 1]),))}
    flat = PreferenceRelation((frozenset([0, 1, 2]),))
    return make_cog((2, 3), lambda i, c: ballots[c] if i == 0 else flat)


def hindsight_winrate(traj, cog: ContextOrdinalGame, player: int, rule,
                      params: RegularizationParams | None = None) -> np.ndarray:
    """Probability the best fixed strategy in hindsight wins a two-way meta-election
    against the online play, for every prefix of the trajectory.

    The hindsight strategy is the canonical best response to the votes pooled over
    rounds ``1..t``.  Meta-ballots compare a hindsight action with an online action,
    both sampled from their strategies, in each co-player context of each round.
    Rules that do not take rankings use Borda in the meta-election.
    """
    rule = get_rule(rule)
    params = params or RegularizationParams()
    meta_rule = rule if rule.kind == "ranking" else get_rule("borda")
    meta = _meta_game()
    counts = cog.co_player_counts(player)
    table = context_table(cog, player, rule)
    wins = np.array([win_probabilities(cog.preference(player, c)) for c in cog.contexts(player)])
    m = cog.action_counts[player]
    pooled = np.zeros(int(np.prod(counts)))
    acc_h = np.zeros(m)
    acc_o = np.zeros(m)
    out = []
    T = len(traj.iterates) - 1
    for t in range(1, T + 1):
        prof = traj.iterates[t]
        w = context_weights(counts, [v for j, v in enumerate(prof) if j != player]).ravel()
        pooled += w
        x_t = prof[player]
        B = np.tensordot(w, wins, axes=1)  # B[a, b]: P(a beats b) in round t
        acc_h += B @ x_t
        acc_o += B.T @ x_t
        agg = np.tensordot(pooled / t, table, axes=1)
        z = rule.decide(agg, m).canonical()
        h = float(z @ acc_h) / t
        o = float(z @ acc_o) / t
        mass = np.clip(np.array([h, o, 1.0 - h - o]), 0.0, None)
        mass /= mass.sum()
        sub = RegularizationParams(params.p, params.q, params.mu, params.num_samples,
                                   int(make_rng(params.seed, t).integers(2**31)))
        r = regularized_best_response(meta, 0, [mass], meta_rule, sub)
        out.append(float(r[0]))
    return np.array(out)


# --------------------------------------------------------- margin of victory


def margin_of_victory(cog: ContextOrdinalGame, rule, player: int, profile) -> float:
    """Smallest fraction of ballot weight that must be rewritten for every action in the
    support of ``player``'s strategy to share the top rule score.

    Rewritten ballots may become any ranking (positional rules) or any score vector within
    the player's score range (score voting).
    """
    rule = get_rule(rule)
    if not isinstance(rule, (PositionalRule, ScoreRule)):
        raise UnsupportedRuleError(f"margin of victory needs a positional or score rule, not {rule.id}")
    x = as_profile(profile, cog.action_counts)
    m = cog.action_counts[player]
    w = context_weights(cog.co_player_counts(player), [v for j, v in enumerate(x) if j != player]).ravel()
    keep = w > 0
    F = context_table(cog, player, rule)[keep]
    w = w[keep]
    support = np.flatnonzero(x[player] > DEFAULT_TOL)
    base = w @ F
    C = len(w)
    if isinstance(rule, ScoreRule):
        lo, hi = float(cog.scores[player].min()), float(cog.scores[player].max())
        nY = m  # synthetic score vector y with lo*D <= y <= hi*D
    else:
        v = rule.vector_fn(m)
        nY = m * m  # doubly stochastic plan scaled by D
    nvar = C + nY
    cost = np.r_[np.ones(C), np.zeros(nY)]

    def score_row(a):
        # coefficients of the final score of action a (constant part returned separately)
        row = np.zeros(nvar)
        row[:C] = -F[:, a]
        if isinstance(rule, ScoreRule):
            row[C + a] = 1.0
        else:
            row[C + a * m: C + (a + 1) * m] = v
        return row

    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    a0 = support[0]
    r0 = score_row(a0)
    for a in range(m):
        ra = score_row(a)
        if a in support[1:]:
            A_eq.append(ra - r0)
            b_eq.append(base[a0] - base[a])
        elif a not in support:
            A_ub.append(ra - r0)
            b_ub.append(base[a0] - base[a])
    if isinstance(rule, ScoreRule):
        for a in range(m):
            row = np.zeros(nvar)
            row[C + a] = -1.0
            row[:C] = lo
            A_ub.append(row)
            b_ub.append(0.0)
            row = np.zeros(nvar)
            row[C + a] = 1.0
            row[:C] = -hi
            A_ub.append(row)
            b_ub.append(0.0)
    else:
        for k in range(m):
            row = np.zeros(nvar)
            row[C + k * m: C + (k + 1) * m] = 1.0
            row[:C] = -1.0
            A_eq.append(row)
            b_eq.append(0.0)
            col = np.zeros(nvar)
            col[C + k: C + nY: m] = 1.0
            col[:C] = -1.0
            A_eq.append(col)
            b_eq.append(0.0)
    bounds = [(0.0, float(wc)) for wc in w] + [(None, None) if isinstance(rule, ScoreRule) else (0.0, None)] * nY
    res = linprog(cost, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                  A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
                  bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverError(f"margin-of-victory LP failed: {res.message}")
    return float(max(0.0, res.fun))


# ------------------------------------------------------------------ bounds


def distortion_bounds(sums, d_plus: float, p: float = 0.0, num_contexts: int = 1,
                      T: int = 1) -> dict:
    """Distortion and fictitious-play bounds from per-context payoff sums.

    Returns the additive gap ``kappa_plus``, the scaled additive distortion ``d_bar_plus``,
    the multiplicative factor ``kappa_mult``, the extra distortion from regularization
    ``reg_extra``, the weakened fictitious play bound ``wfp_eps`` with factor (T-1)/(2T),
    the variant ``wfp_eps_half`` with factor 1/2, and ``remark_bound`` = 1 - d_plus * min/max.
    """
    s = np.asarray(sums, dtype=float).ravel()
    if s.size == 0:
        raise ValidationError("need at least one payoff sum")
    if s.min() <= 0:
        raise ValidationError("payoff sums must be strictly positive")
    if d_plus < 0:
        raise ValidationError("base distortion must be non-negative")
    if not 0 <= p <= 1:
        raise ValidationError("p must lie in [0, 1]")
    if T < 1 or num_contexts < 1:
        raise ValidationError("T and the context count must be at least 1")
    lo, hi = float(s.min()), float(s.max())
    kappa_plus = hi - lo
    d_bar = kappa_plus + lo * d_plus
    return {
        "kappa_plus": kappa_plus,
        "d_bar_plus": d_bar,
        "kappa_mult": hi / lo,
        "reg_extra": 1.0 - (1.0 - p) ** num_contexts,
        "wfp_eps": (T + 1) / (2 * T) + (T - 1) / (2 * T) * d_bar,
        "wfp_eps_half": (T + 1) / (2 * T) + 0.5 * d_bar,
        "remark_bound": 1.0 - d_plus * lo / hi,
    }


# ----------------------------------------------------------------- shapley


def shapley_breakdown(cog: ContextOrdinalGame, rule, profile, player: int = 0,
                      co_player: int = 1) -> np.ndarray:
    """Attribute the best-response mass on each of ``player``'s actions to the co-player's actions.

    The characteristic value of a set of co-player actions is the canonical best-response
    mass when the co-player's strategy is restricted (and renormalised) to that set; the
    empty set, or a set carrying no probability, is worth 0.
    """
    if cog.num_players != 2:
        raise UnsupportedRuleError("Shapley breakdowns are defined for two-player games")
    if {player, co_player} != {0, 1}:
        raise ValidationError("player and co_player must be 0 and 1")
    x = as_profile(profile, cog.action_counts)
    y = x[co_player]
    n = len(y)
    m = cog.action_counts[player]
    cache = {}

    def value(subset):
        if subset not in cache:
            mass = y[list(subset)].sum() if subset else 0.0
            if mass <= 0:
                cache[subset] = np.zeros(m)
            else:
                z = np.zeros(n)
                z[list(subset)] = y[list(subset)] / mass
                cache[subset] = best_response(cog, player, [z], rule).canonical()
        return cache[subset]

    out = np.zeros((m, n))
    for j in range(n):
        others = [k for k in range(n) if k != j]
        for r in range(len(others) + 1):
            coef = math.factorial(r) * math.factorial(n - r - 1) / math.factorial(n)
            for S in itertools.combinations(others, r):
                out[:, j] += coef * (value(tuple(sorted(S + (j,)))) - value(S))
    return out


# ---------------------------------------------------------------------- FSD


def _cut_matrix(relations) -> list:
    """For each relation, indicator rows of its upper sets (first k tiers, k < #tiers)."""
    out = []
    for r in relations:
        lv = r.levels
        out.append(np.array([(lv <= k).astype(float) for k in range(len(r.tiers) - 1)]).reshape(-1, len(lv)))
    return out


def _relations(cog, player, x_minus_i):
    w = context_weights(cog.co_player_counts(player), x_minus_i).ravel()
    rels = []
    for wc, c in zip(w, cog.contexts(player)):
        if wc > 0:
            pref = cog.preference(player, c)
            if not isinstance(pref, PreferenceRelation):
                raise UnsupportedRuleError("FSD checks need deterministic preferences")
            rels.append(pref)
    return rels


def fsd_dominates_relations(relations, x, y, tol: float = DEFAULT_TOL) -> bool:
    """Whether ``x`` strictly first-order dominates ``y`` for every relation simultaneously."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    strict = False
    for cuts in _cut_matrix(relations):
        if cuts.size == 0:
            continue
        diff = cuts @ x - cuts @ y
        if (diff < -tol).any():
            return False
        strict |= bool((diff > tol).any())
    return strict


def fsd_dominates(cog: ContextOrdinalGame, player: int, x_minus_i, x, y) -> bool:
    """Strict first-order stochastic dominance of ``x`` over ``y`` in every context with positive weight."""
    return fsd_dominates_relations(_relations(cog, player, x_minus_i), x, y)


def fsd_dominated_by_any(relations, x, tol: float = 1e-9):
    """Find a lottery strictly dominating ``x`` for all ``relations``; None when there is none."""
    x = np.asarray(x, dtype=float)
    m = len(x)
    cuts = [c for c in _cut_matrix(relations) if c.size]
    if not cuts:
        return None
    A = np.vstack(cuts)
    # maximise total cut improvement subject to no cut getting worse
    res = linprog(-A.sum(0), A_ub=-A, b_ub=-(A @ x), A_eq=np.ones((1, m)), b_eq=[1.0],
                  bounds=[(0, None)] * m, method="highs")
    if res.status != 0:
        return None
    gain = -(res.fun) - A.sum(0) @ x
    return res.x if gain > tol else None
