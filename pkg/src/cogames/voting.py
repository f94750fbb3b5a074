"""Voting rules over lotteries of ballots.

Every rule here aggregates ballots *linearly*: a ballot is mapped to a feature
array (positional scores, a pairwise sign matrix, a score vector or a one-hot
grade table), the population's features are the weighted sum, and the winner is
decided from that sum.  This lets the regularized best response evaluate many
reweighted populations with one matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.linalg import null_space

from .core import (Grades, OutcomeBallot, PreferenceRelation, RankingLottery, Scores,
                   VotePopulation, borda_vector, expected_positional)
from .errors import SolverError, UnsupportedRuleError, ValidationError

TIE_TOL = 1e-9
ML_RESIDUAL_TOL = 1e-7


# ----------------------------------------------------------------- outputs


@dataclass(frozen=True)
class SupportSet:
    """Every lottery supported on ``winners``; the canonical member is the uniform one."""

    winners: tuple
    num_candidates: int
    scores: tuple | None = None

    def __post_init__(self):
        if not self.winners:
            raise ValidationError("winner set must be non-empty")
        object.__setattr__(self, "winners", tuple(sorted(int(a) for a in self.winners)))

    def canonical(self) -> np.ndarray:
        x = np.zeros(self.num_candidates)
        x[list(self.winners)] = 1.0 / len(self.winners)
        return x

    @property
    def support(self) -> tuple:
        return self.winners

    def distance(self, x) -> float:
        """Mass ``x`` places outside the winner set."""
        x = np.asarray(x, dtype=float)
        return float(max(0.0, 1.0 - x[list(self.winners)].sum()))


@dataclass(frozen=True, eq=False)
class ExplicitLottery:
    """A single lottery, e.g. a maximal lottery."""

    probs: np.ndarray

    def canonical(self) -> np.ndarray:
        return np.array(self.probs, dtype=float)

    @property
    def num_candidates(self) -> int:
        return len(self.probs)

    @property
    def support(self) -> tuple:
        return tuple(np.flatnonzero(np.asarray(self.probs) > ML_RESIDUAL_TOL).tolist())

    def distance(self, x) -> float:
        """Earth mover's distance under the unit metric, i.e. half the L1 distance."""
        return float(0.5 * np.abs(np.asarray(x, dtype=float) - self.probs).sum())


def winner_mask(values: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Entries within a relative ``tol`` of the row maximum (works on the last axis)."""
    v = np.asarray(values, dtype=float)
    top = v.max(axis=-1, keepdims=True)
    return v >= top - tol * np.maximum(1.0, np.abs(top))


# ---------------------------------------------------------- maximal lotteries


def _lp_max_coordinate(M, a):
    m = len(M)
    c = np.zeros(m)
    c[a] = -1.0
    res = linprog(c, A_ub=M, b_ub=np.zeros(m), A_eq=np.ones((1, m)), b_eq=[1.0],
                  bounds=[(0, None)] * m, method="highs")
    if res.status != 0:
        raise SolverError(f"maximal lottery LP failed: {res.message}")
    return np.clip(res.x, 0.0, None)


def maximal_lottery_from_margin(M, tol: float = TIE_TOL) -> np.ndarray:
    """Maximum-entropy optimal strategy of the symmetric zero-sum game with payoff ``M``.

    Optimal strategies are the ``x`` in the simplex with ``M x <= 0``.  The
    essential set (union of their supports) is found with one LP per
    unclassified candidate; the maximum-entropy point of the optimal face is then
    found over the affine hull of the equality constraints.
    """
    M = np.asarray(M, dtype=float)
    m = len(M)
    if m == 1:
        return np.ones(1)
    off = ~np.eye(m, dtype=bool)
    for a in range(m):
        if (M[a][off[a]] > tol).all():
            x = np.zeros(m)
            x[a] = 1.0
            return x
    if np.abs(M).max() <= tol:
        return np.full(m, 1.0 / m)

    status = np.zeros(m, dtype=int)  # 0 unknown, 1 essential, -1 never in support
    solutions = []
    for a in range(m):
        if status[a] != 0:
            continue
        y = _lp_max_coordinate(M, a)
        y /= y.sum()
        solutions.append(y)
        status[y > 1e-8] = 1
        slack = M @ y
        status[(slack < -1e-8) & (status == 0)] = -1
        if status[a] == 0:
            status[a] = -1
    ess = np.flatnonzero(status == 1)
    x0 = np.mean(solutions, axis=0)
    x0[status != 1] = 0.0
    x0 /= x0.sum()

    out = np.setdiff1d(np.arange(m), ess)
    M_ee = M[np.ix_(ess, ess)]
    A_eq = np.vstack([M_ee, np.ones((1, len(ess)))])
    N = null_space(A_eq, rcond=1e-10)
    xe = x0[ess]
    if N.shape[1] > 0:
        M_oe = M[np.ix_(out, ess)]

        def negent(z):
            y = np.clip(xe + N @ z, 1e-300, None)
            return float(np.sum(y * np.log(y)))

        def grad(z):
            y = np.clip(xe + N @ z, 1e-300, None)
            return N.T @ (np.log(y) + 1.0)

        cons = [{"type": "ineq", "fun": lambda z: xe + N @ z, "jac": lambda z: N}]
        if len(out):
            cons.append({"type": "ineq", "fun": lambda z: -(M_oe @ (xe + N @ z)),
                         "jac": lambda z: -(M_oe @ N)})
        res = minimize(negent, np.zeros(N.shape[1]), jac=grad, constraints=cons,
                       method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        xe = xe + N @ res.x
    else:
        # the optimal face is a single point; polish x0 with a least-squares solve
        rhs = np.zeros(len(ess) + 1)
        rhs[-1] = 1.0
        xe = np.linalg.lstsq(A_eq, rhs, rcond=None)[0]
    x = np.zeros(m)
    x[ess] = np.clip(xe, 0.0, None)
    x /= x.sum()
    residual = float((M @ x).max())
    if residual > ML_RESIDUAL_TOL:
        raise SolverError(f"maximal lottery residual {residual:.3g} exceeds tolerance", residual)
    return x


# ----------------------------------------------------------- grading helpers


def grade_by_quantiles(values, num_grades: int) -> np.ndarray:
    """Bin ``values`` into ``num_grades`` grades at the empirical k/num_grades quantiles.

    Bins are right-closed, so a value equal to an edge falls in the lower bin.
    When all values are equal everybody gets the top grade.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValidationError("cannot grade an empty vector")
    if num_grades < 2:
        raise ValidationError("need at least two grades")
    if np.all(v == v.flat[0]):
        return np.full(v.shape, num_grades - 1, dtype=int)
    edges = np.quantile(v, np.arange(1, num_grades) / num_grades)
    return (v[..., None] > edges).sum(-1).astype(int)


def _lower_medians(mass: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Lower median grade per candidate from grade masses ``(..., m, G)``."""
    cum = np.cumsum(mass, axis=-1)
    half = 0.5 * cum[..., -1:]
    return np.argmax(cum >= half - tol * np.maximum(1.0, half), axis=-1)


def majority_judgment(mass: np.ndarray, tol: float = TIE_TOL) -> tuple:
    """Winners of majority judgment from per-candidate grade masses ``(m, G)``.

    Candidates with the highest lower median survive.  Remaining ties are broken by
    the majority gauge: a candidate whose above-median mass exceeds its below-median
    mass beats one where the reverse holds, larger above-mass wins among the former and
    smaller below-mass among the latter.  Still-tied candidates lose median mass
    until their median moves and the comparison repeats.
    """
    mass = np.array(mass, dtype=float)
    m, G = mass.shape
    alive = np.arange(m)
    for _ in range(4 * G + 4):
        med = _lower_medians(mass[alive], tol)
        alive = alive[med == med.max()]
        if len(alive) == 1:
            break
        g = int(med.max())
        W = mass[alive].sum(1)
        above = mass[alive, g + 1:].sum(1)
        below = mass[alive, :g].sum(1)
        up = above > below + tol
        value = np.where(up, above, -below)
        keep = winner_mask(value, tol)
        alive = alive[keep]
        if len(alive) == 1:
            break
        W, above, below, up = W[keep], above[keep], below[keep], up[keep]
        at_g = mass[alive, g]
        if (at_g <= tol).all():
            break
        remove = np.where(up, W - 2 * above + 1e-12 * W, W - 2 * below)
        remove = np.clip(remove, 0.0, at_g)
        if (remove <= 0).all():
            break
        mass[alive, g] -= remove
        if (mass[alive].sum(1) <= tol).all():
            break
    return tuple(alive.tolist())


# ------------------------------------------------------------------ rules


def _ranking_positional(ballot, vector):
    if isinstance(ballot, (PreferenceRelation, RankingLottery, OutcomeBallot)):
        return expected_positional(ballot, vector)
    raise UnsupportedRuleError(f"positional rules need ranking ballots, got {type(ballot).__name__}")


def _ranking_pairwise(ballot):
    if isinstance(ballot, (PreferenceRelation, RankingLottery, OutcomeBallot)):
        return ballot.pairwise()
    raise UnsupportedRuleError(f"pairwise rules need ranking ballots, got {type(ballot).__name__}")


class Rule:
    """A voting rule identified by a string id.

    ``tabulate`` turns ballots into features, ``decide`` maps aggregated features to
    a best-response set and ``canonical_batch`` evaluates many weightings at once.
    """

    def __init__(self, rule_id: str, kind: str, linear_score: bool):
        self.id = rule_id
        self.kind = kind
        self.linear_score = linear_score

    def tabulate(self, ballots, m: int) -> np.ndarray:
        raise NotImplementedError

    def decide(self, agg: np.ndarray, m: int):
        raise NotImplementedError

    def __call__(self, pop: VotePopulation):
        if pop.kind != self.kind:
            raise UnsupportedRuleError(f"rule {self.id!r} needs {self.kind} ballots, got {pop.kind}")
        table = self.tabulate(pop.ballots, pop.candidate_count)
        agg = np.tensordot(pop.weights, table, axes=1)
        return self.decide(agg, pop.candidate_count)

    def canonical_batch(self, weights: np.ndarray, table: np.ndarray, m: int) -> np.ndarray:
        """Canonical outcome for each row of ``weights`` (shape ``(S, B)``)."""
        agg = np.tensordot(weights, table, axes=1)
        return np.stack([self.decide(a, m).canonical() for a in agg])

    def __repr__(self):
        return f"Rule({self.id!r})"


class PositionalRule(Rule):
    def __init__(self, rule_id, vector_fn):
        super().__init__(rule_id, "ranking", True)
        self.vector_fn = vector_fn

    def tabulate(self, ballots, m):
        v = self.vector_fn(m)
        return np.array([_ranking_positional(b, v) for b in ballots]).reshape(len(ballots), m)

    def decide(self, agg, m):
        mask = winner_mask(agg)
        return SupportSet(tuple(np.flatnonzero(mask)), m, tuple(agg.tolist()))

    def canonical_batch(self, weights, table, m):
        agg = weights @ table
        mask = winner_mask(agg).astype(float)
        return mask / mask.sum(1, keepdims=True)


class ScoreRule(PositionalRule):
    def __init__(self):
        Rule.__init__(self, "score", "scores", True)

    def tabulate(self, ballots, m):
        if not all(isinstance(b, Scores) for b in ballots):
            raise UnsupportedRuleError("score voting needs score ballots")
        return np.array([b.values for b in ballots], dtype=float).reshape(len(ballots), m)


class CopelandRule(Rule):
    def __init__(self):
        super().__init__("copeland", "ranking", False)

    def tabulate(self, ballots, m):
        return np.array([_ranking_pairwise(b) for b in ballots]).reshape(len(ballots), m, m)

    def decide(self, agg, m):
        sign = np.where(agg > TIE_TOL, 1, np.where(agg < -TIE_TOL, -1, 0))
        score = sign.sum(1).astype(float)
        return SupportSet(tuple(np.flatnonzero(winner_mask(score))), m, tuple(score.tolist()))

    def canonical_batch(self, weights, table, m):
        agg = np.tensordot(weights, table, axes=1)
        sign = np.where(agg > TIE_TOL, 1, np.where(agg < -TIE_TOL, -1, 0))
        mask = winner_mask(sign.sum(2).astype(float)).astype(float)
        return mask / mask.sum(1, keepdims=True)


class MaximalLotteryRule(CopelandRule):
    def __init__(self):
        Rule.__init__(self, "maximal_lottery", "ranking", False)

    def decide(self, agg, m):
        return ExplicitLottery(maximal_lottery_from_margin(agg))

    def canonical_batch(self, weights, table, m):
        agg = np.tensordot(weights, table, axes=1)
        out = np.zeros((len(agg), m))
        # rows with a Condorcet winner need no LP
        beats = (agg > TIE_TOL) | np.eye(m, dtype=bool)
        condorcet = beats.all(2)
        has = condorcet.any(1)
        out[has] = condorcet[has].astype(float)
        for s in np.flatnonzero(~has):
            out[s] = maximal_lottery_from_margin(agg[s])
        return out


class GradingRule(Rule):
    def __init__(self, num_grades):
        super().__init__(f"sgf:{num_grades}", "grades", False)
        self.num_grades = num_grades

    def tabulate(self, ballots, m):
        if not all(isinstance(b, Grades) for b in ballots):
            raise UnsupportedRuleError("grading rules need grade ballots")
        if any(b.num_grades != self.num_grades for b in ballots):
            raise UnsupportedRuleError(f"ballots use a different grade scale than {self.id}")
        g = np.array([b.grades for b in ballots], dtype=int).reshape(len(ballots), m)
        return np.eye(self.num_grades)[g]

    def decide(self, agg, m):
        return SupportSet(majority_judgment(agg), m)


def plurality_vector(m):
    v = np.zeros(m)
    v[0] = 1.0
    return v


def veto_vector(m):
    v = np.ones(m)
    v[-1] = 0.0
    return v


RULE_IDS = ("borda", "plurality", "veto", "score", "copeland", "maximal_lottery", "sgf:<num_grades>")


def get_rule(rule_id) -> Rule:
    """Look up a rule by id; ``Rule`` instances pass through."""
    if isinstance(rule_id, Rule):
        return rule_id
    rid = str(rule_id).strip().lower()
    if rid == "borda":
        return PositionalRule("borda", borda_vector)
    if rid == "plurality":
        return PositionalRule("plurality", plurality_vector)
    if rid == "veto":
        return PositionalRule("veto", veto_vector)
    if rid == "score":
        return ScoreRule()
    if rid == "copeland":
        return CopelandRule()
    if rid in ("maximal_lottery", "ml"):
        return MaximalLotteryRule()
    if rid.startswith("sgf:"):
        try:
            k = int(rid[4:])
        except ValueError:
            raise ValidationError(f"bad grade count in {rule_id!r}") from None
        if k < 2:
            raise ValidationError("sgf needs at least two grades")
        return GradingRule(k)
    raise ValidationError(f"unknown rule {rule_id!r}; choose from {', '.join(RULE_IDS)}")


# ------------------------------------------------------- functional wrappers


def positional_winners(pop: VotePopulation, scores) -> SupportSet:
    """Winners under the positional rule with the given non-increasing score vector."""
    v = np.asarray(scores, dtype=float)
    if len(v) != pop.candidate_count:
        raise ValidationError("score vector length must equal the candidate count")
    if (np.diff(v) > 0).any():
        raise ValidationError("positional score vectors must be non-increasing")
    return PositionalRule("positional", lambda m: v)(pop)


def score_winners(pop: VotePopulation) -> SupportSet:
    return ScoreRule()(pop)


def margin_matrix(pop: VotePopulation) -> np.ndarray:
    """``M[a, b]``: weighted net frequency with which a is ranked above b."""
    rule = CopelandRule()
    if pop.kind != "ranking":
        raise UnsupportedRuleError("margin matrices need ranking ballots")
    return np.tensordot(pop.weights, rule.tabulate(pop.ballots, pop.candidate_count), axes=1)


def maximal_lottery(pop: VotePopulation) -> ExplicitLottery:
    return MaximalLotteryRule()(pop)


def copeland_winners(pop: VotePopulation) -> SupportSet:
    return CopelandRule()(pop)


def sgf_winners(pop: VotePopulation) -> SupportSet:
    if pop.kind != "grades":
        raise UnsupportedRuleError("grading rules need grade ballots")
    return GradingRule(pop.ballots[0].num_grades)(pop)
