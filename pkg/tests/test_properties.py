import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from cogames.core import (CardinalGame, PreferenceRelation, Scores, VotePopulation, as_strategy,
                          cog_from_cardinal)
from cogames.errors import ValidationError
from cogames.metrics import fsd_dominated_by_any
from cogames.voting import get_rule, margin_matrix, maximal_lottery, score_winners

SETTINGS = settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def populations(draw, max_m=4, max_ballots=6):
    m = draw(st.integers(2, max_m))
    n = draw(st.integers(1, max_ballots))
    entries = []
    for _ in range(n):
        levels = draw(st.lists(st.integers(0, m - 1), min_size=m, max_size=m))
        entries.append((draw(st.integers(1, 20)), PreferenceRelation.from_levels(levels)))
    total = sum(w for w, _ in entries)
    return VotePopulation(tuple((w / total, r) for w, r in entries), m)


def lottery(rule, pop):
    return get_rule(rule)(pop).canonical()


@SETTINGS
@given(populations())
def test_margins_skew_symmetric(pop):
    M = margin_matrix(pop)
    assert np.allclose(M, -M.T, atol=1e-12)
    assert np.all(np.abs(M) <= 1 + 1e-12)


@SETTINGS
@given(populations())
def test_maximal_lottery_is_optimal(pop):
    p = maximal_lottery(pop).probs
    assert p.sum() == pytest.approx(1.0) and (p >= -1e-12).all()
    assert (p @ margin_matrix(pop) >= -1e-7).all()


@SETTINGS
@given(populations())
def test_condorcet_winner_chosen(pop):
    M = margin_matrix(pop)
    beats_all = [a for a in range(pop.candidate_count)
                 if all(M[a, b] > 1e-9 for b in range(pop.candidate_count) if b != a)]
    if beats_all:
        a = beats_all[0]
        assert maximal_lottery(pop).probs[a] == pytest.approx(1.0, abs=1e-9)
        assert get_rule("copeland")(pop).winners == (a,)


@SETTINGS
@given(populations(max_m=4, max_ballots=5), st.sampled_from(["borda", "maximal_lottery"]))
def test_sd_efficient(pop, rule):
    rels = [r for _, r in pop.entries]
    assert fsd_dominated_by_any(rels, lottery(rule, pop)) is None


@SETTINGS
@given(populations(), st.sampled_from(["borda", "maximal_lottery", "copeland"]))
def test_pareto_dominated_gets_nothing(pop, rule):
    m = pop.candidate_count
    x = lottery(rule, pop)
    for a in range(m):
        for b in range(m):
            if a != b and all(r.prefers(a, b) for _, r in pop.entries):
                assert x[b] <= 1e-9


@SETTINGS
@given(populations(), st.sampled_from(["borda", "plurality", "maximal_lottery", "copeland"]))
def test_split_ballots_change_nothing(pop, rule):
    split = VotePopulation(tuple(e for w, r in pop.entries for e in ((w / 2, r), (w / 2, r))),
                           pop.candidate_count)
    assert np.allclose(lottery(rule, split), lottery(rule, pop), atol=1e-7)
    assert np.allclose(lottery(rule, pop.merged()), lottery(rule, pop), atol=1e-7)


@SETTINGS
@given(st.lists(st.one_of(st.floats(-2, 2), st.sampled_from([np.nan, np.inf, -np.inf])), min_size=1, max_size=5))
def test_strategy_checks(v):
    try:
        x = as_strategy(v)
    except ValidationError:
        return
    assert (x >= 0).all() and abs(x.sum() - 1) <= 1e-6


def test_tiny_payoffs_keep_order():
    u = np.array([[1e-300, 0.0], [1.0, 2e-300]])
    cog = cog_from_cardinal(CardinalGame((u, np.zeros((2, 2)))))
    assert cog.preference(0, (0,)) == PreferenceRelation.from_order([1, 0])
    assert cog.preference(0, (1,)) == PreferenceRelation.from_order([1, 0])
    big = cog_from_cardinal(CardinalGame((u * 1e300, np.zeros((2, 2)))))
    assert big.preference(0, (1,)) == PreferenceRelation.from_order([1, 0])


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(-100, 100))
def test_affine_payoffs_same_preferences(seed, scale, shift):
    rng = np.random.default_rng(seed)
    u = tuple(rng.integers(-3, 4, size=(3, 2)).astype(float) for _ in range(2))
    a = cog_from_cardinal(CardinalGame(u))
    b = cog_from_cardinal(CardinalGame(tuple(scale * x + shift for x in u)))
    for i in range(2):
        for c in a.contexts(i):
            assert a.preference(i, c) == b.preference(i, c)


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_score_winners_scale_free(seed, scale):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 5)), int(rng.integers(2, 5))
    w = rng.dirichlet(np.ones(n))
    vals = rng.integers(0, 4, size=(n, m)).astype(float)
    pop = VotePopulation(tuple((wk, Scores(tuple(v))) for wk, v in zip(w, vals)), m)
    scaled = VotePopulation(tuple((wk, Scores(tuple(scale * v))) for wk, v in zip(w, vals)), m)
    assert score_winners(pop).winners == score_winners(scaled).winners
