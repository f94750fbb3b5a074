import itertools

import numpy as np
import pytest

from cogames.core import (CardinalGame, ContextOrdinalGame, OutcomeBallot, PreferenceRelation,
                          RankingLottery, as_strategy, cog_from_cardinal, context_weights,
                          induce_nfg, make_cog, preference_from_tiers, vote_population)
from cogames.errors import ValidationError

from conftest import PAPER, RPS_MIX, ROCK, SCISSORS, STRAIGHT, SWERVE, chicken_nfg, rps_nfg


def test_tiers_give_order():
    r = preference_from_tiers([{1}, {0}, {2}])
    assert r.prefers(PAPER, ROCK) and r.prefers(ROCK, SCISSORS)
    assert r.is_strict()
    assert r.levels.tolist() == [1, 0, 2]


def test_single_tier_is_total_indifference():
    r = preference_from_tiers([{0, 1, 2}])
    assert not any(r.prefers(a, b) for a in range(3) for b in range(3))
    assert np.all(r.pairwise() == 0)


def test_usurper_form():
    r = preference_from_tiers([{0}, {1, 2}])
    assert r.prefers(0, 1) and r.prefers(0, 2)
    assert not r.prefers(1, 2) and not r.prefers(2, 1)


@pytest.mark.parametrize("tiers", [[], [{0}, set()], [{0, 1}, {1}], [{0}, {2}]])
def test_bad_tiers_rejected(tiers):
    with pytest.raises(ValidationError):
        preference_from_tiers(tiers)


def test_tied_positions_get_mean_score():
    r = preference_from_tiers([{0}, {1, 2}])
    assert r.positional_scores([2, 1, 0]).tolist() == [2.0, 0.5, 0.5]
    assert preference_from_tiers([{0, 1, 2}]).positional_scores([2, 1, 0]).tolist() == [1, 1, 1]


def test_chicken_preferences(chicken):
    # opponent swerves: going straight is better; opponent goes straight: swerve
    assert chicken.preference(0, (SWERVE,)).prefers(STRAIGHT, SWERVE)
    assert chicken.preference(0, (STRAIGHT,)).prefers(SWERVE, STRAIGHT)
    assert chicken.preference(1, (SWERVE,)).prefers(STRAIGHT, SWERVE)


def test_constant_slice_is_one_tier():
    g = CardinalGame((np.ones((2, 3)), np.zeros((2, 3))))
    cog = cog_from_cardinal(g)
    assert len(cog.preference(0, (1,)).tiers) == 1
    assert len(cog.preference(1, (0,)).tiers) == 1


def test_rps_ballot_against_rock(rps):
    assert rps.preference(0, (ROCK,)) == preference_from_tiers([{PAPER}, {ROCK}, {SCISSORS}])


def test_float_noise_does_not_break_ties():
    u = np.array([[1.0, 0.0], [1.0 + 1e-15, 0.0]])
    cog = cog_from_cardinal(CardinalGame((u, np.zeros((2, 2)))))
    assert cog.preference(0, (0,)).tiers == (frozenset({0, 1}),)


def test_rounding_merges_near_equal_payoffs():
    u = np.array([[0.3, 0.0], [0.1 + 0.2, 1.0]])
    cog = cog_from_cardinal(CardinalGame((u, np.zeros((2, 2)))))
    assert cog.preference(0, (0,)).tiers == (frozenset({0, 1}),)


def test_induced_borda_payoffs(rps):
    nfg = induce_nfg(rps, "borda")
    assert nfg.payoffs[0][:, ROCK].tolist() == [1.0, 2.0, 0.0]
    flat = make_cog((3, 1), lambda i, c: preference_from_tiers([range(3)]) if i == 0
                    else preference_from_tiers([{0}]))
    assert induce_nfg(flat).payoffs[0][:, 0].tolist() == [1.0, 1.0, 1.0]


def test_induce_rejects_increasing_vector(rps):
    with pytest.raises(ValidationError):
        induce_nfg(rps, [0, 1, 2])


def test_agent_task_borda_gains(agent_task):
    nfg = induce_nfg(agent_task)
    u0 = nfg.payoffs[0]
    # deviations B->A in column X and C->A in column X gain 2 and 1
    assert u0[0, 0] - u0[1, 0] == 2
    assert u0[0, 0] - u0[2, 0] == 1


def test_rps_mix_population(rps):
    pop = vote_population(rps, 0, [RPS_MIX])
    got = {b: w for w, b in pop.entries}
    assert got[preference_from_tiers([{PAPER}, {ROCK}, {SCISSORS}])] == pytest.approx(0.25)
    assert got[preference_from_tiers([{SCISSORS}, {PAPER}, {ROCK}])] == pytest.approx(0.30)
    assert got[preference_from_tiers([{ROCK}, {SCISSORS}, {PAPER}])] == pytest.approx(0.45)


def test_pure_context_single_ballot(rps):
    pop = vote_population(rps, 1, [[0, 1, 0]])
    assert len(pop.entries) == 1 and pop.weights[0] == 1.0


def test_two_uniform_coplayers_four_ballots():
    cog = make_cog((2, 2, 2), lambda i, c: PreferenceRelation.from_levels([c[0], c[1]]))
    pop = vote_population(cog, 0, [[0.5, 0.5], [0.5, 0.5]], merge=False)
    assert len(pop.entries) == 4
    assert np.allclose(pop.weights, 0.25)


def test_context_order_is_row_major():
    cog = make_cog((2, 2, 3), lambda i, c: preference_from_tiers([range(2 if i < 2 else 3)]))
    assert list(cog.contexts(0)) == list(itertools.product(range(2), range(3)))
    w = context_weights((2, 3), [[0.25, 0.75], [1, 0, 0]])
    assert w.tolist() == [[0.25, 0, 0], [0.75, 0, 0]]


def test_missing_context_rejected():
    with pytest.raises(ValidationError):
        ContextOrdinalGame((2, 2), [{(0,): preference_from_tiers([{0}, {1}])},
                                    {(0,): preference_from_tiers([{0, 1}]),
                                     (1,): preference_from_tiers([{0, 1}])}])


def test_ranking_lottery_weights_checked():
    r = preference_from_tiers([{0}, {1}])
    with pytest.raises(ValidationError):
        RankingLottery(((0.7, r), (0.4, r)))
    lot = RankingLottery(((0.5, r), (0.5, preference_from_tiers([{1}, {0}]))))
    assert np.all(lot.pairwise() == 0)


def test_strategy_validation():
    assert as_strategy([0.5, 0.5]).tolist() == [0.5, 0.5]
    for bad in ([0.5, 0.6], [1.5, -0.5], [np.nan, 1.0]):
        with pytest.raises(ValidationError):
            as_strategy(bad)


def test_expected_payoffs_match_einsum():
    rng = np.random.default_rng(3)
    counts = (2, 3, 4)
    g = CardinalGame(tuple(rng.normal(size=counts) for _ in range(3)))
    x = [rng.dirichlet(np.ones(m)) for m in counts]
    assert np.allclose(g.expected_payoffs(0, x), np.einsum("abc,b,c->a", g.payoffs[0], x[1], x[2]))
    assert np.allclose(g.expected_payoffs(1, x), np.einsum("abc,a,c->b", g.payoffs[1], x[0], x[2]))
    assert np.allclose(g.expected_payoffs(2, x), np.einsum("abc,a,b->c", g.payoffs[2], x[0], x[1]))


def test_outcome_ballot_pairwise_matches_expansion():
    lot = np.array([[0.5, 0.5, 0.0], [0.2, 0.3, 0.5], [0.0, 0.0, 1.0]])
    ballot = OutcomeBallot(lot, [0, 1, 2])
    ws, rels, exact = ballot.expand()
    assert exact
    enumerated = sum(w * r.pairwise() for w, r in zip(ws, rels))
    assert np.allclose(ballot.pairwise(), enumerated, atol=1e-12)
    borda = sum(w * r.positional_scores([2, 1, 0]) for w, r in zip(ws, rels))
    assert np.allclose(ballot.borda_scores(), borda, atol=1e-12)


def test_outcome_ballot_monte_carlo_above_cap():
    lot = np.full((6, 2), 0.5)
    ws, rels, exact = OutcomeBallot(lot, [0, 1]).expand(cap=10, num_samples=5000, seed=1)
    assert not exact
    assert ws.sum() == pytest.approx(1.0)


def test_chicken_nfg_roundtrip_keeps_argmax():
    g = chicken_nfg()
    cog = cog_from_cardinal(g)
    back = induce_nfg(cog, [1.0, 0.0])
    for c in range(2):
        assert np.argmax(back.payoffs[0][:, c]) == np.argmax(g.payoffs[0][:, c])


def test_rps_affine_invariance():
    g = rps_nfg()
    h = CardinalGame(tuple(3.0 * u + 7.0 for u in g.payoffs))
    a, b = cog_from_cardinal(g), cog_from_cardinal(h)
    for i in range(2):
        for c in a.contexts(i):
            assert a.preference(i, c) == b.preference(i, c)
