import numpy as np
import pytest

from cogames.core import Grades, Scores, VotePopulation, preference_from_tiers, vote_population
from cogames.errors import UnsupportedRuleError, ValidationError
from cogames.voting import (ExplicitLottery, SupportSet, copeland_winners, get_rule,
                            grade_by_quantiles, majority_judgment, margin_matrix, maximal_lottery,
                            maximal_lottery_from_margin, positional_winners, score_winners,
                            sgf_winners)

from conftest import RPS_MIX


def order(*ranks):
    return preference_from_tiers([{a} for a in ranks])


def pop(*entries, m=None):
    m = m or entries[0][1].num_actions
    return VotePopulation(tuple(entries), m)


def test_rps_mix_borda(rps):
    p = vote_population(rps, 0, [RPS_MIX])
    w = positional_winners(p, [2, 1, 0])
    assert w.winners == (0,)
    assert np.allclose(w.scores, [1.15, 0.80, 1.05], atol=1e-12, rtol=0)


def test_plurality_single_ballot():
    assert positional_winners(pop((1.0, order(0, 1, 2))), [1, 0, 0]).winners == (0,)


def test_opposed_ballots_tie():
    w = positional_winners(pop((0.5, order(0, 1)), (0.5, order(1, 0))), [1, 0])
    assert w.winners == (0, 1)
    assert w.canonical().tolist() == [0.5, 0.5]


def test_positional_vector_checked():
    with pytest.raises(ValidationError):
        positional_winners(pop((1.0, order(0, 1))), [0, 1])


@pytest.mark.parametrize("y, expected", [(0.9, (1,)), (0.5, (0,)), (2 / 3, (0, 1))])
def test_score_voting_chicken_threshold(chicken, y, expected):
    p = vote_population(chicken, 0, [[y, 1 - y]], kind="scores")
    assert score_winners(p).winners == expected


def test_identical_scores_tie():
    p = pop((0.3, Scores((1, 1, 1))), (0.7, Scores((1, 1, 1))))
    assert score_winners(p).winners == (0, 1, 2)
    assert score_winners(pop((1.0, Scores((0.1, 0.4, 0.2))))).winners == (1,)


def test_rps_mix_margins(rps):
    M = margin_matrix(vote_population(rps, 0, [RPS_MIX]))
    assert M[0, 1] == pytest.approx(-0.10, abs=1e-12)
    assert M[0, 2] == pytest.approx(0.40, abs=1e-12)
    assert M[1, 2] == pytest.approx(-0.50, abs=1e-12)
    assert np.allclose(M, -M.T)


def test_single_ballot_margin():
    M = margin_matrix(pop((1.0, order(0, 1))))
    assert M[0, 1] == 1 and M[1, 0] == -1


def test_indifferent_margins_zero():
    assert np.all(margin_matrix(pop((1.0, preference_from_tiers([{0, 1, 2}])))) == 0)


def test_rps_cycle_lottery_uniform():
    p = pop((1 / 3, order(0, 1, 2)), (1 / 3, order(1, 2, 0)), (1 / 3, order(2, 0, 1)))
    assert np.allclose(maximal_lottery(p).probs, [1 / 3] * 3, atol=1e-7)
    assert copeland_winners(p).winners == (0, 1, 2)


def test_condorcet_winner_lottery():
    p = pop((0.4, order(1, 0, 2)), (0.35, order(0, 1, 2)), (0.25, order(2, 1, 0)))
    assert maximal_lottery(p).probs.tolist() == [0.0, 1.0, 0.0]
    assert copeland_winners(p).winners == (1,)


def test_rps_mix_lottery(rps):
    # the margin cycle rock>scissors>paper>rock has weights 0.4, 0.5, 0.1;
    # each candidate's probability is proportional to the opposite edge
    ml = maximal_lottery(vote_population(rps, 0, [RPS_MIX]))
    assert np.allclose(ml.probs, [0.5, 0.4, 0.1], atol=1e-7)
    assert copeland_winners(vote_population(rps, 0, [RPS_MIX])).winners == (0, 1, 2)


def test_max_entropy_on_degenerate_face():
    # candidates 0 and 1 are clones beating 2: every split between them is optimal
    M = np.array([[0, 0, 1], [0, 0, 1], [-1, -1, 0]], dtype=float)
    assert np.allclose(maximal_lottery_from_margin(M), [0.5, 0.5, 0], atol=1e-6)


def test_explicit_lottery_distance():
    lot = ExplicitLottery(np.array([0.5, 0.5, 0.0]))
    assert lot.distance(np.array([1.0, 0, 0])) == pytest.approx(0.5)
    assert lot.support == (0, 1)


def test_support_set_distance():
    s = SupportSet((0,), 3)
    assert s.distance(np.full(3, 1 / 3)) == pytest.approx(2 / 3)


def test_grades_single_ballot():
    assert sgf_winners(pop((1.0, Grades((3, 1), 4)))).winners == (0,)
    assert sgf_winners(pop((0.5, Grades((2, 2), 4)), (0.5, Grades((2, 2), 4)))).winners == (0, 1)


def test_majority_gauge_breaks_median_tie():
    # both have median grade 1; candidate 0 has more mass above it
    mass = np.array([[0.2, 0.4, 0.4], [0.3, 0.4, 0.3]])
    assert majority_judgment(mass) == (0,)


def test_quartile_grades():
    assert grade_by_quantiles([1, 2, 3, 4], 4).tolist() == [0, 1, 2, 3]
    assert grade_by_quantiles([5, 5, 5], 4).tolist() == [3, 3, 3]
    assert grade_by_quantiles([10, 20, 20, 40], 2).tolist() == [0, 0, 0, 1]


def test_quartile_top_agent_wins():
    column = np.array([0.2, 0.9, 0.5])
    g = grade_by_quantiles(column, 4)
    winners = sgf_winners(pop((1.0, Grades(tuple(g), 4)))).winners
    assert winners == (int(np.argmax(column)),)


def test_rule_lookup():
    assert get_rule("ml").id == "maximal_lottery"
    assert get_rule("SGF:5").num_grades == 5
    for bad in ("nope", "sgf:x", "sgf:1"):
        with pytest.raises(ValidationError):
            get_rule(bad)


def test_rule_kind_enforced():
    with pytest.raises(UnsupportedRuleError):
        get_rule("borda")(pop((1.0, Scores((1, 2)))))
    with pytest.raises(UnsupportedRuleError):
        sgf_winners(pop((1.0, order(0, 1))))


def test_copeland_wins_minus_losses():
    # 0 beats 1; the other two pairs are tied
    p = pop((0.5, order(0, 1, 2)), (0.5, order(2, 0, 1)))
    w = copeland_winners(p)
    assert w.scores == (1.0, -1.0, 0.0)
    assert w.winners == (0,)
