import itertools

import numpy as np
import pytest

from cogames.election import (NUM_ACTIONS, PAIRS, ElectionAction, ElectionRecord, bundled_record,
                              candidate_pair_probs, load_elections_csv, outcome_distribution,
                              outcomes_for_context, simulate_elections, verify_recorded_election,
                              winner_probabilities)
from cogames.errors import ValidationError

from conftest import DATA

BEAR, RABBIT, DOG, FROG = range(4)
PIG, KOALA, CHICKEN, LION = range(4)
HEADER = ("election_id,participant,wtl,vote_rank1,vote_rank2,vote_rank3,"
          "pref_rank1,pref_rank2,pref_rank3,pref_rank4\n")


def pair_probs(wtls):
    return dict(zip(PAIRS, candidate_pair_probs(wtls)))


def random_actions(rng):
    out = []
    for i in range(4):
        out.append(ElectionAction.from_index(i, int(rng.integers(NUM_ACTIONS))))
    return out


def onehot(k):
    return np.eye(NUM_ACTIONS)[k]


def test_table2_candidates():
    rec = bundled_record("table2")
    assert [a.wtl for a in rec.actions] == [5, 8, 3, 6]
    probs = pair_probs([5, 8, 3, 6])
    assert probs[(RABBIT, FROG)] == 1.0
    assert outcome_distribution(rec.actions).tolist() == [0.0, 1.0, 0.0, 0.0]


def test_three_way_top_tie():
    probs = pair_probs([5, 5, 5, 0])
    for pair in [(0, 1), (0, 2), (1, 2)]:
        assert probs[pair] == pytest.approx(1 / 3)
    assert sum(probs.values()) == pytest.approx(1.0)


def test_split_runoff_is_a_coin():
    acts = [ElectionAction(9, (1, 2, 3)), ElectionAction(9, (0, 2, 3)),
            ElectionAction(0, (0, 1, 3)), ElectionAction(0, (1, 0, 2))]
    assert outcome_distribution(acts).tolist() == [0.5, 0.5, 0.0, 0.0]


def test_outcome_sums_to_one():
    rng = np.random.default_rng(0)
    for _ in range(100):
        assert outcome_distribution(random_actions(rng)).sum() == pytest.approx(1.0)


def test_relabelling_permutes_winners():
    rng = np.random.default_rng(1)
    for _ in range(50):
        acts = random_actions(rng)
        perm = rng.permutation(4)  # participant i becomes perm[i]
        moved = [None] * 4
        for i, a in enumerate(acts):
            moved[perm[i]] = ElectionAction(a.wtl, tuple(int(perm[v]) for v in a.vote))
        assert np.allclose(outcome_distribution(moved)[perm], outcome_distribution(acts))


def test_candidate_vote_irrelevant():
    rng = np.random.default_rng(2)
    base = random_actions(rng)
    base[0] = ElectionAction(10, base[0].vote)
    base[1:] = [ElectionAction(min(a.wtl, 9), a.vote) for a in base[1:]]
    ref = outcome_distribution(base)
    for vote in itertools.permutations([1, 2, 3]):
        acts = [ElectionAction(10, vote)] + base[1:]
        assert np.array_equal(outcome_distribution(acts), ref)


def test_action_index_roundtrip():
    for i in range(4):
        for k in range(NUM_ACTIONS):
            assert ElectionAction.from_index(i, k).index(i) == k
    assert ElectionAction(3, (2, 3, 1)).index(0) == 3 * 6 + 3


def test_action_checks():
    with pytest.raises(ValidationError):
        ElectionAction(11, (1, 2, 3))
    with pytest.raises(ValidationError):
        ElectionAction(3, (1, 1, 2))
    with pytest.raises(ValidationError):
        ElectionAction(3, (0, 2, 3)).index(0)


def test_koala_context_high_wtl_elects_koala():
    rec = bundled_record("table1")
    ctx = tuple(a for j, a in enumerate(rec.action_indices()) if j != KOALA)
    table = outcomes_for_context(KOALA, ctx)
    for wtl in range(6, 11):
        for k in range(6):
            assert table[wtl * 6 + k].tolist() == [0, 1, 0, 0]
    # at wtl 5 Koala ties Chicken for the second slot
    assert table[5 * 6][KOALA] == pytest.approx(0.5)


def test_bear_context_tie_at_six():
    probs = pair_probs([6, 8, 3, 6])
    assert probs[(BEAR, RABBIT)] == pytest.approx(0.5)
    assert probs[(RABBIT, FROG)] == pytest.approx(0.5)
    rec = bundled_record("table2")
    ctx = tuple(a for j, a in enumerate(rec.action_indices()) if j != BEAR)
    table = outcomes_for_context(BEAR, ctx)
    assert table[6 * 6].sum() == pytest.approx(1.0)


@pytest.mark.parametrize("rule", ["maximal_lottery", "borda"])
def test_table2_all_best_responses(rule):
    assert verify_recorded_election(bundled_record("table2"), rule).passed


def test_table1_koala_fails():
    rep = verify_recorded_election(bundled_record("table1"))
    assert [v.player for v in rep.failing()] == [KOALA]
    v = rep.failing()[0]
    assert ElectionAction.from_index(KOALA, v.witness).wtl < 9
    assert v.epsilon > 0


def test_indifferent_record_passes():
    rec = bundled_record("table2")
    flat = ElectionRecord(rec.actions, ([[0, 1, 2, 3]],) * 4)
    assert verify_recorded_election(flat).passed


def test_tiered_prefs_kept():
    rec = ElectionRecord(bundled_record("table2").actions,
                         ([[1], [0, 3], [2]], (1, 0, 2, 3), (2, 1, 0, 3), (1, 0, 3, 2)))
    assert rec.outcome_levels(0).tolist() == [1, 0, 2, 1]
    assert rec.outcome_levels(1).tolist() == [1, 0, 2, 3]


def test_bad_prefs_rejected():
    acts = bundled_record("table2").actions
    with pytest.raises(ValidationError):
        ElectionRecord(acts, ((0, 1, 2), (1, 0, 2, 3), (2, 1, 0, 3), (1, 0, 3, 2)))


def test_bundled_csv_loads():
    recs = load_elections_csv(DATA / "table1.csv")
    assert len(recs) == 1
    assert recs[0].names == ("Pig", "Koala", "Chicken", "Lion")
    assert recs[0].prefs[KOALA] == (LION, CHICKEN, KOALA, PIG)


def test_empty_csv(tmp_path):
    f = tmp_path / "e.csv"
    f.write_text("")
    assert load_elections_csv(f) == []
    f.write_text(HEADER)
    assert load_elections_csv(f) == []


@pytest.mark.parametrize("rows, message", [
    (["x,A,5,B,C,D,A,B,C,D", "x,B,5,A,C,D,A,B,C,D", "x,C,5,A,B,D,A,B,C,D"], "3 rows"),
    (["x,A,5,B,C,Z,A,B,C,D", "x,B,5,A,C,D,A,B,C,D", "x,C,5,A,B,D,A,B,C,D",
      "x,D,5,A,B,C,A,B,C,D"], ":2:"),
    (["x,A,5,A,C,D,A,B,C,D", "x,B,5,A,C,D,A,B,C,D", "x,C,5,A,B,D,A,B,C,D",
      "x,D,5,A,B,C,A,B,C,D"], "themselves"),
    (["x,A,12,B,C,D,A,B,C,D", "x,B,5,A,C,D,A,B,C,D", "x,C,5,A,B,D,A,B,C,D",
      "x,D,5,A,B,C,A,B,C,D"], "wtl"),
    (["x,A,five,B,C,D,A,B,C,D", "x,B,5,A,C,D,A,B,C,D", "x,C,5,A,B,D,A,B,C,D",
      "x,D,5,A,B,C,A,B,C,D"], "integer"),
])
def test_csv_errors(tmp_path, rows, message):
    f = tmp_path / "e.csv"
    f.write_text(HEADER + "\n".join(rows) + "\n")
    with pytest.raises(ValidationError, match=message):
        load_elections_csv(f)


def test_missing_column(tmp_path):
    f = tmp_path / "e.csv"
    f.write_text("election_id,participant,wtl\nx,A,1\n")
    with pytest.raises(ValidationError, match="missing"):
        load_elections_csv(f)


def test_winner_probabilities_pure_profile():
    rng = np.random.default_rng(4)
    for _ in range(20):
        acts = random_actions(rng)
        prof = [onehot(a.index(i)) for i, a in enumerate(acts)]
        assert np.allclose(winner_probabilities(prof), outcome_distribution(acts), atol=1e-12)


def test_winner_probabilities_match_simulation():
    rng = np.random.default_rng(5)
    prof = [rng.dirichlet(np.full(NUM_ACTIONS, 0.3)) for _ in range(4)]
    exact = winner_probabilities(prof)
    assert exact.sum() == pytest.approx(1.0)
    n = 20_000
    sim = simulate_elections(prof, n, seed=3)
    assert np.abs(sim - exact).max() <= 4 * np.sqrt(0.25 / n)
