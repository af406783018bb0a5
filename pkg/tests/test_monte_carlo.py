import itertools

import numpy as np
import pytest

from copula_sampler import CorrelationSpec
from exceptions import DomainError
from monte_carlo import (
    BLOCK_SIZE,
    Condition,
    SimulationConfig,
    advancement_probability,
    conditional_rank_distribution,
    conditional_win_probability,
    expected_score_by_placement,
    run_simulation,
    score_distribution,
    summarize,
    sweep_win_probabilities,
)
from scoring import RoundKind


def _config(tau, reps=1200, round_kind=RoundKind.FINAL, seed=2021, n=None, method="product"):
    return SimulationConfig(round_kind, CorrelationSpec(tau), reps, seed, method, n)


def _exact_win_given_speed(n, comonotone):
    """枚举全部名次组合，得到 P(总冠军 | 速度第一) 的精确值"""
    permutations = list(itertools.permutations(range(1, n + 1)))
    wins = 0.0
    cases = 0
    combos = (
        ((s, b, b) for s, b in itertools.product(permutations, repeat=2))
        if comonotone
        else itertools.product(permutations, repeat=3)
    )
    for speed, boulder, lead in combos:
        scores = [s * b * l for s, b, l in zip(speed, boulder, lead)]
        best = min(scores)
        winners = scores.count(best)
        i = speed.index(1)
        cases += 1
        if scores[i] == best:
            wins += 1.0 / winners
    return wins / cases


def test_config_defaults():
    config = _config(0.5, round_kind=RoundKind.QUALIFICATION)
    assert config.field_size == 20
    assert config.default_cut == 8
    assert _config(0.5).default_cut == 3
    assert config.to_dict()["tau"] == 0.5


def test_custom_round_needs_field_size():
    with pytest.raises(DomainError):
        _config(0.5, round_kind=RoundKind.CUSTOM)
    assert _config(0.5, round_kind=RoundKind.CUSTOM, n=5).field_size == 5


def test_invalid_config():
    with pytest.raises(DomainError):
        _config(0.5, reps=0)
    with pytest.raises(DomainError):
        run_simulation(_config(0.5), workers=0)


def test_results_do_not_depend_on_workers():
    one = run_simulation(_config(0.4), workers=1)
    three = run_simulation(_config(0.4), workers=3)
    assert len(one) == 1200
    for name in ("speed", "boulder", "lead", "scores", "placements"):
        assert np.array_equal(getattr(one, name), getattr(three, name))


def test_replicate_depends_only_on_seed_and_index():
    short = run_simulation(_config(0.4, reps=BLOCK_SIZE + 200))
    long = run_simulation(_config(0.4, reps=3 * BLOCK_SIZE))
    assert np.array_equal(short.placements, long.placements[: BLOCK_SIZE + 200])
    other_seed = run_simulation(_config(0.4, reps=BLOCK_SIZE + 200, seed=7))
    assert not np.array_equal(short.speed, other_seed.speed)


def test_replicates_are_valid_rounds():
    replicates = run_simulation(_config(0.3, reps=50))
    for i in (0, 17, 49):
        round_result = replicates.round_result(i)
        assert list(round_result.placements) == replicates.placements[i].tolist()
        assert list(round_result.scores) == replicates.scores[i].tolist()
        assert replicates.rank_field(i).n == 8


@pytest.mark.parametrize("comonotone", [False, True])
def test_win_probability_matches_enumeration_for_three_climbers(comonotone):
    tau = 1.0 if comonotone else 0.0
    replicates = run_simulation(_config(tau, reps=20000, round_kind=RoundKind.CUSTOM, n=3))
    estimate = conditional_win_probability(replicates, Condition.WON_SPEED)
    assert estimate == pytest.approx(_exact_win_given_speed(3, comonotone), abs=0.015)


def test_rank_distribution_is_a_distribution():
    replicates = run_simulation(_config(0.2))
    table = conditional_rank_distribution(replicates)
    assert table.condition is Condition.WON_ANY_DISCIPLINE
    assert sum(table.probabilities) == pytest.approx(1.0)
    assert table.cumulative[-1] == 1.0
    assert list(table.cumulative) == sorted(table.cumulative)
    assert table.at_or_better(1) == pytest.approx(conditional_win_probability(replicates, Condition.WON_ANY_DISCIPLINE))
    assert advancement_probability(replicates, Condition.WON_ANY_DISCIPLINE, 8) == 1.0


def test_tied_first_place_is_shared():
    replicates = run_simulation(_config(0.0, reps=500, round_kind=RoundKind.CUSTOM, n=3))
    first = replicates.placements == 1
    assert first.sum(axis=1).max() > 1

    mask = replicates.speed == 1
    expected = ((first / first.sum(axis=1, keepdims=True)) * mask).sum() / mask.sum()
    assert conditional_win_probability(replicates, Condition.WON_SPEED) == pytest.approx(expected)
    table = conditional_rank_distribution(replicates, Condition.WON_SPEED)
    assert sum(table.probabilities) == pytest.approx(1.0)
    assert table.probabilities[0] == pytest.approx(expected)


def test_advancement_cut_out_of_range():
    replicates = run_simulation(_config(0.2, reps=100))
    with pytest.raises(DomainError):
        advancement_probability(replicates, Condition.WON_LEAD, 9)


def test_expected_scores_increase_with_placement():
    replicates = run_simulation(_config(0.5, reps=1000))
    rows = expected_score_by_placement(replicates)
    means = [row.mean for row in rows]
    assert means == sorted(means)
    assert rows[0].mean >= 1.0
    assert all(row.lower <= row.mean <= row.upper for row in rows)
    assert all(row.count == 1000 for row in rows)


def test_score_quantiles_are_ordered():
    replicates = run_simulation(_config(0.5, reps=1000))
    for row in score_distribution(replicates):
        assert list(row.values) == sorted(row.values)


def test_summarize():
    replicates = run_simulation(_config(0.214, reps=1000))
    summary = summarize(replicates)
    assert summary.cut == 3
    assert set(summary.win_probabilities) == set(Condition)
    assert 0.0 < summary.advancement_probability <= 1.0
    assert len(summary.score_by_placement) == 8


def test_sweep_uses_one_seed_for_every_tau():
    rows = sweep_win_probabilities(RoundKind.FINAL, taus=(0.0, 1.0), replications=600)
    assert [row.tau for row in rows] == [0.0, 1.0]
    assert rows[1].win_given_boulder_or_lead > rows[0].win_given_boulder_or_lead


@pytest.mark.slow
def test_comonotone_final_win_probabilities():
    replicates = run_simulation(_config(1.0, reps=10000), workers=2)
    assert conditional_win_probability(replicates, Condition.WON_SPEED) == pytest.approx(0.205, abs=0.02)
    assert conditional_win_probability(replicates, Condition.WON_BOULDER_OR_LEAD) == pytest.approx(0.903, abs=0.02)


@pytest.mark.slow
def test_qualification_discipline_winner_reaches_final():
    replicates = run_simulation(_config(0.526, reps=10000, round_kind=RoundKind.QUALIFICATION), workers=2)
    assert advancement_probability(replicates, Condition.WON_ANY_DISCIPLINE, 8) == pytest.approx(0.995, abs=0.005)
    assert expected_score_by_placement(replicates)[7].mean == pytest.approx(453, rel=0.05)


@pytest.mark.slow
def test_final_discipline_winner_reaches_podium():
    replicates = run_simulation(_config(0.214, reps=10000), workers=2)
    assert advancement_probability(replicates, Condition.WON_ANY_DISCIPLINE, 3) == pytest.approx(0.848, abs=0.015)


@pytest.mark.slow
def test_independent_disciplines_are_symmetric():
    replicates = run_simulation(_config(0.0, reps=10000), workers=2)
    by_speed = conditional_win_probability(replicates, Condition.WON_SPEED)
    assert conditional_win_probability(replicates, Condition.WON_BOULDER) == pytest.approx(by_speed, abs=0.02)
    assert conditional_win_probability(replicates, Condition.WON_LEAD) == pytest.approx(by_speed, abs=0.02)


@pytest.mark.slow
def test_sweep_trends():
    rows = sweep_win_probabilities(RoundKind.FINAL, replications=10000, workers=2)
    for before, after in zip(rows, rows[1:]):
        assert after.win_given_speed <= before.win_given_speed + 0.02
        assert after.win_given_boulder_or_lead >= before.win_given_boulder_or_lead - 0.02


@pytest.mark.slow
@pytest.mark.parametrize("placement, expected", [(2, 19), (3, 33)])
def test_final_medal_scores(placement, expected):
    replicates = run_simulation(_config(0.214, reps=10000), workers=2)
    assert expected_score_by_placement(replicates)[placement - 1].mean == pytest.approx(expected, rel=0.10)


@pytest.mark.slow
@pytest.mark.xfail(
    strict=True,
    reason="高斯 copula 在 τ=0.214 下冠军期望得分约为 8.0，低于 9 的 10% 区间；结果依赖 copula 族",
)
def test_final_gold_score():
    replicates = run_simulation(_config(0.214, reps=10000), workers=2)
    assert expected_score_by_placement(replicates)[0].mean == pytest.approx(9, rel=0.10)
