import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_round
from exceptions import ClimberNotFoundError
from iia_audit import PairChangeKind, compress_ranks, iia_audit, remove_and_rescore
from scoring import AggregationMethod

_SCORE = {
    AggregationMethod.PRODUCT: lambda s, b, l: s * b * l,
    AggregationMethod.SUM: lambda s, b, l: s + b + l,
    AggregationMethod.SUM_OF_SQUARE_ROOTS: lambda s, b, l: math.sqrt(s) + math.sqrt(b) + math.sqrt(l),
}


def _rounds(min_n=2, max_n=7):
    return st.integers(min_n, max_n).flatmap(
        lambda n: st.tuples(*(st.permutations(list(range(1, n + 1))),) * 3)
    ).map(lambda columns: make_round(list(zip(*columns))))


def test_compress_ranks():
    assert compress_ranks([3, 1, 5, 4]) == [2, 1, 4, 3]
    assert compress_ranks([2, 2, 7]) == [1, 1, 3]


@given(st.lists(st.integers(1, 30), min_size=1, max_size=20))
def test_compress_keeps_order(values):
    compressed = compress_ranks(values)
    assert min(compressed) == 1
    assert max(compressed) <= len(values)
    for a, ca in zip(values, compressed):
        for b, cb in zip(values, compressed):
            assert (a < b) == (ca < cb)


def test_yog_final_removing_fifth_lifts_fourth(yog_final):
    result = remove_and_rescore(yog_final, "YF05")
    assert result.excluded_placement == 5
    assert result.new_placement_of("YF04") == 2
    assert result.new_standings == (1, 3, 4, 2, 5)
    assert not result.perfect
    assert {(c.first, c.second) for c in result.pair_changes} == {("YF02", "YF04"), ("YF03", "YF04")}
    assert all(c.kind is PairChangeKind.EXCLUDED_BEHIND for c in result.pair_changes)
    assert result.agreement_tau == pytest.approx(0.6)


def test_yog_final_report(yog_final):
    report = iia_audit(yog_final)
    assert len(report.exclusions) == 6
    assert [e.excluded for e in report.exclusions] == [f"YF0{i}" for i in range(1, 7)]
    assert report.perfect_agreements == 3
    assert len(report.violations) == 3
    assert any(e.excluded == "YF05" for e in report.behind_violations)
    assert len(report.tau_distribution) == 6


def test_yog_qualification_report(yog_qualification):
    report = iia_audit(yog_qualification)
    assert len(report.exclusions) == 21
    assert report.perfect_agreements == 7


def test_unknown_climber(yog_final):
    with pytest.raises(ClimberNotFoundError):
        remove_and_rescore(yog_final, "nobody")


def test_two_climbers_leave_a_single_survivor():
    result = remove_and_rescore(make_round([(1, 2, 1), (2, 1, 2)]), "c1")
    assert result.new_standings == (1,)
    assert result.perfect
    assert result.agreement_tau == 1.0


def test_removed_climber_between_swapped_pair():
    # c2 与 c3 原本并列，去掉 c1 后 c2 领先
    round_result = make_round([(1, 2, 3), (2, 3, 1), (3, 1, 2)])
    assert round_result.placements == (1, 1, 1)
    result = remove_and_rescore(round_result, "c1")
    assert result.new_standings == (1, 2)
    assert result.pair_changes[0].kind is PairChangeKind.EXCLUDED_BETWEEN
    assert result.agreement_tau == 0.0


@settings(max_examples=150)
@given(_rounds())
def test_agreement_is_perfect_exactly_when_no_pair_changes(round_result):
    for exclusion in iia_audit(round_result).exclusions:
        assert exclusion.new_round.n == round_result.n - 1
        if exclusion.perfect:
            assert exclusion.agreement_tau == pytest.approx(1.0)
        else:
            assert exclusion.agreement_tau < 1.0 - 1e-12


@settings(max_examples=100)
@given(_rounds(3, 6))
def test_survivor_ranks_are_compressed_permutations(round_result):
    for exclusion in iia_audit(round_result).exclusions:
        for discipline in ("speed", "boulder", "lead"):
            assert sorted(exclusion.new_round.ranks_of(discipline)) == list(range(1, round_result.n))


def _brute_force_standings(triples, excluded, method):
    """从原始名次重建剩余运动员的三元组，直接比较得分排出名次"""
    survivors = [t for i, t in enumerate(triples) if i != excluded]
    columns = []
    for d in range(3):
        ordered = sorted(t[d] for t in survivors)
        columns.append([ordered.index(t[d]) + 1 for t in survivors])
    scores = [_SCORE[method](s, b, l) for s, b, l in zip(*columns)]
    return tuple(1 + sum(other < mine - 1e-9 for other in scores) for mine in scores)


def _all_rounds(n):
    permutations = list(itertools.permutations(range(1, n + 1)))
    for speed, boulder, lead in itertools.product(permutations, repeat=3):
        yield list(zip(speed, boulder, lead))


@pytest.mark.parametrize("method", list(AggregationMethod))
@pytest.mark.parametrize("n", [2, 3, pytest.param(4, marks=pytest.mark.slow)])
def test_every_exclusion_matches_brute_force(n, method):
    for triples in _all_rounds(n):
        round_result = make_round(triples, method=method)
        for excluded in range(n):
            result = remove_and_rescore(round_result, f"c{excluded + 1}")
            expected = _brute_force_standings(triples, excluded, method)
            assert result.new_standings == expected

            original = [p for i, p in enumerate(round_result.placements) if i != excluded]
            changed = any(
                (original[a] < original[b]) != (expected[a] < expected[b])
                or (original[a] == original[b]) != (expected[a] == expected[b])
                for a, b in itertools.combinations(range(n - 1), 2)
            )
            assert result.perfect is not changed


def test_synthetic_round_of_four_matches_brute_force():
    triples = [(1, 3, 2), (2, 1, 4), (3, 4, 1), (4, 2, 3)]
    round_result = make_round(triples)
    for excluded in range(4):
        result = remove_and_rescore(round_result, f"c{excluded + 1}")
        assert result.new_standings == _brute_force_standings(triples, excluded, AggregationMethod.PRODUCT)


@pytest.mark.parametrize("n", [3, pytest.param(4, marks=pytest.mark.slow)])
def test_sum_differences_keep_when_excluded_is_uniformly_outside(n):
    # 被去掉者在每个单项上都同时领先或同时落后于两人时，两人的名次和之差不变
    for triples in _all_rounds(n):
        round_result = make_round(triples, method=AggregationMethod.SUM)
        for excluded in range(n):
            result = remove_and_rescore(round_result, f"c{excluded + 1}")
            survivors = [i for i in range(n) if i != excluded]
            for a, b in itertools.combinations(range(n - 1), 2):
                i, j = survivors[a], survivors[b]
                outside = all(
                    (triples[excluded][d] < min(triples[i][d], triples[j][d]))
                    or (triples[excluded][d] > max(triples[i][d], triples[j][d]))
                    for d in range(3)
                )
                if not outside:
                    continue
                old = round_result.scores[i] - round_result.scores[j]
                new = result.new_round.scores[a] - result.new_round.scores[b]
                assert new == old
                assert not any(
                    {c.first, c.second} == {f"c{i + 1}", f"c{j + 1}"} for c in result.pair_changes
                )


def test_comonotone_round_has_exact_agreement():
    report = iia_audit(make_round([(i, i, i) for i in range(1, 7)]))
    assert report.perfect_agreements == 6
    assert report.tau_distribution == [1.0] * 6


def test_single_climber_round():
    report = iia_audit(make_round([(1, 1, 1)]))
    assert len(report.exclusions) == 1
    exclusion = report.exclusions[0]
    assert exclusion.perfect
    assert exclusion.agreement_tau == 1.0
    assert exclusion.new_standings == ()
    assert not exclusion.tied
    assert report.medal_changes == []
