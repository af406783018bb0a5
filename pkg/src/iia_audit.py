"""
无关选项独立性（IIA）审计
========================
逐一去掉一名运动员，剩余运动员的单项名次按原顺序压缩为 1..n-1 后重新计分，
比较剩余运动员在去掉前后的相对顺序。

- agreement_tau: 去掉前（限制在剩余运动员上）与去掉后名次的 Kendall τ
- PairChange: 相对顺序发生变化（颠倒或变为并列）的一对运动员，
  按被去掉者原名次相对两人的位置分为 excluded_behind / excluded_ahead / excluded_between
"""

from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np

from exceptions import ClimberNotFoundError, UndefinedCorrelationError
from rank_stats import PairedRanks, kendall_tau
from scoring import DISCIPLINE_ORDER, RankTriple, RoundResult


class PairChangeKind(str, Enum):
    """被去掉的运动员相对这对运动员的原名次位置"""

    EXCLUDED_BEHIND = "excluded_behind"
    EXCLUDED_AHEAD = "excluded_ahead"
    EXCLUDED_BETWEEN = "excluded_between"


@dataclass(frozen=True)
class PairChange:
    """first 原名次不低于 second，去掉某人后两人的相对顺序改变"""

    first: str
    second: str
    kind: PairChangeKind


@dataclass(frozen=True)
class RankChange:
    """一名剩余运动员的名次变化"""

    climber_id: str
    original_placement: int
    old_placement: int  # 原名次限制在剩余运动员上
    new_placement: int


@dataclass(frozen=True)
class ExclusionResult:
    """去掉一名运动员后的重新计分结果"""

    excluded: str
    excluded_placement: int
    new_round: Optional[RoundResult]  # 只有一名运动员时为 None
    rank_changes: Tuple[RankChange, ...]
    pair_changes: Tuple[PairChange, ...]
    agreement_tau: float

    @property
    def new_standings(self) -> Tuple[int, ...]:
        return self.new_round.placements if self.new_round else ()

    @property
    def tied(self) -> bool:
        return bool(self.new_round and self.new_round.tied)

    @property
    def perfect(self) -> bool:
        return not self.pair_changes

    def new_placement_of(self, climber_id: str) -> int:
        if self.new_round is None:
            raise ClimberNotFoundError(climber_id)
        return self.new_round.placement_of(climber_id)


def compress_ranks(ranks: Sequence[int]) -> List[int]:
    """保序压缩：新名次 = 1 + 严格排在前面的人数"""
    values = np.asarray(ranks)
    return [int((values < value).sum()) + 1 for value in values]


def _pair_kind(excluded_placement: int, first: int, second: int) -> PairChangeKind:
    if excluded_placement > max(first, second):
        return PairChangeKind.EXCLUDED_BEHIND
    if excluded_placement < min(first, second):
        return PairChangeKind.EXCLUDED_AHEAD
    return PairChangeKind.EXCLUDED_BETWEEN


def _agreement_tau(old: Sequence[int], new: Sequence[int], changed: bool) -> float:
    if len(old) < 2:
        return 1.0
    try:
        return kendall_tau(PairedRanks(old, new))
    except UndefinedCorrelationError:
        return 0.0 if changed else 1.0


def remove_and_rescore(round_result: RoundResult, excluded: str) -> ExclusionResult:
    """
    去掉一名运动员并重新计分

    Args:
        round_result: 原比赛结果
        excluded: 被去掉的运动员编号

    Returns:
        ExclusionResult
    """
    removed = round_result.index_of(excluded)
    survivors = [i for i in range(round_result.n) if i != removed]
    entries = [round_result.entries[i] for i in survivors]
    excluded_placement = round_result.placements[removed]
    if not entries:
        return ExclusionResult(excluded, excluded_placement, None, (), (), 1.0)

    columns = [compress_ranks([e.ranks.get(d) for e in entries]) for d in DISCIPLINE_ORDER]
    triples = [RankTriple(s, b, l) for s, b, l in zip(*columns)]
    new_round = RoundResult.from_ranks(
        [e.climber for e in entries], triples, round_result.round_kind, round_result.method
    )

    original = [round_result.placements[i] for i in survivors]
    old = compress_ranks(original)
    new = list(new_round.placements)

    pair_changes = []
    for a, b in combinations(range(len(entries)), 2):
        if np.sign(old[a] - old[b]) == np.sign(new[a] - new[b]):
            continue
        first, second = (a, b) if (original[a], a) <= (original[b], b) else (b, a)
        pair_changes.append(
            PairChange(
                first=entries[first].climber.id,
                second=entries[second].climber.id,
                kind=_pair_kind(excluded_placement, original[first], original[second]),
            )
        )

    rank_changes = tuple(
        RankChange(entries[k].climber.id, original[k], old[k], new[k]) for k in range(len(entries))
    )
    return ExclusionResult(
        excluded=excluded,
        excluded_placement=excluded_placement,
        new_round=new_round,
        rank_changes=rank_changes,
        pair_changes=tuple(pair_changes),
        agreement_tau=_agreement_tau(old, new, bool(pair_changes)),
    )


def _top_three(ids: Sequence[str], placements: Sequence[int]) -> List[Tuple[str, int]]:
    ordered = sorted(zip(placements, range(len(ids)), ids))
    return [(cid, p) for p, _, cid in ordered[:3]]


@dataclass(frozen=True)
class IIAReport:
    """对每名运动员做一次去除后的审计汇总，按被去掉者原名次排序"""

    round_result: RoundResult
    exclusions: Tuple[ExclusionResult, ...]

    @property
    def perfect_agreements(self) -> int:
        return sum(1 for e in self.exclusions if e.perfect)

    @property
    def violations(self) -> List[ExclusionResult]:
        return [e for e in self.exclusions if not e.perfect]

    @property
    def tau_distribution(self) -> List[float]:
        return [e.agreement_tau for e in self.exclusions]

    @property
    def behind_violations(self) -> List[ExclusionResult]:
        """去掉原本排在两人之后的运动员，两人顺序却改变了"""
        return [
            e for e in self.exclusions
            if any(c.kind is PairChangeKind.EXCLUDED_BEHIND for c in e.pair_changes)
        ]

    @property
    def medal_changes(self) -> List[ExclusionResult]:
        """前三名的人选或顺序发生变化的去除"""
        changed = []
        for e in self.exclusions:
            ids = [c.climber_id for c in e.rank_changes]
            before = _top_three(ids, [c.old_placement for c in e.rank_changes])
            after = _top_three(ids, [c.new_placement for c in e.rank_changes])
            if before != after:
                changed.append(e)
        return changed


def iia_audit(round_result: RoundResult) -> IIAReport:
    """对每一名运动员执行 remove_and_rescore"""
    order = round_result.ordered_indices()
    exclusions = tuple(
        remove_and_rescore(round_result, round_result.entries[i].climber.id) for i in order
    )
    return IIAReport(round_result=round_result, exclusions=exclusions)
