"""
计分核心
========
复合赛制的三项排名与名次乘积计分:
1. 单项排名 - 速度（用时）、抱石（完攀/区域/尝试次数）、难度（到达高度/用时）
2. 综合得分 - 三项名次的乘积（另有名次和、平方根和两种对照算法）
3. 总排名   - 得分越低越好，并列共享最小名次并打上并列标记
4. 晋级线   - 按名次截取晋级名单，晋级线上出现并列时拒绝裁定

所有对象在构造后不可变，可安全地在线程间共享。
"""

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from exceptions import AmbiguousCutError, ClimberNotFoundError, DataValidationError, DomainError


class Discipline(str, Enum):
    """三个单项，序列化顺序固定为 速度、抱石、难度"""

    SPEED = "speed"
    BOULDER = "boulder"
    LEAD = "lead"

    @classmethod
    def parse(cls, value: Union[str, "Discipline"]) -> "Discipline":
        if isinstance(value, Discipline):
            return value
        key = str(value).strip().lower()
        aliases = {"s": cls.SPEED, "b": cls.BOULDER, "bouldering": cls.BOULDER, "l": cls.LEAD}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise DomainError(f"❌ 未知的单项: {value}") from None


DISCIPLINE_ORDER: Tuple[Discipline, ...] = (Discipline.SPEED, Discipline.BOULDER, Discipline.LEAD)


class AggregationMethod(str, Enum):
    """综合得分的聚合方式，默认且官方使用的是名次乘积"""

    PRODUCT = "product"
    SUM = "sum"
    SUM_OF_SQUARE_ROOTS = "sqrt-sum"

    @classmethod
    def parse(cls, value: Union[str, "AggregationMethod"]) -> "AggregationMethod":
        if isinstance(value, AggregationMethod):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "rank-product": cls.PRODUCT,
            "rank-sum": cls.SUM,
            "sqrt": cls.SUM_OF_SQUARE_ROOTS,
            "sum-of-square-roots": cls.SUM_OF_SQUARE_ROOTS,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise DomainError(f"❌ 未知的计分方式: {value}") from None


class RoundKind(str, Enum):
    """比赛轮次"""

    QUALIFICATION = "qualification"
    FINAL = "final"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, value: Union[str, "RoundKind"]) -> "RoundKind":
        if isinstance(value, RoundKind):
            return value
        key = str(value).strip().lower()
        if key in {"qual", "q"}:
            return cls.QUALIFICATION
        try:
            return cls(key)
        except ValueError:
            raise DomainError(f"❌ 未知的轮次: {value}") from None

    @property
    def default_field_size(self) -> Optional[int]:
        """奥运会赛制下的默认人数：资格赛 20 人，决赛 8 人"""
        return {RoundKind.QUALIFICATION: 20, RoundKind.FINAL: 8}.get(self)


# 抱石并列的破解顺序（IFSC 惯例）：完攀数 > 区域数 > 完攀尝试次数 > 区域尝试次数
DEFAULT_BOULDER_ORDER: Tuple[str, ...] = ("tops", "zones", "top_attempts", "zone_attempts")
_BOULDER_HIGHER_IS_BETTER = {"tops": True, "zones": True, "top_attempts": False, "zone_attempts": False}

# 非乘积算法的得分比较精度
_SCORE_DECIMALS = 9


# ============ 成绩与运动员 ============

@dataclass(frozen=True)
class SpeedPerformance:
    """速度赛成绩：用时（秒），抢跑/掉落记为 dnf"""

    time: Optional[float]
    dnf: bool = False

    def __post_init__(self):
        if not self.dnf:
            if self.time is None or not math.isfinite(self.time) or self.time <= 0:
                raise DataValidationError(f"速度用时必须为正数: {self.time}")


@dataclass(frozen=True)
class BoulderPerformance:
    """抱石成绩"""

    tops: int
    zones: int
    top_attempts: int
    zone_attempts: int

    def __post_init__(self):
        for name in ("tops", "zones", "top_attempts", "zone_attempts"):
            if getattr(self, name) < 0:
                raise DataValidationError(f"抱石 {name} 不能为负: {getattr(self, name)}")
        if self.tops > self.zones:
            raise DataValidationError(f"完攀数 {self.tops} 大于区域数 {self.zones}")
        if self.top_attempts < self.tops:
            raise DataValidationError(f"完攀尝试次数 {self.top_attempts} 少于完攀数 {self.tops}")
        if self.zone_attempts < self.zones:
            raise DataValidationError(f"区域尝试次数 {self.zone_attempts} 少于区域数 {self.zones}")


@dataclass(frozen=True)
class LeadPerformance:
    """难度赛成绩：到达的最高点、用时（秒），plus 表示控制该点后继续移动"""

    highest_hold: int
    time: float
    plus: bool = False

    def __post_init__(self):
        if self.highest_hold < 0:
            raise DataValidationError(f"难度高度不能为负: {self.highest_hold}")
        if self.time is None or not math.isfinite(self.time) or self.time <= 0:
            raise DataValidationError(f"难度用时必须为正数: {self.time}")


Performance = Union[SpeedPerformance, BoulderPerformance, LeadPerformance]

_PERFORMANCE_TYPES = {
    Discipline.SPEED: SpeedPerformance,
    Discipline.BOULDER: BoulderPerformance,
    Discipline.LEAD: LeadPerformance,
}


@dataclass(frozen=True)
class Climber:
    """运动员"""

    id: str
    name: str
    nationality: Optional[str] = None


@dataclass(frozen=True)
class RankTriple:
    """一名运动员在速度、抱石、难度三项中的名次"""

    speed: int
    boulder: int
    lead: int

    def __post_init__(self):
        for value in self.as_tuple():
            if int(value) != value or value < 1:
                raise DomainError(f"❌ 名次必须为正整数: {self.as_tuple()}")

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.speed, self.boulder, self.lead)

    def __iter__(self) -> Iterator[int]:
        return iter(self.as_tuple())

    def get(self, discipline: Discipline) -> int:
        return getattr(self, Discipline.parse(discipline).value)

    def validate_for(self, n: int) -> None:
        """检查三项名次都在 [1, n] 内"""
        if any(value > n for value in self.as_tuple()):
            raise DomainError(f"❌ 名次 {self.as_tuple()} 超出人数 {n}")


@dataclass(frozen=True)
class Entry:
    """一名运动员在一轮比赛中的记录"""

    climber: Climber
    ranks: RankTriple
    speed: Optional[SpeedPerformance] = None
    boulder: Optional[BoulderPerformance] = None
    lead: Optional[LeadPerformance] = None

    @property
    def has_raw_performances(self) -> bool:
        return self.speed is not None and self.boulder is not None and self.lead is not None


@dataclass(frozen=True)
class DisciplineRanking:
    """单项排名结果；unresolved 并列共享最小名次，tied 为 True"""

    discipline: Discipline
    ranks: List[int]
    tied: bool


@dataclass(frozen=True)
class Standings:
    """总排名：placements[i] 为第 i 个得分的名次"""

    placements: List[int]
    tied: bool


# ============ 计分 ============

def aggregate_score(ranks: RankTriple, method: AggregationMethod = AggregationMethod.PRODUCT) -> float:
    """
    计算综合得分，所有算法都是越低越好

    Args:
        ranks: 三项名次
        method: 聚合方式

    Returns:
        综合得分（乘积算法的结果是整数值）
    """
    method = AggregationMethod.parse(method)
    s, b, l = ranks.as_tuple()
    if method is AggregationMethod.PRODUCT:
        return float(s * b * l)
    if method is AggregationMethod.SUM:
        return float(s + b + l)
    # 先排序再求和，保证三项互换时结果逐位相同
    return float(sum(sorted(math.sqrt(r) for r in (s, b, l))))


def aggregate_scores(
    speed: np.ndarray, boulder: np.ndarray, lead: np.ndarray,
    method: AggregationMethod = AggregationMethod.PRODUCT,
) -> np.ndarray:
    """aggregate_score 的数组版本，逐元素结果与标量版本逐位相同"""
    method = AggregationMethod.parse(method)
    s, b, l = (np.asarray(a, dtype=np.int64) for a in (speed, boulder, lead))
    if method is AggregationMethod.PRODUCT:
        return (s * b * l).astype(float)
    if method is AggregationMethod.SUM:
        return (s + b + l).astype(float)
    roots = np.sort(np.sqrt(np.stack([s, b, l], axis=-1).astype(float)), axis=-1)
    return roots[..., 0] + roots[..., 1] + roots[..., 2]


def placements_from_scores(scores: np.ndarray) -> np.ndarray:
    """逐行计算名次（最后一维为一轮比赛），并列共享最小名次"""
    keys = score_keys(scores)
    better = keys[..., None, :] < keys[..., :, None]
    return better.sum(axis=-1) + 1


def score_keys(scores: Sequence[float]) -> np.ndarray:
    """得分比较键：乘积与名次和为整数，平方根和保留 9 位小数后比较"""
    return np.round(np.asarray(scores, dtype=float), _SCORE_DECIMALS)


def _competition_ranks(keys: Sequence) -> Tuple[List[int], bool]:
    """标准竞赛排名：名次 = 1 + 严格优于自己的人数"""
    ordered = sorted(keys)
    ranks = [bisect_left(ordered, key) + 1 for key in keys]
    tied = len(set(ranks)) < len(ranks)
    return ranks, tied


def _performance_key(performance: Performance, discipline: Discipline, boulder_order: Sequence[str]) -> tuple:
    if discipline is Discipline.SPEED:
        if performance.dnf:
            return (1, 0.0)
        return (0, float(performance.time))
    if discipline is Discipline.BOULDER:
        key = []
        for name in boulder_order:
            value = getattr(performance, name)
            key.append(-value if _BOULDER_HIGHER_IS_BETTER[name] else value)
        return tuple(key)
    return (-performance.highest_hold, -int(performance.plus), float(performance.time))


def rank_discipline(
    performances: Sequence[Performance],
    discipline: Discipline,
    boulder_order: Sequence[str] = DEFAULT_BOULDER_ORDER,
) -> DisciplineRanking:
    """
    单项排名

    - 速度：用时越短越好，dnf 排在最后（多个 dnf 共享名次）
    - 抱石：完攀多者优先，其次区域多、完攀尝试少、区域尝试少（顺序可配置）
    - 难度：高度越高越好，同高度 plus 优先，再比用时

    Args:
        performances: 同一单项的成绩列表
        discipline: 单项
        boulder_order: 抱石并列破解顺序

    Returns:
        DisciplineRanking
    """
    discipline = Discipline.parse(discipline)
    if not performances:
        raise DomainError("❌ 成绩列表为空，无法排名")
    expected = _PERFORMANCE_TYPES[discipline]
    for performance in performances:
        if not isinstance(performance, expected):
            raise TypeError(f"{discipline.value} 排名需要 {expected.__name__}，收到 {type(performance).__name__}")
    unknown = [name for name in boulder_order if name not in _BOULDER_HIGHER_IS_BETTER]
    if unknown:
        raise DomainError(f"❌ 未知的抱石排名字段: {unknown}")

    keys = [_performance_key(p, discipline, boulder_order) for p in performances]
    ranks, tied = _competition_ranks(keys)
    return DisciplineRanking(discipline=discipline, ranks=ranks, tied=tied)


def overall_standings(scores: Sequence[float]) -> Standings:
    """
    由综合得分计算总排名

    得分最低者第 1 名；得分相同者共享最小名次，并返回并列标记
    """
    if len(scores) == 0:
        raise DomainError("❌ 得分列表为空")
    for score in scores:
        if not math.isfinite(score):
            raise DomainError(f"❌ 得分必须为有限数: {score}")
    placements, tied = _competition_ranks(score_keys(scores).tolist())
    return Standings(placements=placements, tied=tied)


def is_permutation(ranks: Sequence[int]) -> bool:
    """名次是否恰好是 1..n 的一个排列"""
    return sorted(int(r) for r in ranks) == list(range(1, len(ranks) + 1))


# ============ 一轮比赛 ============

@dataclass(frozen=True)
class RoundResult:
    """
    一轮比赛的完整结果

    得分、名次、并列标记由 entries 与 method 派生，构造时计算
    """

    round_kind: RoundKind
    entries: Tuple[Entry, ...]
    method: AggregationMethod = AggregationMethod.PRODUCT
    scores: Tuple[float, ...] = field(init=False)
    placements: Tuple[int, ...] = field(init=False)
    tied: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "round_kind", RoundKind.parse(self.round_kind))
        object.__setattr__(self, "method", AggregationMethod.parse(self.method))
        object.__setattr__(self, "entries", tuple(self.entries))
        n = len(self.entries)
        if n == 0:
            raise DomainError("❌ 比赛没有任何运动员")

        ids = [entry.climber.id for entry in self.entries]
        duplicated = sorted({cid for cid in ids if ids.count(cid) > 1})
        if duplicated:
            raise DataValidationError(f"运动员编号重复: {duplicated}")
        for entry in self.entries:
            entry.ranks.validate_for(n)

        scores = tuple(aggregate_score(entry.ranks, self.method) for entry in self.entries)
        standings = overall_standings(scores)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "placements", tuple(standings.placements))
        object.__setattr__(self, "tied", standings.tied)

    @classmethod
    def from_ranks(
        cls,
        climbers: Sequence[Climber],
        triples: Sequence[RankTriple],
        round_kind: RoundKind = RoundKind.CUSTOM,
        method: AggregationMethod = AggregationMethod.PRODUCT,
    ) -> "RoundResult":
        """由已知的三项名次构造"""
        if len(climbers) != len(triples):
            raise DomainError(f"❌ 运动员数 {len(climbers)} 与名次数 {len(triples)} 不一致")
        entries = tuple(Entry(climber=c, ranks=t) for c, t in zip(climbers, triples))
        return cls(round_kind=round_kind, entries=entries, method=method)

    @classmethod
    def from_performances(
        cls,
        climbers: Sequence[Climber],
        speed: Sequence[SpeedPerformance],
        boulder: Sequence[BoulderPerformance],
        lead: Sequence[LeadPerformance],
        round_kind: RoundKind = RoundKind.CUSTOM,
        method: AggregationMethod = AggregationMethod.PRODUCT,
        boulder_order: Sequence[str] = DEFAULT_BOULDER_ORDER,
    ) -> "RoundResult":
        """由原始成绩逐项排名后构造"""
        if not (len(climbers) == len(speed) == len(boulder) == len(lead)):
            raise DomainError("❌ 运动员与各单项成绩数量不一致")
        speed_ranks = rank_discipline(speed, Discipline.SPEED).ranks
        boulder_ranks = rank_discipline(boulder, Discipline.BOULDER, boulder_order).ranks
        lead_ranks = rank_discipline(lead, Discipline.LEAD).ranks
        entries = tuple(
            Entry(
                climber=climbers[i],
                ranks=RankTriple(speed_ranks[i], boulder_ranks[i], lead_ranks[i]),
                speed=speed[i],
                boulder=boulder[i],
                lead=lead[i],
            )
            for i in range(len(climbers))
        )
        return cls(round_kind=round_kind, entries=entries, method=method)

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def climbers(self) -> List[Climber]:
        return [entry.climber for entry in self.entries]

    @property
    def climber_ids(self) -> List[str]:
        return [entry.climber.id for entry in self.entries]

    @property
    def has_raw_performances(self) -> bool:
        return all(entry.has_raw_performances for entry in self.entries)

    def index_of(self, climber_id: str) -> int:
        for i, entry in enumerate(self.entries):
            if entry.climber.id == climber_id:
                return i
        raise ClimberNotFoundError(climber_id)

    def entry(self, climber_id: str) -> Entry:
        return self.entries[self.index_of(climber_id)]

    def placement_of(self, climber_id: str) -> int:
        return self.placements[self.index_of(climber_id)]

    def score_of(self, climber_id: str) -> float:
        return self.scores[self.index_of(climber_id)]

    def ranks_of(self, discipline: Discipline) -> List[int]:
        discipline = Discipline.parse(discipline)
        return [entry.ranks.get(discipline) for entry in self.entries]

    def climber_at(self, placement: int) -> List[Climber]:
        """取得某个名次上的运动员（并列时可能不止一人）"""
        return [e.climber for e, p in zip(self.entries, self.placements) if p == placement]

    def ordered_indices(self) -> List[int]:
        """按名次（再按录入顺序）排好的下标"""
        return sorted(range(self.n), key=lambda i: (self.placements[i], i))


def advance_cut(round_result: RoundResult, cut: int) -> List[Climber]:
    """
    截取名次不超过 cut 的运动员

    晋级线上出现并列（并列组的一部分在线内、一部分在线外）时抛出 AmbiguousCutError
    """
    if cut < 1 or cut > round_result.n:
        raise DomainError(f"❌ 晋级人数 {cut} 必须在 1..{round_result.n} 之间")

    group_sizes: Dict[int, int] = {}
    for placement in round_result.placements:
        group_sizes[placement] = group_sizes.get(placement, 0) + 1
    for placement, size in group_sizes.items():
        if placement <= cut < placement + size - 1:
            tied = [c.id for c in round_result.climber_at(placement)]
            raise AmbiguousCutError(cut, tied)

    return [round_result.entries[i].climber for i in round_result.ordered_indices()
            if round_result.placements[i] <= cut]


def podium(round_result: RoundResult) -> List[Climber]:
    """前三名（奖牌获得者）"""
    return advance_cut(round_result, min(3, round_result.n))


def rescore(round_result: RoundResult, method: AggregationMethod) -> RoundResult:
    """用另一种聚合方式重新计分，三项名次保持不变"""
    return RoundResult(round_kind=round_result.round_kind, entries=round_result.entries, method=method)


def compare_methods(round_result: RoundResult) -> Dict[AggregationMethod, Tuple[int, ...]]:
    """同一批名次在各种聚合方式下的总排名"""
    return {method: rescore(round_result, method).placements for method in AggregationMethod}


def qualifiers(round_result: RoundResult, cut: int = 8) -> List[Climber]:
    """晋级决赛的运动员（默认前 8 名）"""
    return advance_cut(round_result, min(cut, round_result.n))
