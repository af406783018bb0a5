"""
蒙特卡洛模拟
============
按给定的 τ 重复生成比赛，统计：
1. 赢得某个单项的运动员获得总冠军的条件概率
2. 赢得单项的运动员最终名次的分布（含累积概率）
3. 各名次对应的期望得分及 95% 区间

随机数按块生成：第 b 块使用 SeedSequence(master_seed, spawn_key=(b,))，
每块固定 BLOCK_SIZE 次，因此第 i 次模拟只取决于 (master_seed, i)，与线程数无关。
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from copula_sampler import CorrelationSpec, RankField, sample_rank_fields
from exceptions import DomainError
from scoring import (
    AggregationMethod,
    Climber,
    RankTriple,
    RoundKind,
    RoundResult,
    aggregate_scores,
    placements_from_scores,
)


BLOCK_SIZE = 500
Z_95 = 1.96
DEFAULT_QUANTILES: Tuple[float, ...] = (0.025, 0.25, 0.5, 0.75, 0.975)


class Condition(str, Enum):
    """条件：运动员在哪些单项中排名第一"""

    WON_SPEED = "won_speed"
    WON_BOULDER = "won_boulder"
    WON_LEAD = "won_lead"
    WON_BOULDER_OR_LEAD = "won_boulder_or_lead"
    WON_ANY_DISCIPLINE = "won_any_discipline"


@dataclass(frozen=True)
class SimulationConfig:
    """模拟配置；CUSTOM 轮次需要显式给出 n"""

    round_kind: RoundKind
    spec: CorrelationSpec
    replications: int = 10000
    master_seed: int = 2021
    method: AggregationMethod = AggregationMethod.PRODUCT
    n: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "round_kind", RoundKind.parse(self.round_kind))
        object.__setattr__(self, "method", AggregationMethod.parse(self.method))
        if self.replications < 1:
            raise DomainError(f"❌ 模拟次数至少为 1: {self.replications}")
        if self.n is None and self.round_kind.default_field_size is None:
            raise DomainError("❌ 自定义轮次需要指定参赛人数 n")
        if self.field_size < 2:
            raise DomainError(f"❌ 参赛人数至少为 2: {self.field_size}")

    @property
    def field_size(self) -> int:
        return self.n if self.n is not None else self.round_kind.default_field_size

    @property
    def default_cut(self) -> int:
        """资格赛看前 8 名晋级，决赛看前 3 名奖牌"""
        if self.round_kind is RoundKind.QUALIFICATION:
            return min(8, self.field_size)
        return min(3, self.field_size)

    def to_dict(self) -> Dict:
        return {
            "round": self.round_kind.value,
            "n": self.field_size,
            "tau": self.spec.tau,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "method": self.method.value,
        }


@dataclass(frozen=True)
class ReplicateSet:
    """全部模拟结果，数组形状均为 (replications, n)"""

    config: SimulationConfig
    speed: np.ndarray
    boulder: np.ndarray
    lead: np.ndarray
    scores: np.ndarray
    placements: np.ndarray

    def __len__(self) -> int:
        return self.speed.shape[0]

    @property
    def n(self) -> int:
        return self.speed.shape[1]

    def rank_field(self, index: int) -> RankField:
        return RankField(
            n=self.n,
            speed_ranks=tuple(int(r) for r in self.speed[index]),
            boulder_ranks=tuple(int(r) for r in self.boulder[index]),
            lead_ranks=tuple(int(r) for r in self.lead[index]),
        )

    def round_result(self, index: int) -> RoundResult:
        climbers = [Climber(id=f"c{i + 1:02d}", name=f"Climber {i + 1}") for i in range(self.n)]
        triples = [
            RankTriple(int(s), int(b), int(l))
            for s, b, l in zip(self.speed[index], self.boulder[index], self.lead[index])
        ]
        return RoundResult.from_ranks(climbers, triples, self.config.round_kind, self.config.method)

    def condition_mask(self, condition: Condition) -> np.ndarray:
        """满足条件的 (模拟, 运动员) 位置"""
        condition = Condition(condition)
        if condition is Condition.WON_SPEED:
            return self.speed == 1
        if condition is Condition.WON_BOULDER:
            return self.boulder == 1
        if condition is Condition.WON_LEAD:
            return self.lead == 1
        if condition is Condition.WON_BOULDER_OR_LEAD:
            return (self.boulder == 1) | (self.lead == 1)
        return (self.speed == 1) | (self.boulder == 1) | (self.lead == 1)


@dataclass(frozen=True)
class ConditionalTable:
    """满足条件的运动员最终名次分布"""

    condition: Condition
    probabilities: Tuple[float, ...]
    cumulative: Tuple[float, ...]
    observations: int

    def at_or_better(self, k: int) -> float:
        return self.cumulative[k - 1]


@dataclass(frozen=True)
class ScoreByPlacement:
    """第 k 名的得分均值与 95% 区间（均值 ± 1.96·SE）"""

    placement: int
    mean: float
    lower: float
    upper: float
    count: int


@dataclass(frozen=True)
class ScoreQuantiles:
    """第 k 名得分的分位数"""

    placement: int
    probabilities: Tuple[float, ...]
    values: Tuple[float, ...]


@dataclass(frozen=True)
class SimulationSummary:
    """一次模拟的汇总"""

    config: SimulationConfig
    win_probabilities: Dict[Condition, float]
    rank_distribution: ConditionalTable
    cut: int
    advancement_probability: float
    score_by_placement: List[ScoreByPlacement]


@dataclass(frozen=True)
class SweepRow:
    """τ 扫描表的一行"""

    tau: float
    win_given_speed: float
    win_given_boulder_or_lead: float
    win_given_any: float


# ============ 模拟 ============

def _block_stream(master_seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(block,)))


def _simulate_block(config: SimulationConfig, block: int) -> Tuple[np.ndarray, ...]:
    start = block * BLOCK_SIZE
    size = min(BLOCK_SIZE, config.replications - start)
    batch = sample_rank_fields(config.field_size, config.spec, _block_stream(config.master_seed, block), BLOCK_SIZE)
    speed, boulder, lead = batch.speed[:size], batch.boulder[:size], batch.lead[:size]
    scores = aggregate_scores(speed, boulder, lead, config.method)
    return speed, boulder, lead, scores, placements_from_scores(scores)


def run_simulation(config: SimulationConfig, workers: int = 1, show_progress: bool = False) -> ReplicateSet:
    """
    运行模拟

    Args:
        config: 模拟配置
        workers: 线程数，结果与线程数无关
        show_progress: 是否显示进度条

    Returns:
        ReplicateSet
    """
    if workers < 1:
        raise DomainError(f"❌ 线程数至少为 1: {workers}")
    n_blocks = math.ceil(config.replications / BLOCK_SIZE)
    blocks = range(n_blocks)

    if workers == 1:
        results = [_simulate_block(config, b) for b in tqdm(blocks, desc="🎲 模拟", disable=not show_progress)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            mapped = executor.map(lambda b: _simulate_block(config, b), blocks)
            results = list(tqdm(mapped, total=n_blocks, desc="🎲 模拟", disable=not show_progress))

    speed, boulder, lead, scores, placements = (np.concatenate(parts) for parts in zip(*results))
    return ReplicateSet(config=config, speed=speed, boulder=boulder, lead=lead, scores=scores, placements=placements)


# ============ 汇总 ============

def _win_weights(replicates: ReplicateSet) -> np.ndarray:
    """并列第一时每人记 1/k 次冠军"""
    first = replicates.placements == 1
    return first / first.sum(axis=1, keepdims=True)


def _require(replicates: ReplicateSet) -> None:
    if len(replicates) == 0:
        raise DomainError("❌ 没有模拟结果")


def conditional_win_probability(replicates: ReplicateSet, condition: Condition) -> float:
    """
    满足条件的运动员获得总冠军的概率

    每个 (模拟, 满足条件的运动员) 记一次观测
    """
    _require(replicates)
    mask = replicates.condition_mask(condition)
    observations = mask.sum()
    if observations == 0:
        raise DomainError(f"❌ 没有满足条件 {Condition(condition).value} 的观测")
    return float((_win_weights(replicates) * mask).sum() / observations)


def _placement_totals(placements: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """
    满足条件的观测在各名次上的权重之和：k 人并列于第 p 名时，每人在 p..p+k-1 上各记 1/k
    """
    n = placements.shape[1]
    group = (placements[:, :, None] == placements[:, None, :]).sum(axis=2)
    p = placements[mask]
    k = group[mask]
    totals = np.zeros(n)
    for offset in range(int(k.max())):
        inside = k > offset
        np.add.at(totals, p[inside] - 1 + offset, 1.0 / k[inside])
    return totals


def conditional_rank_distribution(
    replicates: ReplicateSet, condition: Condition = Condition.WON_ANY_DISCIPLINE
) -> ConditionalTable:
    """满足条件的运动员最终名次的分布与累积概率"""
    _require(replicates)
    condition = Condition(condition)
    mask = replicates.condition_mask(condition)
    observations = int(mask.sum())
    if observations == 0:
        raise DomainError(f"❌ 没有满足条件 {condition.value} 的观测")

    probabilities = _placement_totals(replicates.placements, mask) / observations
    cumulative = np.minimum(np.cumsum(probabilities), 1.0)
    cumulative[-1] = 1.0
    return ConditionalTable(
        condition=condition,
        probabilities=tuple(float(p) for p in probabilities),
        cumulative=tuple(float(c) for c in cumulative),
        observations=observations,
    )


def advancement_probability(replicates: ReplicateSet, condition: Condition, cut: int) -> float:
    """P(名次 ≤ cut | 条件)"""
    if cut < 1 or cut > replicates.n:
        raise DomainError(f"❌ 晋级人数 {cut} 必须在 1..{replicates.n} 之间")
    return conditional_rank_distribution(replicates, condition).at_or_better(cut)


def expected_score_by_placement(replicates: ReplicateSet) -> List[ScoreByPlacement]:
    """第 k 名（第 k 小的得分）的得分均值与 95% 区间"""
    _require(replicates)
    ordered = np.sort(replicates.scores, axis=1)
    count = ordered.shape[0]
    means = ordered.mean(axis=0)
    if count > 1:
        se = ordered.std(axis=0, ddof=1) / math.sqrt(count)
    else:
        se = np.zeros_like(means)
    return [
        ScoreByPlacement(
            placement=k + 1,
            mean=float(means[k]),
            lower=float(means[k] - Z_95 * se[k]),
            upper=float(means[k] + Z_95 * se[k]),
            count=count,
        )
        for k in range(replicates.n)
    ]


def score_distribution(
    replicates: ReplicateSet, probabilities: Sequence[float] = DEFAULT_QUANTILES
) -> List[ScoreQuantiles]:
    """各名次得分的分位数"""
    _require(replicates)
    ordered = np.sort(replicates.scores, axis=1)
    values = np.quantile(ordered, probabilities, axis=0)
    return [
        ScoreQuantiles(
            placement=k + 1,
            probabilities=tuple(float(p) for p in probabilities),
            values=tuple(float(v) for v in values[:, k]),
        )
        for k in range(replicates.n)
    ]


def summarize(replicates: ReplicateSet, cut: Optional[int] = None) -> SimulationSummary:
    """汇总一次模拟的全部结果"""
    cut = cut or replicates.config.default_cut
    table = conditional_rank_distribution(replicates, Condition.WON_ANY_DISCIPLINE)
    return SimulationSummary(
        config=replicates.config,
        win_probabilities={c: conditional_win_probability(replicates, c) for c in Condition},
        rank_distribution=table,
        cut=cut,
        advancement_probability=advancement_probability(replicates, Condition.WON_ANY_DISCIPLINE, cut),
        score_by_placement=expected_score_by_placement(replicates),
    )


def sweep_win_probabilities(
    round_kind: RoundKind,
    taus: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
    replications: int = 10000,
    master_seed: int = 2021,
    method: AggregationMethod = AggregationMethod.PRODUCT,
    n: Optional[int] = None,
    workers: int = 1,
    show_progress: bool = False,
) -> List[SweepRow]:
    """
    τ 扫描：各 τ 下赢得速度 / 抱石或难度 / 任一单项的运动员获得总冠军的概率

    所有 τ 使用同一个 master_seed
    """
    rows = []
    for tau in taus:
        config = SimulationConfig(
            round_kind=round_kind,
            spec=CorrelationSpec(tau),
            replications=replications,
            master_seed=master_seed,
            method=method,
            n=n,
        )
        replicates = run_simulation(config, workers=workers, show_progress=show_progress)
        rows.append(
            SweepRow(
                tau=float(tau),
                win_given_speed=conditional_win_probability(replicates, Condition.WON_SPEED),
                win_given_boulder_or_lead=conditional_win_probability(replicates, Condition.WON_BOULDER_OR_LEAD),
                win_given_any=conditional_win_probability(replicates, Condition.WON_ANY_DISCIPLINE),
            )
        )
    return rows
