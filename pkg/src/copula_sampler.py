"""
Copula 名次生成
===============
模拟的两个假设：
1. 每个单项的名次在 1..n 上均匀分布（每次都是一个排列）
2. 抱石与难度之间有给定的 Kendall τ，速度与两者独立

抱石/难度使用高斯 copula，τ 与相关系数 ρ 的对应关系为 ρ = sin(πτ/2)。
τ = 1 时不抽样，两项直接共用同一个排列。
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import stats

from exceptions import DomainError


RandomStream = Union[np.random.Generator, int, None]


def tau_to_rho(tau: float) -> float:
    """
    Kendall τ 转换为高斯 copula 的相关系数

    Args:
        tau: [0, 1] 内的 Kendall τ

    Returns:
        ρ = sin(π·τ/2)，端点精确映射
    """
    if tau is None or not math.isfinite(tau) or tau < 0.0 or tau > 1.0:
        raise DomainError(f"❌ τ 必须在 [0, 1] 内: {tau}")
    if tau == 0.0:
        return 0.0
    if tau == 1.0:
        return 1.0
    return math.sin(math.pi * tau / 2.0)


@dataclass(frozen=True)
class CorrelationSpec:
    """抱石与难度之间的目标 Kendall τ；速度始终独立"""

    tau: float

    def __post_init__(self):
        tau_to_rho(self.tau)

    @property
    def rho(self) -> float:
        return tau_to_rho(self.tau)

    @property
    def comonotone(self) -> bool:
        return self.tau == 1.0


@dataclass(frozen=True)
class RankField:
    """一次模拟的三项名次，按运动员下标对齐"""

    n: int
    speed_ranks: Tuple[int, ...]
    boulder_ranks: Tuple[int, ...]
    lead_ranks: Tuple[int, ...]
    uniforms: Optional[np.ndarray] = None  # (n, 2)：抱石/难度的 copula 均匀值

    def as_array(self) -> np.ndarray:
        """(n, 3) 数组，列顺序为 速度、抱石、难度"""
        return np.column_stack([self.speed_ranks, self.boulder_ranks, self.lead_ranks])


@dataclass(frozen=True)
class RankFieldBatch:
    """批量名次，每个数组形状为 (size, n)"""

    speed: np.ndarray
    boulder: np.ndarray
    lead: np.ndarray
    uniforms: np.ndarray  # (size, n, 2)

    @property
    def size(self) -> int:
        return self.speed.shape[0]

    @property
    def n(self) -> int:
        return self.speed.shape[1]

    def field(self, index: int) -> RankField:
        return RankField(
            n=self.n,
            speed_ranks=tuple(int(r) for r in self.speed[index]),
            boulder_ranks=tuple(int(r) for r in self.boulder[index]),
            lead_ranks=tuple(int(r) for r in self.lead[index]),
            uniforms=self.uniforms[index].copy(),
        )


def _as_generator(stream: RandomStream) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    return np.random.default_rng(stream)


def rank_rows(values: np.ndarray) -> np.ndarray:
    """逐行排名（1 起），相同值按出现顺序区分"""
    order = np.argsort(values, axis=-1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(1, values.shape[-1] + 1), axis=-1)
    return ranks


def sample_rank_fields(n: int, spec: CorrelationSpec, stream: RandomStream = None, size: int = 1) -> RankFieldBatch:
    """
    批量生成名次

    抽样顺序固定（先速度，再抱石/难度的正态变量），相同的种子得到相同的结果

    Args:
        n: 参赛人数
        spec: 相关结构
        stream: numpy 随机数生成器或种子
        size: 生成的次数

    Returns:
        RankFieldBatch
    """
    if n < 2:
        raise DomainError(f"❌ 参赛人数至少为 2: {n}")
    if size < 1:
        raise DomainError(f"❌ 抽样次数至少为 1: {size}")
    rng = _as_generator(stream)

    speed = rank_rows(rng.random((size, n)))

    z = rng.standard_normal((size, n, 2))
    if spec.comonotone:
        u_boulder = stats.norm.cdf(z[..., 0])
        uniforms = np.stack([u_boulder, u_boulder], axis=-1)
        boulder = rank_rows(u_boulder)
        lead = boulder.copy()
    else:
        rho = spec.rho
        z_lead = rho * z[..., 0] + math.sqrt(1.0 - rho * rho) * z[..., 1]
        uniforms = np.stack([stats.norm.cdf(z[..., 0]), stats.norm.cdf(z_lead)], axis=-1)
        boulder = rank_rows(uniforms[..., 0])
        lead = rank_rows(uniforms[..., 1])

    return RankFieldBatch(speed=speed, boulder=boulder, lead=lead, uniforms=uniforms)


def sample_rank_field(n: int, spec: CorrelationSpec, stream: RandomStream = None) -> RankField:
    """生成一次比赛的三项名次"""
    return sample_rank_fields(n, spec, stream, size=1).field(0)


def empirical_tau(field: RankField) -> float:
    """一次模拟中抱石与难度名次的 Kendall τ"""
    tau, _ = stats.kendalltau(field.boulder_ranks, field.lead_ranks)
    return float(tau)
