"""
名次相关性检验
==============
- Kendall τ（有并列时为 τ-b）
- 精确置换检验：统计量 T 为一致对数，零分布由逆序数分布（Mahonian 数）得到
- 有并列或样本较大时改用带并列修正与连续性修正的正态近似
- bootstrap 百分位置信区间
- 名次散点的局部线性平滑曲线及其 bootstrap 区间
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from exceptions import DomainError, UndefinedCorrelationError
from scoring import Discipline, RoundResult


# bootstrap 每批的重抽样次数
BOOTSTRAP_CHUNK = 1000
# 连续出现退化重抽样时的上限批数
MAX_BOOTSTRAP_CHUNKS = 1000

_P_TOLERANCE = 1e-9

# 局部线性平滑的默认窗口占比
SMOOTHING_SPAN = 0.75


@dataclass(frozen=True)
class PairedRanks:
    """成对观测 (x_i, y_i)"""

    x: Tuple[float, ...]
    y: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise DomainError(f"❌ x 与 y 长度不一致: {len(self.x)} != {len(self.y)}")
        if len(self.x) < 2:
            raise DomainError(f"❌ 至少需要 2 对观测: {len(self.x)}")
        if not all(math.isfinite(v) for v in self.x + self.y):
            raise DomainError("❌ 观测值必须为有限数")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def pairs(self) -> List[Tuple[float, float]]:
        return list(zip(self.x, self.y))

    @property
    def has_ties(self) -> bool:
        return len(set(self.x)) < self.n or len(set(self.y)) < self.n

    @classmethod
    def from_round(cls, round_result: RoundResult, x: str, y: str) -> "PairedRanks":
        """从一轮比赛中取两列名次；列名为单项名或 overall"""
        return cls(_round_column(round_result, x), _round_column(round_result, y))


def _round_column(round_result: RoundResult, name: str) -> List[int]:
    if str(name).strip().lower() in {"overall", "placement", "o"}:
        return list(round_result.placements)
    return round_result.ranks_of(Discipline.parse(name))


@dataclass(frozen=True)
class ConcordanceCounts:
    """一致对、不一致对与并列对的数量"""

    concordant: int
    discordant: int
    tied_x: int
    tied_y: int
    tied_both: int

    @property
    def total_pairs(self) -> int:
        return self.concordant + self.discordant + self.tied_x + self.tied_y + self.tied_both


@dataclass(frozen=True)
class KendallTestResult:
    """Kendall 检验结果"""

    tau: float
    statistic_T: int
    p_value: float
    exact: bool
    n: int


@dataclass(frozen=True)
class BootstrapInterval:
    """bootstrap 百分位区间"""

    lower: float
    upper: float
    level: float
    resamples: int
    seed: int


@dataclass(frozen=True)
class CorrelationRow:
    """相关性表的一行"""

    x: str
    y: str
    tau: float
    statistic_T: int
    p_value: float
    exact: bool
    ci_lower: Optional[float] = None
    ci_upper: Optional[float] = None


@dataclass(frozen=True)
class SmoothPoint:
    """平滑曲线在 x 处的拟合值与区间"""

    x: float
    fit: float
    lower: Optional[float] = None
    upper: Optional[float] = None


def _pair_signs(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    sx = np.sign(x[..., :, None] - x[..., None, :])
    sy = np.sign(y[..., :, None] - y[..., None, :])
    return sx, sy


def concordance_counts(x: Sequence[float], y: Sequence[float]) -> ConcordanceCounts:
    """统计所有 i < j 对的一致、不一致与并列情况"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DomainError("❌ x 与 y 长度不一致")
    sx, sy = _pair_signs(x, y)
    upper = np.triu(np.ones_like(sx, dtype=bool), k=1)
    product = sx * sy
    return ConcordanceCounts(
        concordant=int(((product > 0) & upper).sum()),
        discordant=int(((product < 0) & upper).sum()),
        tied_x=int(((sx == 0) & (sy != 0) & upper).sum()),
        tied_y=int(((sy == 0) & (sx != 0) & upper).sum()),
        tied_both=int(((sx == 0) & (sy == 0) & upper).sum()),
    )


def _check_defined(data: PairedRanks) -> None:
    if len(set(data.x)) == 1 or len(set(data.y)) == 1:
        raise UndefinedCorrelationError("❌ 有一列全部相同，Kendall τ 无定义")


def kendall_tau(data: PairedRanks) -> float:
    """Kendall τ；无并列时等于 (C − D) / (n(n−1)/2)，有并列时为 τ-b"""
    _check_defined(data)
    counts = concordance_counts(data.x, data.y)
    pairs = data.n * (data.n - 1) // 2
    s = counts.concordant - counts.discordant
    if not data.has_ties:
        return s / pairs
    untied_x = pairs - counts.tied_x - counts.tied_both
    untied_y = pairs - counts.tied_y - counts.tied_both
    if untied_x == untied_y:
        return s / untied_x
    return s / math.sqrt(untied_x * untied_y)


@lru_cache(maxsize=None)
def _mahonian(n: int) -> Tuple[int, ...]:
    if n <= 1:
        return (1,)
    previous = _mahonian(n - 1)
    size = n * (n - 1) // 2 + 1
    counts = [0] * size
    for k in range(size):
        # c[n][k] = c[n][k-1] + c[n-1][k] - c[n-1][k-n]
        value = counts[k - 1] if k > 0 else 0
        if k < len(previous):
            value += previous[k]
        if k - n >= 0:
            value -= previous[k - n]
        counts[k] = value
    return tuple(counts)


def inversion_count_distribution(n: int) -> List[int]:
    """
    n 个元素的排列按逆序数计数（Mahonian 数），整数精确计算

    Returns:
        长度为 n(n-1)/2 + 1 的列表，第 k 项为恰有 k 个逆序的排列数，总和为 n!
    """
    if n < 1:
        raise DomainError(f"❌ n 至少为 1: {n}")
    return list(_mahonian(n))


def kendall_null_distribution(n: int) -> np.ndarray:
    """随机排列下一致对数 T 的概率分布，下标为 T"""
    counts = inversion_count_distribution(n)
    total = math.factorial(n)
    # T = N − 逆序数，分布关于中心对称，反转后即为 T 的分布
    return np.array([c / total for c in reversed(counts)])


def _tie_sums(values: Sequence[float]) -> Tuple[int, int, int]:
    _, group_sizes = np.unique(np.asarray(values), return_counts=True)
    t = group_sizes.astype(np.int64)
    return (
        int((t * (t - 1) * (2 * t + 5)).sum()),
        int((t * (t - 1)).sum()),
        int((t * (t - 1) * (t - 2)).sum()),
    )


def _normal_p_value(data: PairedRanks, counts: ConcordanceCounts) -> float:
    n = data.n
    s = counts.concordant - counts.discordant
    vx, ax, bx = _tie_sums(data.x)
    vy, ay, by = _tie_sums(data.y)
    variance = (n * (n - 1) * (2 * n + 5) - vx - vy) / 18.0
    variance += ax * ay / (2.0 * n * (n - 1))
    if n > 2:
        variance += bx * by / (9.0 * n * (n - 1) * (n - 2))
    if variance <= 0:
        raise UndefinedCorrelationError("❌ 检验统计量方差为 0")
    z = max(abs(s) - 1, 0) / math.sqrt(variance)
    return float(min(1.0, 2.0 * stats.norm.sf(z)))


def kendall_exact_test(data: PairedRanks, exact_max_n: int = 50) -> KendallTestResult:
    """
    Kendall τ 检验

    无并列且 n < exact_max_n 时使用精确零分布，双侧 p 值为
    所有与零分布中心距离不小于观测值的 T 的概率之和；否则使用正态近似

    Args:
        data: 成对观测
        exact_max_n: 精确检验的样本量上限（不含）

    Returns:
        KendallTestResult
    """
    tau = kendall_tau(data)
    counts = concordance_counts(data.x, data.y)
    statistic = counts.concordant

    if data.has_ties or data.n >= exact_max_n:
        return KendallTestResult(tau, statistic, _normal_p_value(data, counts), exact=False, n=data.n)

    null = kendall_null_distribution(data.n)
    center = (len(null) - 1) / 2.0
    distance = abs(statistic - center)
    extreme = np.abs(np.arange(len(null)) - center) >= distance - _P_TOLERANCE
    p_value = float(min(1.0, null[extreme].sum()))
    return KendallTestResult(tau, statistic, p_value, exact=True, n=data.n)


def _bootstrap_taus(x: np.ndarray, y: np.ndarray, rng: np.random.Generator, size: int) -> np.ndarray:
    """一批重抽样的 τ-b，退化样本记为 nan"""
    n = x.shape[0]
    index = rng.integers(0, n, size=(size, n))
    sx, sy = _pair_signs(x[index], y[index])
    numerator = (sx * sy).sum(axis=(1, 2))
    denominator = np.sqrt((sx * sx).sum(axis=(1, 2)) * (sy * sy).sum(axis=(1, 2)))
    taus = np.full(size, np.nan)
    valid = denominator > 0
    taus[valid] = numerator[valid] / denominator[valid]
    return taus


def bootstrap_tau_ci(
    data: PairedRanks, resamples: int = 10000, level: float = 0.95, seed: int = 2021
) -> BootstrapInterval:
    """
    bootstrap 百分位置信区间

    第 c 批重抽样使用 SeedSequence(seed, spawn_key=(c,))；τ 无定义的重抽样丢弃后继续补抽

    Args:
        data: 成对观测
        resamples: 有效重抽样次数 B
        level: 置信水平
        seed: 随机种子

    Returns:
        BootstrapInterval
    """
    _check_defined(data)
    if data.n < 3:
        raise DomainError(f"❌ bootstrap 至少需要 3 对观测: {data.n}")
    if resamples < 1000:
        raise DomainError(f"❌ 重抽样次数至少为 1000: {resamples}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"❌ 置信水平必须在 (0, 1) 内: {level}")

    x = np.asarray(data.x)
    y = np.asarray(data.y)
    collected: List[np.ndarray] = []
    have = 0
    chunk = 0
    while have < resamples:
        if chunk >= MAX_BOOTSTRAP_CHUNKS:
            raise DomainError("❌ 有效的 bootstrap 重抽样过少")
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
        taus = _bootstrap_taus(x, y, rng, BOOTSTRAP_CHUNK)
        taus = taus[~np.isnan(taus)]
        collected.append(taus)
        have += taus.size
        chunk += 1

    taus = np.concatenate(collected)[:resamples]
    alpha = (1.0 - level) / 2.0
    lower, upper = np.quantile(taus, [alpha, 1.0 - alpha])
    return BootstrapInterval(
        lower=float(np.clip(lower, -1.0, 1.0)),
        upper=float(np.clip(upper, -1.0, 1.0)),
        level=level,
        resamples=resamples,
        seed=seed,
    )


CORRELATION_PAIRS: Tuple[Tuple[str, str], ...] = (
    ("speed", "overall"),
    ("boulder", "overall"),
    ("lead", "overall"),
    ("boulder", "lead"),
)


def correlate(
    round_result: RoundResult,
    x: str,
    y: str = "overall",
    resamples: Optional[int] = 10000,
    level: float = 0.95,
    seed: int = 2021,
    exact_max_n: int = 50,
) -> CorrelationRow:
    """一轮比赛中两列名次的相关性（resamples 为 0/None 时不计算区间）"""
    data = PairedRanks.from_round(round_result, x, y)
    test = kendall_exact_test(data, exact_max_n)
    lower = upper = None
    if resamples:
        interval = bootstrap_tau_ci(data, resamples, level, seed)
        lower, upper = interval.lower, interval.upper
    return CorrelationRow(
        x=x, y=y, tau=test.tau, statistic_T=test.statistic_T, p_value=test.p_value,
        exact=test.exact, ci_lower=lower, ci_upper=upper,
    )


def correlation_table(
    round_result: RoundResult,
    resamples: Optional[int] = 10000,
    level: float = 0.95,
    seed: int = 2021,
    exact_max_n: int = 50,
) -> List[CorrelationRow]:
    """三个单项与总排名、以及抱石与难度之间的相关性表"""
    return [
        correlate(round_result, x, y, resamples, level, seed, exact_max_n)
        for x, y in CORRELATION_PAIRS
    ]


def _local_linear(x: np.ndarray, y: np.ndarray, grid: np.ndarray, span: float) -> np.ndarray:
    """
    三立方权重的局部线性回归，x、y 形状为 (..., n)，返回 (..., len(grid))
    """
    n = x.shape[-1]
    k = min(n, max(2, math.ceil(span * n)))
    dx = x[..., None, :] - grid[:, None]
    distance = np.abs(dx)
    # 第 k 近邻距离略放大，使窗口边缘的点权重为正
    h = np.sort(distance, axis=-1)[..., k - 1:k] * 1.01
    h = np.where(h > 0, h, 1.0)
    w = np.clip(1.0 - (distance / h) ** 3, 0.0, None) ** 3
    yy = y[..., None, :]
    s0 = w.sum(axis=-1)
    s1 = (w * dx).sum(axis=-1)
    s2 = (w * dx * dx).sum(axis=-1)
    t0 = (w * yy).sum(axis=-1)
    t1 = (w * dx * yy).sum(axis=-1)
    det = s0 * s2 - s1 * s1
    mean = t0 / s0
    # 窗口内 x 全部相同时退化为加权均值
    flat = det <= 1e-12 * s0 * s2
    safe = np.where(flat, 1.0, det)
    return np.where(flat, mean, (s2 * t0 - s1 * t1) / safe)


def smoothed_fit(
    data: PairedRanks,
    span: float = SMOOTHING_SPAN,
    resamples: Optional[int] = 1000,
    level: float = 0.95,
    seed: int = 2021,
) -> List[SmoothPoint]:
    """
    名次散点（x 为单项名次，y 为总排名）的平滑曲线

    在每个不同的 x 取值处做局部线性拟合；区间为成对 bootstrap 的百分位区间，
    第 c 批重抽样使用 SeedSequence(seed, spawn_key=(c,))

    Args:
        data: 成对观测
        span: 每个拟合点使用的近邻占比，(0, 1]
        resamples: 重抽样次数，0/None 时不计算区间
        level: 置信水平
        seed: 随机种子

    Returns:
        按 x 升序排列的 SmoothPoint 列表
    """
    if not 0.0 < span <= 1.0:
        raise DomainError(f"❌ 平滑窗口占比必须在 (0, 1] 内: {span}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"❌ 置信水平必须在 (0, 1) 内: {level}")
    x = np.asarray(data.x)
    y = np.asarray(data.y)
    grid = np.unique(x)
    fit = _local_linear(x, y, grid, span)
    if not resamples:
        return [SmoothPoint(float(g), float(f)) for g, f in zip(grid, fit)]

    fits = []
    for chunk in range(math.ceil(resamples / BOOTSTRAP_CHUNK)):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
        index = rng.integers(0, data.n, size=(BOOTSTRAP_CHUNK, data.n))
        fits.append(_local_linear(x[index], y[index], grid, span))
    fits = np.concatenate(fits)[:resamples]
    alpha = (1.0 - level) / 2.0
    lower, upper = np.quantile(fits, [alpha, 1.0 - alpha], axis=0)
    return [
        SmoothPoint(float(g), float(f), float(lo), float(hi))
        for g, f, lo, hi in zip(grid, fit, lower, upper)
    ]
