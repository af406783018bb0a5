"""
主成分分析
==========
对速度用时、抱石完攀数、难度高度三列做标准化后的 PCA（相关矩阵特征分解）。

符号约定：每个载荷列中绝对值最大的元素取正。
得分 = 标准化数据 × 载荷，各主成分得分的样本方差（ddof=1）等于对应特征值。
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from exceptions import DataValidationError, DomainError
from scoring import RoundResult


PCA_VARIABLES: Tuple[str, ...] = ("speed_time", "boulder_tops", "lead_holds")


@dataclass(frozen=True)
class PerformanceMatrix:
    """每行一名运动员，列为 PCA_VARIABLES"""

    ids: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(PCA_VARIABLES):
            raise DomainError(f"❌ 成绩矩阵应为 (n, {len(PCA_VARIABLES)})，实际为 {values.shape}")
        if values.shape[0] != len(self.ids):
            raise DomainError("❌ 运动员编号数与行数不一致")
        if values.shape[0] < 3:
            raise DomainError(f"❌ PCA 至少需要 3 行: {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise DataValidationError("成绩矩阵中存在缺失或非有限值")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "values", values)

    @classmethod
    def from_round(cls, round_result: RoundResult) -> "PerformanceMatrix":
        """从带原始成绩的比赛结果中取出三列"""
        rows = []
        for entry in round_result.entries:
            if not entry.has_raw_performances:
                raise DataValidationError(f"运动员 {entry.climber.id} 缺少原始成绩", column="raw")
            if entry.speed.dnf:
                raise DataValidationError(f"运动员 {entry.climber.id} 速度成绩为 dnf，无法用于 PCA", column="speed_time")
            rows.append([entry.speed.time, entry.boulder.tops, entry.lead.highest_hold])
        return cls(ids=tuple(round_result.climber_ids), values=np.array(rows, dtype=float))


@dataclass(frozen=True)
class PCAResult:
    """载荷列为主成分，按解释方差从大到小排列"""

    ids: Tuple[str, ...]
    variables: Tuple[str, ...]
    loadings: np.ndarray
    scores: np.ndarray
    eigenvalues: np.ndarray
    correlation: np.ndarray

    @property
    def explained(self) -> np.ndarray:
        return self.eigenvalues / self.eigenvalues.sum()

    def biplot_rows(self, components: int = 2) -> Dict[str, List[Dict]]:
        """双标图数据：运动员得分与变量载荷"""
        names = [f"pc{k + 1}" for k in range(components)]
        scores = [
            {"id": cid, **{name: float(self.scores[i, k]) for k, name in enumerate(names)}}
            for i, cid in enumerate(self.ids)
        ]
        loadings = [
            {"variable": var, **{name: float(self.loadings[j, k]) for k, name in enumerate(names)}}
            for j, var in enumerate(self.variables)
        ]
        return {"scores": scores, "loadings": loadings}


def standardize(values: np.ndarray, variables: Sequence[str] = PCA_VARIABLES) -> np.ndarray:
    """列标准化为均值 0、样本标准差 1；variables 仅用于报错时的列名"""
    std = values.std(axis=0, ddof=1)
    if np.any(std == 0):
        constant = [variables[j] for j in np.flatnonzero(std == 0)]
        raise DomainError(f"❌ 以下列方差为 0，无法标准化: {constant}")
    return (values - values.mean(axis=0)) / std


def orient(loadings: np.ndarray) -> np.ndarray:
    """每列绝对值最大的元素取正"""
    pivot = np.argmax(np.abs(loadings), axis=0)
    signs = np.sign(loadings[pivot, np.arange(loadings.shape[1])])
    signs[signs == 0] = 1.0
    return loadings * signs


def pca(data: PerformanceMatrix, variables: Sequence[str] = PCA_VARIABLES) -> PCAResult:
    """
    主成分分析

    Args:
        data: 成绩矩阵
        variables: 各列的名称

    Returns:
        PCAResult
    """
    if len(variables) != data.values.shape[1]:
        raise DomainError(f"❌ 变量名数 {len(variables)} 与列数 {data.values.shape[1]} 不一致")
    z = standardize(data.values, variables)
    correlation = z.T @ z / (z.shape[0] - 1)
    eigenvalues, vectors = np.linalg.eigh(correlation)
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    loadings = orient(vectors[:, order])
    return PCAResult(
        ids=data.ids,
        variables=tuple(variables),
        loadings=loadings,
        scores=z @ loadings,
        eigenvalues=eigenvalues,
        correlation=correlation,
    )
