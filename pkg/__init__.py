"""
Combined Climbing Scoring - 复合赛制攀岩计分分析

名次乘积计分、copula 蒙特卡洛模拟、Kendall τ 检验、IIA 审计与主成分分析。
"""

import sys
from pathlib import Path

__version__ = "1.0.0"
__author__ = "Magic"
__description__ = "Rank-product scoring, simulation and audits for combined-format sport climbing"

_SRC_DIR = Path(__file__).parent.resolve() / "src"
if str(_SRC_DIR) not in sys.path:
    sys.path.insert(0, str(_SRC_DIR))

from reproduction_pipeline import CombinedFormatPipeline  # noqa: E402

__all__ = ["CombinedFormatPipeline"]
