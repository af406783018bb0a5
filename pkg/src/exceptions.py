"""
异常定义
========
所有模块共用的异常层次。每个异常带有 exit_code，命令行据此返回退出码：
    1 - 用法/配置错误
    2 - 数据校验错误
    3 - 数值/定义域错误
"""

from typing import Optional, Sequence


class ClimbingError(Exception):
    """攀岩计分工具的基础异常"""

    exit_code = 3


class DomainError(ClimbingError, ValueError):
    """数值或定义域错误（参数越界、非有限分数等）"""

    exit_code = 3


class AmbiguousCutError(DomainError):
    """晋级线上存在并列，无法确定晋级名单"""

    def __init__(self, cut: int, climbers: Sequence[str]):
        self.cut = cut
        self.climbers = list(climbers)
        names = ", ".join(self.climbers)
        super().__init__(f"❌ 第 {cut} 名晋级线上存在并列，无法裁定: {names}")


class UndefinedCorrelationError(DomainError):
    """某一边全部相同，Kendall τ 无定义"""


class DataValidationError(ClimbingError, ValueError):
    """输入数据不合法，可附带行号与列名"""

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[str] = None):
        self.line = line
        self.column = column
        prefix = ""
        if line is not None:
            prefix += f"第 {line} 行"
        if column is not None:
            prefix += f"[{column}]"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ClimberNotFoundError(ClimbingError, KeyError):
    """找不到指定的运动员"""

    exit_code = 2

    def __init__(self, climber_id: str):
        self.climber_id = climber_id
        super().__init__(f"❌ 找不到运动员: {climber_id}")

    def __str__(self) -> str:
        return self.args[0]


class ConfigError(ClimbingError, ValueError):
    """配置文件或环境变量不合法"""

    exit_code = 1
