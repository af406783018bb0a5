"""
配置管理
========
读取 config/config.json，叠加 .env / 环境变量覆盖，并用 pydantic 校验。

优先级：命令行参数 > 环境变量 > 配置文件 > 内置默认值
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from exceptions import ConfigError
from scoring import DEFAULT_BOULDER_ORDER, AggregationMethod


DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "config.json"

# 环境变量 -> (配置段, 键)
ENV_OVERRIDES = {
    "CLIMB_REPLICATIONS": ("simulation", "replications"),
    "CLIMB_SEED": ("simulation", "master_seed"),
    "CLIMB_WORKERS": ("simulation", "workers"),
    "CLIMB_BOOTSTRAP": ("statistics", "bootstrap_resamples"),
    "CLIMB_FORMAT": ("output", "format"),
    "CLIMB_METHOD": ("scoring", "method"),
}


class SimulationSettings(BaseModel):
    """蒙特卡洛模拟配置"""

    replications: int = Field(10000, ge=1)
    master_seed: int = Field(2021, ge=0)
    workers: int = Field(1, ge=1)
    show_progress: bool = True


class StatisticsSettings(BaseModel):
    """相关性检验配置"""

    bootstrap_resamples: int = Field(10000, ge=1000)
    confidence_level: float = Field(0.95, gt=0.0, lt=1.0)
    exact_max_n: int = Field(50, ge=2)
    bootstrap_seed: int = Field(2021, ge=0)


class ScoringSettings(BaseModel):
    """计分配置"""

    method: str = "product"
    boulder_tiebreak: List[str] = Field(
        default_factory=lambda: list(DEFAULT_BOULDER_ORDER))

    @field_validator("method")
    @classmethod
    def _check_method(cls, value: str) -> str:
        return AggregationMethod.parse(value).value

    @field_validator("boulder_tiebreak")
    @classmethod
    def _check_tiebreak(cls, value: List[str]) -> List[str]:
        allowed = set(DEFAULT_BOULDER_ORDER)
        unknown = [name for name in value if name not in allowed]
        if unknown:
            raise ValueError(f"未知的抱石排名字段: {unknown}")
        if len(set(value)) != len(value):
            raise ValueError("抱石排名字段不能重复")
        return value


class OutputSettings(BaseModel):
    """输出配置"""

    format: Literal["json", "csv"] = "json"
    significant_digits: int = Field(6, ge=1, le=17)


class AppSettings(BaseModel):
    """全部配置"""

    simulation: SimulationSettings = Field(default_factory=SimulationSettings)
    statistics: StatisticsSettings = Field(default_factory=StatisticsSettings)
    scoring: ScoringSettings = Field(default_factory=ScoringSettings)
    output: OutputSettings = Field(default_factory=OutputSettings)


class ConfigManager:
    """配置管理器 - 处理模拟、统计、计分与输出配置"""

    def __init__(self, config_path: Optional[str] = None, env_file: Optional[str] = None, use_env: bool = True):
        """
        初始化配置管理器

        Args:
            config_path: 配置文件路径，默认为项目根目录下的 config/config.json
            env_file: .env 文件路径，默认在当前目录查找
            use_env: 是否读取环境变量覆盖
        """
        self.config_path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
        self.use_env = use_env
        if use_env:
            load_dotenv(env_file, override=False)
        self.config = self._load_config()
        self.settings = self._validate(self._apply_env(self.config))

    def _load_config(self) -> Dict[str, Any]:
        """加载配置文件，读取失败时使用默认配置"""
        if self.config_path.exists():
            try:
                with open(self.config_path, "r", encoding="utf-8") as f:
                    data = json.load(f)
                if isinstance(data, dict):
                    return data
                print("⚠️  配置文件格式不正确，使用默认配置")
            except Exception as e:
                print(f"⚠️  无法读取配置文件: {e}，使用默认配置")
        return AppSettings().model_dump()

    def _apply_env(self, config: Dict[str, Any]) -> Dict[str, Any]:
        merged = {section: dict(values) for section, values in config.items() if isinstance(values, dict)}
        if not self.use_env:
            return merged
        for env_name, (section, key) in ENV_OVERRIDES.items():
            value = os.environ.get(env_name)
            if value is not None and value != "":
                merged.setdefault(section, {})[key] = value
        return merged

    @staticmethod
    def _validate(config: Dict[str, Any]) -> AppSettings:
        try:
            return AppSettings.model_validate(config)
        except ValidationError as e:
            raise ConfigError(f"❌ 配置不合法: {e}") from e

    def _save_config(self) -> None:
        """保存配置文件"""
        self.config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.config_path, "w", encoding="utf-8") as f:
            json.dump(self.config, f, indent=2, ensure_ascii=False)
        print(f"✅ 配置已保存: {self.config_path}")

    def get_simulation(self) -> SimulationSettings:
        return self.settings.simulation

    def get_statistics(self) -> StatisticsSettings:
        return self.settings.statistics

    def get_scoring(self) -> ScoringSettings:
        return self.settings.scoring

    def get_output(self) -> OutputSettings:
        return self.settings.output

    def set_value(self, section: str, key: str, value: Any) -> None:
        """
        修改一项配置，校验通过后写回配置文件

        Args:
            section: 配置段（simulation / statistics / scoring / output）
            key: 键名
            value: 新值
        """
        if section not in AppSettings.model_fields:
            raise ConfigError(f"❌ 未知的配置段: {section}")
        section_model = AppSettings.model_fields[section].annotation
        if key not in section_model.model_fields:
            raise ConfigError(f"❌ 未知的配置项: {section}.{key}")

        candidate = {s: dict(v) for s, v in self.config.items() if isinstance(v, dict)}
        candidate.setdefault(section, {})[key] = value
        self.settings = self._validate(self._apply_env(candidate))
        self.config = candidate
        self._save_config()

    def to_dict(self) -> Dict[str, Any]:
        return self.settings.model_dump()

    def show_config(self) -> None:
        """显示当前生效的配置"""
        print("\n" + "=" * 60)
        print("📋 当前配置")
        print("=" * 60)
        print(f"  配置文件: {self.config_path}")
        titles = {
            "simulation": "🎲 模拟",
            "statistics": "📊 统计",
            "scoring": "🧮 计分",
            "output": "📄 输出",
        }
        for section, values in self.to_dict().items():
            print(f"\n{titles.get(section, section)}:")
            for key, value in values.items():
                print(f"  - {key}: {value}")
        print("\n" + "=" * 60 + "\n")
