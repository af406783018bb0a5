"""测试公共设置：把 src 加入路径，提供自带数据与小型比赛"""

import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
SRC_DIR = PROJECT_ROOT / "src"
DATA_DIR = PROJECT_ROOT / "data"

if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from competition_io import load_competition  # noqa: E402
from scoring import Climber, RankTriple, RoundKind, RoundResult  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 10000 次模拟级别的验收测试")


def make_round(triples, round_kind=RoundKind.CUSTOM, method="product"):
    """由 (s, b, l) 元组列表构造比赛，运动员编号为 c1, c2, ..."""
    climbers = [Climber(id=f"c{i + 1}", name=f"Climber {i + 1}") for i in range(len(triples))]
    return RoundResult.from_ranks(climbers, [RankTriple(*t) for t in triples], round_kind, method)


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR


@pytest.fixture(scope="session")
def tokyo_qualification():
    return load_competition(DATA_DIR / "tokyo2020_women_qualification_reconstructed.csv", RoundKind.QUALIFICATION)


@pytest.fixture(scope="session")
def tokyo_final():
    return load_competition(DATA_DIR / "tokyo2020_women_final_reconstructed.csv", RoundKind.FINAL)


@pytest.fixture(scope="session")
def yog_qualification():
    return load_competition(DATA_DIR / "yog2018_women_qualification_reconstructed.csv", RoundKind.QUALIFICATION)


@pytest.fixture(scope="session")
def yog_final():
    return load_competition(DATA_DIR / "yog2018_women_final_reconstructed.csv", RoundKind.FINAL)


@pytest.fixture(autouse=True)
def _isolate_env(monkeypatch):
    for name in ("CLIMB_REPLICATIONS", "CLIMB_SEED", "CLIMB_WORKERS", "CLIMB_BOOTSTRAP", "CLIMB_FORMAT", "CLIMB_METHOD"):
        monkeypatch.delenv(name, raising=False)
