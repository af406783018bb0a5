"""
比赛数据读写
============
CSV（带表头）是标准输入格式，JSON 为逐字段对应的记录列表。

列：
    id, name, nationality, speed_rank, boulder_rank, lead_rank
    可选原始成绩: speed_time, boulder_tops, boulder_zones, boulder_top_attempts,
                  boulder_zone_attempts, lead_hold, lead_time
    可选校验列: official_total, official_place

speed_time 可写 DNF；lead_hold 可写 34+ 表示 plus。
以 # 开头的行为注释（输出文件的 manifest 行）。
"""

import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from exceptions import DataValidationError
from scoring import (
    DEFAULT_BOULDER_ORDER,
    DISCIPLINE_ORDER,
    AggregationMethod,
    BoulderPerformance,
    Climber,
    Entry,
    LeadPerformance,
    RankTriple,
    RoundKind,
    RoundResult,
    SpeedPerformance,
    aggregate_score,
    is_permutation,
    overall_standings,
    rank_discipline,
)


ARTIFACT_VERSION = "1.0.0"

BASE_COLUMNS: Tuple[str, ...] = ("id", "name", "nationality", "speed_rank", "boulder_rank", "lead_rank")
REQUIRED_COLUMNS: Tuple[str, ...] = ("id", "name", "speed_rank", "boulder_rank", "lead_rank")
RAW_COLUMNS: Tuple[str, ...] = (
    "speed_time",
    "boulder_tops",
    "boulder_zones",
    "boulder_top_attempts",
    "boulder_zone_attempts",
    "lead_hold",
    "lead_time",
)
CHECK_COLUMNS: Tuple[str, ...] = ("official_total", "official_place")

SUPPORTED_SUFFIXES = {".csv", ".json"}


# ============ 运行清单 ============

@dataclass(frozen=True)
class RunManifest:
    """一次运行的完整参数，足以逐字节复现输出（不含时间戳）"""

    command: str
    config: Dict[str, Any] = field(default_factory=dict)
    version: str = ARTIFACT_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self, indent: Optional[int] = None) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=indent)

    def write(self, out_dir: Union[str, Path]) -> Path:
        path = Path(out_dir) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(indent=2) + "\n", encoding="utf-8")
        return path


# ============ 解析 ============

def _cell(row: Dict[str, str], column: str) -> str:
    value = row.get(column, "")
    return "" if value is None else str(value).strip()


def _parse_int(value: str, line: int, column: str, minimum: int = 0) -> int:
    try:
        number = float(value)
    except ValueError:
        raise DataValidationError(f"无法解析为整数: '{value}'", line, column) from None
    if not math.isfinite(number) or number != int(number) or number < minimum:
        raise DataValidationError(f"应为不小于 {minimum} 的整数: '{value}'", line, column)
    return int(number)


def _parse_float(value: str, line: int, column: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise DataValidationError(f"无法解析为数字: '{value}'", line, column) from None
    if not math.isfinite(number):
        raise DataValidationError(f"应为有限数: '{value}'", line, column)
    return number


def _parse_performances(
    row: Dict[str, str], line: int
) -> Tuple[SpeedPerformance, BoulderPerformance, LeadPerformance]:
    try:
        speed_text = _cell(row, "speed_time")
        if speed_text.lower() in {"dnf", "dq", "fs"}:
            speed = SpeedPerformance(time=None, dnf=True)
        else:
            speed = SpeedPerformance(time=_parse_float(speed_text, line, "speed_time"))

        boulder = BoulderPerformance(
            tops=_parse_int(_cell(row, "boulder_tops"), line, "boulder_tops"),
            zones=_parse_int(_cell(row, "boulder_zones"), line, "boulder_zones"),
            top_attempts=_parse_int(_cell(row, "boulder_top_attempts"), line, "boulder_top_attempts"),
            zone_attempts=_parse_int(_cell(row, "boulder_zone_attempts"), line, "boulder_zone_attempts"),
        )

        hold_text = _cell(row, "lead_hold")
        plus = hold_text.endswith("+")
        lead = LeadPerformance(
            highest_hold=_parse_int(hold_text.rstrip("+"), line, "lead_hold"),
            time=_parse_float(_cell(row, "lead_time"), line, "lead_time"),
            plus=plus,
        )
    except DataValidationError as e:
        if e.line is None:
            raise DataValidationError(str(e), line) from None
        raise
    return speed, boulder, lead


def records_to_round(
    records: Sequence[Dict[str, Any]],
    round_kind: RoundKind = RoundKind.CUSTOM,
    method: AggregationMethod = AggregationMethod.PRODUCT,
    boulder_order: Sequence[str] = DEFAULT_BOULDER_ORDER,
    first_line: int = 2,
) -> RoundResult:
    """
    把逐行记录转换为经过校验的 RoundResult

    Args:
        records: 每名运动员一条记录（键为列名）
        round_kind: 轮次
        method: 计分方式
        boulder_order: 抱石并列破解顺序（用于核对原始成绩）
        first_line: 第一条记录在文件中的行号，用于报错

    Returns:
        RoundResult
    """
    if not records:
        raise DataValidationError("文件中没有任何运动员记录")
    columns = set().union(*(r.keys() for r in records))
    missing = [c for c in REQUIRED_COLUMNS if c not in columns]
    if missing:
        raise DataValidationError(f"缺少必需列: {missing}", first_line - 1)
    raw_present = [c for c in RAW_COLUMNS if c in columns]
    if raw_present and len(raw_present) != len(RAW_COLUMNS):
        absent = [c for c in RAW_COLUMNS if c not in columns]
        raise DataValidationError(f"原始成绩列不完整，缺少: {absent}", first_line - 1)

    climbers: List[Climber] = []
    triples: List[RankTriple] = []
    performances = []
    seen: Dict[str, int] = {}
    for offset, row in enumerate(records):
        line = first_line + offset
        climber_id = _cell(row, "id")
        if not climber_id:
            raise DataValidationError("运动员编号为空", line, "id")
        if climber_id in seen:
            raise DataValidationError(f"运动员编号 {climber_id} 与第 {seen[climber_id]} 行重复", line, "id")
        seen[climber_id] = line
        climbers.append(
            Climber(id=climber_id, name=_cell(row, "name"), nationality=_cell(row, "nationality") or None)
        )
        triples.append(
            RankTriple(*(_parse_int(_cell(row, f"{d.value}_rank"), line, f"{d.value}_rank", 1) for d in DISCIPLINE_ORDER))
        )
        if raw_present:
            performances.append(_parse_performances(row, line))

    n = len(records)
    for d in DISCIPLINE_ORDER:
        ranks = [t.get(d) for t in triples]
        if not is_permutation(ranks):
            raise DataValidationError(f"{d.value} 名次不是 1..{n} 的排列: {ranks}", column=f"{d.value}_rank")

    if performances:
        for k, d in enumerate(DISCIPLINE_ORDER):
            derived = rank_discipline([p[k] for p in performances], d, boulder_order).ranks
            for offset, (given, expected) in enumerate(zip((t.get(d) for t in triples), derived)):
                if given != expected:
                    raise DataValidationError(
                        f"{d.value} 名次 {given} 与原始成绩推出的名次 {expected} 不一致",
                        first_line + offset,
                        f"{d.value}_rank",
                    )

    _check_official(records, triples, first_line)

    entries = []
    for i, (climber, triple) in enumerate(zip(climbers, triples)):
        if performances:
            speed, boulder, lead = performances[i]
            entries.append(Entry(climber, triple, speed, boulder, lead))
        else:
            entries.append(Entry(climber, triple))
    return RoundResult(round_kind=round_kind, entries=tuple(entries), method=method)


def _check_official(records: Sequence[Dict[str, Any]], triples: Sequence[RankTriple], first_line: int) -> None:
    """official_total 必须等于名次乘积，official_place 必须落在乘积排名的并列区间内"""
    products = [aggregate_score(t, AggregationMethod.PRODUCT) for t in triples]
    placements = overall_standings(products).placements
    for offset, row in enumerate(records):
        line = first_line + offset
        total = _cell(row, "official_total")
        if total:
            official = _parse_float(total, line, "official_total")
            if official != products[offset]:
                raise DataValidationError(
                    f"official_total {total} 与名次乘积 {int(products[offset])} 不一致", line, "official_total"
                )
        place = _cell(row, "official_place")
        if place:
            official_place = _parse_int(place, line, "official_place", 1)
            # 并列可由官方另行破解，名次取 p..p+k-1 之一即可
            first = placements[offset]
            last = first + placements.count(first) - 1
            if not first <= official_place <= last:
                raise DataValidationError(
                    f"official_place {official_place} 不在计算名次 {first}..{last} 内", line, "official_place"
                )


def _leading_comment_lines(path: Path) -> int:
    count = 0
    with open(path, "r", encoding="utf-8") as f:
        for text in f:
            if not text.startswith("#"):
                break
            count += 1
    return count


def parse_competition_csv(
    path: Union[str, Path],
    round_kind: RoundKind = RoundKind.CUSTOM,
    method: AggregationMethod = AggregationMethod.PRODUCT,
    boulder_order: Sequence[str] = DEFAULT_BOULDER_ORDER,
) -> RoundResult:
    """读取比赛 CSV 并校验"""
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"文件不存在: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, comment="#", skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataValidationError(f"文件为空: {path}") from None
    except pd.errors.ParserError as e:
        raise DataValidationError(f"CSV 格式错误: {e}") from None
    frame.columns = [str(c).strip() for c in frame.columns]
    first_line = _leading_comment_lines(path) + 2
    return records_to_round(frame.to_dict(orient="records"), round_kind, method, boulder_order, first_line)


def parse_competition_json(
    path: Union[str, Path],
    round_kind: RoundKind = RoundKind.CUSTOM,
    method: AggregationMethod = AggregationMethod.PRODUCT,
    boulder_order: Sequence[str] = DEFAULT_BOULDER_ORDER,
) -> RoundResult:
    """读取 JSON（记录列表，或带 rows 键的对象），行号按记录序号（从 1 开始）"""
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"文件不存在: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataValidationError(f"JSON 格式错误: {e.msg}", e.lineno) from None
    if isinstance(payload, dict):
        payload = payload.get("rows", [])
    if not isinstance(payload, list) or not all(isinstance(r, dict) for r in payload):
        raise DataValidationError("JSON 应为记录（对象）列表")
    records = [{k: ("" if v is None else str(v).lower() if isinstance(v, bool) else str(v)) for k, v in r.items()}
               for r in payload]
    return records_to_round(records, round_kind, method, boulder_order, first_line=1)


def load_competition(
    path: Union[str, Path],
    round_kind: RoundKind = RoundKind.CUSTOM,
    method: AggregationMethod = AggregationMethod.PRODUCT,
    boulder_order: Sequence[str] = DEFAULT_BOULDER_ORDER,
) -> RoundResult:
    """按扩展名选择 CSV 或 JSON"""
    suffix = Path(path).suffix.lower()
    if suffix not in SUPPORTED_SUFFIXES:
        raise DataValidationError(f"不支持的文件类型: {suffix or '(无扩展名)'}")
    if suffix == ".json":
        return parse_competition_json(path, round_kind, method, boulder_order)
    return parse_competition_csv(path, round_kind, method, boulder_order)


# ============ 序列化 ============

def _format_number(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def round_to_records(round_result: RoundResult) -> List[Dict[str, str]]:
    """RoundResult -> 逐行记录（与输入格式一致，可再次解析）"""
    products = [aggregate_score(e.ranks, AggregationMethod.PRODUCT) for e in round_result.entries]
    placements = overall_standings(products).placements
    records = []
    for entry, product, place in zip(round_result.entries, products, placements):
        record = {
            "id": entry.climber.id,
            "name": entry.climber.name,
            "nationality": entry.climber.nationality or "",
            "speed_rank": str(entry.ranks.speed),
            "boulder_rank": str(entry.ranks.boulder),
            "lead_rank": str(entry.ranks.lead),
        }
        if round_result.has_raw_performances:
            record.update({
                "speed_time": "DNF" if entry.speed.dnf else repr(float(entry.speed.time)),
                "boulder_tops": str(entry.boulder.tops),
                "boulder_zones": str(entry.boulder.zones),
                "boulder_top_attempts": str(entry.boulder.top_attempts),
                "boulder_zone_attempts": str(entry.boulder.zone_attempts),
                "lead_hold": f"{entry.lead.highest_hold}{'+' if entry.lead.plus else ''}",
                "lead_time": repr(float(entry.lead.time)),
            })
        record["official_total"] = _format_number(product)
        record["official_place"] = str(place)
        records.append(record)
    return records


def write_competition_csv(
    round_result: RoundResult, path: Union[str, Path], manifest: Optional[RunManifest] = None
) -> Path:
    """写出比赛 CSV；给出 manifest 时在首行写入 # manifest: 注释"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(round_to_records(round_result))
    with open(path, "w", encoding="utf-8", newline="") as f:
        if manifest is not None:
            f.write(f"# manifest: {manifest.to_json()}\n")
        frame.to_csv(f, index=False, lineterminator="\n")
    return path


# ============ 结果输出 ============

def round_sig(value: Any, digits: int = 6) -> Any:
    """浮点数保留有效数字，其他类型原样返回"""
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        return float(f"{value:.{digits}g}")
    return value


def _rounded_rows(rows: Sequence[Dict[str, Any]], digits: int) -> List[Dict[str, Any]]:
    return [{k: round_sig(v, digits) for k, v in row.items()} for row in rows]


def render_tables(
    tables: Dict[str, Sequence[Dict[str, Any]]],
    fmt: str = "json",
    manifest: Optional[RunManifest] = None,
    digits: int = 6,
) -> str:
    """
    把若干张表渲染为 JSON 或 CSV 文本

    JSON: {"manifest": ..., "<表名>": [行, ...]}
    CSV:  首行 # manifest:，每张表前一行 # table: <表名>
    """
    if fmt == "json":
        payload: Dict[str, Any] = {}
        if manifest is not None:
            payload["manifest"] = manifest.to_dict()
        for name, rows in tables.items():
            payload[name] = _rounded_rows(rows, digits)
        return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"
    if fmt != "csv":
        raise DataValidationError(f"不支持的输出格式: {fmt}")

    buffer = io.StringIO()
    if manifest is not None:
        buffer.write(f"# manifest: {manifest.to_json()}\n")
    for name, rows in tables.items():
        if len(tables) > 1:
            buffer.write(f"# table: {name}\n")
        pd.DataFrame(_rounded_rows(rows, digits)).to_csv(
            buffer, index=False, lineterminator="\n", float_format=f"%.{digits}g"
        )
    return buffer.getvalue()


def write_tables(
    tables: Dict[str, Sequence[Dict[str, Any]]],
    out_dir: Union[str, Path],
    fmt: str = "json",
    manifest: Optional[RunManifest] = None,
    digits: int = 6,
) -> List[Path]:
    """每张表写入 <out_dir>/<表名>.<fmt>，清单写入 manifest.json"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in tables.items():
        path = out_dir / f"{name}.{fmt}"
        path.write_text(render_tables({name: rows}, fmt, None, digits), encoding="utf-8")
        written.append(path)
    if manifest is not None:
        written.append(manifest.write(out_dir))
    return written
