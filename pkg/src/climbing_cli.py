"""
命令行入口
==========
    python src/climbing_cli.py [全局参数] <子命令> ...

子命令：score / simulate / sweep / correlate / audit / pca / reproduce / config
全局参数：--format json|csv，--seed，--out DIR，--config PATH，--workers N，--no-progress

数据写到标准输出（或 --out 目录），状态信息写到标准错误。
退出码：0 成功，1 用法/配置错误，2 数据错误，3 数值/定义域错误
"""

import argparse
import contextlib
import sys
from typing import Any, Dict, List, Optional, Sequence

from colorama import Fore, Style
from colorama import init as colorama_init

from competition_io import RunManifest, load_competition, render_tables, write_tables
from config_manager import ConfigManager
from copula_sampler import CorrelationSpec
from exceptions import ClimbingError
from iia_audit import iia_audit
from monte_carlo import (
    Condition,
    SimulationConfig,
    run_simulation,
    score_distribution,
    summarize,
    sweep_win_probabilities,
)
from pca_analysis import PerformanceMatrix, pca
from rank_stats import PairedRanks, correlate, correlation_table, smoothed_fit
from reproduction_pipeline import CombinedFormatPipeline
from scoring import AggregationMethod, RoundKind, compare_methods, rescore


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 3

ROUND_CHOICES = {"qual": RoundKind.QUALIFICATION, "final": RoundKind.FINAL, "custom": RoundKind.CUSTOM}


class ClimbingArgumentParser(argparse.ArgumentParser):
    """用法错误以退出码 1 结束"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{Fore.RED}❌ {self.prog}: {message}{Style.RESET_ALL}\n")


def status(message: str, color: str = "") -> None:
    """状态信息写到标准错误"""
    print(f"{color}{message}{Style.RESET_ALL if color else ''}", file=sys.stderr)


def _error_message(error: Exception) -> str:
    """统一加上一个 ❌ 前缀"""
    return "❌ " + str(error).lstrip("❌ ")


def _parse_taus(text: str) -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无法解析 τ 列表: {text}") from None


def _parse_stages(text: str) -> List[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无法解析阶段列表: {text}") from None


def build_parser() -> ClimbingArgumentParser:
    parser = ClimbingArgumentParser(
        prog="climbing_cli",
        description="复合赛制攀岩计分：名次乘积计分、copula 模拟、相关性检验、IIA 审计与 PCA",
    )
    parser.add_argument("--format", choices=["json", "csv"], default=None, help="输出格式（默认读取配置，json）")
    parser.add_argument("--seed", dest="global_seed", type=int, default=None, help="随机种子（模拟与 bootstrap）")
    parser.add_argument("--out", default=None, help="输出目录；不指定时写到标准输出")
    parser.add_argument("--config", default=None, help="配置文件路径（默认 config/config.json）")
    parser.add_argument("--workers", type=int, default=None, help="模拟线程数")
    parser.add_argument("--no-progress", action="store_true", help="不显示进度条")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=ClimbingArgumentParser)

    score = sub.add_parser("score", help="重新计算得分与总排名")
    score.add_argument("file", help="比赛数据（.csv / .json）")
    score.add_argument("--method", default=None, help="product | sum | sqrt-sum")
    score.add_argument("--round", choices=ROUND_CHOICES, default="custom")
    score.add_argument("--compare", action="store_true", help="并列给出三种计分方式的名次")

    simulate = sub.add_parser("simulate", help="蒙特卡洛模拟")
    simulate.add_argument("--round", choices=ROUND_CHOICES, default="final")
    simulate.add_argument("--n", type=int, default=None, help="参赛人数（custom 轮次必填）")
    simulate.add_argument("--tau", type=float, required=True, help="抱石与难度的 Kendall τ")
    simulate.add_argument("--reps", type=int, default=None, help="模拟次数")
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--method", default=None)
    simulate.add_argument("--cut", type=int, default=None, help="晋级名次线（默认资格赛 8，决赛 3）")

    sweep = sub.add_parser("sweep", help="τ 扫描：单项冠军获得总冠军的概率")
    sweep.add_argument("--round", choices=ROUND_CHOICES, default="final")
    sweep.add_argument("--n", type=int, default=None)
    sweep.add_argument("--taus", type=_parse_taus, default=[0.0, 0.25, 0.5, 0.75, 1.0])
    sweep.add_argument("--reps", type=int, default=None)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--method", default=None)

    corr = sub.add_parser("correlate", help="Kendall τ、精确检验与 bootstrap 区间")
    corr.add_argument("file")
    corr.add_argument("--x", default=None, help="speed | bouldering | lead；不指定时输出完整相关性表")
    corr.add_argument("--y", default="overall")
    corr.add_argument("--bootstrap", type=int, default=None, help="重抽样次数 B，0 表示不计算区间")
    corr.add_argument("--level", type=float, default=None)
    corr.add_argument("--smooth", action="store_true", help="同时输出名次散点的平滑曲线与区间")

    audit = sub.add_parser("audit", help="逐一去掉运动员的 IIA 审计")
    audit.add_argument("file")
    audit.add_argument("--method", default=None)

    pca_parser = sub.add_parser("pca", help="原始成绩的主成分分析")
    pca_parser.add_argument("file")

    reproduce = sub.add_parser("reproduce", help="在自带数据上运行完整复现流程")
    reproduce.add_argument("--data-dir", default=None)
    reproduce.add_argument("--reps", type=int, default=None)
    reproduce.add_argument("--skip", type=_parse_stages, default=[], help="跳过的阶段，例如 3 或 3,5")

    config = sub.add_parser("config", help="显示或修改配置")
    config.add_argument("--set", dest="assignments", action="append", default=[], metavar="SECTION.KEY=VALUE")

    return parser


# ============ 子命令 ============

def _method(args, settings: ConfigManager) -> AggregationMethod:
    return AggregationMethod.parse(getattr(args, "method", None) or settings.get_scoring().method)


def _seed(args, default: int) -> int:
    for value in (getattr(args, "seed", None), args.global_seed):
        if value is not None:
            return value
    return default


def cmd_score(args, settings: ConfigManager) -> Dict[str, List[Dict[str, Any]]]:
    method = _method(args, settings)
    round_result = load_competition(
        args.file, ROUND_CHOICES[args.round], method, settings.get_scoring().boulder_tiebreak
    )
    comparison = compare_methods(round_result) if args.compare else {}
    rows = []
    for i in round_result.ordered_indices():
        entry = round_result.entries[i]
        row = {
            "id": entry.climber.id,
            "name": entry.climber.name,
            "speed_rank": entry.ranks.speed,
            "boulder_rank": entry.ranks.boulder,
            "lead_rank": entry.ranks.lead,
            "score": round_result.scores[i],
            "placement": round_result.placements[i],
        }
        for other, placements in comparison.items():
            row[f"placement_{other.value}"] = placements[i]
        rows.append(row)
    if round_result.tied:
        status("⚠️  总排名中存在并列", Fore.YELLOW)
    return {"standings": rows}


def _simulation_tables(args, settings: ConfigManager) -> Dict[str, List[Dict[str, Any]]]:
    simulation = settings.get_simulation()
    config = SimulationConfig(
        round_kind=ROUND_CHOICES[args.round],
        spec=CorrelationSpec(args.tau),
        replications=args.reps or simulation.replications,
        master_seed=_seed(args, simulation.master_seed),
        method=_method(args, settings),
        n=args.n,
    )
    status(f"🎲 模拟 {config.replications} 次（n={config.field_size}, τ={config.spec.tau}）")
    replicates = run_simulation(config, workers=args.workers or simulation.workers, show_progress=args.progress)
    summary = summarize(replicates, args.cut)
    return {
        "win_probabilities": [
            {"condition": c.value, "probability": p} for c, p in summary.win_probabilities.items()
        ],
        "rank_distribution": [
            {"placement": k + 1, "probability": p, "cumulative": c}
            for k, (p, c) in enumerate(zip(summary.rank_distribution.probabilities, summary.rank_distribution.cumulative))
        ],
        "advancement": [
            {"condition": Condition.WON_ANY_DISCIPLINE.value, "cut": summary.cut,
             "probability": summary.advancement_probability}
        ],
        "score_by_placement": [
            {"placement": s.placement, "mean": s.mean, "lower": s.lower, "upper": s.upper, "count": s.count}
            for s in summary.score_by_placement
        ],
        "score_quantiles": [
            {"placement": q.placement, **{f"q{p:g}": v for p, v in zip(q.probabilities, q.values)}}
            for q in score_distribution(replicates)
        ],
    }


def cmd_sweep(args, settings: ConfigManager) -> Dict[str, List[Dict[str, Any]]]:
    simulation = settings.get_simulation()
    rows = sweep_win_probabilities(
        ROUND_CHOICES[args.round],
        args.taus,
        replications=args.reps or simulation.replications,
        master_seed=_seed(args, simulation.master_seed),
        method=_method(args, settings),
        n=args.n,
        workers=args.workers or simulation.workers,
        show_progress=args.progress,
    )
    return {
        "sweep": [
            {
                "tau": r.tau,
                "win_given_speed": r.win_given_speed,
                "win_given_boulder_or_lead": r.win_given_boulder_or_lead,
                "win_given_any": r.win_given_any,
            }
            for r in rows
        ]
    }


def cmd_correlate(args, settings: ConfigManager) -> Dict[str, List[Dict[str, Any]]]:
    statistics = settings.get_statistics()
    round_result = load_competition(args.file, boulder_order=settings.get_scoring().boulder_tiebreak)
    resamples = statistics.bootstrap_resamples if args.bootstrap is None else args.bootstrap
    options = dict(
        resamples=resamples,
        level=args.level or statistics.confidence_level,
        seed=_seed(args, statistics.bootstrap_seed),
        exact_max_n=statistics.exact_max_n,
    )
    if args.x:
        rows = [correlate(round_result, args.x, args.y, **options)]
    else:
        rows = correlation_table(round_result, **options)
    tables = {
        "correlations": [
            {
                "x": r.x, "y": r.y, "tau": r.tau, "T": r.statistic_T, "p_value": r.p_value,
                "exact": r.exact, "ci_lower": r.ci_lower, "ci_upper": r.ci_upper,
            }
            for r in rows
        ]
    }
    if args.smooth:
        pairs = [(args.x, args.y)] if args.x else [(d, "overall") for d in ("speed", "boulder", "lead")]
        tables["smooth"] = [
            {"x_column": x, "y_column": y, "x": p.x, "fit": p.fit, "lower": p.lower, "upper": p.upper}
            for x, y in pairs
            for p in smoothed_fit(
                PairedRanks.from_round(round_result, x, y), resamples=resamples,
                level=options["level"], seed=options["seed"],
            )
        ]
    return tables


def cmd_audit(args, settings: ConfigManager) -> Dict[str, List[Dict[str, Any]]]:
    round_result = load_competition(args.file, boulder_order=settings.get_scoring().boulder_tiebreak)
    round_result = rescore(round_result, _method(args, settings))
    report = iia_audit(round_result)
    medal = {e.excluded for e in report.medal_changes}
    exclusions, rank_changes, pair_changes = [], [], []
    for e in report.exclusions:
        exclusions.append({
            "excluded": e.excluded,
            "excluded_placement": e.excluded_placement,
            "agreement_tau": e.agreement_tau,
            "perfect": e.perfect,
            "pair_changes": len(e.pair_changes),
            "tied": e.tied,
            "medal_change": e.excluded in medal,
        })
        rank_changes.extend(
            {"excluded": e.excluded, "id": c.climber_id, "original_placement": c.original_placement,
             "old_placement": c.old_placement, "new_placement": c.new_placement}
            for c in e.rank_changes
        )
        pair_changes.extend(
            {"excluded": e.excluded, "first": c.first, "second": c.second, "kind": c.kind.value}
            for c in e.pair_changes
        )
    summary = [{
        "n": round_result.n,
        "method": round_result.method.value,
        "perfect_agreements": report.perfect_agreements,
        "violations": len(report.violations),
        "behind_violations": len(report.behind_violations),
        "medal_changes": len(report.medal_changes),
    }]
    return {"summary": summary, "exclusions": exclusions, "rank_changes": rank_changes, "pair_changes": pair_changes}


def cmd_pca(args, settings: ConfigManager) -> Dict[str, List[Dict[str, Any]]]:
    round_result = load_competition(args.file, boulder_order=settings.get_scoring().boulder_tiebreak)
    result = pca(PerformanceMatrix.from_round(round_result))
    components = result.loadings.shape[1]
    biplot = result.biplot_rows(components)
    return {
        "eigenvalues": [
            {"component": f"pc{k + 1}", "eigenvalue": float(result.eigenvalues[k]), "explained": float(result.explained[k])}
            for k in range(components)
        ],
        "loadings": biplot["loadings"],
        "scores": biplot["scores"],
    }


def cmd_reproduce(args, settings: ConfigManager) -> Dict[str, List[Dict[str, Any]]]:
    # 流程的状态输出转到标准错误，标准输出只保留数据
    with contextlib.redirect_stdout(sys.stderr):
        pipeline = CombinedFormatPipeline(
            data_dir=args.data_dir,
            config_manager=settings,
            replications=args.reps,
            master_seed=args.global_seed,
            workers=args.workers,
        )
        pipeline.show_progress = pipeline.show_progress and args.progress
        results = pipeline.run_full_pipeline(skip_stages=args.skip)
    failed = [{"stage": k, "error": v["error"]} for k, v in results.items() if isinstance(v, dict) and "error" in v]
    tables = {"findings": pipeline.findings}
    if failed:
        tables["failed_stages"] = failed
    return tables


HANDLERS = {
    "score": cmd_score,
    "simulate": _simulation_tables,
    "sweep": cmd_sweep,
    "correlate": cmd_correlate,
    "audit": cmd_audit,
    "pca": cmd_pca,
    "reproduce": cmd_reproduce,
}


def _manifest(args, settings: ConfigManager) -> RunManifest:
    options = {
        k: v for k, v in sorted(vars(args).items())
        if k not in {"command", "progress", "no_progress", "out", "format"}
    }
    return RunManifest(command=args.command, config={"arguments": options, "settings": settings.to_dict()})


def _run_config(args, settings: ConfigManager) -> int:
    for assignment in args.assignments:
        target, sep, value = assignment.partition("=")
        section, dot, key = target.partition(".")
        if not sep or not dot:
            status(f"❌ 格式应为 SECTION.KEY=VALUE: {assignment}", Fore.RED)
            return EXIT_USAGE
        settings.set_value(section, key, _coerce(value))
    settings.show_config()
    return EXIT_OK


def _coerce(value: str) -> Any:
    lowered = value.strip().lower()
    if lowered in {"true", "false"}:
        return lowered == "true"
    if "," in value:
        return [v.strip() for v in value.split(",") if v.strip()]
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def main(argv: Optional[Sequence[str]] = None) -> int:
    """主函数，返回退出码"""
    colorama_init()
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = ConfigManager(args.config)
        args.progress = settings.get_simulation().show_progress and not args.no_progress

        if args.command == "config":
            return _run_config(args, settings)

        tables = HANDLERS[args.command](args, settings)
        output = settings.get_output()
        fmt = args.format or output.format
        manifest = _manifest(args, settings)

        if args.out:
            written = write_tables(tables, args.out, fmt, manifest, output.significant_digits)
            status(f"✅ 已写出 {len(written)} 个文件到 {args.out}", Fore.GREEN)
        else:
            sys.stdout.write(render_tables(tables, fmt, manifest, output.significant_digits))
        return EXIT_OK

    except KeyboardInterrupt:
        status("\n⚠️  用户中断操作", Fore.YELLOW)
        return EXIT_USAGE
    except ClimbingError as e:
        status(_error_message(e), Fore.RED)
        return e.exit_code
    except (TypeError, ValueError) as e:
        status(_error_message(e), Fore.RED)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
