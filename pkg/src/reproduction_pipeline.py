"""
复现流程
========
在仓库自带的比赛数据上依次运行全部分析：

    阶段一：计分核对      - 解析数据，核对官方得分与名次，比较三种计分方式
    阶段二：相关性分析    - 单项名次与总排名的 Kendall τ、精确检验、bootstrap 区间
    阶段三：蒙特卡洛模拟  - τ 扫描、单项冠军的晋级概率、各名次期望得分
    阶段四：IIA 审计      - 逐一去掉运动员后的名次变化
    阶段五：主成分分析    - 速度用时 / 抱石完攀 / 难度高度

某一阶段失败时打印原因并继续后续阶段。
"""

import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from competition_io import load_competition
from config_manager import ConfigManager
from copula_sampler import CorrelationSpec
from iia_audit import iia_audit, remove_and_rescore
from monte_carlo import (
    Condition,
    SimulationConfig,
    advancement_probability,
    expected_score_by_placement,
    run_simulation,
    sweep_win_probabilities,
)
from pca_analysis import PerformanceMatrix, pca
from rank_stats import PairedRanks, correlation_table, kendall_tau, smoothed_fit
from scoring import RoundKind, RoundResult, compare_methods


DEFAULT_DATA_DIR = Path(__file__).resolve().parent.parent / "data"

FIXTURES: Dict[str, tuple] = {
    "tokyo_qualification": ("tokyo2020_women_qualification_reconstructed.csv", RoundKind.QUALIFICATION),
    "tokyo_final": ("tokyo2020_women_final_reconstructed.csv", RoundKind.FINAL),
    "yog_qualification": ("yog2018_women_qualification_reconstructed.csv", RoundKind.QUALIFICATION),
    "yog_final": ("yog2018_women_final_reconstructed.csv", RoundKind.FINAL),
}

STAGE_NAMES = {
    1: "计分核对",
    2: "相关性分析",
    3: "蒙特卡洛模拟",
    4: "IIA 审计",
    5: "主成分分析",
}

SWEEP_TAUS = (0.0, 0.25, 0.5, 0.75, 1.0)


class CombinedFormatPipeline:
    """复合赛制计分分析的完整流程控制器"""

    def __init__(
        self,
        data_dir: Optional[str] = None,
        config_manager: Optional[ConfigManager] = None,
        replications: Optional[int] = None,
        master_seed: Optional[int] = None,
        workers: Optional[int] = None,
    ):
        """
        初始化流程控制器

        Args:
            data_dir: 比赛数据目录，默认为仓库的 data/
            config_manager: 配置管理器
            replications: 覆盖配置中的模拟次数
            master_seed: 覆盖配置中的随机种子
            workers: 覆盖配置中的线程数
        """
        self.data_dir = Path(data_dir) if data_dir else DEFAULT_DATA_DIR
        if not self.data_dir.exists():
            raise ValueError(f"数据目录不存在: {self.data_dir}")

        self.config = config_manager or ConfigManager()
        simulation = self.config.get_simulation()
        self.replications = replications or simulation.replications
        self.master_seed = simulation.master_seed if master_seed is None else master_seed
        self.workers = workers or simulation.workers
        self.show_progress = simulation.show_progress
        self.rounds: Dict[str, RoundResult] = {}
        self.findings: List[Dict[str, Any]] = []

        print("🎯 流程控制器初始化完成")
        print(f"📁 数据目录: {self.data_dir}")
        print(f"🎲 模拟次数: {self.replications}，种子: {self.master_seed}")

    def _banner(self, stage: int) -> None:
        print("\n" + "=" * 70)
        print(f"🚀 阶段{stage}：{STAGE_NAMES[stage]}")
        print("=" * 70)

    def _record(self, stage: int, finding: str, value: Any, expected: Any = None) -> None:
        self.findings.append({"stage": stage, "finding": finding, "value": value, "expected": expected})

    def load_round(self, key: str) -> RoundResult:
        """按键名读取自带数据（带缓存）"""
        if key not in self.rounds:
            filename, round_kind = FIXTURES[key]
            self.rounds[key] = load_competition(
                self.data_dir / filename,
                round_kind=round_kind,
                boulder_order=self.config.get_scoring().boulder_tiebreak,
            )
        return self.rounds[key]

    def stage_1_scoring(self) -> Dict[str, Any]:
        """
        阶段一：计分核对
        - 解析时已逐行核对 official_total 与 official_place
        - 列出三种计分方式下的冠军

        Returns:
            每份数据的人数与各计分方式下的冠军
        """
        self._banner(1)
        results = {}
        for key in FIXTURES:
            round_result = self.load_round(key)
            winners = {
                method.value: [round_result.climber_ids[i] for i, p in enumerate(placements) if p == 1]
                for method, placements in compare_methods(round_result).items()
            }
            results[key] = {"n": round_result.n, "winners": winners}
            print(f"✅ {key}: {round_result.n} 人，官方得分与名次核对通过")
            changed = {m: w for m, w in winners.items() if w != winners["product"]}
            if changed:
                print(f"   ⚠️  换一种计分方式冠军会改变: {changed}")
        self._record(1, "fixtures_verified", len(results), len(FIXTURES))
        return results

    def stage_2_correlations(self) -> Dict[str, Any]:
        """
        阶段二：相关性分析

        Returns:
            相关性表、各单项名次对总排名的平滑曲线，以及资格赛/决赛中抱石与难度的 τ
        """
        self._banner(2)
        statistics = self.config.get_statistics()
        qualification = self.load_round("tokyo_qualification")
        final = self.load_round("tokyo_final")

        print(f"📊 bootstrap 重抽样 {statistics.bootstrap_resamples} 次...")
        table = correlation_table(
            qualification,
            resamples=statistics.bootstrap_resamples,
            level=statistics.confidence_level,
            seed=statistics.bootstrap_seed,
            exact_max_n=statistics.exact_max_n,
        )
        for row in table:
            print(
                f"   {row.x:>8} vs {row.y:<8} τ={row.tau:.3f}  T={row.statistic_T}  "
                f"p={row.p_value:.3f}  CI=({row.ci_lower:.3f}, {row.ci_upper:.3f})"
            )
            self._record(2, f"tau_{row.x}_{row.y}", row.tau)
            self._record(2, f"p_{row.x}_{row.y}", row.p_value)

        smooth = {
            discipline: smoothed_fit(
                PairedRanks.from_round(qualification, discipline, "overall"),
                resamples=statistics.bootstrap_resamples,
                level=statistics.confidence_level,
                seed=statistics.bootstrap_seed,
            )
            for discipline in ("speed", "boulder", "lead")
        }
        print(f"📈 已计算 {len(smooth)} 条名次平滑曲线")

        tau_qualification = kendall_tau(PairedRanks.from_round(qualification, "boulder", "lead"))
        tau_final = kendall_tau(PairedRanks.from_round(final, "boulder", "lead"))
        print(f"✅ 抱石-难度 τ：资格赛 {tau_qualification:.3f}，决赛 {tau_final:.3f}")
        self._record(2, "tau_boulder_lead_qualification", tau_qualification, 0.526)
        self._record(2, "tau_boulder_lead_final", tau_final, 0.214)
        return {"table": table, "smooth": smooth, "tau_qualification": tau_qualification, "tau_final": tau_final}

    def stage_3_simulation(self, tau_qualification: float = 0.526, tau_final: float = 0.214) -> Dict[str, Any]:
        """
        阶段三：蒙特卡洛模拟
        - 决赛 τ 扫描
        - 资格赛：赢得任一单项者进入前 8 的概率、第 8 名期望得分
        - 决赛：赢得任一单项者获得奖牌的概率、前三名期望得分

        Args:
            tau_qualification: 资格赛使用的 τ
            tau_final: 决赛使用的 τ
        """
        self._banner(3)
        common = dict(replications=self.replications, master_seed=self.master_seed)

        print(f"🎲 决赛 τ 扫描: {SWEEP_TAUS}")
        sweep = sweep_win_probabilities(
            RoundKind.FINAL, SWEEP_TAUS, workers=self.workers, show_progress=self.show_progress, **common
        )
        for row in sweep:
            print(f"   τ={row.tau:.2f}  P(冠军|速度第一)={row.win_given_speed:.3f}  "
                  f"P(冠军|抱石或难度第一)={row.win_given_boulder_or_lead:.3f}")
        self._record(3, "final_tau1_win_given_speed", sweep[-1].win_given_speed, 0.205)
        self._record(3, "final_tau1_win_given_boulder_or_lead", sweep[-1].win_given_boulder_or_lead, 0.903)

        qualification = run_simulation(
            SimulationConfig(RoundKind.QUALIFICATION, CorrelationSpec(tau_qualification), **common),
            workers=self.workers, show_progress=self.show_progress,
        )
        final = run_simulation(
            SimulationConfig(RoundKind.FINAL, CorrelationSpec(tau_final), **common),
            workers=self.workers, show_progress=self.show_progress,
        )
        top8 = advancement_probability(qualification, Condition.WON_ANY_DISCIPLINE, 8)
        top3 = advancement_probability(final, Condition.WON_ANY_DISCIPLINE, 3)
        qualification_scores = expected_score_by_placement(qualification)
        final_scores = expected_score_by_placement(final)
        print(f"✅ 资格赛 P(前8|任一单项第一) = {top8:.3f}，第 8 名期望得分 {qualification_scores[7].mean:.1f}")
        print(f"✅ 决赛 P(前3|任一单项第一) = {top3:.3f}，前三名期望得分 "
              f"{', '.join(f'{s.mean:.1f}' for s in final_scores[:3])}")

        self._record(3, "qualification_top8_given_any", top8, 0.995)
        self._record(3, "final_top3_given_any", top3, 0.848)
        self._record(3, "qualification_score_8th", qualification_scores[7].mean, 453)
        for score, expected in zip(final_scores[:3], (9, 19, 33)):
            self._record(3, f"final_score_{score.placement}", score.mean, expected)
        return {
            "sweep": sweep,
            "qualification_top8": top8,
            "final_top3": top3,
            "qualification_scores": qualification_scores,
            "final_scores": final_scores,
        }

    def stage_4_iia_audit(self) -> Dict[str, Any]:
        """
        阶段四：IIA 审计

        Returns:
            两轮比赛的审计报告，以及去掉决赛第 5 名后原第 4 名的新名次
        """
        self._banner(4)
        results = {}
        for key in ("yog_qualification", "yog_final"):
            round_result = self.load_round(key)
            report = iia_audit(round_result)
            results[key] = report
            print(f"✅ {key}: {report.perfect_agreements}/{round_result.n} 次去除后顺序完全不变，"
                  f"{len(report.behind_violations)} 次由排在后面的人引起")
        self._record(4, "yog_qualification_perfect", results["yog_qualification"].perfect_agreements, 7)
        self._record(4, "yog_final_perfect", results["yog_final"].perfect_agreements, 3)

        final = self.load_round("yog_final")
        fifth = final.climber_at(5)[0].id
        fourth = final.climber_at(4)[0].id
        moved_to = remove_and_rescore(final, fifth).new_placement_of(fourth)
        print(f"✅ 去掉决赛第 5 名后，原第 4 名升至第 {moved_to} 名")
        self._record(4, "yog_final_fourth_after_removing_fifth", moved_to, 2)
        results["fourth_after_removing_fifth"] = moved_to
        return results

    def stage_5_pca(self) -> Dict[str, Any]:
        """阶段五：对资格赛原始成绩做主成分分析"""
        self._banner(5)
        result = pca(PerformanceMatrix.from_round(self.load_round("tokyo_qualification")))
        explained = ", ".join(f"{v:.3f}" for v in result.explained)
        print(f"✅ 各主成分解释方差比例: {explained}")
        for name, row in zip(result.variables, result.loadings):
            print(f"   {name:>12}: PC1={row[0]:+.3f}  PC2={row[1]:+.3f}")
        self._record(5, "pc1_explained", float(result.explained[0]))
        self._record(5, "pc2_speed_loading", float(result.loadings[0, 1]))
        return {"pca": result}

    def run_full_pipeline(self, skip_stages: Optional[Sequence[int]] = None) -> Dict[str, Any]:
        """
        运行完整的五阶段流程

        Args:
            skip_stages: 要跳过的阶段列表，例如 [3] 表示跳过模拟

        Returns:
            各阶段结果；失败的阶段记为 {"error": 原因}
        """
        skip_stages = skip_stages or []

        print("\n" + "=" * 70)
        print("🎯 开始运行复合赛制计分分析流程")
        print("=" * 70)

        stages = {
            1: self.stage_1_scoring,
            2: self.stage_2_correlations,
            3: self.stage_3_simulation,
            4: self.stage_4_iia_audit,
            5: self.stage_5_pca,
        }
        results: Dict[str, Any] = {}
        for number, stage in stages.items():
            if number in skip_stages:
                print(f"\n⏭️  跳过阶段{number}（{STAGE_NAMES[number]}）")
                continue
            try:
                if number == 3 and "stage_2" in results and "error" not in results["stage_2"]:
                    results["stage_3"] = stage(results["stage_2"]["tau_qualification"], results["stage_2"]["tau_final"])
                else:
                    results[f"stage_{number}"] = stage()
            except Exception as e:
                print(f"❌ 阶段{number}执行失败: {e}")
                traceback.print_exc(file=sys.stdout)
                results[f"stage_{number}"] = {"error": str(e)}

        print("\n" + "=" * 70)
        print("🎉 完整流程执行完毕！")
        print("=" * 70)
        failed = [k for k, v in results.items() if isinstance(v, dict) and "error" in v]
        if failed:
            print(f"⚠️  失败的阶段: {', '.join(failed)}")
        else:
            print("✅ 全部完成！")
        return results
