"""
戴维南等值电网在线辨识 - 命令行入口

    python sim_runner.py simulate --config scenarios/fig2a.env --out results/fig2a
    python sim_runner.py reproduce fig3 --out results/fig3
    python sim_runner.py sweep --config scenarios/fig2a.env --alpha 0,1e3 --gamma-p 0,1e6 --out results/sweep

退出码：0 成功，2 配置错误，3 数值故障，1 其他错误。
"""
import itertools
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import click
import numpy as np
import pandas as pd
from dotenv import load_dotenv

from simulation.output import emit_csv, emit_plot, emit_summary
from simulation.runner import SimulationRunner
from simulation.scenario import ESTIMATOR_KINDS, FIGURE_PRESETS, SimConfig, load_preset, load_scenario
from simulation.summary import PARAMETERS, RunSummary
from utils.errors import (
    AssumptionViolationError,
    ConfigError,
    NumericFaultError,
    ParameterError,
    ScheduleError,
    SimulationError,
)

# 加载环境变量
load_dotenv('config/.env')

CONFIG_ERRORS = (ConfigError, ParameterError, AssumptionViolationError, ScheduleError)

logger = logging.getLogger("SimRunner")


def setup_logging():
    """设置日志系统"""
    handlers = [logging.StreamHandler(sys.stdout)]
    log_file = os.getenv("SIM_LOG_FILE")
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))
    logging.basicConfig(
        level=getattr(logging, os.getenv("SIM_LOG_LEVEL", "INFO").upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
    )


def exit_code_for(error: BaseException) -> int:
    """异常 → 退出码"""
    if isinstance(error, CONFIG_ERRORS):
        return 2
    if isinstance(error, NumericFaultError):
        return 3
    return 1


def _fail(error: BaseException):
    code = exit_code_for(error)
    logger.error(f"❌ {type(error).__name__}: {error}")
    click.echo(f"❌ {error}", err=True)
    sys.exit(code)


def _parse_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise click.BadParameter(f"无法解析数值列表: {text}") from e


def write_outputs(ts: pd.DataFrame, summary: RunSummary, config: SimConfig, out_dir: Path) -> List[Path]:
    """按配置的输出格式写出一次运行的全部文件"""
    written = []
    if "csv" in config.formats:
        written.append(emit_csv(ts, out_dir / f"{config.name}.csv"))
    for fmt in config.formats:
        if fmt != "csv":
            written.append(emit_plot(ts, out_dir / f"{config.name}.{fmt}"))
    written.append(emit_summary(summary, out_dir / f"{config.name}_summary.json"))
    return written


@click.group()
def cli():
    """戴维南等值电网参数在线辨识仿真工具"""
    setup_logging()


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="场景文件")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="输出目录")
@click.option("--estimator", type=click.Choice(ESTIMATOR_KINDS), default=None, help="覆盖场景中的估计器")
def simulate(config_path: str, out_dir: str, estimator: Optional[str]):
    """运行一个场景文件"""
    try:
        config = load_scenario(config_path)
        if estimator is not None:
            config = config.with_overrides(estimator=estimator)
        ts, summary = SimulationRunner(config).run()
        for path in write_outputs(ts, summary, config, Path(out_dir)):
            click.echo(f"✅ {path}")
    except SimulationError as e:
        _fail(e)


@cli.command()
@click.argument("figure", type=click.Choice(sorted(FIGURE_PRESETS)))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="输出目录")
def reproduce(figure: str, out_dir: str):
    """运行预设组并生成对应图形"""
    out = Path(out_dir)
    plot_format = os.getenv("SIM_PLOT_FORMAT", "svg")
    try:
        runs: Dict[str, pd.DataFrame] = {}
        for preset in FIGURE_PRESETS[figure]:
            config = load_preset(preset)
            click.echo(f"▶️ 预设 {preset}")
            ts, summary = SimulationRunner(config).run()
            emit_csv(ts, out / f"{config.name}.csv")
            emit_summary(summary, out / f"{config.name}_summary.json")
            runs[config.name] = ts
        plot = emit_plot(runs if len(runs) > 1 else next(iter(runs.values())), out / f"{figure}.{plot_format}")
        click.echo(f"✅ {plot}")
    except SimulationError as e:
        _fail(e)


def run_sweep_case(config: SimConfig, out_dir: str) -> Dict[str, object]:
    """
    扫描中的单个 (α, γ_P) 组合，在独立目录中运行

    Returns:
        sweep_summary.csv 的一行
    """
    row: Dict[str, object] = {"alpha": config.alpha, "gamma_p": config.gamma_p, "error_type": ""}
    try:
        ts, summary = SimulationRunner(config).run()
        write_outputs(ts, summary, config, Path(out_dir))
    except SimulationError as e:
        row["error_type"] = e.error_type
        return row
    except Exception as e:
        logger.exception(f"❌ {config.name} 意外失败: {e}")
        row["error_type"] = f"internal-error:{type(e).__name__}"
        return row
    for name in PARAMETERS:
        error = summary.final_rel_error.get(name)
        row[f"{name}_final_rel_error"] = np.nan if error is None else error
        settling = [seg.settling.get(name) for seg in summary.segments[1:]]
        row[f"{name}_settling_max"] = (
            np.nan if not settling or any(s is None for s in settling) else max(settling)
        )
    row["bounded"] = summary.bounded
    row["theta_hat_peak"] = summary.extras.get("theta_hat_peak", np.nan)
    return row


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="基础场景文件")
@click.option("--alpha", "alpha_list", required=True, help="α 取值列表，逗号分隔")
@click.option("--gamma-p", "gamma_p_list", required=True, help="γ_P 取值列表，逗号分隔")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="输出目录")
def sweep(config_path: str, alpha_list: str, gamma_p_list: str, out_dir: str):
    """对 (α, γ_P) 网格并行运行复合辨识器"""
    alphas = _parse_list(alpha_list)
    gammas = _parse_list(gamma_p_list)
    out = Path(out_dir)
    max_workers = int(os.getenv("SIM_MAX_WORKERS", 4))
    try:
        base = load_scenario(config_path).with_overrides(estimator="composite")
        cases: List[Tuple[SimConfig, str]] = []
        for alpha, gamma_p in itertools.product(alphas, gammas):
            config = base.with_overrides(
                alpha=alpha, gamma_p=gamma_p, name=f"{base.name}_a{alpha:g}_gp{gamma_p:g}"
            )
            cases.append((config, str(out / config.name)))
    except SimulationError as e:
        _fail(e)
        return

    logger.info(f"🚀 开始扫描: {len(cases)} 个组合, 并发数 {max_workers}")
    rows = []
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        futures = {pool.submit(run_sweep_case, config, path): config for config, path in cases}
        for future in as_completed(futures):
            config = futures[future]
            try:
                row = future.result()
            except Exception as e:
                # 工作进程崩溃等无法在进程内捕获的失败
                logger.exception(f"❌ {config.name} 无结果: {e}")
                row = {"alpha": config.alpha, "gamma_p": config.gamma_p,
                       "error_type": f"internal-error:{type(e).__name__}"}
            if row["error_type"]:
                logger.warning(f"⚠️ {config.name} 失败: {row['error_type']}")
            else:
                logger.info(f"✅ {config.name} 完成")
            rows.append(row)

    table = pd.DataFrame(rows).sort_values(["alpha", "gamma_p"]).reset_index(drop=True)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "sweep_summary.csv", index=False, float_format="%.17g", na_rep="")
    click.echo(f"✅ {out / 'sweep_summary.csv'}")


def main():
    """主入口函数"""
    print("=" * 60)
    print("⚡ 戴维南等值电网参数在线辨识仿真")
    print("=" * 60)
    cli()


if __name__ == "__main__":
    main()
