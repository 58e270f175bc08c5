# simulation/__init__.py
"""
场景仿真模块包

- scenario: 场景配置、SCR/X-R 参数映射、场景文件与预设
- runner: 主循环 SimulationRunner
- summary: 运行结果汇总
- output: CSV / 图形 / 摘要输出
"""

from simulation.output import CSV_COLUMNS, emit_csv, emit_plot, emit_summary, read_csv
from simulation.runner import SimulationRunner, StepSnapshot
from simulation.scenario import (
    FIGURE_PRESETS,
    ScenarioEvent,
    SimConfig,
    build_schedules,
    load_preset,
    load_scenario,
    parse_scenario,
    scr_to_params,
)
from simulation.summary import RunSummary, SegmentSummary, fit_decay_rate, summarize


def run(config: SimConfig):
    """运行一个场景，返回 (时间序列, RunSummary)"""
    return SimulationRunner(config).run()


__all__ = [
    'CSV_COLUMNS',
    'emit_csv',
    'emit_plot',
    'emit_summary',
    'read_csv',
    'SimulationRunner',
    'StepSnapshot',
    'FIGURE_PRESETS',
    'ScenarioEvent',
    'SimConfig',
    'build_schedules',
    'load_preset',
    'load_scenario',
    'parse_scenario',
    'scr_to_params',
    'RunSummary',
    'SegmentSummary',
    'fit_decay_rate',
    'summarize',
    'run',
]

__version__ = "1.0.0"
