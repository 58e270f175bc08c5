# utils/__init__.py
"""
工具模块包

- threephase: 三相信号、相量与旋转坐标变换
- integrators: 定步长 RK4（含一阶保持输入形式）
- regression: LRE 滤波器组与回归矩阵
- excitation: Gram 矩阵累积与小维对称矩阵特征值
- oracles: 相量稳态解、滤波器解析响应等参考解
- errors: 异常定义
"""

from utils.errors import (
    AssumptionViolationError,
    ConfigError,
    NonPhysicalEstimateError,
    NumericFaultError,
    OracleError,
    OutputError,
    ParameterError,
    ScheduleError,
    SimulationError,
    WindowError,
)
from utils.threephase import Phasor, ThreePhase, balanced_set, phasor_to_instantaneous, rotating_frame
from utils.integrators import rk4, rk4_held
from utils.regression import FilterBank, LreSampleFull, LreSampleReduced, lre_full_step, lre_reduced_step
from utils.excitation import GramAccumulator, eig_sym, gram_update, min_eig_sym, pe_window

__all__ = [
    'AssumptionViolationError',
    'ConfigError',
    'NonPhysicalEstimateError',
    'NumericFaultError',
    'OracleError',
    'OutputError',
    'ParameterError',
    'ScheduleError',
    'SimulationError',
    'WindowError',
    'Phasor',
    'ThreePhase',
    'balanced_set',
    'phasor_to_instantaneous',
    'rotating_frame',
    'rk4',
    'rk4_held',
    'FilterBank',
    'LreSampleFull',
    'LreSampleReduced',
    'lre_full_step',
    'lre_reduced_step',
    'GramAccumulator',
    'eig_sym',
    'gram_update',
    'min_eig_sym',
    'pe_window',
]

__version__ = "1.0.0"
