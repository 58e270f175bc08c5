# grid/__init__.py
"""
电网与换流器模型包

- GridParams / PlantState / PerUnitBases / ParamSchedule: 戴维南等值电网
- ConverterCommand / PccSchedule / PccWaveform: 换流器 PCC 电压模型
- PllState / pll_step: 同步旋转坐标系锁相环
"""

from grid.plant import (
    GridParams,
    PlantState,
    PerUnitBases,
    ParamSchedule,
    plant_derivative,
    rk4_step,
)
from grid.converter import (
    ConverterCommand,
    PccSchedule,
    PccWaveform,
    PllState,
    required_pcc_phasor,
    pcc_voltage,
    pll_step,
)

__all__ = [
    'GridParams',
    'PlantState',
    'PerUnitBases',
    'ParamSchedule',
    'plant_derivative',
    'rk4_step',
    'ConverterCommand',
    'PccSchedule',
    'PccWaveform',
    'PllState',
    'required_pcc_phasor',
    'pcc_voltage',
    'pll_step',
]

__version__ = "1.0.0"
