"""
共享夹具：额定工况参数、标幺基值、快速仿真配置、场景文件写入
"""
import math

import pytest

from grid.plant import PerUnitBases
from simulation.scenario import SimConfig, scr_to_params

OMEGA = 100.0 * math.pi


@pytest.fixture
def bases():
    """400 kV / 1000 MVA / 50 Hz"""
    return PerUnitBases(1000e6, 400e3, 50.0)


@pytest.fixture
def nominal_si():
    """SCR 3、X/R 5 的额定电网（国际单位制）"""
    return scr_to_params(3.0, 5.0, 400e3, 1000e6, OMEGA)


@pytest.fixture
def nominal_pu(bases, nominal_si):
    return bases.params_to_pu(nominal_si)


@pytest.fixture
def make_config():
    """短时仿真配置工厂，关键字参数覆盖默认值"""
    def factory(**overrides) -> SimConfig:
        values = dict(name="quick", duration=0.05, h=1e-5, formats=("csv",))
        values.update(overrides)
        return SimConfig(**values)
    return factory


@pytest.fixture
def write_scenario(tmp_path):
    """把键值对写成场景文件，返回路径"""
    def writer(values: dict, name: str = "scenario.env"):
        path = tmp_path / name
        path.write_text("\n".join(f"{k}={v}" for k, v in values.items()) + "\n", encoding="utf-8")
        return path
    return writer
