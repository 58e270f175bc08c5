"""
戴维南等值电网模型

    L·di/dt = −R·i + v − e

v 为 PCC 电压，e = E·S₀(t) 为电网等值电势。内部统一使用标幺值，
PerUnitBases 负责与国际单位制之间的换算。
"""
import bisect
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from utils.errors import ParameterError, ScheduleError
from utils.integrators import check_step, rk4
from utils.threephase import ThreePhase

InputSampler = Callable[[float], Tuple[Sequence[float], Sequence[float]]]


@dataclass(frozen=True)
class GridParams:
    """
    等值电网参数

    Args:
        R: 电阻，R ≥ 0（R = 0 仅用于已知 X/R 的简化场景）
        L: 电感，L > 0
        E: 电势峰值（相），E > 0
        omega: 电网角频率，omega > 0
    """
    R: float
    L: float
    E: float
    omega: float

    def __post_init__(self):
        if not self.L > 0.0:
            raise ParameterError(f"电感必须为正: L={self.L}")
        if not self.E > 0.0:
            raise ParameterError(f"电势必须为正: E={self.E}")
        if not self.omega > 0.0:
            raise ParameterError(f"角频率必须为正: {self.omega}", "invalid-frequency")
        if not self.R >= 0.0:
            raise ParameterError(f"电阻不能为负: R={self.R}")

    @property
    def rho(self) -> float:
        """X/R 比；R = 0 时为 inf"""
        if self.R == 0.0:
            return math.inf
        return self.omega * self.L / self.R

    @property
    def X(self) -> float:
        return self.omega * self.L

    def impedance(self) -> complex:
        return complex(self.R, self.omega * self.L)

    def theta_full(self) -> np.ndarray:
        """正向映射 θ = (R/L, 1/L, E/L)"""
        return np.array([self.R / self.L, 1.0 / self.L, self.E / self.L])

    def theta_reduced(self) -> np.ndarray:
        """正向映射 ϑ = (1/L, E/L)"""
        return np.array([1.0 / self.L, self.E / self.L])


@dataclass(frozen=True)
class PerUnitBases:
    """
    标幺基值

    S_b = 额定容量，V_b = V_LL·√2/√3（相电压峰值），
    I_b = 2S_b/(3V_b)，Z_b = V_b/I_b。
    """
    s_rated: float
    v_ll: float
    f: float = 50.0

    def __post_init__(self):
        if not (self.s_rated > 0.0 and self.v_ll > 0.0):
            raise ParameterError(f"基值必须为正: S={self.s_rated}, V_LL={self.v_ll}")
        if not self.f > 0.0:
            raise ParameterError(f"频率必须为正: {self.f}", "invalid-frequency")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.f

    @property
    def v_base(self) -> float:
        return self.v_ll * math.sqrt(2.0) / math.sqrt(3.0)

    @property
    def i_base(self) -> float:
        return 2.0 * self.s_rated / (3.0 * self.v_base)

    @property
    def z_base(self) -> float:
        return self.v_base / self.i_base

    def params_to_pu(self, p: GridParams) -> GridParams:
        z = self.z_base
        return GridParams(R=p.R / z, L=p.L / z, E=p.E / self.v_base, omega=p.omega)

    def params_to_si(self, p: GridParams) -> GridParams:
        z = self.z_base
        return GridParams(R=p.R * z, L=p.L * z, E=p.E * self.v_base, omega=p.omega)


@dataclass(frozen=True)
class PlantState:
    """电网电流状态"""
    i: ThreePhase
    t: float


class ParamSchedule:
    """
    分段常值的电网参数时间表

    entries 为 (生效时刻, GridParams)，在生效时刻取右极限（新值）。
    """

    def __init__(self, entries: Sequence[Tuple[float, GridParams]]):
        if not entries:
            raise ScheduleError("参数时间表为空")
        ordered = sorted(entries, key=lambda item: item[0])
        self._times: List[float] = [float(t) for t, _ in ordered]
        self._params: List[GridParams] = [p for _, p in ordered]

    def __call__(self, t: float) -> GridParams:
        index = bisect.bisect_right(self._times, t) - 1
        if index < 0:
            raise ScheduleError(f"t={t} 早于参数时间表起点 {self._times[0]}")
        return self._params[index]

    @property
    def change_times(self) -> List[float]:
        """起点之后的参数变化时刻"""
        return self._times[1:]

    @property
    def entries(self) -> List[Tuple[float, GridParams]]:
        return list(zip(self._times, self._params))

    def map(self, fn: Callable[[GridParams], GridParams]) -> "ParamSchedule":
        return ParamSchedule([(t, fn(p)) for t, p in self.entries])

    @classmethod
    def constant(cls, p: GridParams) -> "ParamSchedule":
        return cls([(0.0, p)])


def plant_derivative(i: Sequence[float], v: Sequence[float], e: Sequence[float], p: GridParams) -> ThreePhase:
    """
    电流导数 (v − e − R·i)/L

    Returns:
        ThreePhase，单位为电流/秒
    """
    if not p.L > 0.0:
        raise ParameterError(f"电感必须为正: L={p.L}")
    return ThreePhase(*((vk - ek - p.R * ik) / p.L for ik, vk, ek in zip(i, v, e)))


def rk4_step(s: PlantState, input_sampler: InputSampler, p: GridParams, h: float) -> PlantState:
    """
    电网电流的一步 RK4 积分

    Args:
        s: 当前状态
        input_sampler: t ↦ (v, e)，需在 [s.t, s.t + h] 上有定义
        p: 本步内保持不变的电网参数
        h: 步长

    Returns:
        新状态
    """
    check_step(h)
    if not p.L > 0.0:
        raise ParameterError(f"电感必须为正: L={p.L}")
    inv_l = 1.0 / p.L
    r = p.R

    def derivative(t: float, i: np.ndarray) -> np.ndarray:
        v, e = input_sampler(t)
        return (np.asarray(v, dtype=float) - np.asarray(e, dtype=float) - r * i) * inv_l

    i_next = rk4(derivative, s.t, np.asarray(s.i, dtype=float), h)
    return PlantState(i=ThreePhase.from_array(i_next), t=s.t + h)

