"""
换流器 PCC 电压模型与 SRF-PLL

换流器视为理想电流相量跟踪器：给定电流指令 i_ref，PCC 目标相量由
电路方程 V∠φ = E∠0 + (R + jωL)·i_ref 决定；控制器的调节过程抽象为
复相量上的一阶指数滞后（时间常数 τ）。
"""
import bisect
import math
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np

from grid.plant import GridParams, ParamSchedule
from utils.errors import AssumptionViolationError, ParameterError, ScheduleError
from utils.integrators import check_step
from utils.threephase import (
    Phasor,
    ThreePhase,
    complex_to_instantaneous,
    normalize_phase,
    phasor_to_instantaneous,
    rotating_frame,
)

DEFAULT_TAU = 0.02
DEFAULT_KAPPA_P = 200.0
DEFAULT_KAPPA_I = 5000.0
DEFAULT_OMEGA_FF = 2.0 * math.pi * 50.0


@dataclass(frozen=True)
class ConverterCommand:
    """电流指令，自 t_start 起生效"""
    i_ref: Phasor
    t_start: float = 0.0


@dataclass(frozen=True)
class PccSchedule:
    """
    电流指令序列

    Args:
        commands: 按 t_start 严格递增排列的指令
        tau: PCC 电压的一阶滞后时间常数 (s)
    """
    commands: Tuple[ConverterCommand, ...]
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if not self.commands:
            raise ParameterError("指令序列为空")
        if not self.tau > 0.0:
            raise ParameterError(f"滞后时间常数必须为正: tau={self.tau}")
        starts = [c.t_start for c in self.commands]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ParameterError(f"指令起始时刻必须严格递增: {starts}")

    def active(self, t: float) -> ConverterCommand:
        starts = [c.t_start for c in self.commands]
        index = bisect.bisect_right(starts, t) - 1
        if index < 0:
            raise ScheduleError(f"t={t} 早于第一条指令 t_start={starts[0]}")
        return self.commands[index]


def _required_complex(i_ref: Phasor, p: GridParams) -> complex:
    return p.E + p.impedance() * i_ref.to_complex()


def required_pcc_phasor(i_ref: Phasor, p: GridParams) -> Phasor:
    """
    产生指令电流所需的 PCC 电压相量

    Args:
        i_ref: 电流指令相量
        p: 电网参数

    Returns:
        Phasor(V, φ)，φ ∈ (−π/2, π/2)

    Raises:
        AssumptionViolationError: φ 超出 (−π/2, π/2)
    """
    target = Phasor.from_complex(_required_complex(i_ref, p))
    if not -math.pi / 2.0 < target.phase < math.pi / 2.0:
        raise AssumptionViolationError(
            f"PCC 电压相角 {target.phase:.4f} rad 超出 (−π/2, π/2)"
        )
    return target


class PccWaveform:
    """
    PCC 电压波形

    预先计算每个事件（指令切换或电网参数变化）处的复相量，
    之后任意时刻的求值只需一次指数插值。
    """

    def __init__(self, sched: PccSchedule, p_schedule: ParamSchedule):
        self.sched = sched
        self.p_schedule = p_schedule
        self.omega = p_schedule(sched.commands[0].t_start).omega
        t0 = sched.commands[0].t_start
        events = sorted({c.t_start for c in sched.commands}
                        | {t for t in p_schedule.change_times if t > t0})

        # (t_k, 事件时刻的相量, 事件后的目标相量)
        self._times: List[float] = []
        self._breakpoints: List[Tuple[complex, complex]] = []
        value = None
        previous_t = t0
        previous_target = None
        for t_k in events:
            i_ref = sched.active(t_k).i_ref
            params = p_schedule(t_k)
            required_pcc_phasor(i_ref, params)
            target = _required_complex(i_ref, params)
            if value is None:
                value = target
            else:
                value = previous_target + (value - previous_target) * math.exp(-(t_k - previous_t) / sched.tau)
            self._times.append(t_k)
            self._breakpoints.append((value, target))
            previous_t = t_k
            previous_target = target

    def phasor_at(self, t: float) -> complex:
        """t 时刻的松弛复相量"""
        index = bisect.bisect_right(self._times, t) - 1
        if index < 0:
            raise ScheduleError(f"t={t} 早于第一条指令 t_start={self._times[0]}")
        t_k = self._times[index]
        value, target = self._breakpoints[index]
        if t == t_k:
            return value
        return target + (value - target) * math.exp(-(t - t_k) / self.sched.tau)

    def target_at(self, t: float) -> complex:
        index = bisect.bisect_right(self._times, t) - 1
        if index < 0:
            raise ScheduleError(f"t={t} 早于第一条指令 t_start={self._times[0]}")
        return self._breakpoints[index][1]

    def array(self, t: float) -> np.ndarray:
        return complex_to_instantaneous(self.phasor_at(t), self.omega, t)

    def __call__(self, t: float) -> ThreePhase:
        return ThreePhase.from_array(self.array(t))


def pcc_voltage(t: float, sched: PccSchedule, p_schedule: ParamSchedule, omega: float) -> ThreePhase:
    """
    t 时刻的 PCC 三相电压

    Args:
        t: 时刻，需不早于第一条指令
        sched: 指令序列
        p_schedule: 电网参数时间表
        omega: 角频率

    Returns:
        ThreePhase
    """
    z = PccWaveform(sched, p_schedule).phasor_at(t)
    return phasor_to_instantaneous(Phasor.from_complex(z), omega, t)


@dataclass(frozen=True)
class PllState:
    """SRF-PLL 状态"""
    omega_hat: float
    theta_hat: float
    integrator: float = 0.0
    kappa_P: float = DEFAULT_KAPPA_P
    kappa_I: float = DEFAULT_KAPPA_I
    omega_ff: float = DEFAULT_OMEGA_FF

    @classmethod
    def locked(cls, omega: float, theta: float, **gains) -> "PllState":
        """已锁相的初始状态：积分器补偿前馈与真实频率之差"""
        omega_ff = gains.pop("omega_ff", DEFAULT_OMEGA_FF)
        return cls(
            omega_hat=omega,
            theta_hat=normalize_phase(theta),
            integrator=omega - omega_ff,
            omega_ff=omega_ff,
            **gains,
        )


def pll_step(v: Sequence[float], s: PllState, h: float) -> PllState:
    """
    PLL 前向欧拉一步

    q 分量驱动 PI 调节器：积分器 += κ_I·q·h，ω̂ = ω_ff + κ_P·q + 积分器，
    θ̂ += ω̂·h 并归一化。
    """
    check_step(h)
    _, q = rotating_frame(v, s.theta_hat)
    if q == 0.0:
        # 无电压时频率冻结
        return replace(s, theta_hat=normalize_phase(s.theta_hat + s.omega_hat * h))
    integrator = s.integrator + s.kappa_I * q * h
    omega_hat = s.omega_ff + s.kappa_P * q + integrator
    return replace(
        s,
        omega_hat=omega_hat,
        theta_hat=normalize_phase(s.theta_hat + omega_hat * h),
        integrator=integrator,
    )

