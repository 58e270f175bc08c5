"""
三相信号基础工具

S_φ(t) = √(2/3)·[sin(ωt+φ), sin(ωt+φ−2π/3), sin(ωt+φ+2π/3)]，
幅值均为相电压/相电流峰值（功率不变缩放，|S_φ| = 1）。
"""
import math
import cmath
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from utils.errors import ParameterError

SQRT_2_3 = math.sqrt(2.0 / 3.0)
TWO_PI_3 = 2.0 * math.pi / 3.0
# a、b、c 三相的相位偏移
PHASE_OFFSETS = (0.0, -TWO_PI_3, TWO_PI_3)


class ThreePhase(NamedTuple):
    """三相瞬时采样值"""
    a: float
    b: float
    c: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ThreePhase":
        return cls(float(values[0]), float(values[1]), float(values[2]))

    def zero_sequence(self) -> float:
        """1₃ᵀ·x"""
        return self.a + self.b + self.c


def normalize_phase(phase: float) -> float:
    """把相角归一化到 (−π, π]，−π 映射为 +π"""
    wrapped = math.remainder(phase, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


@dataclass(frozen=True)
class Phasor:
    """
    相量 amplitude∠phase

    构造时相角自动归一化；幅值必须非负。
    """
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.amplitude >= 0.0:
            raise ParameterError(f"相量幅值必须非负: {self.amplitude}")
        object.__setattr__(self, "phase", normalize_phase(float(self.phase)))

    @classmethod
    def from_complex(cls, z: complex) -> "Phasor":
        if z == 0:
            return cls(0.0, 0.0)
        return cls(abs(z), cmath.phase(z))

    def to_complex(self) -> complex:
        return cmath.rect(self.amplitude, self.phase)


def _check_omega(omega: float):
    if not omega > 0.0:
        raise ParameterError(f"角频率必须为正: {omega}", "invalid-frequency")


def balanced_set(omega: float, phi: float, t: float) -> ThreePhase:
    """
    单位幅值的正序三相组 S_φ(t)

    Args:
        omega: 角频率 (rad/s)
        phi: 初相 (rad)
        t: 时刻 (s)

    Returns:
        ThreePhase
    """
    _check_omega(omega)
    x = omega * t + phi
    return ThreePhase(
        SQRT_2_3 * math.sin(x),
        SQRT_2_3 * math.sin(x - TWO_PI_3),
        SQRT_2_3 * math.sin(x + TWO_PI_3),
    )


def phasor_to_instantaneous(p: Phasor, omega: float, t: float) -> ThreePhase:
    """相量对应的三相瞬时值 amplitude·S_phase(t)"""
    s = balanced_set(omega, p.phase, t)
    return ThreePhase(p.amplitude * s.a, p.amplitude * s.b, p.amplitude * s.c)


def rotating_frame(v: Sequence[float], theta: float) -> Tuple[float, float]:
    """
    旋转坐标变换（幅值不变形式）

    对 v = V·S_φ(t)、theta = ωt + φ − δ，输出 d = V·cos δ，q = V·sin δ；
    锁相时 (d, q) = (V, 0)。

    Args:
        v: 三相瞬时值
        theta: 旋转坐标系角度 (rad)

    Returns:
        (d, q)
    """
    d = 0.0
    q = 0.0
    for value, offset in zip(v, PHASE_OFFSETS):
        d += value * math.sin(theta + offset)
        q += value * math.cos(theta + offset)
    return SQRT_2_3 * d, SQRT_2_3 * q


_ROTATIONS = tuple(cmath.exp(1j * offset) for offset in PHASE_OFFSETS)


def balanced_array(omega: float, phi: float, t: float) -> np.ndarray:
    """balanced_set 的数组形式，供仿真主循环使用"""
    x = omega * t + phi
    return SQRT_2_3 * np.array([math.sin(x), math.sin(x - TWO_PI_3), math.sin(x + TWO_PI_3)])


def complex_to_instantaneous(z: complex, omega: float, t: float) -> np.ndarray:
    """复相量 z 对应的三相瞬时值：√(2/3)·Im(z·e^{j(ωt+o_k)})"""
    w = z * cmath.exp(1j * omega * t)
    return SQRT_2_3 * np.array([(w * r).imag for r in _ROTATIONS])
