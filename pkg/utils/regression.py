"""
滤波线性回归方程（LRE）的构造

电网模型写成 di/dt = Ψθ，Ψ = [−i | v | −S₀]，θ = (R/L, 1/L, E/L)。
经 F(p) = λ/(p+λ) 滤波后得到

    Z = Ψ_f·θ + ε_t,   Z = λ(i − x_i)

其中 x_i 为 i 的低通状态，pF(p) 由低通状态实现，从不对测量量求导。
已知 X/R 比 ρ 时只用 a、b 两相得到降阶 LRE：

    Z_ab = λ(i_ab − x) + (ω/ρ)·x,   Ψ_ab = [v_ab | −S₀_ab],   ϑ = (1/L, E/L)
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from utils.errors import ParameterError
from utils.integrators import rk4_held


@dataclass(frozen=True)
class FilterBank:
    """
    一组并行的一阶低通滤波器 ẋ = λ(u − x)

    Args:
        lam: 滤波器带宽 λ (1/s)
        states: 每个标量通道一个状态
        u_prev: 上一步的输入采样（一阶保持用），首步为空
    """
    lam: float
    states: np.ndarray
    u_prev: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.lam > 0.0:
            raise ParameterError(f"滤波器带宽必须为正: lambda={self.lam}")

    @classmethod
    def zeros(cls, lam: float, channels: int) -> "FilterBank":
        """零初始状态（初值暂态计入 ε_t）"""
        return cls(lam=lam, states=np.zeros(channels))

    @property
    def channels(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class LreSampleFull:
    """完整 LRE 的一个采样：Z (3,)，Psi_f (3, 3)"""
    Z: np.ndarray
    Psi_f: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class LreSampleReduced:
    """降阶 LRE 的一个采样：Z_ab (2,)，Psi_f_ab (2, 2)"""
    Z_ab: np.ndarray
    Psi_f_ab: np.ndarray
    t: float = 0.0


def regressor_full(i: Sequence[float], v: Sequence[float], s0: Sequence[float]) -> np.ndarray:
    """回归矩阵 Ψ，三列依次为 −i、v、−s0"""
    return np.column_stack((
        -np.asarray(i, dtype=float),
        np.asarray(v, dtype=float),
        -np.asarray(s0, dtype=float),
    ))


def regressor_reduced(v_ab: Sequence[float], s0_ab: Sequence[float]) -> np.ndarray:
    """降阶回归矩阵 Ψ_ab = [v_ab | −s0_ab]"""
    return np.array([
        [v_ab[0], -s0_ab[0]],
        [v_ab[1], -s0_ab[1]],
    ], dtype=float)


def filter_step(fb: FilterBank, u: Sequence[float], h: float) -> Tuple[FilterBank, np.ndarray]:
    """
    滤波器组前进一步

    Args:
        fb: 滤波器组
        u: 本步末的输入采样，长度等于通道数
        h: 步长

    Returns:
        (新的滤波器组, 低通输出 y = x)
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.shape != fb.states.shape:
        raise ParameterError(
            f"通道数不匹配: 输入 {u.shape[0]}，滤波器 {fb.channels}", "channel-count"
        )
    lam = fb.lam

    def low_pass(x: np.ndarray, inputs: Tuple[np.ndarray, ...]) -> np.ndarray:
        return lam * (inputs[0] - x)

    u0 = None if fb.u_prev is None else (fb.u_prev,)
    x = rk4_held(low_pass, fb.states, u0, (u,), h)
    return FilterBank(lam=lam, states=x, u_prev=u), x.copy()


def lre_full_step(fb_i: FilterBank,
                  fb_psi: FilterBank,
                  i: Sequence[float],
                  Psi: np.ndarray,
                  h: float,
                  t: float = 0.0) -> Tuple[FilterBank, FilterBank, LreSampleFull]:
    """
    完整 LRE 前进一步

    Args:
        fb_i: i 的滤波器组（3 通道）
        fb_psi: Ψ 逐元素的滤波器组（9 通道，按行展开）
        i: 三相电流
        Psi: 回归矩阵 Ψ
        h: 步长
        t: 本步末时刻，仅记录在采样中

    Returns:
        (fb_i', fb_psi', LreSampleFull)
    """
    i = np.asarray(i, dtype=float)
    fb_i, x_i = filter_step(fb_i, i, h)
    fb_psi, x_psi = filter_step(fb_psi, np.asarray(Psi, dtype=float).ravel(), h)
    z = fb_i.lam * (i - x_i)
    return fb_i, fb_psi, LreSampleFull(Z=z, Psi_f=x_psi.reshape(3, 3), t=t)


def lre_reduced_step(fb: FilterBank,
                     i_ab: Sequence[float],
                     v_ab: Sequence[float],
                     s0_ab: Sequence[float],
                     rho: Optional[float],
                     omega: float,
                     h: float,
                     t: float = 0.0) -> Tuple[FilterBank, LreSampleReduced]:
    """
    降阶 LRE 前进一步

    fb 为 6 通道滤波器组：前两路为 i_ab，后四路为按行展开的 Ψ_ab。
    rho 为 None 时对应 R = 0 的情形，省略 (ω/ρ)·x 项。

    Returns:
        (fb', LreSampleReduced)
    """
    if rho is not None and not rho > 0.0:
        raise ParameterError(f"X/R 比必须为正: rho={rho}", "invalid-ratio")
    i_ab = np.asarray(i_ab, dtype=float)[:2]
    psi_ab = regressor_reduced(v_ab, s0_ab)
    fb, x = filter_step(fb, np.concatenate((i_ab, psi_ab.ravel())), h)
    x_i = x[:2]
    z = fb.lam * (i_ab - x_i)
    if rho is not None:
        z = z + (omega / rho) * x_i
    return fb, LreSampleReduced(Z_ab=z, Psi_f_ab=x[2:].reshape(2, 2), t=t)


def reduced_regressor_det(V: float, phi: float, scaled: bool = False) -> float:
    """
    降阶回归矩阵的渐近行列式

    单位幅值正弦 [V·sin(ωt+φ+o_k) | −sin(ωt+o_k)] 的行列式为 (√3/2)·V·sin φ，
    与 t 无关；scaled=True 时给出按 √(2/3) 缩放的 S_φ 对应的值（再乘 2/3）。
    """
    if not V >= 0.0:
        raise ParameterError(f"电压幅值不能为负: V={V}")
    det = 0.5 * math.sqrt(3.0) * V * math.sin(phi)
    if scaled:
        det *= 2.0 / 3.0
    return det


def lre_residual(Z: np.ndarray, Psi_f: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Z − Ψ_f·θ"""
    return Z - Psi_f @ theta
