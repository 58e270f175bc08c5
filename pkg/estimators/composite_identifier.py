"""
基于观测器的复合辨识器及其梯度下降特例

    î̇ = −α(î − i) + Ψθ̂
    θ̂̇ = −γ_P·Ψᵀ(î − i) + γ_I·Ψ_fᵀ(Z − Ψ_fθ̂)

α = γ_P = 0 时退化为完整 LRE 上的经典梯度下降。
"""
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from estimators.base_estimator import BaseEstimator, EstimatorInputs, check_finite
from utils.errors import NonPhysicalEstimateError, ParameterError
from utils.integrators import rk4_held
from utils.regression import LreSampleFull, LreSampleReduced, lre_residual

LreSample = Union[LreSampleFull, LreSampleReduced]


class ThetaFull(NamedTuple):
    """θ = (R/L, 1/L, E/L)"""
    th1: float
    th2: float
    th3: float


@dataclass(frozen=True)
class CompositeGains:
    """
    复合辨识器增益

    Args:
        alpha: 观测器增益 α ≥ 0
        gamma_P: 观测误差通道（P）增益 γ_P ≥ 0
        gamma_I: 滤波回归通道（I）增益 γ_I > 0
    """
    alpha: float
    gamma_P: float
    gamma_I: float

    def __post_init__(self):
        if not self.gamma_I > 0.0:
            raise ParameterError(f"gamma_I 必须为正: {self.gamma_I}")
        if not (self.alpha >= 0.0 and self.gamma_P >= 0.0):
            raise ParameterError(f"alpha、gamma_P 不能为负: {self.alpha}, {self.gamma_P}")


@dataclass(frozen=True)
class CompositeState:
    """
    复合辨识器状态

    inputs 保存上一步的输入采样 (i, Ψ, Z, Ψ_f, 已知项)，供一阶保持使用。
    """
    i_hat: np.ndarray
    theta_hat: np.ndarray
    t: float = 0.0
    inputs: Optional[Tuple[np.ndarray, ...]] = None

    @property
    def theta(self) -> ThetaFull:
        return ThetaFull(*(float(x) for x in self.theta_hat))


def lre_arrays(lre: LreSample) -> Tuple[np.ndarray, np.ndarray]:
    """取出 (Z, Ψ_f)，兼容完整与降阶两种采样"""
    if isinstance(lre, LreSampleReduced):
        return lre.Z_ab, lre.Psi_f_ab
    return lre.Z, lre.Psi_f


def learning_rate(theta: np.ndarray, Z: np.ndarray, Psi_f: np.ndarray) -> np.ndarray:
    """Ψ_fᵀ(Z − Ψ_fθ)，即 ½‖Z − Ψ_fθ‖² 的负梯度"""
    return Psi_f.T @ (Z - Psi_f @ theta)


def composite_step(s: CompositeState,
                   i: Sequence[float],
                   Psi: np.ndarray,
                   lre: LreSample,
                   g: CompositeGains,
                   h: float,
                   known_rate: Optional[np.ndarray] = None) -> CompositeState:
    """
    复合辨识器前进一步

    Args:
        s: 当前状态
        i: 本步末电流测量
        Psi: 本步末回归矩阵（未滤波）
        lre: 本步末 LRE 采样
        g: 增益
        h: 步长
        known_rate: 观测器方程中的已知项（降阶形式下为 −(ω/ρ)·i_ab），默认为零

    Returns:
        新状态
    """
    i = np.asarray(i, dtype=float)
    Psi = np.asarray(Psi, dtype=float)
    Z, Psi_f = lre_arrays(lre)
    check_finite("i", i)
    check_finite("Psi", Psi)
    check_finite("Z", Z)
    check_finite("Psi_f", Psi_f)
    known = np.zeros_like(i) if known_rate is None else np.asarray(known_rate, dtype=float)
    check_finite("known_rate", known)

    n = i.size
    alpha, gamma_p, gamma_i = g.alpha, g.gamma_P, g.gamma_I

    def rhs(y: np.ndarray, u: Tuple[np.ndarray, ...]) -> np.ndarray:
        i_k, psi, z, psi_f, kn = u
        i_err = y[:n] - i_k
        theta = y[n:]
        di = -alpha * i_err + psi @ theta + kn
        dtheta = gamma_i * learning_rate(theta, z, psi_f) - gamma_p * (psi.T @ i_err)
        return np.concatenate((di, dtheta))

    u1 = (i, Psi, Z, Psi_f, known)
    y = rk4_held(rhs, np.concatenate((s.i_hat, s.theta_hat)), s.inputs, u1, h)
    check_finite("i_hat", y[:n])
    check_finite("theta_hat", y[n:])
    return CompositeState(i_hat=y[:n], theta_hat=y[n:], t=s.t + h, inputs=u1)


def gradient_full_step(theta_hat: Sequence[float],
                       lre: LreSampleFull,
                       gamma: float,
                       h: float,
                       prev_lre: Optional[LreSampleFull] = None) -> ThetaFull:
    """
    完整 LRE 上的梯度下降一步 θ̂̇ = γ·Ψ_fᵀ(Z − Ψ_fθ̂)

    Args:
        theta_hat: 当前估计
        lre: 本步末 LRE 采样
        gamma: 自适应增益
        h: 步长
        prev_lre: 上一步的 LRE 采样（一阶保持），首步为空

    Returns:
        ThetaFull
    """
    theta = gradient_step(theta_hat, lre, gamma, h, prev_lre)
    return ThetaFull(*(float(x) for x in theta))


def gradient_step(theta_hat: Sequence[float],
                  lre: LreSample,
                  gamma: float,
                  h: float,
                  prev_lre: Optional[LreSample]) -> np.ndarray:
    """完整与降阶 LRE 共用的梯度律积分"""
    if not gamma > 0.0:
        raise ParameterError(f"自适应增益必须为正: gamma={gamma}")
    Z, Psi_f = lre_arrays(lre)
    check_finite("Z", Z)
    check_finite("Psi_f", Psi_f)
    u0 = None if prev_lre is None else lre_arrays(prev_lre)

    def rhs(theta: np.ndarray, u: Tuple[np.ndarray, ...]) -> np.ndarray:
        return gamma * learning_rate(theta, u[0], u[1])

    theta = rk4_held(rhs, np.asarray(theta_hat, dtype=float), u0, (Z, Psi_f), h)
    check_finite("theta_hat", theta)
    return theta


def recover_full(theta: Sequence[float]) -> Tuple[float, float, float]:
    """
    由 θ 反算 (R, L, E)

    Raises:
        NonPhysicalEstimateError: th2 ≤ 0
    """
    th1, th2, th3 = (float(x) for x in theta)
    if not th2 > 0.0:
        raise NonPhysicalEstimateError(f"th2={th2:.6g} ≤ 0，无法反算")
    L = 1.0 / th2
    return th1 * L, L, th3 * L


class CompositeIdentifier(BaseEstimator):
    """完整 LRE 上的复合辨识器"""

    def __init__(self, gains: CompositeGains, theta0: Sequence[float], estimator_name: Optional[str] = None):
        self.gains = gains
        self.theta0 = np.asarray(theta0, dtype=float)
        super().__init__(estimator_name)
        self.state: Optional[CompositeState] = None

    def _validate_gains(self):
        if self.theta0.shape != (3,):
            raise ParameterError(f"θ 初值维度应为 3: {self.theta0.shape}", "dimension")

    def start(self, inputs: EstimatorInputs):
        self.state = CompositeState(i_hat=inputs.i.copy(), theta_hat=self.theta0.copy(), t=inputs.t)
        self.started = True
        self.log_info(
            f"🚀 复合辨识器启动 t={inputs.t:.4f}s, α={self.gains.alpha:g}, "
            f"γ_P={self.gains.gamma_P:g}, γ_I={self.gains.gamma_I:g}"
        )

    def update(self, inputs: EstimatorInputs, h: float):
        self.state = composite_step(self.state, inputs.i, inputs.Psi, inputs.lre, self.gains, h)
        self.steps += 1

    @property
    def theta_hat(self) -> np.ndarray:
        return self.theta0 if self.state is None else self.state.theta_hat

    @property
    def i_hat(self) -> Optional[np.ndarray]:
        return None if self.state is None else self.state.i_hat

    def theta_columns(self, omega: float) -> Tuple[float, float, float]:
        return tuple(float(x) for x in self.theta_hat)

    def recover(self, omega: float) -> Tuple[float, float, float]:
        return recover_full(self.theta_hat)

    def residual(self, inputs: EstimatorInputs) -> np.ndarray:
        return lre_residual(inputs.lre.Z, inputs.lre.Psi_f, self.theta_hat)

    def observer_error(self, inputs: EstimatorInputs) -> Optional[float]:
        if self.state is None:
            return None
        return float(np.linalg.norm(self.state.i_hat - inputs.i))


class GradientIdentifier(BaseEstimator):
    """完整 LRE 上的独立梯度下降估计器"""

    def __init__(self, gamma: float, theta0: Sequence[float], estimator_name: Optional[str] = None):
        self.gamma = gamma
        self.theta0 = np.asarray(theta0, dtype=float)
        super().__init__(estimator_name)
        self.theta = self.theta0.copy()
        self._prev_lre: Optional[LreSampleFull] = None

    def _validate_gains(self):
        if not self.gamma > 0.0:
            raise ParameterError(f"自适应增益必须为正: gamma={self.gamma}")

    def start(self, inputs: EstimatorInputs):
        self.theta = self.theta0.copy()
        self._prev_lre = None
        self.started = True
        self.log_info(f"🚀 梯度估计器启动 t={inputs.t:.4f}s, γ={self.gamma:g}")

    def update(self, inputs: EstimatorInputs, h: float):
        self.theta = gradient_step(self.theta, inputs.lre, self.gamma, h, self._prev_lre)
        self._prev_lre = inputs.lre
        self.steps += 1

    @property
    def theta_hat(self) -> np.ndarray:
        return self.theta

    def theta_columns(self, omega: float) -> Tuple[float, float, float]:
        return tuple(float(x) for x in self.theta)

    def recover(self, omega: float) -> Tuple[float, float, float]:
        return recover_full(self.theta)

    def residual(self, inputs: EstimatorInputs) -> np.ndarray:
        return lre_residual(inputs.lre.Z, inputs.lre.Psi_f, self.theta)
