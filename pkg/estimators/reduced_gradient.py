"""
已知 X/R 比时的降阶估计器

    ϑ̂̇ = γ·Ψ_f,abᵀ(Z_ab − Ψ_f,ab·ϑ̂),   ϑ = (1/L, E/L)

φ ≠ 0（有有功功率传输）时降阶回归矩阵满足 PE 条件，估计指数收敛。
另提供同一降阶 LRE 上的复合辨识器形式。
"""
import math
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from estimators.base_estimator import BaseEstimator, EstimatorInputs
from estimators.composite_identifier import (
    CompositeGains,
    CompositeState,
    gradient_step,
    composite_step,
)
from utils.errors import NonPhysicalEstimateError, ParameterError
from utils.regression import LreSampleReduced, lre_residual


class ThetaReduced(NamedTuple):
    """ϑ = (1/L, E/L)"""
    v1: float
    v2: float


def gd_reduced_step(v_hat: Sequence[float],
                    lre: LreSampleReduced,
                    gamma: float,
                    h: float,
                    prev_lre: Optional[LreSampleReduced] = None) -> ThetaReduced:
    """
    降阶 LRE 上的梯度下降一步

    Args:
        v_hat: 当前估计 ϑ̂
        lre: 本步末降阶 LRE 采样
        gamma: 自适应增益
        h: 步长
        prev_lre: 上一步采样（一阶保持），首步为空

    Returns:
        ThetaReduced
    """
    theta = gradient_step(v_hat, lre, gamma, h, prev_lre)
    return ThetaReduced(float(theta[0]), float(theta[1]))


def recover_reduced(v: Sequence[float], rho: Optional[float], omega: float) -> Tuple[float, float, float]:
    """
    由 ϑ 与已知 ρ 反算 (R, L, E)

    rho 为 None 或 inf 时 R = 0。

    Raises:
        NonPhysicalEstimateError: v1 ≤ 0
    """
    v1, v2 = float(v[0]), float(v[1])
    if rho is not None and not rho > 0.0:
        raise ParameterError(f"X/R 比必须为正: rho={rho}", "invalid-ratio")
    if not v1 > 0.0:
        raise NonPhysicalEstimateError(f"v1={v1:.6g} ≤ 0，无法反算")
    L = 1.0 / v1
    R = 0.0 if rho is None or math.isinf(rho) else omega * L / rho
    return R, L, v2 * L


def implied_r_over_l(rho: Optional[float], omega: float) -> float:
    """已知 ρ 时 R/L = ω/ρ"""
    if rho is None or math.isinf(rho):
        return 0.0
    return omega / rho


class ReducedGradientEstimator(BaseEstimator):
    """降阶 LRE 梯度估计器"""

    def __init__(self,
                 gamma: float,
                 rho: Optional[float],
                 theta0: Sequence[float],
                 estimator_name: Optional[str] = None):
        self.gamma = gamma
        self.rho = rho
        self.theta0 = np.asarray(theta0, dtype=float)
        super().__init__(estimator_name)
        self.theta = self.theta0.copy()
        self._prev_lre: Optional[LreSampleReduced] = None

    def _validate_gains(self):
        if not self.gamma > 0.0:
            raise ParameterError(f"自适应增益必须为正: gamma={self.gamma}")
        if self.rho is not None and not self.rho > 0.0:
            raise ParameterError(f"X/R 比必须为正: rho={self.rho}", "invalid-ratio")
        if self.theta0.shape != (2,):
            raise ParameterError(f"ϑ 初值维度应为 2: {self.theta0.shape}", "dimension")

    def start(self, inputs: EstimatorInputs):
        self.theta = self.theta0.copy()
        self._prev_lre = None
        self.started = True
        self.log_info(f"🚀 降阶梯度估计器启动 t={inputs.t:.4f}s, γ={self.gamma:g}, ρ={self.rho}")

    def update(self, inputs: EstimatorInputs, h: float):
        self.theta = gradient_step(self.theta, inputs.lre_ab, self.gamma, h, self._prev_lre)
        self._prev_lre = inputs.lre_ab
        self.steps += 1

    @property
    def theta_hat(self) -> np.ndarray:
        return self.theta

    def theta_columns(self, omega: float) -> Tuple[float, float, float]:
        return (implied_r_over_l(self.rho, omega), float(self.theta[0]), float(self.theta[1]))

    def recover(self, omega: float) -> Tuple[float, float, float]:
        return recover_reduced(self.theta, self.rho, omega)

    def residual(self, inputs: EstimatorInputs) -> np.ndarray:
        return lre_residual(inputs.lre_ab.Z_ab, inputs.lre_ab.Psi_f_ab, self.theta)


class ReducedCompositeIdentifier(BaseEstimator):
    """
    降阶 LRE 上的复合辨识器

    观测器 î̇_ab = −α(î_ab − i_ab) − (ω/ρ)·i_ab + Ψ_ab·ϑ̂，
    自适应律与完整形式相同，只是换成降阶的 Ψ_ab、Z_ab、Ψ_f,ab。
    """

    def __init__(self,
                 gains: CompositeGains,
                 rho: Optional[float],
                 theta0: Sequence[float],
                 estimator_name: Optional[str] = None):
        self.gains = gains
        self.rho = rho
        self.theta0 = np.asarray(theta0, dtype=float)
        super().__init__(estimator_name)
        self.state: Optional[CompositeState] = None

    def _validate_gains(self):
        if self.rho is not None and not self.rho > 0.0:
            raise ParameterError(f"X/R 比必须为正: rho={self.rho}", "invalid-ratio")
        if self.theta0.shape != (2,):
            raise ParameterError(f"ϑ 初值维度应为 2: {self.theta0.shape}", "dimension")

    def start(self, inputs: EstimatorInputs):
        self.state = CompositeState(i_hat=inputs.i_ab.copy(), theta_hat=self.theta0.copy(), t=inputs.t)
        self.started = True
        self.log_info(f"🚀 降阶复合辨识器启动 t={inputs.t:.4f}s, ρ={self.rho}")

    def update(self, inputs: EstimatorInputs, h: float):
        known = -implied_r_over_l(self.rho, inputs.omega) * inputs.i_ab
        self.state = composite_step(
            self.state, inputs.i_ab, inputs.Psi_ab, inputs.lre_ab, self.gains, h, known_rate=known
        )
        self.steps += 1

    @property
    def theta_hat(self) -> np.ndarray:
        return self.theta0 if self.state is None else self.state.theta_hat

    @property
    def i_hat(self) -> Optional[np.ndarray]:
        return None if self.state is None else self.state.i_hat

    def theta_columns(self, omega: float) -> Tuple[float, float, float]:
        theta = self.theta_hat
        return (implied_r_over_l(self.rho, omega), float(theta[0]), float(theta[1]))

    def recover(self, omega: float) -> Tuple[float, float, float]:
        return recover_reduced(self.theta_hat, self.rho, omega)

    def residual(self, inputs: EstimatorInputs) -> np.ndarray:
        return lre_residual(inputs.lre_ab.Z_ab, inputs.lre_ab.Psi_f_ab, self.theta_hat)

    def observer_error(self, inputs: EstimatorInputs) -> Optional[float]:
        if self.state is None:
            return None
        return float(np.linalg.norm(self.state.i_hat - inputs.i_ab))
