"""
独立的参考解

与主算法实现无关的暴力/解析计算：相量稳态解、滤波器解析响应、
中心差分梯度、迭代特征值求解。测试和运行摘要都会用到。
"""
import math
from typing import Callable, Sequence, Tuple

import numpy as np

from grid.plant import GridParams
from utils.errors import OracleError, ParameterError
from utils.threephase import Phasor

MAX_ITERATIONS = 10_000


def steady_state_current(p: GridParams, v: Phasor) -> Phasor:
    """
    稳态电流相量 I = (V·e^{jφ} − E)/(R + jωL)

    Raises:
        ParameterError: R 与 ωL 同时为零
    """
    z = p.impedance()
    if z == 0:
        raise ParameterError("阻抗为零，电路奇异", "singular-circuit")
    return Phasor.from_complex((v.to_complex() - p.E) / z)


def first_order_step_response(lam: float, t: float) -> float:
    """F(p) = λ/(p+λ) 的单位阶跃响应 1 − e^{−λt}"""
    return -math.expm1(-lam * t)


def first_order_frequency_response(lam: float, omega: float) -> Tuple[float, float]:
    """F(jω) 的 (幅值, 相角)"""
    return lam / math.hypot(lam, omega), -math.atan2(omega, lam)


def derivative_filter_gain(lam: float, omega: float) -> float:
    """pF(p) 在 ω 处的幅值 ω·λ/√(λ²+ω²)"""
    return omega * lam / math.hypot(lam, omega)


def finite_difference_gradient(f: Callable[[np.ndarray], float],
                               x: Sequence[float],
                               eps: float = 1e-6) -> np.ndarray:
    """
    逐坐标中心差分梯度

    Args:
        f: 标量函数
        x: 求导点
        eps: 差分步长

    Returns:
        梯度向量
    """
    if not eps > 0.0:
        raise ParameterError(f"差分步长必须为正: eps={eps}")
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for k in range(x.size):
        step = np.zeros_like(x)
        step[k] = eps
        grad[k] = (f(x + step) - f(x - step)) / (2.0 * eps)
    return grad


def iterative_min_eig(G: np.ndarray, tol: float = 1e-10) -> float:
    """
    对称矩阵最小特征值的迭代解

    对 A = σI − G（σ 取 Gershgorin 上界）做幂迭代，迭代矩阵每轮平方一次，
    收敛后取主方向上 G 的 Rayleigh 商。

    Raises:
        OracleError: 迭代未收敛
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    scale = float(np.max(np.abs(G))) if G.size else 0.0
    if scale == 0.0:
        return 0.0
    sigma = float(np.max(np.sum(np.abs(G), axis=1)))
    A = sigma * np.eye(n) - G
    spread = float(np.max(np.abs(A)))
    if spread == 0.0:
        # G = σI
        return sigma
    A = A / spread

    previous = None
    for _ in range(MAX_ITERATIONS):
        A = A @ A
        peak = float(np.max(np.abs(A)))
        if peak == 0.0:
            raise OracleError("幂迭代矩阵退化为零")
        A = A / peak
        column = A[:, int(np.argmax(np.sum(A * A, axis=0)))]
        x = column / np.linalg.norm(column)
        estimate = float(x @ G @ x)
        if previous is not None and abs(estimate - previous) <= tol * scale:
            return estimate
        previous = estimate
    raise OracleError(f"最小特征值迭代未收敛 (σ={sigma:.3e})")
