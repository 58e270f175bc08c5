"""
定步长经典四阶 Runge–Kutta 积分

电网模型、滤波器和估计器共用同一组 Butcher 系数：
- rk4: 输入按时间采样（被控对象，输入可在任意时刻求值）
- rk4_held: 输入只有步首/步末两个采样，步内线性插值（一阶保持）
"""
from typing import Callable, Optional, Tuple

import numpy as np

from utils.errors import ParameterError

Inputs = Tuple[np.ndarray, ...]


def check_step(h: float):
    if not h > 0.0:
        raise ParameterError(f"积分步长必须为正: {h}", "invalid-step")


def rk4(f: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, h: float) -> np.ndarray:
    """
    单步 RK4

    Args:
        f: 右端函数 f(t, y)
        t: 步首时刻
        y: 步首状态
        h: 步长

    Returns:
        步末状态
    """
    check_step(h)
    half = 0.5 * h
    k1 = f(t, y)
    k2 = f(t + half, y + half * k1)
    k3 = f(t + half, y + half * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def hold_midpoint(u0: Inputs, u1: Inputs) -> Inputs:
    """一阶保持的步中输入"""
    return tuple(0.5 * (a + b) for a, b in zip(u0, u1))


def rk4_held(f: Callable[[np.ndarray, Inputs], np.ndarray],
             y: np.ndarray,
             u0: Optional[Inputs],
             u1: Inputs,
             h: float) -> np.ndarray:
    """
    输入为一阶保持的单步 RK4

    四个阶段分别使用 u0、中点、中点、u1。u0 为空（首步）时按零阶保持处理。

    Args:
        f: 右端函数 f(y, u)
        y: 步首状态
        u0: 步首输入采样
        u1: 步末输入采样
        h: 步长

    Returns:
        步末状态
    """
    check_step(h)
    if u0 is None:
        u0 = u1
    um = hold_midpoint(u0, u1)
    half = 0.5 * h
    k1 = f(y, u0)
    k2 = f(y + half * k1, um)
    k3 = f(y + half * k2, um)
    k4 = f(y + h * k3, u1)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)