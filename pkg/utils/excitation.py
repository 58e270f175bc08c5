"""
激励诊断：滤波回归矩阵的 Gram 积分、最小特征值与滑动窗口 PE 检验
"""
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Iterable, Optional, Tuple

import numpy as np

from utils.errors import ParameterError, WindowError
from utils.integrators import check_step

SYMMETRY_TOL = 1e-10
DEFAULT_PE_DECIMATION = 10

History = Deque[Tuple[float, np.ndarray]]


@dataclass(frozen=True)
class GramAccumulator:
    """
    G(t) = ∫₀ᵗ Ψ_f Ψ_fᵀ ds 的累积器

    每次 gram_update 返回新的累积器；可选的历史缓冲区（每 decimation 步
    保存一次 Ψ_fΨ_fᵀ）供滑动窗口检验使用，由同一次运行中的新旧累积器共享。
    """
    G: np.ndarray
    t: float = 0.0
    last: Optional[np.ndarray] = None
    history: Optional[History] = field(default=None, compare=False)
    decimation: int = DEFAULT_PE_DECIMATION
    count: int = 0

    @classmethod
    def zeros(cls,
              n: int,
              window: Optional[float] = None,
              h: Optional[float] = None,
              decimation: int = DEFAULT_PE_DECIMATION) -> "GramAccumulator":
        """
        创建零累积器

        Args:
            n: 矩阵维数（2 或 3）
            window: 需要支持的最长窗口 (s)，为空则不保存历史
            h: 仿真步长，与 window 一起决定缓冲区长度
            decimation: 历史抽取间隔（步）
        """
        if n not in (2, 3):
            raise ParameterError(f"只支持 2 维或 3 维: n={n}", "dimension")
        history = None
        if window is not None:
            check_step(h)
            capacity = int(math.ceil(window / (h * decimation))) + 2
            history = deque(maxlen=capacity)
        return cls(G=np.zeros((n, n)), history=history, decimation=decimation)

    @property
    def n(self) -> int:
        return self.G.shape[0]


def gram_update(g: GramAccumulator, Psi_f: np.ndarray, h: float) -> GramAccumulator:
    """
    梯形公式累积 Ψ_fΨ_fᵀ

    Args:
        g: 当前累积器
        Psi_f: 本步末的滤波回归矩阵，行数须等于 g.n
        h: 步长

    Returns:
        新的累积器
    """
    check_step(h)
    P = np.asarray(Psi_f, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    if P.shape[0] != g.n:
        raise ParameterError(f"维度不匹配: Psi_f {P.shape}，G {g.G.shape}", "dimension")
    M = P @ P.T
    previous = M if g.last is None else g.last
    t = g.t + h
    count = g.count + 1
    if g.history is not None:
        if g.count == 0:
            g.history.append((g.t, previous))
        if count % g.decimation == 0:
            g.history.append((t, M))
    return GramAccumulator(
        G=g.G + (0.5 * h) * (previous + M),
        t=t,
        last=M,
        history=g.history,
        decimation=g.decimation,
        count=count,
    )


def _check_symmetric(G: np.ndarray) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] not in (2, 3):
        raise ParameterError(f"只支持 2×2 或 3×3 矩阵: {G.shape}", "dimension")
    scale = max(float(np.max(np.abs(G))), np.finfo(float).tiny)
    if float(np.max(np.abs(G - G.T))) > SYMMETRY_TOL * scale:
        raise ParameterError("矩阵不对称", "symmetry")
    return G


def _eig_2x2(a: float, b: float, d: float) -> Tuple[float, float]:
    mid = 0.5 * (a + d)
    radius = math.hypot(0.5 * (a - d), b)
    return (mid - radius, mid + radius)


def _null_vector(M: np.ndarray) -> Optional[np.ndarray]:
    """秩 2 的 3×3 对称矩阵的单位零向量（行向量叉积中模最大者），叉积下溢时为 None"""
    candidates = (np.cross(M[0], M[1]), np.cross(M[0], M[2]), np.cross(M[1], M[2]))
    best = max(candidates, key=lambda c: float(np.dot(c, c)))
    norm = math.sqrt(float(np.dot(best, best)))
    if not norm > 0.0:
        return None
    return best / norm


def _deflate(S: np.ndarray, estimate: float) -> Optional[Tuple[float, float, float]]:
    """
    以孤立特征值的估计为起点精化全部特征值

    孤立特征值的特征向量由叉积求得并用 Rayleigh 商精化两次；
    其余两个特征值取正交补上 2×2 投影矩阵的闭式解，
    两者接近重合时精度不受影响。
    """
    lam = estimate
    v = _null_vector(S - lam * np.eye(3))
    for _ in range(2):
        if v is None:
            return None
        lam = float(v @ S @ v)
        v = _null_vector(S - lam * np.eye(3))
    if v is None:
        return None
    lam = float(v @ S @ v)

    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(v)))] = 1.0
    u1 = axis - float(axis @ v) * v
    u1 /= math.sqrt(float(np.dot(u1, u1)))
    u2 = np.cross(v, u1)
    low, high = _eig_2x2(float(u1 @ S @ u1), float(u1 @ S @ u2), float(u2 @ S @ u2))
    return lam, low, high


def eig_sym(G: np.ndarray) -> Tuple[float, ...]:
    """
    2×2 / 3×3 对称矩阵的全部特征值（升序，闭式解）

    3×3 情形先解特征三次方程的三角形式：
    q = trace/3，p = ‖G − qI‖_F/√6，r = det((G − qI)/p)/2，
    特征值为 q + 2p·cos(acos(r)/3 + 2πk/3)。
    两个特征值接近重合时 acos 在 |r| → 1 处只剩 √eps 的精度，
    因此再以与其余两者间隔最大的特征值做一次收缩精化。
    """
    G = _check_symmetric(G)
    if G.shape[0] == 2:
        return _eig_2x2(G[0, 0], 0.5 * (G[0, 1] + G[1, 0]), G[1, 1])

    S = 0.5 * (G + G.T)
    off = S[0, 1] ** 2 + S[0, 2] ** 2 + S[1, 2] ** 2
    if off == 0.0:
        return tuple(sorted(float(x) for x in np.diag(S)))
    q = float(np.trace(S)) / 3.0
    diag = np.diag(S) - q
    p = math.sqrt((float(np.dot(diag, diag)) + 2.0 * off) / 6.0)
    B = (S - q * np.eye(3)) / p
    r = 0.5 * float(np.linalg.det(B))
    r = min(1.0, max(-1.0, r))
    phi = math.acos(r) / 3.0
    largest = q + 2.0 * p * math.cos(phi)
    smallest = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    middle = 3.0 * q - largest - smallest
    isolated = largest if largest - middle >= middle - smallest else smallest
    refined = _deflate(S, isolated)
    if refined is None:
        return (smallest, middle, largest)
    return tuple(sorted(refined))


def min_eig_sym(G: np.ndarray) -> float:
    """对称矩阵的最小特征值"""
    return eig_sym(G)[0]


def window_gram(history: Iterable[Tuple[float, np.ndarray]], T: float) -> np.ndarray:
    """最近 T 秒内 Ψ_fΨ_fᵀ 的梯形积分"""
    samples = list(history)
    if not samples or samples[-1][0] - samples[0][0] < T * (1.0 - 1e-9):
        span = samples[-1][0] - samples[0][0] if samples else 0.0
        raise WindowError(f"历史数据只覆盖 {span:.4f}s，不足窗口 {T}s")
    t_end = samples[-1][0]
    selected = [(t, M) for t, M in samples if t >= t_end - T * (1.0 + 1e-9)]
    if len(selected) < 2:
        raise WindowError(f"窗口 {T}s 内的样本不足")
    times = np.array([t for t, _ in selected])
    mats = np.array([M for _, M in selected])
    dt = np.diff(times)
    return np.sum(0.5 * dt[:, None, None] * (mats[1:] + mats[:-1]), axis=0)


def pe_window(history: Iterable[Tuple[float, np.ndarray]], T: float) -> float:
    """
    滑动窗口 PE 检验：∫ₜ₋T^t Ψ_fΨ_fᵀ ds 的最小特征值

    调用方自行与阈值 δ 比较。
    """
    return min_eig_sym(window_gram(history, T))


def null_ratio(G: np.ndarray) -> float:
    """1ᵀG1 / trace(G)：全维回归矩阵结构性奇异的度量"""
    G = np.asarray(G, dtype=float)
    trace = float(np.trace(G))
    if trace == 0.0:
        return 0.0
    ones = np.ones(G.shape[0])
    return float(ones @ G @ ones) / trace
