"""
运行结果汇总

对记录下的时间序列计算每段（相邻两事件之间）的 2% 整定时间、峰值偏差、
最终相对误差以及 λ_min 轨迹端点。
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from grid.plant import ParamSchedule
from utils.errors import ParameterError

PARAMETERS = ("R", "L", "E")
SETTLING_BAND = 0.02


@dataclass
class SegmentSummary:
    """
    一个事件段的统计

    settling 为相对段起点的整定时间，None 表示段内未整定。
    """
    start: float
    end: float
    settling: Dict[str, Optional[float]]
    peak: Dict[str, Optional[float]]
    final_error: Dict[str, Optional[float]] = field(default_factory=dict)


@dataclass
class RunSummary:
    """单次运行的汇总"""
    final_rel_error: Dict[str, Optional[float]]
    segments: List[SegmentSummary]
    lambda_min_start: Optional[float]
    lambda_min_end: Optional[float]
    bounded: bool = True
    ceiling_time: Optional[float] = None
    extras: Dict[str, object] = field(default_factory=dict)

    def settled(self) -> bool:
        """所有段、所有参数都已整定"""
        return all(value is not None for seg in self.segments for value in seg.settling.values())

    def format_lines(self) -> List[str]:
        """供命令行打印的摘要"""
        lines = []
        for name in PARAMETERS:
            error = self.final_rel_error.get(name)
            text = "—" if error is None else f"{error * 100:.3f}%"
            lines.append(f"{name} 最终相对误差: {text}")
        for seg in self.segments:
            parts = []
            for name in PARAMETERS:
                settling = seg.settling.get(name)
                parts.append(f"{name}={'未整定' if settling is None else f'{settling:.3f}s'}")
            lines.append(f"段 [{seg.start:.3f}s, {seg.end:.3f}s] 整定时间: {', '.join(parts)}")
        if self.lambda_min_end is not None:
            lines.append(f"λ_min(G): {self.lambda_min_start:.4g} → {self.lambda_min_end:.4g}")
        lines.append(f"有界性: {'✅' if self.bounded else '❌ 超出上限 t=' + format(self.ceiling_time, '.4f')}")
        for key, value in self.extras.items():
            if isinstance(value, float):
                lines.append(f"{key}: {value:.6g}")
        return lines


def relative_errors(ts: pd.DataFrame, name: str, omega: float) -> np.ndarray:
    """
    参数 name 的逐行相对误差

    R 的真值为 0 时以 ωL 作为归一化基准；估计缺失（空单元）记为 inf。
    """
    estimate = ts[f"{name}_hat"].to_numpy(dtype=float)
    truth = ts[f"{name}_true"].to_numpy(dtype=float)
    scale = np.abs(truth)
    if name == "R":
        reactance = omega * ts["L_true"].to_numpy(dtype=float)
        scale = np.where(scale > 0.0, scale, reactance)
    error = np.abs(estimate - truth) / scale
    return np.where(np.isfinite(error), error, np.inf)


def settling_time(t: np.ndarray, error: np.ndarray, start: float, band: float = SETTLING_BAND) -> Optional[float]:
    """
    最后一次离开误差带之后的首个时刻（相对 start）

    Returns:
        整定时间；段末仍在误差带外时返回 None
    """
    if t.size == 0:
        return None
    outside = np.flatnonzero(~(error < band))
    if outside.size == 0:
        return max(0.0, float(t[0] - start))
    last = outside[-1]
    if last == t.size - 1:
        return None
    return float(t[last + 1] - start)


def summarize(ts: pd.DataFrame,
              truth: ParamSchedule,
              event_times: Optional[Sequence[float]] = None) -> RunSummary:
    """
    汇总一次运行

    Args:
        ts: run 产生的时间序列（列定义见 simulation.output.CSV_COLUMNS）
        truth: 真实参数时间表（国际单位制）
        event_times: 分段时刻，默认取 truth 的参数变化时刻

    Returns:
        RunSummary
    """
    if ts.empty:
        raise ParameterError("时间序列为空，无法汇总", "empty-series")
    omega = truth(0.0).omega
    t = ts["t"].to_numpy(dtype=float)
    boundaries = sorted(set(truth.change_times if event_times is None else event_times))
    starts = [float(t[0])] + [b for b in boundaries if t[0] < b <= t[-1]]
    ends = starts[1:] + [float(t[-1])]

    errors = {name: relative_errors(ts, name, omega) for name in PARAMETERS}
    segments = []
    for index, (start, end) in enumerate(zip(starts, ends)):
        last_segment = index == len(starts) - 1
        mask = (t >= start) & ((t <= end) if last_segment else (t < end))
        seg_t = t[mask]
        settling = {}
        peak = {}
        final = {}
        for name in PARAMETERS:
            seg_error = errors[name][mask]
            settling[name] = settling_time(seg_t, seg_error, start)
            finite = seg_error[np.isfinite(seg_error)]
            peak[name] = float(finite.max()) if finite.size else None
            final[name] = float(seg_error[-1]) if seg_error.size and np.isfinite(seg_error[-1]) else None
        segments.append(SegmentSummary(start=start, end=end, settling=settling, peak=peak, final_error=final))

    final_rel_error = {}
    for name in PARAMETERS:
        last = errors[name][-1]
        final_rel_error[name] = float(last) if math.isfinite(last) else None

    lam = ts["lambda_min_cum"].to_numpy(dtype=float)
    lam = lam[np.isfinite(lam)]
    return RunSummary(
        final_rel_error=final_rel_error,
        segments=segments,
        lambda_min_start=float(lam[0]) if lam.size else None,
        lambda_min_end=float(lam[-1]) if lam.size else None,
    )


@dataclass(frozen=True)
class DecayFit:
    """对数线性拟合 log y = intercept − rate·t"""
    rate: float
    intercept: float
    r_squared: float


def fit_decay_rate(t: Sequence[float], values: Sequence[float]) -> DecayFit:
    """
    指数衰减率拟合

    只使用有限的正值样本。

    Raises:
        ParameterError: 可用样本少于 3 个
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = np.isfinite(values) & (values > 0.0) & np.isfinite(t)
    if mask.sum() < 3:
        raise ParameterError("拟合衰减率至少需要 3 个正值样本", "insufficient-samples")
    fit = stats.linregress(t[mask], np.log(values[mask]))
    return DecayFit(rate=-float(fit.slope), intercept=float(fit.intercept), r_squared=float(fit.rvalue ** 2))
