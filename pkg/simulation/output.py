"""
结果文件输出：CSV 时间序列与矢量图
"""
import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Mapping, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from utils.errors import OutputError  # noqa: E402

CSV_COLUMNS = (
    "t",
    "i_a", "i_b", "i_c",
    "v_a", "v_b", "v_c",
    "e_a", "e_b", "e_c",
    "theta1_hat", "theta2_hat", "theta3_hat",
    "R_hat", "L_hat", "E_hat",
    "R_true", "L_true", "E_true",
    "residual_norm", "i_obs_err", "lambda_min_cum", "omega_pll",
)

# (列名前缀, 纵轴标签, 显示缩放)
PLOT_PARAMETERS = (
    ("R", "R (Ω)", 1.0),
    ("L", "L (mH)", 1e3),
    ("E", "E (kV)", 1e-3),
)

logger = logging.getLogger("simulation.output")

PathLike = Union[str, Path]


def empty_series() -> pd.DataFrame:
    return pd.DataFrame({name: pd.Series(dtype=float) for name in CSV_COLUMNS})


def emit_csv(ts: pd.DataFrame, path: PathLike) -> Path:
    """
    写出时间序列 CSV

    列顺序固定为 CSV_COLUMNS；NaN 写为空单元；浮点数以 17 位有效数字写出，
    可无损读回。

    Raises:
        OutputError: 路径不可写
    """
    path = Path(path)
    frame = ts.reindex(columns=list(CSV_COLUMNS))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.17g", na_rep="")
    except OSError as e:
        raise OutputError(str(path), str(e)) from e
    logger.info(f"✅ 已写出 {path}（{len(frame)} 行）")
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    """读回 emit_csv 的输出，空单元为 NaN"""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=float, float_precision="round_trip")
    except OSError as e:
        raise OutputError(str(path), str(e)) from e
    return frame.reindex(columns=list(CSV_COLUMNS))


def emit_plot(runs: Union[pd.DataFrame, Mapping[str, pd.DataFrame]], path: PathLike) -> Path:
    """
    绘制估计值与真值对比图

    估计值为实线，真值为点线；最下方一栏为累积降阶 Gram 矩阵的 λ_min。
    传入字典时每个条目画一条估计曲线（例如不同增益或不同真实 X/R 的对比），
    与已画出的真值不同的真值曲线另行画出。

    Args:
        runs: 单个时间序列，或 {标签: 时间序列}
        path: 输出文件，扩展名决定格式（svg / pdf）

    Raises:
        OutputError: 路径不可写
    """
    path = Path(path)
    if isinstance(runs, pd.DataFrame):
        runs: Dict[str, pd.DataFrame] = {"": runs}

    fig, axes = plt.subplots(len(PLOT_PARAMETERS) + 1, 1, figsize=(10, 10), sharex=True)
    try:
        drawn: Dict[str, List[np.ndarray]] = {name: [] for name, _, _ in PLOT_PARAMETERS}
        for label, ts in runs.items():
            t = ts["t"].to_numpy(dtype=float)
            for ax, (name, ylabel, scale) in zip(axes, PLOT_PARAMETERS):
                estimate = ts[f"{name}_hat"].to_numpy(dtype=float) * scale
                ax.plot(t, estimate, linestyle="-", label=f"{name}̂ {label}".strip())
                truth = ts[f"{name}_true"].to_numpy(dtype=float) * scale
                if not any(seen.shape == truth.shape and np.allclose(seen, truth) for seen in drawn[name]):
                    suffix = f" {label}" if drawn[name] else ""
                    ax.plot(t, truth, linestyle=":", color="black", label=f"{name} 真值{suffix}")
                    drawn[name].append(truth)
                ax.set_ylabel(ylabel)
            lam = ts["lambda_min_cum"].to_numpy(dtype=float)
            axes[-1].plot(t, np.where(lam > 0.0, lam, np.nan), linestyle="-", label=label or None)
        for ax in axes[:-1]:
            ax.legend(loc="best", fontsize=8)
            ax.grid(True, linestyle=":", linewidth=0.5)
        axes[-1].set_yscale("log")
        axes[-1].set_ylabel("λ_min(G)")
        axes[-1].set_xlabel("t (s)")
        axes[-1].grid(True, linestyle=":", linewidth=0.5)
        if len(runs) > 1:
            axes[-1].legend(loc="best", fontsize=8)
        fig.tight_layout()
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path)
        except OSError as e:
            raise OutputError(str(path), str(e)) from e
    finally:
        plt.close(fig)
    logger.info(f"✅ 已写出图形 {path}")
    return path


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def emit_summary(summary, path: PathLike) -> Path:
    """把 RunSummary 写为 JSON"""
    path = Path(path)
    payload = _jsonable(asdict(summary))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False, indent=2)
    except OSError as e:
        raise OutputError(str(path), str(e)) from e
    return path
