"""
仿真运行器

在同一时钟上依次推进：PLL → 电网电流（RK4）→ LRE 滤波器 → 估计器 → Gram 累积。
事件时刻若落在积分步内部，该步在事件处拆分，保证参数在准确时刻切换。
"""
import cmath
import logging
import math
from collections import deque
from dataclasses import dataclass
from datetime import datetime
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd

from estimators.base_estimator import BaseEstimator, EstimatorInputs, check_finite
from estimators.composite_identifier import CompositeIdentifier, GradientIdentifier
from estimators.reduced_gradient import ReducedCompositeIdentifier, ReducedGradientEstimator
from grid.converter import PccWaveform, PllState, pll_step
from grid.plant import GridParams, PlantState, rk4_step
from simulation.output import CSV_COLUMNS
from simulation.scenario import SimConfig, build_schedules
from simulation.summary import RunSummary, fit_decay_rate, summarize
from utils.errors import NumericFaultError, ParameterError, WindowError
from utils.excitation import GramAccumulator, eig_sym, gram_update, min_eig_sym, null_ratio, window_gram
from utils.oracles import steady_state_current
from utils.regression import (
    FilterBank,
    LreSampleFull,
    LreSampleReduced,
    lre_full_step,
    lre_reduced_step,
    lre_residual,
    regressor_full,
    regressor_reduced,
)
from utils.threephase import (
    Phasor,
    ThreePhase,
    balanced_array,
    complex_to_instantaneous,
    normalize_phase,
    rotating_frame,
)

# 有界性上限：稳态值的倍数
CEILING_FACTOR = 1e3


@dataclass(frozen=True)
class StepSnapshot:
    """
    一个完整仿真步结束时的状态（标幺值）

    t_start 为该步起点；segment_end 表示该步结束于事件时刻或仿真终点。
    """
    t: float
    t_start: float
    i: np.ndarray
    v: np.ndarray
    e: np.ndarray
    params: GridParams
    inputs: EstimatorInputs
    pll: Optional[PllState]
    gram_full: GramAccumulator
    gram_reduced: GramAccumulator
    segment_end: bool = False


@dataclass
class _LoopState:
    i: np.ndarray
    v: np.ndarray
    pll: Optional[PllState]
    fb_i: FilterBank
    fb_psi: FilterBank
    fb_ab: FilterBank
    gram_full: GramAccumulator
    gram_reduced: GramAccumulator
    inputs: EstimatorInputs


class SimulationRunner:
    """
    单次仿真运行管理器
    负责构建各子系统、推进主循环、记录时间序列并汇总结果
    """

    def __init__(self, config: SimConfig):
        self.config = config
        self.logger = logging.getLogger(self.__class__.__name__)

        self.bases = config.bases
        self.omega = config.omega
        self.truth_si, self.commands = build_schedules(config)
        self.truth = self.truth_si.map(self.bases.params_to_pu)
        # 构造时即校验每段指令都满足 PCC 相角范围
        self.waveform = PccWaveform(self.commands, self.truth)

        self.boundaries: List[float] = sorted(
            set(self.truth.change_times) | {c.t_start for c in self.commands.commands[1:]}
        )
        self._event_log: Dict[float, List[str]] = {}
        for event in config.events:
            self._event_log.setdefault(event.time, []).append(f"{event.kind}={event.value}")

        self.rho = None if math.isinf(config.rho_assumed) else config.rho_assumed
        self.estimator = self._build_estimator()
        self._theta_ceiling, self._i_ceiling = self._ceilings()
        self._ceiling_time: Optional[float] = None

        self.stats = {
            "steps": 0,
            "records": 0,
            "events_applied": 0,
            "theta_peak": 0.0,
            "start_time": None,
            "end_time": None,
        }
        self.logger.info(
            f"🚀 场景 {config.name} 初始化完成: 估计器={config.estimator}, "
            f"h={config.h:g}s, 时长={config.duration:g}s, 事件数={len(config.events)}"
        )

    # ------------------------------------------------------------------
    # 构建
    # ------------------------------------------------------------------

    def _build_estimator(self) -> Optional[BaseEstimator]:
        cfg = self.config
        if cfg.estimator == "none":
            return None
        p0 = self.truth(0.0)
        reduced = cfg.estimator.startswith("reduced")
        nominal = p0.theta_reduced() if reduced else p0.theta_full()
        if cfg.estimator_init == "nominal":
            theta0 = nominal * cfg.init_scale
        elif cfg.estimator_init == "random":
            # 各分量独立取标称值的 [0.5, 1.5] 倍，由 sim.seed 决定
            rng = np.random.default_rng(cfg.seed)
            theta0 = nominal * cfg.init_scale * rng.uniform(0.5, 1.5, size=nominal.shape)
        else:
            theta0 = np.zeros_like(nominal)

        if cfg.estimator == "composite":
            return CompositeIdentifier(cfg.composite_gains, theta0)
        if cfg.estimator == "gradient":
            return GradientIdentifier(cfg.gradient_gain, theta0)
        if cfg.estimator == "reduced":
            return ReducedGradientEstimator(cfg.gamma_reduced, self.rho, theta0)
        return ReducedCompositeIdentifier(cfg.composite_gains, self.rho, theta0)

    def _ceilings(self) -> Tuple[float, float]:
        """θ̂ 与 î 的运行上限（稳态值的 CEILING_FACTOR 倍）"""
        reduced = self.config.estimator.startswith("reduced")
        theta_ref = max(
            float(np.max(np.abs(p.theta_reduced() if reduced else p.theta_full())))
            for _, p in self.truth.entries
        )
        i_ref = max([1.0] + [c.i_ref.amplitude for c in self.commands.commands])
        return CEILING_FACTOR * theta_ref, CEILING_FACTOR * i_ref

    def _initial_current(self) -> np.ndarray:
        """t = 0 时的稳态电流（相量解）"""
        v0 = Phasor.from_complex(self.waveform.phasor_at(0.0))
        current = steady_state_current(self.truth(0.0), v0)
        return complex_to_instantaneous(current.to_complex(), self.omega, 0.0)

    def _initial_pll(self) -> Optional[PllState]:
        cfg = self.config
        if not cfg.pll_enabled:
            return None
        phase = Phasor.from_complex(self.waveform.phasor_at(0.0)).phase
        omega_ff = self.omega if cfg.pll_omega_ff is None else cfg.pll_omega_ff
        return PllState.locked(
            self.omega,
            phase + cfg.pll_phase_error,
            kappa_P=cfg.pll_kappa_p,
            kappa_I=cfg.pll_kappa_i,
            omega_ff=omega_ff,
        )

    def _identifier_omega(self, pll: Optional[PllState]) -> float:
        if self.config.omega_source != "pll":
            return self.omega
        if not pll.omega_hat > 0.0:
            raise NumericFaultError("omega_pll", message=f"PLL 频率估计非正: {pll.omega_hat}")
        return pll.omega_hat

    def _identifier_s0(self, pll: Optional[PllState], omega_id: float, t: float) -> np.ndarray:
        """
        辨识器使用的单位参考三相组 S₀

        使用 PLL 时角度取 θ̂ 减去 PCC 相量相角，S₀ 只携带锁相跟踪误差。
        """
        if self.config.omega_source != "pll":
            return balanced_array(omega_id, 0.0, t)
        angle = pll.theta_hat - cmath.phase(self.waveform.phasor_at(t))
        return balanced_array(omega_id, angle, 0.0)

    def _initial_inputs(self, i: np.ndarray, v: np.ndarray, pll: Optional[PllState]) -> EstimatorInputs:
        """滤波器零初值下 t = 0 的测量量"""
        lam = self.config.lam
        omega_id = self._identifier_omega(pll)
        s0 = self._identifier_s0(pll, omega_id, 0.0)
        return EstimatorInputs(
            t=0.0,
            i=i,
            Psi=regressor_full(i, v, s0),
            lre=LreSampleFull(Z=lam * i, Psi_f=np.zeros((3, 3)), t=0.0),
            i_ab=i[:2],
            Psi_ab=regressor_reduced(v[:2], s0[:2]),
            lre_ab=LreSampleReduced(Z_ab=lam * i[:2], Psi_f_ab=np.zeros((2, 2)), t=0.0),
            omega=omega_id,
        )

    # ------------------------------------------------------------------
    # 主循环
    # ------------------------------------------------------------------

    def _advance(self, st: _LoopState, ta: float, tb: float) -> _LoopState:
        """把全部子系统从 ta 推进到 tb（区间内参数与指令不变）"""
        cfg = self.config
        dt = tb - ta
        p = self.truth(ta)
        omega = self.omega
        waveform = self.waveform

        if st.pll is not None:
            st.pll = pll_step(waveform.array(ta), st.pll, dt)

        E = p.E

        def sampler(s: float):
            return waveform.array(s), E * balanced_array(omega, 0.0, s)

        plant = rk4_step(PlantState(ThreePhase.from_array(st.i), ta), sampler, p, dt)
        i = np.asarray(plant.i, dtype=float)
        check_finite("i", i)

        v = waveform.array(tb)
        omega_id = self._identifier_omega(st.pll)
        s0 = self._identifier_s0(st.pll, omega_id, tb)
        Psi = regressor_full(i, v, s0)
        st.fb_i, st.fb_psi, lre = lre_full_step(st.fb_i, st.fb_psi, i, Psi, dt, t=tb)
        st.fb_ab, lre_ab = lre_reduced_step(st.fb_ab, i[:2], v[:2], s0[:2], self.rho, omega_id, dt, t=tb)

        inputs = EstimatorInputs(
            t=tb,
            i=i,
            Psi=Psi,
            lre=lre,
            i_ab=i[:2],
            Psi_ab=regressor_reduced(v[:2], s0[:2]),
            lre_ab=lre_ab,
            omega=omega_id,
        )
        estimator = self.estimator
        if estimator is not None and tb >= self.config.start_time - 1e-6 * cfg.h:
            if estimator.started:
                estimator.update(inputs, dt)
            else:
                estimator.start(inputs)

        st.gram_full = gram_update(st.gram_full, lre.Psi_f, dt)
        st.gram_reduced = gram_update(st.gram_reduced, lre_ab.Psi_f_ab, dt)
        st.i = i
        st.v = v
        st.inputs = inputs
        return st

    def _check_ceiling(self, t: float):
        estimator = self.estimator
        if estimator is None or not estimator.started:
            return
        theta_peak = float(np.max(np.abs(estimator.theta_hat)))
        self.stats["theta_peak"] = max(self.stats["theta_peak"], theta_peak)
        if self._ceiling_time is not None:
            return
        i_hat = estimator.i_hat
        i_peak = 0.0 if i_hat is None else float(np.max(np.abs(i_hat)))
        if theta_peak <= self._theta_ceiling and i_peak <= self._i_ceiling:
            return
        self._ceiling_time = t
        message = f"估计值超出有界性上限: |θ̂|={theta_peak:.4g}, |î|={i_peak:.4g}"
        self.logger.warning(f"⚠️ t={t:.4f}s {message}")
        if self.config.abort_on_ceiling:
            raise NumericFaultError("ceiling", t, message)

    def _log_events(self, t: float):
        for text in self._event_log.get(t, []):
            self.stats["events_applied"] += 1
            self.logger.info(f"📌 t={t:.4f}s 事件生效: {text}")

    def iter_steps(self) -> Iterator[StepSnapshot]:
        """
        逐步推进仿真

        首个快照为 t = 0 的初始状态，之后每个完整步产生一个快照。

        Raises:
            NumericFaultError: 出现非有限值（附带时刻）
        """
        cfg = self.config
        h = cfg.h
        tol = 1e-6 * h
        n_steps = int(round(cfg.duration / h))
        omega = self.omega

        i = self._initial_current()
        pll = self._initial_pll()
        v = self.waveform.array(0.0)
        st = _LoopState(
            i=i,
            v=v,
            pll=pll,
            fb_i=FilterBank.zeros(cfg.lam, 3),
            fb_psi=FilterBank.zeros(cfg.lam, 9),
            fb_ab=FilterBank.zeros(cfg.lam, 6),
            gram_full=GramAccumulator.zeros(3, cfg.pe_window, h, cfg.pe_decimation),
            gram_reduced=GramAccumulator.zeros(2, cfg.pe_window, h, cfg.pe_decimation),
            inputs=self._initial_inputs(i, v, pll),
        )
        self._log_events(0.0)
        p = self.truth(0.0)
        yield StepSnapshot(
            t=0.0, t_start=0.0, i=i, v=v, e=p.E * balanced_array(omega, 0.0, 0.0), params=p,
            inputs=st.inputs, pll=pll, gram_full=st.gram_full, gram_reduced=st.gram_reduced,
        )

        pending = deque(b for b in self.boundaries if b > 0.0)
        t = 0.0
        for k in range(1, n_steps + 1):
            t_next = k * h
            cuts = [t]
            while pending and pending[0] < t_next - tol:
                b = pending.popleft()
                if b > t + tol:
                    cuts.append(b)
            segment_end = len(cuts) > 1 or k == n_steps
            if pending and abs(pending[0] - t_next) <= tol:
                t_next = pending.popleft()
                segment_end = True
            cuts.append(t_next)

            try:
                for ta, tb in zip(cuts, cuts[1:]):
                    if ta > t:
                        self._log_events(ta)
                    st = self._advance(st, ta, tb)
                self._check_ceiling(t_next)
            except NumericFaultError as e:
                if e.t is not None:
                    raise
                self.logger.error(f"❌ t={t_next:.6f}s 数值故障: {e.quantity}")
                raise e.at(t_next) from e

            self.stats["steps"] = k
            p = self.truth(t_next)
            yield StepSnapshot(
                t=t_next,
                t_start=t,
                i=st.i,
                v=st.v,
                e=p.E * balanced_array(omega, 0.0, t_next),
                params=p,
                inputs=st.inputs,
                pll=st.pll,
                gram_full=st.gram_full,
                gram_reduced=st.gram_reduced,
                segment_end=segment_end,
            )
            if segment_end and k < n_steps:
                self._log_events(t_next)
            t = t_next

    # ------------------------------------------------------------------
    # 记录与汇总
    # ------------------------------------------------------------------

    def _record(self, snap: StepSnapshot) -> List[float]:
        """生成一行 CSV 记录（国际单位制，θ̂ 与残差为标幺值）"""
        b = self.bases
        z_base, v_base, i_base = b.z_base, b.v_base, b.i_base
        nan = float("nan")
        truth = self.truth_si(snap.t)
        estimator = self.estimator
        omega_id = snap.inputs.omega

        if estimator is None:
            theta_cols = (nan, nan, nan)
            recovered = None
            residual = lre_residual(snap.inputs.lre.Z, snap.inputs.lre.Psi_f, snap.params.theta_full())
            observer = None
        else:
            theta_cols = estimator.theta_columns(omega_id)
            recovered = estimator.try_recover(omega_id, snap.t)
            residual = estimator.residual(snap.inputs)
            observer = estimator.observer_error(snap.inputs)

        if recovered is None:
            estimates = (nan, nan, nan)
        else:
            estimates = (recovered[0] * z_base, recovered[1] * z_base, recovered[2] * v_base)

        self.stats["records"] += 1
        return [
            snap.t,
            *(snap.i * i_base),
            *(snap.v * v_base),
            *(snap.e * v_base),
            *theta_cols,
            *estimates,
            truth.R, truth.L, truth.E,
            float(np.linalg.norm(residual)),
            nan if observer is None else observer,
            min_eig_sym(snap.gram_reduced.G),
            nan if snap.pll is None else snap.pll.omega_hat,
        ]

    def _phasor_deviation(self, snap: StepSnapshot) -> Dict[str, float]:
        """段末电流相量与相量稳态解的偏差"""
        p = self.truth(snap.t_start)
        target = Phasor.from_complex(self.waveform.target_at(snap.t_start))
        expected = steady_state_current(p, target)
        d, q = rotating_frame(snap.i, self.omega * snap.t)
        actual = Phasor.from_complex(complex(d, q))
        if expected.amplitude > 0.0:
            amplitude = abs(actual.amplitude - expected.amplitude) / expected.amplitude
        else:
            amplitude = actual.amplitude
        return {
            "t": snap.t,
            "amplitude_rel": amplitude,
            "phase_rad": abs(normalize_phase(actual.phase - expected.phase)),
        }

    def _window_stats(self, snap: StepSnapshot) -> Optional[Tuple[float, float]]:
        """滑动窗口 Gram：(全维 λ_min/λ_max, 降阶 λ_min)"""
        try:
            full = eig_sym(window_gram(snap.gram_full.history, self.config.pe_window))
            reduced = min_eig_sym(window_gram(snap.gram_reduced.history, self.config.pe_window))
        except WindowError:
            return None
        ratio = full[0] / full[-1] if full[-1] > 0.0 else 0.0
        return ratio, reduced

    def run(self) -> Tuple[pd.DataFrame, RunSummary]:
        """
        执行完整仿真

        Returns:
            (时间序列, RunSummary)

        Raises:
            NumericFaultError: 数值故障，或配置了 abort_on_ceiling 时超出上限
        """
        cfg = self.config
        self.stats["start_time"] = datetime.now().isoformat()
        self.logger.info(f"▶️ 开始仿真 {cfg.name}")

        rows = []
        deviations = []
        observer_at_ends = []
        pe_ratio_max = None
        pe_reduced_min = None
        last: Optional[StepSnapshot] = None
        for k, snap in enumerate(self.iter_steps()):
            if k % cfg.decimation == 0:
                rows.append(self._record(snap))
                if k > 0 and k % (cfg.decimation * 10) == 0:
                    window = self._window_stats(snap)
                    if window is not None:
                        pe_ratio_max = window[0] if pe_ratio_max is None else max(pe_ratio_max, window[0])
                        pe_reduced_min = window[1] if pe_reduced_min is None else min(pe_reduced_min, window[1])
            if snap.segment_end:
                deviations.append(self._phasor_deviation(snap))
                if self.estimator is not None:
                    error = self.estimator.observer_error(snap.inputs)
                    if error is not None:
                        observer_at_ends.append({"t": snap.t, "i_obs_err": error})
            last = snap

        ts = pd.DataFrame(rows, columns=list(CSV_COLUMNS))
        summary = summarize(ts, self.truth_si, self.boundaries)
        summary.bounded = self._ceiling_time is None
        summary.ceiling_time = self._ceiling_time
        summary.extras.update({
            "theta_hat_peak": self.stats["theta_peak"],
            "null_ratio_full": null_ratio(last.gram_full.G),
            "phasor_amplitude_dev_max": max(d["amplitude_rel"] for d in deviations),
            "phasor_phase_dev_max": max(d["phase_rad"] for d in deviations),
            "phasor_deviation": deviations,
            "observer_error_at_ends": observer_at_ends,
        })
        if pe_ratio_max is not None:
            summary.extras["pe_ratio_full_max"] = pe_ratio_max
            summary.extras["pe_min_reduced"] = pe_reduced_min
        decay = self._residual_decay(ts)
        if decay is not None:
            summary.extras["residual_decay_rate"] = decay

        self.stats["end_time"] = datetime.now().isoformat()
        self._print_summary(summary)
        return ts, summary

    def _residual_decay(self, ts: pd.DataFrame) -> Optional[float]:
        """首段内 LRE 残差的指数衰减率"""
        first_event = self.boundaries[0] if self.boundaries else self.config.duration
        horizon = min(first_event, 10.0 / self.config.lam + self.config.start_time)
        window = ts[(ts["t"] > self.config.start_time) & (ts["t"] <= horizon)]
        try:
            return fit_decay_rate(window["t"], window["residual_norm"]).rate
        except ParameterError:
            return None

    def _print_summary(self, summary: RunSummary):
        """打印运行摘要"""
        start = datetime.fromisoformat(self.stats["start_time"])
        end = datetime.fromisoformat(self.stats["end_time"])
        self.logger.info("=" * 50)
        self.logger.info(f"📊 运行摘要: {self.config.name}")
        self.logger.info("=" * 50)
        self.logger.info(f"积分步数: {self.stats['steps']}, 记录行数: {self.stats['records']}")
        self.logger.info(f"事件数: {self.stats['events_applied']}, 耗时: {end - start}")
        for line in summary.format_lines():
            self.logger.info(line)
