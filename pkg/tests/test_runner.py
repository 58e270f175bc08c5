"""
仿真运行器测试

 第一组：单次运行
   1.  输出列、行数、稳态电流幅值
   2.  同一配置两次运行的 CSV 逐字节一致
   3.  无估计器时估计列为空
   4.  落在步内的事件在准确时刻切换；与网格重合的事件不拆分；跨事件的整段运行中 1ᵀi = 0
   5.  PLL 启用、辨识器使用 PLL 频率；事件后 S₀ 仍与电网电势对齐
   6.  降阶估计器的 theta1 列为 ω/ρ；随机初值由 sim.seed 决定

 第二组：故障
   7.  PCC 相角越界在构造时报错
   8.  发散增益 → NumericFaultError（带时刻）
   9.  超出有界性上限：默认只标记，abort_on_ceiling 时中止

 第三组：辨识行为（较慢）
  10.  平衡工况下 1ᵀΨ = 0、窗口 Gram 结构性奇异
  11.  降阶 Gram 的 λ_min 线性增长
  12.  复合辨识器在 SCR 降低、E 降低后 0.5 s 内重新进入 2% 误差带
  13.  α = γ_P = 0 的失调梯度下降峰值更大、整定更慢
  14.  降阶估计器在正确 ρ 下指数收敛
  15.  ρ 假设错误时 R 的稳态误差 ≥ 5%
"""
import math

import numpy as np
import pytest

from simulation import run
from simulation.output import CSV_COLUMNS, emit_csv
from simulation.runner import SimulationRunner
from simulation.scenario import ScenarioEvent, SimConfig, scr_to_params
from simulation.summary import fit_decay_rate, relative_errors
from utils.errors import AssumptionViolationError, NumericFaultError, WindowError
from utils.excitation import eig_sym, window_gram
from utils.threephase import Phasor, balanced_array

OMEGA = 100.0 * math.pi
EVENT_TIME = 0.2
SHORT_DURATION = 0.75
# 失调梯度下降的峰值比较从事件后 50 ms 开始
PEAK_DELAY = 0.05


def _errors_after(ts, start: float):
    mask = ts["t"].to_numpy() >= start
    return {name: relative_errors(ts, name, OMEGA)[mask] for name in ("R", "L", "E")}


# ── 单次运行 ─────────────────────────────────────────────────────────────────

def test_short_run_records(make_config, bases):
    ts, summary = run(make_config(duration=0.05))
    assert list(ts.columns) == list(CSV_COLUMNS)
    assert len(ts) == 51
    assert ts["t"].iloc[-1] == pytest.approx(0.05)
    currents = np.linalg.norm(ts[["i_a", "i_b", "i_c"]].to_numpy(), axis=1)
    assert np.allclose(currents, bases.i_base, rtol=1e-6)
    assert summary.bounded
    assert summary.extras["phasor_amplitude_dev_max"] < 1e-3
    estimated = ts[ts["t"] > 0.01]
    assert estimated["L_hat"].notna().all()
    assert max(summary.final_rel_error.values()) < 1e-2


def test_runs_are_deterministic(make_config, tmp_path):
    config = make_config(duration=0.02)
    first = emit_csv(run(config)[0], tmp_path / "a.csv").read_bytes()
    second = emit_csv(run(config)[0], tmp_path / "b.csv").read_bytes()
    assert first == second


def test_run_without_estimator(make_config):
    ts, _ = run(make_config(duration=0.02, estimator="none"))
    for column in ("theta1_hat", "R_hat", "L_hat", "E_hat", "i_obs_err"):
        assert ts[column].isna().all(), column
    assert np.isfinite(ts["residual_norm"]).all()
    assert ts["omega_pll"].isna().all()


def test_event_inside_a_step(make_config):
    event_time = 0.0123456
    config = make_config(duration=0.02, events=(ScenarioEvent(event_time, "set_scr", 1.5),))
    runner = SimulationRunner(config)
    weak = runner.bases.params_to_pu(scr_to_params(1.5, 5.0, 400e3, 1000e6, OMEGA))
    ends = []
    for snap in runner.iter_steps():
        if snap.t_start < event_time < snap.t:
            ends.append(snap)
            assert snap.segment_end
            assert snap.params.L == pytest.approx(weak.L, rel=1e-12)
        elif snap.t <= event_time:
            assert snap.params.L == pytest.approx(weak.L / 2.0, rel=1e-12)
    assert len(ends) == 1
    assert runner.stats["steps"] == 2000
    assert runner.stats["events_applied"] == 1


def test_event_on_grid_switches_at_its_time(make_config):
    config = make_config(duration=0.02, events=(ScenarioEvent(0.01, "scale_E", 0.9),))
    runner = SimulationRunner(config)
    snaps = {round(s.t / config.h): s for s in runner.iter_steps()}
    assert snaps[1000].t == 0.01, "事件时刻应精确命中"
    assert snaps[1000].segment_end
    assert snaps[999].params.E == pytest.approx(1.0, rel=1e-12)
    assert snaps[1000].params.E == pytest.approx(0.9, rel=1e-12)


def test_currents_stay_zero_sequence_free(make_config):
    events = (ScenarioEvent(0.0173, "set_scr", 1.5), ScenarioEvent(0.03, "scale_E", 0.9))
    ts, _ = run(make_config(duration=0.05, events=events))
    currents = ts[["i_a", "i_b", "i_c"]].to_numpy()
    scale = float(np.max(np.abs(currents)))
    assert float(np.max(np.abs(currents.sum(axis=1)))) <= 1e-9 * scale


def test_pll_frequency_feeds_identifier(make_config):
    ts, summary = run(make_config(duration=0.03, pll_enabled=True, omega_source="pll"))
    assert np.allclose(ts["omega_pll"], OMEGA, atol=1e-6)
    assert summary.bounded


@pytest.mark.slow
def test_pll_reference_stays_aligned_through_event(make_config):
    event_time = 0.1
    config = make_config(
        duration=0.45, estimator="none", pll_enabled=True, omega_source="pll",
        events=(ScenarioEvent(event_time, "set_scr", 1.5),),
    )
    before, transient, settled, omega_dev = 0.0, 0.0, 0.0, 0.0
    for snap in SimulationRunner(config).iter_steps():
        s0_used = -snap.inputs.Psi[:, 2]
        err = float(np.max(np.abs(s0_used - balanced_array(OMEGA, 0.0, snap.t))))
        if snap.t < event_time:
            before = max(before, err)
        else:
            transient = max(transient, err)
            omega_dev = max(omega_dev, abs(snap.pll.omega_hat - OMEGA))
        if snap.t >= event_time + 0.3:
            settled = max(settled, err)
    assert omega_dev > 0.5, f"事件应扰动 PLL 频率: {omega_dev}"
    assert before < 1e-6, f"事件前 S₀ 偏差 {before}"
    assert transient < 0.1, f"跟踪暂态中 S₀ 偏差 {transient}"
    assert settled < 1e-3, f"重新锁相后 S₀ 偏差 {settled}"


def test_random_initial_estimate_follows_seed(make_config):
    def theta0(seed: int) -> np.ndarray:
        return SimulationRunner(make_config(estimator_init="random", seed=seed)).estimator.theta0

    runner = SimulationRunner(make_config())
    nominal = runner.truth(0.0).theta_full()
    first = theta0(3)
    assert np.array_equal(first, theta0(3)), "同一种子应得到同一初值"
    assert not np.array_equal(first, theta0(4))
    ratio = first / nominal
    assert np.all((ratio >= 0.5) & (ratio <= 1.5)), f"初值倍数 {ratio}"


def test_reduced_estimator_columns(make_config):
    ts, _ = run(make_config(duration=0.02, estimator="reduced"))
    assert np.allclose(ts["theta1_hat"], OMEGA / 5.0)
    assert ts["i_obs_err"].isna().all()
    ts, _ = run(make_config(duration=0.02, estimator="reduced_composite"))
    assert ts["i_obs_err"].iloc[-1] < 1e-3


# ── 故障 ─────────────────────────────────────────────────────────────────────

def test_reversed_pcc_voltage_rejected(make_config, nominal_pu):
    i_ref = Phasor.from_complex(-2.0 / nominal_pu.impedance())
    with pytest.raises(AssumptionViolationError):
        SimulationRunner(make_config(i_ref=i_ref))


def test_divergent_gains_raise_numeric_fault(make_config):
    config = make_config(duration=0.03, alpha=1e6, gamma_p=1e8, gamma_i=1e8)
    with pytest.raises(NumericFaultError) as info:
        run(config)
    assert info.value.error_type == "numeric-fault"
    assert info.value.t is not None and info.value.t >= config.start_time


def test_ceiling_is_flagged_or_aborts(make_config):
    _, summary = run(make_config(duration=0.03, init_scale=2000.0))
    assert not summary.bounded
    assert summary.ceiling_time == pytest.approx(0.01, abs=2e-5)
    with pytest.raises(NumericFaultError) as info:
        run(make_config(duration=0.03, init_scale=2000.0, abort_on_ceiling=True))
    assert info.value.quantity == "ceiling"


# ── 辨识行为 ─────────────────────────────────────────────────────────────────

@pytest.mark.slow
def test_full_regressor_structure_on_balanced_run(make_config):
    config = make_config(duration=0.3, h=5e-5, estimator="none")
    checked = 0
    for k, snap in enumerate(SimulationRunner(config).iter_steps()):
        assert np.max(np.abs(np.ones(3) @ snap.inputs.Psi)) <= 1e-10
        if k % 200 == 0:
            try:
                eigs = eig_sym(window_gram(snap.gram_full.history, config.pe_window))
            except WindowError:
                continue
            assert eigs[0] <= 1e-6 * eigs[-1], f"t={snap.t:.3f}s λ_min/λ_max = {eigs[0] / eigs[-1]:.2e}"
            checked += 1
    assert checked >= 5


@pytest.mark.slow
def test_reduced_gram_grows_linearly(make_config):
    ts, summary = run(make_config(duration=2.0, h=5e-5, decimation=20, estimator="none"))
    lam = dict(zip(np.round(ts["t"].to_numpy(), 6), ts["lambda_min_cum"].to_numpy()))
    for t in (0.5, 1.0):
        ratio = lam[round(2 * t, 6)] / lam[round(t, 6)]
        assert 1.6 <= ratio <= 2.4, f"t={t}s λ_min 增长比 {ratio:.3f}"
    assert abs(summary.extras["null_ratio_full"]) <= 1e-10
    assert summary.extras["pe_ratio_full_max"] <= 1e-6
    assert summary.extras["pe_min_reduced"] > 0.0


@pytest.fixture(scope="module")
def scr_drop_runs():
    """SCR 3 → 1.5：调好的复合辨识器与失调梯度下降"""
    event = (ScenarioEvent(EVENT_TIME, "set_scr", 1.5),)
    tuned = SimConfig(name="scr_drop", duration=SHORT_DURATION, events=event, formats=("csv",))
    detuned = tuned.with_overrides(alpha=0.0, gamma_p=0.0, gamma_i=2e3)
    return run(tuned), run(detuned)


def _assert_reconverges(ts, summary):
    assert summary.bounded
    post = summary.segments[-1]
    for name, settling in post.settling.items():
        assert settling is not None and settling <= 0.5, f"{name} 整定时间 {settling}"
    for entry in summary.extras["observer_error_at_ends"]:
        assert entry["i_obs_err"] < 1e-3, f"t={entry['t']:.3f}s 观测误差 {entry['i_obs_err']:.2e}"


@pytest.mark.slow
def test_composite_reconverges_after_scr_drop(scr_drop_runs):
    (ts, summary), _ = scr_drop_runs
    _assert_reconverges(ts, summary)


@pytest.mark.slow
def test_composite_reconverges_after_source_drop(make_config):
    config = make_config(duration=SHORT_DURATION, events=(ScenarioEvent(EVENT_TIME, "scale_E", 0.9),))
    _assert_reconverges(*run(config))


@pytest.mark.slow
def test_detuned_gradient_descent_is_worse(scr_drop_runs):
    (tuned_ts, tuned), (gd_ts, gd) = scr_drop_runs
    start = EVENT_TIME + PEAK_DELAY
    tuned_peak = max(float(np.max(e)) for e in _errors_after(tuned_ts, start).values())
    gd_peak = max(float(np.max(e)) for e in _errors_after(gd_ts, start).values())
    assert gd_peak > tuned_peak, f"梯度下降峰值 {gd_peak:.4f} ≤ 复合 {tuned_peak:.4f}"
    for name, settling in tuned.segments[-1].settling.items():
        gd_settling = gd.segments[-1].settling[name]
        if gd_settling is not None:
            assert gd_settling > settling, f"{name}: {gd_settling} ≤ {settling}"
    assert any(gd.segments[-1].settling[name] != tuned.segments[-1].settling[name] for name in ("R", "L", "E"))


@pytest.mark.slow
def test_reduced_estimator_converges_exponentially(make_config):
    config = make_config(duration=0.6, decimation=20, estimator="reduced",
                         estimator_init="zero", gamma_reduced=2e3)
    runner = SimulationRunner(config)
    ts, summary = runner.run()
    truth = runner.truth(0.0).theta_reduced()
    estimate = ts[["theta2_hat", "theta3_hat"]].to_numpy()
    error = np.linalg.norm(estimate - truth, axis=1) / np.linalg.norm(truth)
    t = ts["t"].to_numpy()
    window = (t >= 0.02) & (error < 0.5) & (error > 1e-4)
    assert window.sum() >= 20
    fit = fit_decay_rate(t[window], error[window])
    assert fit.rate > 0.0
    assert fit.r_squared >= 0.98, f"R² = {fit.r_squared:.4f}"
    for name, value in summary.final_rel_error.items():
        assert value < 5e-3, f"{name} 最终误差 {value:.2e}"


@pytest.mark.slow
@pytest.mark.parametrize("true_ratio", [3.0, 7.0])
def test_wrong_ratio_biases_resistance(make_config, true_ratio):
    config = make_config(duration=SHORT_DURATION, estimator="reduced",
                         events=(ScenarioEvent(EVENT_TIME, "set_xr_ratio", true_ratio),))
    ts, _ = run(config)
    errors = _errors_after(ts, EVENT_TIME + 0.2)
    assert np.all(errors["R"] >= 0.05), f"R 最小误差 {errors['R'].min():.3f}"
