"""
换流器与 PLL 测试

 第一组：PCC 电压
   1.  额定工况所需 PCC 相量（365.01 kV，0.3028 rad）；R = 0 时 330.92 kV、0.1619 rad
   2.  相角越界时报 AssumptionViolationError
   3.  指令切换后按 τ 指数松弛，切换时刻连续
   4.  电网参数变化同样重启滞后过程；暂态幅值严格按 e^{−(t − t_k)/τ} 衰减
   5.  第一条指令之前报 ScheduleError；指令时刻必须递增

 第二组：SRF-PLL
   6.  锁相状态保持
   7.  0.5 rad 相位跳变后 0.2 s 内频率误差 < 0.1 rad/s
   8.  频率偏差 ±5 rad/s、相位偏差 ±0.5 rad、V ≥ 0.8 时 0.2 s 内锁定
   9.  电压为零时频率冻结
"""
import math

import numpy as np
import pytest

from grid.converter import (
    DEFAULT_OMEGA_FF,
    ConverterCommand,
    PccSchedule,
    PccWaveform,
    PllState,
    pcc_voltage,
    pll_step,
    required_pcc_phasor,
)
from grid.plant import GridParams, ParamSchedule
from utils.errors import AssumptionViolationError, ParameterError, ScheduleError
from utils.threephase import Phasor, balanced_array, complex_to_instantaneous, normalize_phase

OMEGA = 100.0 * math.pi
TAU = 0.02


# ── PCC 电压 ─────────────────────────────────────────────────────────────────

def test_required_phasor_at_rated_current(bases, nominal_si):
    p = required_pcc_phasor(Phasor(bases.i_base, 0.0), nominal_si)
    assert abs(p.amplitude / 1e3 - 365.01) < 0.05, f"V = {p.amplitude / 1e3:.3f} kV"
    assert p.phase == pytest.approx(0.3028, abs=1e-3)


def test_required_phasor_without_resistance():
    """R = 0、ωL = 53.333 Ω、E = 326.60 kV、1000 A∠0 → V = √(E² + (ωL·I)²)"""
    p = GridParams(R=0.0, L=53.333 / OMEGA, E=326.60e3, omega=OMEGA)
    v = required_pcc_phasor(Phasor(1000.0, 0.0), p)
    assert v.amplitude / 1e3 == pytest.approx(330.92, abs=0.01)
    assert v.phase == pytest.approx(0.1619, abs=1e-4)
    assert v.phase == pytest.approx(math.atan2(53333.0, 326600.0), abs=1e-9)


def test_required_phasor_rejects_reversed_voltage(nominal_pu):
    z = nominal_pu.impedance()
    # Z·I = −2 → V = −1
    i_ref = Phasor.from_complex(-2.0 / z)
    with pytest.raises(AssumptionViolationError) as info:
        required_pcc_phasor(i_ref, nominal_pu)
    assert info.value.error_type == "assumption-violation"


def test_waveform_relaxes_after_command_change(nominal_pu):
    sched = PccSchedule((ConverterCommand(Phasor(1.0, 0.0), 0.0), ConverterCommand(Phasor(0.5, 0.0), 0.1)), TAU)
    waveform = PccWaveform(sched, ParamSchedule.constant(nominal_pu))
    before = nominal_pu.E + nominal_pu.impedance() * 1.0
    after = nominal_pu.E + nominal_pu.impedance() * 0.5
    assert waveform.phasor_at(0.05) == pytest.approx(before, abs=1e-15)
    assert waveform.phasor_at(0.1) == pytest.approx(before, abs=1e-15), "切换时刻应连续"
    expected = after + (before - after) * math.exp(-1.0)
    assert waveform.phasor_at(0.1 + TAU) == pytest.approx(expected, abs=1e-12)
    assert waveform.target_at(0.2) == pytest.approx(after, abs=1e-15)


def test_parameter_change_restarts_lag(nominal_pu):
    stiff = GridParams(R=nominal_pu.R * 2.0, L=nominal_pu.L * 2.0, E=nominal_pu.E, omega=OMEGA)
    truth = ParamSchedule([(0.0, nominal_pu), (0.3, stiff)])
    waveform = PccWaveform(PccSchedule((ConverterCommand(Phasor(1.0, 0.0)),), TAU), truth)
    before = nominal_pu.E + nominal_pu.impedance()
    after = stiff.E + stiff.impedance()
    assert waveform.phasor_at(0.3) == pytest.approx(before, abs=1e-15)
    assert abs(waveform.phasor_at(0.3 + 10 * TAU) - after) < 1e-4 * abs(after - before)


def test_transient_decays_exactly_at_tau(nominal_pu):
    """|v − V_target·S_φ| 在每段内按 e^{−(t − t_k)/τ} 衰减，指令切换与参数变化都重新开始"""
    stiff = GridParams(R=nominal_pu.R * 2.0, L=nominal_pu.L * 2.0, E=nominal_pu.E, omega=OMEGA)
    truth = ParamSchedule([(0.0, nominal_pu), (0.25, stiff)])
    sched = PccSchedule((ConverterCommand(Phasor(1.0, 0.0), 0.0), ConverterCommand(Phasor(0.6, -0.3), 0.1)), TAU)
    waveform = PccWaveform(sched, truth)
    for t_k, t_next in ((0.1, 0.25), (0.25, 0.4)):
        target = waveform.target_at(t_k)
        start = abs(waveform.phasor_at(t_k) - target)
        assert start > 0.0
        for t in np.linspace(t_k, t_next, 57, endpoint=False):
            epsilon = waveform.array(t) - complex_to_instantaneous(target, OMEGA, t)
            bound = start * math.exp(-(t - t_k) / TAU)
            assert abs(float(np.linalg.norm(epsilon)) - bound) <= 1e-12, f"t = {t:.4f}"


def test_pcc_voltage_matches_waveform(nominal_pu):
    sched = PccSchedule((ConverterCommand(Phasor(1.0, 0.2), 0.0),), TAU)
    truth = ParamSchedule.constant(nominal_pu)
    v = pcc_voltage(0.0137, sched, truth, OMEGA)
    assert np.allclose(v.as_array(), PccWaveform(sched, truth).array(0.0137), atol=1e-12)


def test_schedule_errors(nominal_pu):
    sched = PccSchedule((ConverterCommand(Phasor(1.0, 0.0), 0.05),), TAU)
    with pytest.raises(ScheduleError):
        sched.active(0.0)
    with pytest.raises(ParameterError):
        PccSchedule((ConverterCommand(Phasor(1.0), 0.1), ConverterCommand(Phasor(0.5), 0.1)), TAU)
    with pytest.raises(ParameterError):
        PccSchedule((ConverterCommand(Phasor(1.0)),), 0.0)


# ── SRF-PLL ─────────────────────────────────────────────────────────────────

def _run_pll(state: PllState, V: float, t_end: float, h: float = 1e-5) -> PllState:
    for k in range(int(round(t_end / h))):
        state = pll_step(V * balanced_array(OMEGA, 0.0, k * h), state, h)
    return state


def test_locked_pll_stays_locked():
    state = _run_pll(PllState.locked(OMEGA, 0.0), 1.0, 0.05)
    assert abs(state.omega_hat - OMEGA) < 1e-6
    assert abs(normalize_phase(state.theta_hat - OMEGA * 0.05)) < 1e-6


def test_pll_recovers_from_phase_jump():
    state = _run_pll(PllState.locked(OMEGA, 0.5), 1.0, 0.2)
    assert abs(state.omega_hat - OMEGA) < 0.1, f"ω̂ − ω = {state.omega_hat - OMEGA:.4f} rad/s"
    assert abs(normalize_phase(state.theta_hat - OMEGA * 0.2)) < 0.01


@pytest.mark.parametrize("V", [0.8, 1.0, 1.5])
@pytest.mark.parametrize("offset", [-5.0, 5.0])
@pytest.mark.parametrize("theta0", [-0.5, 0.5])
def test_pll_locks_from_frequency_and_phase_offset(V, offset, theta0):
    state = PllState(omega_hat=OMEGA + offset, theta_hat=theta0, integrator=OMEGA + offset - DEFAULT_OMEGA_FF)
    state = _run_pll(state, V, 0.2)
    assert abs(state.omega_hat - OMEGA) < 0.1, f"ω̂ − ω = {state.omega_hat - OMEGA:.4f} rad/s"
    assert abs(normalize_phase(state.theta_hat - OMEGA * 0.2)) < 0.01


def test_pll_freezes_without_voltage():
    state = PllState.locked(OMEGA, 0.0)
    nxt = pll_step(np.zeros(3), state, 1e-4)
    assert nxt.omega_hat == state.omega_hat
    assert nxt.integrator == state.integrator
    assert nxt.theta_hat == pytest.approx(OMEGA * 1e-4)
