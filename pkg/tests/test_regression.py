"""
滤波 LRE 测试

 第一组：滤波器
   1.  阶跃响应 1 − e^{−λt}
   2.  正弦稳态幅相与 F(jω) 一致
   3.  通道数不匹配报错

 第二组：回归矩阵结构
   4.  平衡三相下 1ᵀΨ = 0，左零空间恰为 1 方向
   5.  降阶行列式恒等式 det = (√3/2)·V·sin φ（1000 组随机点）

 第三组：LRE 自洽性（真实参数代入）
   6.  完整 LRE 残差以 λ 的速率衰减，0.2 s 后相对残差 < 1e-3
   7.  已知真实 ρ 时降阶 LRE 残差同样衰减
   8.  非正 ρ 被拒绝
"""
import math

import numpy as np
import pytest
from scipy.linalg import null_space

from grid.plant import GridParams, PlantState, rk4_step
from simulation.summary import fit_decay_rate
from utils.errors import ParameterError
from utils.oracles import first_order_frequency_response, first_order_step_response
from utils.regression import (
    FilterBank,
    filter_step,
    lre_full_step,
    lre_reduced_step,
    lre_residual,
    reduced_regressor_det,
    regressor_full,
    regressor_reduced,
)
from utils.threephase import PHASE_OFFSETS, ThreePhase, balanced_array, complex_to_instantaneous

OMEGA = 100.0 * math.pi
LAMBDA = 1e3
H = 1e-5


def _steady_lre_run(p: GridParams, t_end: float):
    """
    恒定 PCC 相量、稳态初值下同时推进电网与两种 LRE

    Returns:
        (t, 完整 LRE 相对残差, 降阶 LRE 相对残差)
    """
    v_complex = p.E + p.impedance() * 1.0

    def sampler(t):
        return complex_to_instantaneous(v_complex, OMEGA, t), p.E * balanced_array(OMEGA, 0.0, t)

    state = PlantState(ThreePhase.from_array(complex_to_instantaneous(1.0 + 0j, OMEGA, 0.0)), 0.0)
    fb_i, fb_psi, fb_ab = FilterBank.zeros(LAMBDA, 3), FilterBank.zeros(LAMBDA, 9), FilterBank.zeros(LAMBDA, 6)
    theta, vartheta = p.theta_full(), p.theta_reduced()
    times, full, reduced = [], [], []
    for k in range(1, int(round(t_end / H)) + 1):
        state = rk4_step(state, sampler, p, H)
        t = k * H
        i = np.asarray(state.i, dtype=float)
        v = complex_to_instantaneous(v_complex, OMEGA, t)
        s0 = balanced_array(OMEGA, 0.0, t)
        fb_i, fb_psi, lre = lre_full_step(fb_i, fb_psi, i, regressor_full(i, v, s0), H, t)
        fb_ab, lre_ab = lre_reduced_step(fb_ab, i[:2], v[:2], s0[:2], p.rho, OMEGA, H, t)
        times.append(t)
        full.append(np.linalg.norm(lre_residual(lre.Z, lre.Psi_f, theta)) / np.linalg.norm(lre.Z))
        reduced.append(np.linalg.norm(lre_residual(lre_ab.Z_ab, lre_ab.Psi_f_ab, vartheta))
                       / np.linalg.norm(lre_ab.Z_ab))
    return np.array(times), np.array(full), np.array(reduced)


@pytest.fixture(scope="module")
def steady_run():
    X = 1.0 / 3.0
    p = GridParams(R=X / 5.0, L=X / OMEGA, E=1.0, omega=OMEGA)
    return _steady_lre_run(p, 0.25)


# ── 滤波器 ───────────────────────────────────────────────────────────────────

def test_filter_step_response():
    fb = FilterBank.zeros(LAMBDA, 1)
    x = None
    for k in range(1, 2001):
        fb, x = filter_step(fb, [1.0], H)
        if k in (100, 1000, 2000):
            assert float(x[0]) == pytest.approx(first_order_step_response(LAMBDA, k * H), abs=1e-9)


def test_filter_sinusoidal_steady_state():
    fb = FilterBank.zeros(LAMBDA, 1)
    n = 10000
    for k in range(1, n + 1):
        fb, x = filter_step(fb, [math.sin(OMEGA * k * H)], H)
    gain, phase = first_order_frequency_response(LAMBDA, OMEGA)
    expected = gain * math.sin(OMEGA * n * H + phase)
    assert float(x[0]) == pytest.approx(expected, abs=1e-4)


def test_filter_channel_mismatch():
    with pytest.raises(ParameterError) as info:
        filter_step(FilterBank.zeros(LAMBDA, 3), [1.0, 2.0], H)
    assert info.value.error_type == "channel-count"
    with pytest.raises(ParameterError):
        FilterBank.zeros(0.0, 3)


# ── 回归矩阵结构 ─────────────────────────────────────────────────────────────

def test_balanced_regressor_has_ones_in_left_null_space():
    rng = np.random.default_rng(3)
    for _ in range(100):
        t = rng.uniform(0.0, 1.0)
        i = complex_to_instantaneous(complex(*rng.normal(size=2)), OMEGA, t)
        v = complex_to_instantaneous(complex(*rng.normal(size=2)), OMEGA, t)
        Psi = regressor_full(i, v, balanced_array(OMEGA, 0.0, t))
        assert np.max(np.abs(np.ones(3) @ Psi)) < 1e-12
        basis = null_space(Psi.T)
        assert basis.shape == (3, 1)
        assert np.allclose(np.abs(basis[:, 0]), 1.0 / math.sqrt(3.0), atol=1e-8)


def test_reduced_regressor_determinant_identity():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        V = rng.uniform(0.1, 2.0)
        phi = rng.uniform(-1.5, 1.5)
        x = rng.uniform(0.0, 2.0 * math.pi)
        unit = np.array([
            [V * math.sin(x + phi + o), -math.sin(x + o)] for o in PHASE_OFFSETS[:2]
        ])
        det = float(np.linalg.det(unit))
        assert abs(det - reduced_regressor_det(V, phi)) <= 1e-9 * V
        t = x / OMEGA
        scaled = regressor_reduced(V * balanced_array(OMEGA, phi, t)[:2], balanced_array(OMEGA, 0.0, t)[:2])
        assert abs(float(np.linalg.det(scaled)) - reduced_regressor_det(V, phi, scaled=True)) <= 1e-9 * V


# ── LRE 自洽性 ───────────────────────────────────────────────────────────────

def test_full_lre_residual_decays_at_filter_rate(steady_run):
    t, full, _ = steady_run
    window = (t >= 3e-3) & (t <= 1e-2)
    fit = fit_decay_rate(t[window], full[window])
    assert 0.7 * LAMBDA <= fit.rate <= 1.3 * LAMBDA, f"衰减率 {fit.rate:.1f}"
    settled = t >= 0.2
    assert np.all(full[settled] < 1e-3), f"最大相对残差 {full[settled].max():.2e}"


def test_reduced_lre_residual_with_true_ratio(steady_run):
    t, _, reduced = steady_run
    assert reduced[0] > 1e-2
    assert np.all(reduced[t >= 0.2] < 1e-3), f"最大相对残差 {reduced[t >= 0.2].max():.2e}"


def test_reduced_step_rejects_bad_ratio():
    with pytest.raises(ParameterError) as info:
        lre_reduced_step(FilterBank.zeros(LAMBDA, 6), [0.0, 0.0], [1.0, 0.0], [1.0, 0.0], 0.0, OMEGA, H)
    assert info.value.error_type == "invalid-ratio"
    assert reduced_regressor_det(1.0, 0.0) == 0.0
