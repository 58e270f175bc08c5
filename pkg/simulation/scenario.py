"""
场景配置

场景文件是扁平的 key=value 文本（与 config/.env 相同的格式，用 python-dotenv 解析），
键名带分节前缀与单位，例如 grid.v_ll_kv、event.1.time_s。
所有键见 SCENARIO_KEYS；未知键、无法解析的值和违反约束的配置都抛出 ConfigError。

SCR 约定：X = V_LL²/(SCR·S_rated)。
"""
import math
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from dotenv import dotenv_values

from estimators.composite_identifier import CompositeGains
from grid.converter import (
    DEFAULT_KAPPA_I,
    DEFAULT_KAPPA_P,
    DEFAULT_TAU,
    ConverterCommand,
    PccSchedule,
)
from grid.plant import GridParams, ParamSchedule, PerUnitBases
from utils.errors import ConfigError, SimulationError
from utils.threephase import Phasor

EVENT_KINDS = ("set_scr", "set_xr_ratio", "scale_E", "set_params", "set_command")
ESTIMATOR_KINDS = ("composite", "gradient", "reduced", "reduced_composite", "none")
ESTIMATOR_INITS = ("nominal", "zero", "random")
OUTPUT_FORMATS = ("csv", "svg", "pdf")

# 默认增益（标幺制，h = 1e-5 s 下整定）
DEFAULT_LAMBDA = 1e3
DEFAULT_ALPHA = 1e3
DEFAULT_GAMMA_P = 1e6
DEFAULT_GAMMA_I = 2e4
DEFAULT_GAMMA_REDUCED = 2e4
DEFAULT_RHO_ASSUMED = 5.0

# reproduce 子命令的预设组：三组 (α, γ_P) 与梯度下降对照叠加在同一张图上
FIGURE_PRESETS: Dict[str, Tuple[str, ...]] = {
    "fig2a": ("fig2a_low", "fig2a", "fig2a_high", "fig2a_gd"),
    "fig2b": ("fig2b_low", "fig2b", "fig2b_high", "fig2b_gd"),
    "fig3": ("fig3_rho3", "fig3_rho5", "fig3_rho7"),
    "fig4": ("fig4",),
    "null": ("null_rated",),
}

PACKAGE_SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@dataclass(frozen=True)
class ScenarioEvent:
    """
    场景事件

    value 的类型随 kind 而定：set_scr / set_xr_ratio / scale_E 为标量，
    set_params 为 GridParams（国际单位制），set_command 为 ConverterCommand。
    """
    time: float
    kind: str
    value: Union[float, GridParams, ConverterCommand]

    def __post_init__(self):
        if not self.time >= 0.0:
            raise ConfigError(f"事件时刻不能为负: {self.time}")
        if self.kind not in EVENT_KINDS:
            raise ConfigError(f"未知事件类型: {self.kind}")
        if self.kind in ("set_scr", "scale_E", "set_xr_ratio"):
            if not float(self.value) > 0.0:
                raise ConfigError(f"{self.kind} 必须为正: {self.value}")
        elif self.kind == "set_params" and not isinstance(self.value, GridParams):
            raise ConfigError("set_params 事件需要 GridParams")
        elif self.kind == "set_command" and not isinstance(self.value, ConverterCommand):
            raise ConfigError("set_command 事件需要 ConverterCommand")


@dataclass(frozen=True)
class SimConfig:
    """
    一次仿真运行的完整配置

    电网量为国际单位制（V_LL 为线电压有效值），电流指令与全部增益为标幺值。
    gamma_gradient 为空时取 gamma_i；pll_omega_ff 为空时取 2πf。
    """
    name: str = "scenario"
    # 电网
    s_rated: float = 1000e6
    v_ll: float = 400e3
    f: float = 50.0
    scr: float = 3.0
    xr_ratio: float = 5.0
    e_scale: float = 1.0
    # 换流器
    i_ref: Phasor = Phasor(1.0, 0.0)
    tau: float = DEFAULT_TAU
    # 仿真
    duration: float = 3.0
    h: float = 1e-5
    decimation: int = 100
    seed: int = 0
    # 估计
    lam: float = DEFAULT_LAMBDA
    estimator: str = "composite"
    estimator_start: Optional[float] = None
    estimator_init: str = "nominal"
    init_scale: float = 1.0
    alpha: float = DEFAULT_ALPHA
    gamma_p: float = DEFAULT_GAMMA_P
    gamma_i: float = DEFAULT_GAMMA_I
    gamma_gradient: Optional[float] = None
    gamma_reduced: float = DEFAULT_GAMMA_REDUCED
    rho_assumed: float = DEFAULT_RHO_ASSUMED
    # PLL
    pll_enabled: bool = False
    pll_kappa_p: float = DEFAULT_KAPPA_P
    pll_kappa_i: float = DEFAULT_KAPPA_I
    pll_omega_ff: Optional[float] = None
    pll_phase_error: float = 0.0
    omega_source: str = "true"
    # 激励诊断
    pe_window: float = 0.1
    pe_decimation: int = 10
    # 运行与输出
    abort_on_ceiling: bool = False
    formats: Tuple[str, ...] = ("csv", "svg")
    events: Tuple[ScenarioEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        checks = [
            (self.h > 0.0, f"步长必须为正: h={self.h}"),
            (self.duration > self.h, f"仿真时长必须大于步长: duration={self.duration}"),
            (self.f > 0.0, f"频率必须为正: f={self.f}"),
            (self.s_rated > 0.0 and self.v_ll > 0.0, "额定容量与电压必须为正"),
            (self.scr > 0.0 and self.xr_ratio > 0.0, f"SCR 与 X/R 必须为正: {self.scr}, {self.xr_ratio}"),
            (self.e_scale > 0.0, f"e_scale 必须为正: {self.e_scale}"),
            (self.tau > 0.0, f"滞后时间常数必须为正: {self.tau}"),
            (self.lam > 0.0, f"滤波器 λ 必须为正: {self.lam}"),
            (self.decimation >= 1 and self.pe_decimation >= 1, "抽取间隔至少为 1"),
            (self.pe_window > 0.0, f"PE 窗口必须为正: {self.pe_window}"),
            (self.rho_assumed > 0.0, f"假定 X/R 必须为正: {self.rho_assumed}"),
            (self.estimator in ESTIMATOR_KINDS, f"未知估计器: {self.estimator}"),
            (self.estimator_init in ESTIMATOR_INITS, f"未知初值方式: {self.estimator_init}"),
            (self.omega_source in ("true", "pll"), f"未知频率来源: {self.omega_source}"),
            (self.omega_source != "pll" or self.pll_enabled, "identifier.omega_source=pll 需要启用 PLL"),
            (set(self.formats) <= set(OUTPUT_FORMATS), f"未知输出格式: {self.formats}"),
            (self.estimator_start is None or self.estimator_start >= 0.0, "估计器启动时刻不能为负"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        ordered = tuple(sorted(self.events, key=lambda e: e.time))
        for event in ordered:
            if event.time > self.duration:
                raise ConfigError(f"事件时刻 {event.time}s 超出仿真时长 {self.duration}s")
        object.__setattr__(self, "events", ordered)

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.f

    @property
    def bases(self) -> PerUnitBases:
        return PerUnitBases(self.s_rated, self.v_ll, self.f)

    @property
    def start_time(self) -> float:
        """估计器使能时刻，默认等滤波器遗忘零初值（10/λ）"""
        if self.estimator_start is None:
            return 10.0 / self.lam
        return self.estimator_start

    @property
    def composite_gains(self) -> CompositeGains:
        return CompositeGains(alpha=self.alpha, gamma_P=self.gamma_p, gamma_I=self.gamma_i)

    @property
    def gradient_gain(self) -> float:
        return self.gamma_i if self.gamma_gradient is None else self.gamma_gradient

    def with_overrides(self, **changes) -> "SimConfig":
        return replace(self, **changes)


def scr_to_params(scr: float, xr_ratio: float, V_LL: float, S_rated: float, omega: float) -> GridParams:
    """
    由 SCR 与 X/R 比计算戴维南参数

    Args:
        scr: 短路比
        xr_ratio: X/R 比，inf 表示纯电感
        V_LL: 线电压有效值 (V)
        S_rated: 额定容量 (VA)
        omega: 角频率 (rad/s)

    Returns:
        GridParams（国际单位制，E 为相电压峰值）
    """
    for name, value in (("scr", scr), ("xr_ratio", xr_ratio), ("V_LL", V_LL),
                        ("S_rated", S_rated), ("omega", omega)):
        if not value > 0.0:
            raise ConfigError(f"{name} 必须为正: {value}")
    X = V_LL ** 2 / (scr * S_rated)
    R = 0.0 if math.isinf(xr_ratio) else X / xr_ratio
    return GridParams(R=R, L=X / omega, E=V_LL * math.sqrt(2.0) / math.sqrt(3.0), omega=omega)


def _apply_event(p: GridParams, event: ScenarioEvent, config: SimConfig) -> GridParams:
    """把一个电网事件作用到当前参数上"""
    if event.kind == "set_scr":
        base = scr_to_params(event.value, p.rho, config.v_ll, config.s_rated, p.omega)
        return replace(base, E=p.E)
    if event.kind == "set_xr_ratio":
        R = 0.0 if math.isinf(event.value) else p.X / event.value
        return replace(p, R=R)
    if event.kind == "scale_E":
        return replace(p, E=p.E * event.value)
    if event.value.omega != p.omega:
        raise ConfigError(f"set_params 不能改变电网频率: {event.value.omega} ≠ {p.omega}")
    return event.value


def build_schedules(config: SimConfig) -> Tuple[ParamSchedule, PccSchedule]:
    """
    把事件列表展开为真实参数时间表（国际单位制）与电流指令序列（标幺）

    同一时刻的多个事件按文件顺序依次作用。
    """
    try:
        p = scr_to_params(config.scr, config.xr_ratio, config.v_ll, config.s_rated, config.omega)
        p = replace(p, E=p.E * config.e_scale)
        entries: List[Tuple[float, GridParams]] = [(0.0, p)]
        commands: List[ConverterCommand] = [ConverterCommand(config.i_ref, 0.0)]
        for event in config.events:
            if event.kind == "set_command":
                command = ConverterCommand(event.value.i_ref, event.time)
                if commands[-1].t_start == event.time:
                    commands[-1] = command
                else:
                    commands.append(command)
                continue
            p = _apply_event(p, event, config)
            if entries[-1][0] == event.time:
                entries[-1] = (event.time, p)
            else:
                entries.append((event.time, p))
        return ParamSchedule(entries), PccSchedule(tuple(commands), config.tau)
    except ConfigError:
        raise
    except SimulationError as e:
        raise ConfigError(f"事件序列无效: {e}") from e


# ---------------------------------------------------------------------------
# 场景文件
# ---------------------------------------------------------------------------

def _parse_float(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise ValueError("NaN")
    return value


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"不是布尔值: {text}")


def _parse_formats(text: str) -> Tuple[str, ...]:
    return tuple(item.strip().lower() for item in text.split(",") if item.strip())


def _scaled(factor: float) -> Callable[[str], float]:
    return lambda text: _parse_float(text) * factor


# 键 → (SimConfig 字段, 解析函数)
SCENARIO_KEYS: Dict[str, Tuple[str, Callable[[str], object]]] = {
    "scenario.name": ("name", str.strip),
    "grid.v_ll_kv": ("v_ll", _scaled(1e3)),
    "grid.s_rated_mva": ("s_rated", _scaled(1e6)),
    "grid.f_hz": ("f", _parse_float),
    "grid.scr": ("scr", _parse_float),
    "grid.xr_ratio": ("xr_ratio", _parse_float),
    "grid.e_scale": ("e_scale", _parse_float),
    "converter.tau_ms": ("tau", _scaled(1e-3)),
    "sim.duration_s": ("duration", _parse_float),
    "sim.step_s": ("h", _parse_float),
    "sim.decimation": ("decimation", int),
    "sim.seed": ("seed", int),
    "filter.lambda_per_s": ("lam", _parse_float),
    "estimator.kind": ("estimator", str.strip),
    "estimator.start_s": ("estimator_start", _parse_float),
    "estimator.init": ("estimator_init", str.strip),
    "estimator.init_scale": ("init_scale", _parse_float),
    "composite.alpha_per_s": ("alpha", _parse_float),
    "composite.gamma_p": ("gamma_p", _parse_float),
    "composite.gamma_i": ("gamma_i", _parse_float),
    "gradient.gamma": ("gamma_gradient", _parse_float),
    "reduced.gamma": ("gamma_reduced", _parse_float),
    "reduced.rho": ("rho_assumed", _parse_float),
    "pll.enabled": ("pll_enabled", _parse_bool),
    "pll.kappa_p": ("pll_kappa_p", _parse_float),
    "pll.kappa_i": ("pll_kappa_i", _parse_float),
    "pll.omega_ff_rad_s": ("pll_omega_ff", _parse_float),
    "pll.phase_error_rad": ("pll_phase_error", _parse_float),
    "identifier.omega_source": ("omega_source", str.strip),
    "excitation.window_s": ("pe_window", _parse_float),
    "excitation.decimation": ("pe_decimation", int),
    "run.abort_on_ceiling": ("abort_on_ceiling", _parse_bool),
    "output.formats": ("formats", _parse_formats),
}

COMMAND_KEYS = ("converter.i_ref_pu", "converter.i_ref_phase_rad")

EVENT_KEY = re.compile(r"^event\.(\d+)\.([a-z_]+)$")
EVENT_FIELDS = ("time_s", "set_scr", "set_xr_ratio", "scale_e",
                "set_r_ohm", "set_l_mh", "set_e_kv", "set_i_ref_pu", "set_i_ref_phase_rad")


def _parse_value(key: str, text: Optional[str], parser: Callable[[str], object]):
    if text is None or not text.strip():
        raise ConfigError(f"键 {key} 缺少取值")
    try:
        return parser(text)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"键 {key} 的值无法解析: {text!r} ({e})") from e


def _build_event(index: int, fields: Dict[str, str], omega: float) -> ScenarioEvent:
    """把 event.<n>.* 的一组键转换为 ScenarioEvent"""
    key = f"event.{index}"
    if "time_s" not in fields:
        raise ConfigError(f"{key} 缺少 time_s")
    time = _parse_value(f"{key}.time_s", fields["time_s"], _parse_float)

    changes = []
    if "set_scr" in fields:
        changes.append(("set_scr", _parse_value(f"{key}.set_scr", fields["set_scr"], _parse_float)))
    if "set_xr_ratio" in fields:
        changes.append(("set_xr_ratio", _parse_value(f"{key}.set_xr_ratio", fields["set_xr_ratio"], _parse_float)))
    if "scale_e" in fields:
        changes.append(("scale_E", _parse_value(f"{key}.scale_e", fields["scale_e"], _parse_float)))

    param_keys = {"set_r_ohm", "set_l_mh", "set_e_kv"} & fields.keys()
    if param_keys:
        if len(param_keys) != 3:
            raise ConfigError(f"{key} 的 set_r_ohm、set_l_mh、set_e_kv 必须同时给出")
        try:
            params = GridParams(
                R=_parse_value(f"{key}.set_r_ohm", fields["set_r_ohm"], _parse_float),
                L=_parse_value(f"{key}.set_l_mh", fields["set_l_mh"], _scaled(1e-3)),
                E=_parse_value(f"{key}.set_e_kv", fields["set_e_kv"], _scaled(1e3)),
                omega=omega,
            )
        except ConfigError:
            raise
        except SimulationError as e:
            raise ConfigError(f"{key} 参数无效: {e}") from e
        changes.append(("set_params", params))

    if "set_i_ref_pu" in fields:
        amplitude = _parse_value(f"{key}.set_i_ref_pu", fields["set_i_ref_pu"], _parse_float)
        phase = 0.0
        if "set_i_ref_phase_rad" in fields:
            phase = _parse_value(f"{key}.set_i_ref_phase_rad", fields["set_i_ref_phase_rad"], _parse_float)
        if amplitude < 0.0:
            raise ConfigError(f"{key} 电流指令幅值不能为负: {amplitude}")
        changes.append(("set_command", ConverterCommand(Phasor(amplitude, phase), time)))
    elif "set_i_ref_phase_rad" in fields:
        raise ConfigError(f"{key}.set_i_ref_phase_rad 需要与 set_i_ref_pu 一起给出")

    if len(changes) != 1:
        raise ConfigError(f"{key} 必须恰好包含一种变化，实际为 {[kind for kind, _ in changes]}")
    kind, value = changes[0]
    return ScenarioEvent(time=time, kind=kind, value=value)


def parse_scenario(values: Dict[str, Optional[str]]) -> SimConfig:
    """
    把键值对解析为 SimConfig

    Args:
        values: dotenv_values 的结果或等价字典

    Returns:
        SimConfig
    """
    kwargs: Dict[str, object] = {}
    event_fields: Dict[int, Dict[str, str]] = {}
    unknown = []
    for key, text in values.items():
        key = key.strip()
        if key in SCENARIO_KEYS:
            name, parser = SCENARIO_KEYS[key]
            kwargs[name] = _parse_value(key, text, parser)
            continue
        if key in COMMAND_KEYS:
            continue
        match = EVENT_KEY.match(key)
        if match and match.group(2) in EVENT_FIELDS:
            event_fields.setdefault(int(match.group(1)), {})[match.group(2)] = text or ""
            continue
        unknown.append(key)
    if unknown:
        raise ConfigError(f"未知配置键: {', '.join(sorted(unknown))}", "unknown-key")

    amplitude = 1.0
    phase = 0.0
    if "converter.i_ref_pu" in values:
        amplitude = _parse_value("converter.i_ref_pu", values["converter.i_ref_pu"], _parse_float)
    if "converter.i_ref_phase_rad" in values:
        phase = _parse_value("converter.i_ref_phase_rad", values["converter.i_ref_phase_rad"], _parse_float)
    if amplitude < 0.0:
        raise ConfigError(f"电流指令幅值不能为负: {amplitude}")
    kwargs["i_ref"] = Phasor(amplitude, phase)

    omega = 2.0 * math.pi * float(kwargs.get("f", 50.0))
    kwargs["events"] = tuple(_build_event(index, event_fields[index], omega) for index in sorted(event_fields))
    try:
        return SimConfig(**kwargs)
    except ConfigError:
        raise
    except SimulationError as e:
        raise ConfigError(str(e)) from e


def load_scenario(path: Union[str, Path]) -> SimConfig:
    """读取场景文件"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"场景文件不存在: {path}", "missing-file")
    return parse_scenario(dotenv_values(path))


def preset_path(name: str) -> Path:
    """
    预设场景文件路径

    先在 SIM_SCENARIO_DIR（默认 scenarios）下查找，再回退到随包发布的 scenarios 目录。
    """
    candidates = [Path(os.getenv("SIM_SCENARIO_DIR", "scenarios")) / f"{name}.env",
                  PACKAGE_SCENARIO_DIR / f"{name}.env"]
    for candidate in candidates:
        if candidate.is_file():
            return candidate
    raise ConfigError(f"未找到预设场景: {name}", "unknown-preset")


def load_preset(name: str) -> SimConfig:
    return load_scenario(preset_path(name))
