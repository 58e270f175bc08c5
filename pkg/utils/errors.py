"""
仿真与辨识过程中的异常定义

所有异常都继承自 SimulationError，并携带 error_type 字符串，
便于命令行入口按类型映射退出码。
"""
from typing import Optional


class SimulationError(Exception):
    """仿真异常基类"""
    def __init__(self, message: str, error_type: str = "unknown"):
        super().__init__(message)
        self.error_type = error_type


class ParameterError(SimulationError):
    """参数非法（频率、步长、电路参数、维度等）"""
    def __init__(self, message: str, error_type: str = "invalid-parameter"):
        super().__init__(message, error_type)


class AssumptionViolationError(SimulationError):
    """PCC 电压相角超出 (−π/2, π/2)，换流器模型前提不成立"""
    def __init__(self, message: str):
        super().__init__(message, "assumption-violation")


class ScheduleError(SimulationError):
    """在第一条指令之前请求 PCC 电压"""
    def __init__(self, message: str):
        super().__init__(message, "undefined-schedule")


class WindowError(SimulationError):
    """滑动窗口的历史数据不足"""
    def __init__(self, message: str):
        super().__init__(message, "insufficient-window")


class NumericFaultError(SimulationError):
    """
    数值故障（出现 NaN/Inf）

    Args:
        quantity: 出问题的量的名称
        t: 发生时刻，运行循环捕获后补充
    """
    def __init__(self, quantity: str, t: Optional[float] = None, message: Optional[str] = None):
        self.quantity = quantity
        self.t = t
        self.detail = message
        text = message or f"非有限数值: {quantity}"
        if t is not None:
            text = f"{text} (t={t:.6f}s)"
        super().__init__(text, "numeric-fault")

    def at(self, t: float) -> "NumericFaultError":
        """返回带有时刻信息的同类异常"""
        return NumericFaultError(self.quantity, t, self.detail)


class NonPhysicalEstimateError(SimulationError):
    """估计值尚无物理意义（th2 ≤ 0 或 v1 ≤ 0），拒绝反算"""
    def __init__(self, message: str):
        super().__init__(message, "non-physical-estimate")


class ConfigError(SimulationError):
    """场景配置错误"""
    def __init__(self, message: str, error_type: str = "invalid-scenario"):
        super().__init__(message, error_type)


class OutputError(SimulationError):
    """结果文件写入失败"""
    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"无法写入 {path}: {reason}", "file-error")


class OracleError(SimulationError):
    """参考解算法未收敛"""
    def __init__(self, message: str):
        super().__init__(message, "oracle-failure")
