import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from utils.errors import NonPhysicalEstimateError, NumericFaultError
from utils.regression import LreSampleFull, LreSampleReduced


@dataclass(frozen=True)
class EstimatorInputs:
    """
    一个仿真步末估计器可用的全部测量量（标幺值）

    Args:
        t: 时刻
        i: 三相电流
        Psi: 完整回归矩阵 Ψ
        lre: 完整 LRE 采样
        i_ab: a、b 两相电流
        Psi_ab: 降阶回归矩阵 Ψ_ab
        lre_ab: 降阶 LRE 采样
        omega: 辨识器使用的角频率（真实值或 PLL 估计值）
    """
    t: float
    i: np.ndarray
    Psi: np.ndarray
    lre: LreSampleFull
    i_ab: np.ndarray
    Psi_ab: np.ndarray
    lre_ab: LreSampleReduced
    omega: float


def check_finite(quantity: str, value) -> None:
    """出现 NaN/Inf 时抛出 NumericFaultError"""
    if not np.all(np.isfinite(value)):
        raise NumericFaultError(quantity)


class BaseEstimator(ABC):
    """
    所有在线估计器的抽象基类
    提供日志、增益校验、参数反算的容错以及诊断量计算
    """

    def __init__(self, estimator_name: Optional[str] = None):
        """
        初始化基础估计器

        Args:
            estimator_name: 估计器名称，用于日志标识
        """
        self.estimator_name = estimator_name or self.__class__.__name__
        self._setup_logger()
        self._validate_gains()

        self.steps = 0
        self.started = False
        self._non_physical = False

    def _setup_logger(self):
        """设置日志"""
        self.logger = logging.getLogger(self.estimator_name)

    @abstractmethod
    def _validate_gains(self):
        """校验增益（子类必须实现）"""
        raise NotImplementedError("子类必须实现 _validate_gains 方法")

    @abstractmethod
    def start(self, inputs: EstimatorInputs):
        """在使能时刻初始化内部状态"""
        raise NotImplementedError("子类必须实现 start 方法")

    @abstractmethod
    def update(self, inputs: EstimatorInputs, h: float):
        """
        前进一步（子类必须实现）

        Args:
            inputs: 本步末的测量量
            h: 步长
        """
        raise NotImplementedError("子类必须实现 update 方法")

    @abstractmethod
    def theta_columns(self, omega: float) -> Tuple[float, float, float]:
        """输出文件中 theta1_hat..theta3_hat 三列的取值"""
        raise NotImplementedError

    @abstractmethod
    def recover(self, omega: float) -> Tuple[float, float, float]:
        """反算 (R, L, E)，估计值无物理意义时抛出 NonPhysicalEstimateError"""
        raise NotImplementedError

    @abstractmethod
    def residual(self, inputs: EstimatorInputs) -> np.ndarray:
        """当前估计值下的 LRE 残差"""
        raise NotImplementedError

    @property
    @abstractmethod
    def theta_hat(self) -> np.ndarray:
        """当前参数估计向量"""
        raise NotImplementedError

    @property
    def i_hat(self) -> Optional[np.ndarray]:
        """观测器电流估计，无观测器时为 None"""
        return None

    def observer_error(self, inputs: EstimatorInputs) -> Optional[float]:
        """观测器误差 ‖î − i‖，无观测器的估计器返回 None"""
        return None

    def try_recover(self, omega: float, t: float) -> Optional[Tuple[float, float, float]]:
        """
        容错的参数反算

        Returns:
            (R, L, E)；尚无物理意义时返回 None 并只在进入该区间时记录一次日志
        """
        try:
            recovered = self.recover(omega)
        except NonPhysicalEstimateError as e:
            if not self._non_physical:
                self.logger.warning(f"⚠️ t={t:.4f}s 估计值暂无物理意义: {e}")
                self._non_physical = True
            return None
        if self._non_physical:
            self.logger.info(f"✅ t={t:.4f}s 估计值恢复物理意义")
            self._non_physical = False
        return recovered

    def log_info(self, message: str):
        """便捷的信息日志方法"""
        self.logger.info(message)
