# estimators/__init__.py
"""
在线估计器模块包

包含所有估计器的实现类：
- BaseEstimator: 估计器基类
- CompositeIdentifier: 完整 LRE 上的复合辨识器
- GradientIdentifier: 完整 LRE 上的梯度下降估计器
- ReducedGradientEstimator: 已知 X/R 比的降阶梯度估计器
- ReducedCompositeIdentifier: 降阶 LRE 上的复合辨识器
"""

from estimators.base_estimator import BaseEstimator, EstimatorInputs
from estimators.composite_identifier import (
    CompositeGains,
    CompositeIdentifier,
    CompositeState,
    GradientIdentifier,
    ThetaFull,
    composite_step,
    gradient_full_step,
    recover_full,
)
from estimators.reduced_gradient import (
    ReducedCompositeIdentifier,
    ReducedGradientEstimator,
    ThetaReduced,
    gd_reduced_step,
    recover_reduced,
)

__all__ = [
    'BaseEstimator',
    'EstimatorInputs',
    'CompositeGains',
    'CompositeIdentifier',
    'CompositeState',
    'GradientIdentifier',
    'ThetaFull',
    'composite_step',
    'gradient_full_step',
    'recover_full',
    'ReducedCompositeIdentifier',
    'ReducedGradientEstimator',
    'ThetaReduced',
    'gd_reduced_step',
    'recover_reduced',
]

__version__ = "1.0.0"
