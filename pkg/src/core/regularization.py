"""
正则项
改进的 KL 正则 L₂ 与总损失 L = L₁ + L₂
"""

from dataclasses import dataclass
from typing import Any

import numpy as np

try:
    # 尝试相对导入
    from . import autodiff as ad
    from .prob_core import LatentParams
    from ..utils.i18n import get_text
except ImportError:
    # 回退到绝对导入
    from core import autodiff as ad
    from core.prob_core import LatentParams
    from utils.i18n import get_text


@dataclass
class RegConfig:
    """正则因子 γ ∈ [0, 1]"""

    gamma: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(get_text('config_invalid', 'gamma', self.gamma))


def kl_reg(params: LatentParams, gamma: float) -> Any:
    """
    KL(N(μ, σ) || N(γμ, 1)) = ½ Σᵢ (((1-γ)μᵢ)² + σᵢ² - ln σᵢ² - 1)

    批量输入时返回每个样本的值。
    """
    RegConfig(gamma)
    sigma = params.sigma
    terms = (ad.square((1.0 - gamma) * params.mu) + ad.square(sigma)
             - 2.0 * ad.log(sigma) - 1.0)
    return 0.5 * ad.sum_(terms, axis=-1)


def total_loss(l1: Any, l2: Any) -> Any:
    """L = L₁ + 批次平均的 L₂"""
    if np.ndim(ad.value_of(l2)) > 0:
        l2 = ad.mean(l2)
    for name, value in (('l1', l1), ('l2', l2)):
        if not np.all(np.isfinite(ad.value_of(value))):
            raise FloatingPointError(get_text('non_finite_loss', name))
    return l1 + l2
