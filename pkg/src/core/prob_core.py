"""
高斯概率核心
高斯对数密度、稳定的对数域求和以及重参数化映射
"""

import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

try:
    # 尝试相对导入
    from . import autodiff as ad
    from ..utils.i18n import get_text
except ImportError:
    # 回退到绝对导入
    from core import autodiff as ad
    from utils.i18n import get_text


LOG_2PI = math.log(2.0 * math.pi)

# σ 的下限
SIGMA_FLOOR = 1e-6


@dataclass
class LatentParams:
    """每个样本的高斯参数 θ = (μ, σ)，最后一维为 N；可带批次维"""

    mu: Any
    sigma: Any

    def __post_init__(self):
        mu = ad.value_of(self.mu)
        sigma = ad.value_of(self.sigma)
        if mu.ndim < 1 or mu.shape[-1] < 1:
            raise ValueError(get_text('latent_empty'))
        if mu.shape != sigma.shape:
            raise ValueError(get_text('latent_shape_mismatch', mu.shape, sigma.shape))
        if not np.all(sigma > 0):
            raise ValueError(get_text('sigma_not_positive'))
        if np.any(sigma < SIGMA_FLOOR):
            self.sigma = ad.maximum(self.sigma, SIGMA_FLOOR)

    @property
    def latent_dim(self) -> int:
        return ad.value_of(self.mu).shape[-1]

    def detach(self) -> "LatentParams":
        """断开梯度，返回纯数值副本"""
        return LatentParams(ad.value_of(self.mu).copy(), ad.value_of(self.sigma).copy())


def _check_sigma(sigma) -> None:
    if not np.all(ad.value_of(sigma) > 0):
        raise ValueError(get_text('sigma_not_positive'))


def gaussian_log_pdf(z, mu, sigma):
    """一维高斯对数密度 -½ln2π - lnσ - (z-μ)²/(2σ²)，逐元素计算"""
    _check_sigma(sigma)
    return -0.5 * LOG_2PI - ad.log(sigma) - ad.square(z - mu) / (2.0 * ad.square(sigma))


def joint_log_density(z, params: LatentParams, dims: Optional[Sequence[int]] = None):
    """
    独立高斯乘积的对数密度 Σᵢ log p(zⁱ; μⁱ, σⁱ)

    z 与 params 的最后一维都是 N，其余维度按广播规则对齐。
    dims 给定时只对这些维度求和。
    """
    z_dim = ad.value_of(z).shape[-1] if ad.value_of(z).ndim else 1
    if z_dim != params.latent_dim:
        raise ValueError(get_text('latent_length_mismatch', z_dim, params.latent_dim))
    mu, sigma = params.mu, params.sigma
    if dims is not None:
        index = (Ellipsis, list(dims))
        z, mu, sigma = ad.getitem(z, index), ad.getitem(mu, index), ad.getitem(sigma, index)
    return ad.sum_(gaussian_log_pdf(z, mu, sigma), axis=-1)


def log_sum_exp(xs, axis=-1):
    """稳定的 ln Σ exp(xs)"""
    if ad.value_of(xs).size == 0:
        raise ValueError(get_text('lse_empty'))
    return ad.logsumexp(xs, axis=axis)


def reparameterize(params: LatentParams, eps):
    """z = μ + σ·ε，对 μ 和 σ 可导"""
    eps_shape = np.shape(ad.value_of(eps))
    if not eps_shape or eps_shape[-1] != params.latent_dim:
        raise ValueError(get_text('latent_length_mismatch', eps_shape, params.latent_dim))
    return params.mu + params.sigma * eps


def standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """标准正态噪声（numpy 的 ziggurat 采样）"""
    return rng.standard_normal(shape)
