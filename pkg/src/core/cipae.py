"""
CIPAE 解码
解码器就是后验公式本身：以像素的 Bernoulli 参数为目标，重建图像并计算 BCE 损失
"""

from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

try:
    # 尝试相对导入
    from . import autodiff as ad
    from .posterior import Entries, as_snapshot, log_stable, pairwise_log_density, sample_latents
    from .prob_core import LatentParams
    from ..utils.i18n import get_text
except ImportError:
    # 回退到绝对导入
    from core import autodiff as ad
    from core.posterior import Entries, as_snapshot, log_stable, pairwise_log_density, sample_latents
    from core.prob_core import LatentParams
    from utils.i18n import get_text


# BCE 中重建值的截断
RECON_CLAMP = 1e-12


@dataclass
class PixelTargets:
    """像素目标 y₁ ∈ [0,1]，y₂ = 1 - y₁ 不单独保存"""

    y1: np.ndarray

    def __post_init__(self):
        self.y1 = np.asarray(self.y1, dtype=ad.DTYPE)
        if np.any(self.y1 < 0.0) or np.any(self.y1 > 1.0):
            raise ValueError(get_text('record_target_range'))

    @property
    def y2(self) -> np.ndarray:
        return 1.0 - self.y1


def pixel_targets(image) -> PixelTargets:
    """把像素值变换到 [0,1]；超过 1 时视为 0..255 的灰度"""
    image = np.asarray(image, dtype=ad.DTYPE)
    if not np.all(np.isfinite(image)):
        raise ValueError(get_text('non_finite_input'))
    if np.any(image < 0):
        raise ValueError(get_text('negative_pixels'))
    if np.max(image, initial=0.0) > 1.0:
        image = image / 255.0
    return PixelTargets(image)


def reconstruct(theta_t: LatentParams, entries: Entries, mc_draws: int, eps_stable: float, noise,
                dims: Optional[Sequence[int]] = None) -> Any:
    """
    重建图像 {P^Z(y₁ʲ | x_t)}ⱼ

    每次抽样先算一次混合权重 w_k = exp(jld_k - logG)，所有像素共用：
    H_j / G = Σ_k w_k y₁ʲ(k)。ε 截断按 max(H_j, ε) / max(G, ε) 精确处理。
    dims 给定时只用这些潜变量维度的密度（同一次抽样的对应坐标）。
    """
    snapshot = as_snapshot(entries)
    y1 = snapshot.targets
    z = sample_latents(theta_t, mc_draws, noise)
    jld = pairwise_log_density(z, snapshot, dims)
    log_g = ad.logsumexp(jld, axis=-1)
    shape = ad.value_of(log_g).shape + (1,)
    log_g = ad.reshape(log_g, shape)
    weights = ad.exp(jld - log_g)
    mixture = ad.matmul(weights, y1)

    ln_eps = log_stable(eps_stable)
    clamped_g = ad.maximum(log_g, ln_eps)
    # max(H, ε)/max(G, ε) = max(r·G/max(G,ε), ε/max(G,ε))
    scale = ad.exp(log_g - clamped_g)
    floor = ad.exp(ln_eps - clamped_g)
    ratio = ad.maximum(mixture * scale, floor)
    return ad.mean(ratio, axis=0)


def reconstruct_single_latent(i: int, theta_t: LatentParams, entries: Entries, mc_draws: int,
                              eps_stable: float, noise) -> Any:
    """只用第 i 个潜变量（1 ≤ i ≤ N）重建，看它学到了什么"""
    n = theta_t.latent_dim
    if not 1 <= i <= n:
        raise ValueError(get_text('latent_index_range', i, n))
    return reconstruct(theta_t, entries, mc_draws, eps_stable, noise, dims=[i - 1])


def bce_loss(reconstruction, targets: PixelTargets) -> Any:
    """-(1/J) Σⱼ [y₁ʲ ln r̂ⱼ + (1-y₁ʲ) ln(1-r̂ⱼ)]，r̂ 截断到 [1e-12, 1-1e-12]；批次取平均"""
    y1 = targets.y1
    recon_shape = ad.value_of(reconstruction).shape
    if recon_shape[-1:] != y1.shape[-1:]:
        raise ValueError(get_text('pixel_count_mismatch', recon_shape, y1.shape))
    r = ad.clip(reconstruction, RECON_CLAMP, 1.0 - RECON_CLAMP)
    per_pixel = ad.mul(y1, ad.log(r)) + ad.mul(1.0 - y1, ad.log(1.0 - r))
    return -ad.mean(per_pixel)
