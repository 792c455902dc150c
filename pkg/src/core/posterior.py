"""
后验估计
由记录器窗口蒙特卡洛估计 P^Z(y_l | x_t)，全部在对数域计算，以及交叉熵损失
"""

import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np

try:
    # 尝试相对导入
    from . import autodiff as ad
    from .encoder import MLPWeights, encode
    from .prob_core import LatentParams, joint_log_density, reparameterize, standard_normal
    from .recorder import RecordEntry, RecordSnapshot
    from ..utils.i18n import get_text
except ImportError:
    # 回退到绝对导入
    from core import autodiff as ad
    from core.encoder import MLPWeights, encode
    from core.prob_core import LatentParams, joint_log_density, reparameterize, standard_normal
    from core.recorder import RecordEntry, RecordSnapshot
    from utils.i18n import get_text


# “ε ≈ 0” 的具体取值
DEFAULT_EPS_STABLE = 1e-30

# 损失中概率的下限
PROB_FLOOR = 1e-12

Entries = Union[RecordSnapshot, Sequence[RecordEntry]]


@dataclass
class PosteriorEstimate:
    """各类别的后验概率，probs 最后一维为 m"""

    probs: Any
    mc_draws: int

    @property
    def values(self) -> np.ndarray:
        return ad.value_of(self.probs)


def as_snapshot(entries: Entries) -> RecordSnapshot:
    if isinstance(entries, RecordSnapshot):
        return entries
    if not entries:
        raise ValueError(get_text('recorder_empty'))
    return RecordSnapshot.from_entries(list(entries))


def log_stable(eps_stable: float) -> float:
    if eps_stable < 0:
        raise ValueError(get_text('config_invalid', 'epsilon', eps_stable))
    return math.log(eps_stable) if eps_stable > 0 else -math.inf


def pairwise_log_density(z, snapshot: RecordSnapshot, dims: Optional[Sequence[int]] = None):
    """z 形状 (..., N) 对窗口内每条记录的联合对数密度，结果形状 (..., n)"""
    shape = ad.value_of(z).shape
    z = ad.reshape(z, shape[:-1] + (1, shape[-1]))
    return joint_log_density(z, snapshot.params, dims)


def log_h_and_g(z, entries: Entries, dims: Optional[Sequence[int]] = None) -> Tuple[Any, Any]:
    """
    对数域的 H 与 G

    logG = LSE_k jld(z, θ_k)
    logH[l] = LSE_k (ln y_l(k) + jld(z, θ_k))，y_l(k) = 0 的项不参与；没有任何支持时为 -inf
    """
    snapshot = as_snapshot(entries)
    jld = pairwise_log_density(z, snapshot, dims)
    with np.errstate(divide='ignore'):
        log_targets = np.log(snapshot.targets)
    log_g = ad.logsumexp(jld, axis=-1)
    shape = ad.value_of(jld).shape
    log_h = ad.logsumexp(ad.reshape(jld, shape + (1,)) + log_targets, axis=-2)
    return log_h, log_g


def _draw_shape(noise: np.ndarray, mc_draws: int, batch_shape: Tuple[int, ...], latent_dim: int) -> np.ndarray:
    if noise.shape[0] != mc_draws or noise.shape[-1] != latent_dim:
        raise ValueError(get_text('noise_shape_mismatch', noise.shape, mc_draws, latent_dim))
    if noise.ndim == 2:
        # 同一抽样序号下整批共享噪声
        return noise.reshape((mc_draws,) + (1,) * len(batch_shape) + (latent_dim,))
    return noise


def sample_latents(theta_t: LatentParams, mc_draws: int, noise) -> Any:
    """按抽样序号重参数化，结果形状 (C, ..., N)"""
    if mc_draws < 1:
        raise ValueError(get_text('config_invalid', 'monte_carlo', mc_draws))
    noise = np.asarray(noise, dtype=ad.DTYPE)
    mu_shape = ad.value_of(theta_t.mu).shape
    eps = _draw_shape(noise, mc_draws, mu_shape[:-1], mu_shape[-1])
    return reparameterize(theta_t, eps)


def posterior_mc(theta_t: LatentParams, entries: Entries, mc_draws: int, eps_stable: float,
                 noise) -> PosteriorEstimate:
    """
    P^Z(y_l | x_t) ≈ (1/C) Σ_c max(H(ε_c), ε) / max(G(ε_c), ε)

    Args:
        theta_t: 当前样本（或一批样本）的高斯参数
        entries: 记录器窗口
        mc_draws: 蒙特卡洛次数 C
        eps_stable: 稳定数 ε
        noise: 形状 (C, N)（整批共享）或 (C, ..., N) 的标准正态噪声

    Returns:
        PosteriorEstimate，对 theta_t 可导
    """
    z = sample_latents(theta_t, mc_draws, noise)
    log_h, log_g = log_h_and_g(z, entries)
    ln_eps = log_stable(eps_stable)
    # max 是单调的，因此在对数域与 ln ε 比较
    log_g = ad.maximum(log_g, ln_eps)
    g_shape = ad.value_of(log_g).shape
    ratio = ad.exp(ad.maximum(log_h, ln_eps) - ad.reshape(log_g, g_shape + (1,)))
    return PosteriorEstimate(ad.mean(ratio, axis=0), mc_draws)


def class_conditional(z, entries: Entries) -> np.ndarray:
    """固定 z 处的 exp(logH - logG)，不采样"""
    log_h, log_g = log_h_and_g(np.asarray(z, dtype=ad.DTYPE), entries)
    return np.exp(log_h - log_g[..., None])


def classification_loss(estimate: PosteriorEstimate, target) -> Any:
    """交叉熵 -Σ_l target_l · ln max(p_l, 1e-12)，批次取平均"""
    log_p = ad.log(ad.maximum(estimate.probs, PROB_FLOOR))
    per_sample = -ad.sum_(ad.mul(target, log_p), axis=-1)
    return ad.mean(per_sample)


def predict(x_t, weights: MLPWeights, snapshot: Entries, mc_draws: int, eps_stable: float,
            seed: int) -> Tuple[PosteriorEstimate, np.ndarray]:
    """测试时预测：编码、对固定快照求后验、取 argmax（并列取最小类别）"""
    snapshot = as_snapshot(snapshot)
    theta = encode(np.asarray(x_t, dtype=ad.DTYPE), weights)
    rng = np.random.default_rng(seed)
    noise = standard_normal(rng, (mc_draws, theta.latent_dim))
    estimate = posterior_mc(theta, snapshot, mc_draws, eps_stable, noise)
    return estimate, np.argmax(estimate.values, axis=-1)
