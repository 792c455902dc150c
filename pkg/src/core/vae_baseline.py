"""
VAE 对照组
与 CIPAE 共用编码器和正则项，解码器换成带 sigmoid 输出的神经网络
"""

from dataclasses import dataclass
from typing import Any, NamedTuple, Optional, Sequence

import numpy as np

try:
    # 尝试相对导入
    from . import autodiff as ad
    from .autodiff import Tape
    from .cipae import bce_loss, pixel_targets
    from .encoder import MLPWeights, encode, init_mlp, mlp_forward
    from .prob_core import reparameterize
    from .regularization import kl_reg
    from ..utils.i18n import get_text
except ImportError:
    # 回退到绝对导入
    from core import autodiff as ad
    from core.autodiff import Tape
    from core.cipae import bce_loss, pixel_targets
    from core.encoder import MLPWeights, encode, init_mlp, mlp_forward
    from core.prob_core import reparameterize
    from core.regularization import kl_reg
    from utils.i18n import get_text


@dataclass
class DecoderConfig:
    """解码器结构，默认与编码器对称：N → 256 → 512 → J"""

    latent_dim: int
    hidden_dims: Sequence[int] = (256, 512)
    output_dim: int = 784
    activation: str = 'relu'
    seed: int = 0

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if self.latent_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError(get_text('config_invalid', 'decoder', self))


def init_decoder_weights(config: DecoderConfig) -> MLPWeights:
    dims = [config.latent_dim, *config.hidden_dims, config.output_dim]
    return init_mlp(dims, config.activation, config.seed, prefix='decoder')


def decode(z, weights: MLPWeights, tape: Optional[Tape] = None) -> Any:
    """MLP 前向后逐像素 sigmoid，输出在 (0,1)"""
    z_value = ad.value_of(z)
    if not np.all(np.isfinite(z_value)):
        raise FloatingPointError(get_text('non_finite_input'))
    single = z_value.ndim == 1
    if single:
        z = ad.reshape(z, (1, z_value.shape[0]))
    out = ad.sigmoid(mlp_forward(z, weights, tape))
    if single:
        out = ad.reshape(out, (ad.value_of(out).shape[-1],))
    return out


class VaeStepLoss(NamedTuple):
    """一步的总损失与两个分量（BCE、批次平均 KL）"""

    loss: Any
    bce: Any
    reg: Any


def vae_step_loss(x, encoder_weights: MLPWeights, decoder_weights: MLPWeights, gamma: float, noise,
                  tape: Optional[Tape] = None, use_l2: bool = True) -> VaeStepLoss:
    """
    BCE(decode(μ + σε), x) + 批次平均的改进 KL 正则

    use_l2 为 False 时正则项只记录、不计入损失。
    """
    targets = pixel_targets(ad.value_of(x))
    theta = encode(targets.y1, encoder_weights, tape)
    z = reparameterize(theta, np.asarray(noise, dtype=ad.DTYPE))
    recon = decode(z, decoder_weights, tape)
    bce = bce_loss(recon, targets)
    reg = ad.mean(kl_reg(theta, gamma))
    loss = bce + reg if use_l2 else bce
    if not np.isfinite(ad.value_of(loss)):
        raise FloatingPointError(get_text('non_finite_loss', 'vae'))
    return VaeStepLoss(loss, bce, reg)
