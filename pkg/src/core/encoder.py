"""
编码器
全连接网络，把输入向量映射为潜变量的高斯参数 (μ, σ)
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

try:
    # 尝试相对导入
    from . import autodiff as ad
    from .autodiff import Parameter, Tape
    from .prob_core import LatentParams
    from ..utils.i18n import get_text
except ImportError:
    # 回退到绝对导入
    from core import autodiff as ad
    from core.autodiff import Parameter, Tape
    from core.prob_core import LatentParams
    from utils.i18n import get_text


# 支持的激活函数
ACTIVATIONS: Dict[str, Callable] = {
    'relu': ad.relu,
    'tanh': ad.tanh,
}

# log σ² 的截断区间
LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0


@dataclass
class EncoderConfig:
    """编码器结构配置"""

    input_dim: int
    hidden_dims: Sequence[int] = (512, 256)
    latent_dim: int = 2
    activation: str = 'relu'
    seed: int = 0

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError(get_text('config_invalid', 'hidden_dims', self.hidden_dims))
        if self.latent_dim < 1:
            raise ValueError(get_text('config_invalid', 'latent_dim', self.latent_dim))
        if self.activation not in ACTIVATIONS:
            raise ValueError(get_text('config_invalid', 'activation', self.activation))

    @property
    def output_dim(self) -> int:
        # μ 和 log σ² 各占 N 个输出
        return 2 * self.latent_dim


@dataclass
class MLPWeights:
    """多层感知机权重，layers 中每层为 (W, b)"""

    layers: List[Tuple[Parameter, Parameter]] = field(default_factory=list)
    activation: str = 'relu'

    def parameters(self) -> List[Parameter]:
        return [p for layer in self.layers for p in layer]

    def named_arrays(self) -> Dict[str, np.ndarray]:
        return {p.name: p.value for p in self.parameters()}

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        """按名字载入数值（形状必须一致）"""
        for p in self.parameters():
            value = np.asarray(arrays[p.name], dtype=ad.DTYPE)
            if value.shape != p.value.shape:
                raise ValueError(get_text('checkpoint_shape_mismatch', p.name, p.value.shape, value.shape))
            p.value = value.copy()
            p.grad = np.zeros_like(p.value)

    def copy_values(self) -> Dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.parameters()}


def init_mlp(dims: Sequence[int], activation: str, seed: int, prefix: str) -> MLPWeights:
    """Glorot 均匀初始化：权重 ~ U(±√(6/(fan_in+fan_out)))，偏置为 0"""
    rng = np.random.default_rng(seed)
    weights = MLPWeights(activation=activation)
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = Parameter(rng.uniform(-limit, limit, size=(fan_in, fan_out)), name=f"{prefix}.{i}.W")
        b = Parameter(np.zeros(fan_out), name=f"{prefix}.{i}.b")
        weights.layers.append((w, b))
    return weights


def mlp_forward(x, weights: MLPWeights, tape: Optional[Tape] = None):
    """前向计算，最后一层不加激活；tape 为 None 时返回纯数值"""
    act = ACTIVATIONS[weights.activation]
    h = x
    last = len(weights.layers) - 1
    for i, (w, b) in enumerate(weights.layers):
        if tape is not None:
            w, b = tape.param(w), tape.param(b)
        else:
            w, b = w.value, b.value
        h = ad.matmul(h, w) + b
        if i < last:
            h = act(h)
    return h


def init_weights(config: EncoderConfig) -> MLPWeights:
    """初始化编码器权重"""
    dims = [config.input_dim, *config.hidden_dims, config.output_dim]
    return init_mlp(dims, config.activation, config.seed, prefix='encoder')


def encode(x, weights: MLPWeights, tape: Optional[Tape] = None) -> LatentParams:
    """
    编码输入为 LatentParams

    Args:
        x: 形状 (D,) 或 (B, D)
        weights: 编码器权重
        tape: 给定时记录计算以便求导

    Returns:
        μ 为前 N 个输出，σ = exp(½·clip(log σ², -10, 10))
    """
    x_value = ad.value_of(x)
    single = x_value.ndim == 1
    if not np.all(np.isfinite(x_value)):
        raise FloatingPointError(get_text('non_finite_input'))
    if single:
        x = ad.reshape(x, (1, x_value.shape[0]))

    out = mlp_forward(x, weights, tape)
    out_value = ad.value_of(out)
    if not np.all(np.isfinite(out_value)):
        raise FloatingPointError(get_text('non_finite_activation', 'encoder'))

    n = out_value.shape[-1] // 2
    mu = ad.getitem(out, (Ellipsis, slice(0, n)))
    logvar = ad.clip(ad.getitem(out, (Ellipsis, slice(n, 2 * n))), LOGVAR_MIN, LOGVAR_MAX)
    sigma = ad.exp(0.5 * logvar)
    if single:
        mu = ad.reshape(mu, (n,))
        sigma = ad.reshape(sigma, (n,))
    return LatentParams(mu, sigma)

