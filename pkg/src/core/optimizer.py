"""
优化器
Adam（带偏差修正）与普通梯度下降，更新后梯度清零
"""

from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

try:
    # 尝试相对导入
    from .autodiff import Parameter
except ImportError:
    # 回退到绝对导入
    from core.autodiff import Parameter


@dataclass
class AdamState:
    """一阶、二阶矩估计与步数"""

    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: Dict[int, np.ndarray] = field(default_factory=dict)
    v: Dict[int, np.ndarray] = field(default_factory=dict)


def adam_step(parameters: Sequence[Parameter], state: AdamState, lr: float) -> AdamState:
    """一次 Adam 更新：param -= (lr / bc1) · m / (sqrt(v / bc2) + ε̂)"""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    step_size = lr / bc1

    for p in parameters:
        key = id(p)
        g = p.grad
        if key not in state.m:
            state.m[key] = np.zeros_like(p.value)
            state.v[key] = np.zeros_like(p.value)

        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)

        denom = np.sqrt(v / bc2) + state.epsilon
        p.value -= step_size * m / denom
        p.zero_grad()
    return state


def sgd_step(parameters: Sequence[Parameter], lr: float) -> None:
    """W = W - η∇L(W)"""
    for p in parameters:
        p.value -= lr * p.grad
        p.zero_grad()
