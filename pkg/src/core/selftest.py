"""
自检模块
不依赖 pytest 的三组检查：对数域后验与线性域暴力计算一致、端到端梯度与有限差分一致、各种归一化性质
"""

import math
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

try:
    # 尝试相对导入
    from . import autodiff as ad
    from .cipae import reconstruct
    from .encoder import EncoderConfig, init_weights, encode
    from .posterior import classification_loss, posterior_mc
    from .prob_core import LatentParams
    from .recorder import Recorder, RecordSnapshot
    from .regularization import kl_reg, total_loss
    from ..utils.i18n import log
except ImportError:
    # 回退到绝对导入
    from core import autodiff as ad
    from core.cipae import reconstruct
    from core.encoder import EncoderConfig, init_weights, encode
    from core.posterior import classification_loss, posterior_mc
    from core.prob_core import LatentParams
    from core.recorder import Recorder, RecordSnapshot
    from core.regularization import kl_reg, total_loss
    from utils.i18n import log


ORACLE_TOLERANCE = 1e-8
GRADIENT_TOLERANCE = 1e-4
NORMALIZATION_TOLERANCE = 1e-9


@dataclass
class SelfTestResult:
    name: str
    passed: bool
    value: float
    seconds: float


def random_snapshot(rng: np.random.Generator, n: int, latent_dim: int, classes: int) -> RecordSnapshot:
    """n 条随机记录，目标为 one-hot"""
    labels = rng.integers(0, classes, size=n)
    targets = np.eye(classes)[labels]
    mu = rng.normal(0.0, 1.0, size=(n, latent_dim))
    sigma = rng.uniform(0.5, 1.5, size=(n, latent_dim))
    return RecordSnapshot(targets, mu, sigma)


def brute_force_posterior(mu: np.ndarray, sigma: np.ndarray, snapshot: RecordSnapshot, noise: np.ndarray,
                          eps_stable: float) -> np.ndarray:
    """线性域逐项计算：对每次抽样 max(H, ε)/max(G, ε) 再取平均"""
    total = np.zeros(snapshot.num_targets)
    for eps in noise:
        z = mu + sigma * eps
        density = np.prod(np.exp(-0.5 * ((z - snapshot.mu) / snapshot.sigma) ** 2)
                          / (math.sqrt(2.0 * math.pi) * snapshot.sigma), axis=1)
        g = density.sum()
        h = density @ snapshot.targets
        total += np.maximum(h, eps_stable) / max(g, eps_stable)
    return total / len(noise)


def oracle_equivalence(cases: int = 200, seed: int = 0) -> float:
    """随机小实例上对数域与线性域结果的最大相对误差"""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 51))
        latent_dim = int(rng.integers(1, 4))
        classes = int(rng.integers(2, 5))
        draws = int(rng.integers(1, 5))
        snapshot = random_snapshot(rng, n, latent_dim, classes)
        mu = rng.normal(0.0, 1.0, size=latent_dim)
        sigma = rng.uniform(0.5, 1.5, size=latent_dim)
        noise = rng.standard_normal((draws, latent_dim))
        estimate = posterior_mc(LatentParams(mu, sigma), snapshot, draws, 1e-30, noise).values
        expected = brute_force_posterior(mu, sigma, snapshot, noise, 1e-30)
        error = np.abs(estimate - expected) / np.maximum(np.abs(expected), 1e-300)
        worst = max(worst, float(np.max(error)))
    return worst


def gradient_fidelity(seed: int = 0) -> float:
    """5 条记录、N=2、m=3 时端到端损失对全部编码器参数的梯度误差"""
    rng = np.random.default_rng(seed)
    snapshot = random_snapshot(rng, 5, 2, 3)
    weights = init_weights(EncoderConfig(4, (6,), 2, 'tanh', seed))
    x = rng.normal(0.0, 1.0, size=(3, 4))
    y = np.eye(3)[rng.integers(0, 3, size=3)]
    noise = rng.standard_normal((2, 2))

    def loss_fn(tape):
        theta = encode(x, weights, tape)
        estimate = posterior_mc(theta, snapshot, 2, 1e-30, noise)
        return total_loss(classification_loss(estimate, y), kl_reg(theta, 0.9))

    return ad.grad_check_parameters(loss_fn, weights.parameters(), floor=1e-6)


def normalization(cases: int = 1000, seed: int = 0) -> float:
    """
    归一化性质的最大偏差

    one-hot 后验之和为 1；CIPAE 对 y₁ 与 1-y₁ 的重建互补；kl_reg ≥ 0 且在 (μ=0, σ=1) 处恰为 0；
    记录器与长度为 T 的双端队列行为一致。偏差超过容差或性质不成立时返回 inf。
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        latent_dim = int(rng.integers(1, 4))
        snapshot = random_snapshot(rng, int(rng.integers(1, 20)), latent_dim, int(rng.integers(2, 5)))
        theta = LatentParams(rng.normal(0.0, 1.0, size=latent_dim), rng.uniform(0.5, 1.5, size=latent_dim))
        draws = int(rng.integers(1, 4))
        noise = rng.standard_normal((draws, latent_dim))

        probs = posterior_mc(theta, snapshot, draws, 1e-30, noise).values
        worst = max(worst, abs(float(probs.sum()) - 1.0))

        pixels = rng.uniform(0.0, 1.0, size=(len(snapshot), 5))
        on = reconstruct(theta, snapshot.with_targets(pixels), draws, 1e-30, noise)
        off = reconstruct(theta, snapshot.with_targets(1.0 - pixels), draws, 1e-30, noise)
        worst = max(worst, float(np.max(np.abs(on + off - 1.0))))

        gamma = float(rng.uniform(0.0, 1.0))
        if float(kl_reg(theta, gamma)) < 0.0 or float(kl_reg(LatentParams(np.zeros(latent_dim), np.ones(latent_dim)), gamma)) != 0.0:
            return math.inf

        if not _fifo_law(rng):
            return math.inf
    return worst


def _fifo_law(rng: np.random.Generator) -> bool:
    capacity = int(rng.integers(1, 8))
    recorder = Recorder(capacity)
    expected: deque = deque(maxlen=capacity)
    for _ in range(int(rng.integers(1, 4))):
        size = int(rng.integers(1, 6))
        mu = rng.normal(size=(size, 1))
        recorder.push_batch(np.ones((size, 1)), mu, np.ones((size, 1)))
        expected.extend(mu[:, 0])
    return np.array_equal(recorder.snapshot().mu[:, 0], np.array(expected))


SUITES: Dict[str, Callable[[], float]] = {
    'oracle': oracle_equivalence,
    'gradient': gradient_fidelity,
    'normalization': normalization,
}

TOLERANCES = {
    'oracle': ORACLE_TOLERANCE,
    'gradient': GRADIENT_TOLERANCE,
    'normalization': NORMALIZATION_TOLERANCE,
}


def run_selftests() -> List[SelfTestResult]:
    """依次运行全部检查并逐项打印结果"""
    results = []
    for name, suite in SUITES.items():
        started = time.perf_counter()
        value = suite()
        passed = math.isfinite(value) and value <= TOLERANCES[name]
        result = SelfTestResult(name, passed, value, time.perf_counter() - started)
        log('INFO' if passed else 'ERROR', 'selftest_result', name, 'ok' if passed else 'FAIL', f"{value:.3g}")
        results.append(result)
    return results
