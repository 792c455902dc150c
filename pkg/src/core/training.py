"""
训练模块
训练循环：分类（CIPNN，可同时做 CIPAE 可视化）与自编码（CIPAE / VAE，由 CIPNN 评估）
"""

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

try:
    # 尝试相对导入
    from . import autodiff as ad
    from .autodiff import Tape
    from .checkpoint import save_checkpoint
    from .cipae import bce_loss, pixel_targets, reconstruct
    from .encoder import ACTIVATIONS, EncoderConfig, MLPWeights, encode, init_weights
    from .optimizer import AdamState, adam_step, sgd_step
    from .posterior import (DEFAULT_EPS_STABLE, class_conditional, classification_loss,
                            posterior_mc, predict)
    from .prob_core import standard_normal
    from .recorder import Recorder, RecordSnapshot
    from .regularization import kl_reg, total_loss
    from .vae_baseline import DecoderConfig, init_decoder_weights, vae_step_loss
    from ..utils.data_io import Dataset
    from ..utils.i18n import get_text, log
except ImportError:
    # 回退到绝对导入
    from core import autodiff as ad
    from core.autodiff import Tape
    from core.checkpoint import save_checkpoint
    from core.cipae import bce_loss, pixel_targets, reconstruct
    from core.encoder import ACTIVATIONS, EncoderConfig, MLPWeights, encode, init_weights
    from core.optimizer import AdamState, adam_step, sgd_step
    from core.posterior import (DEFAULT_EPS_STABLE, class_conditional, classification_loss,
                                posterior_mc, predict)
    from core.prob_core import standard_normal
    from core.recorder import Recorder, RecordSnapshot
    from core.regularization import kl_reg, total_loss
    from core.vae_baseline import DecoderConfig, init_decoder_weights, vae_step_loss
    from utils.data_io import Dataset
    from utils.i18n import get_text, log


SETUPS = ('classify', 'autoencode-cipae', 'autoencode-vae')
OPTIMIZERS = ('adam', 'sgd')


@dataclass
class TrainConfig:
    """训练的全部超参数；默认值：批大小 64、C=2、T=3000"""

    latent_dim: int = 2
    forget: int = 3000
    mc_draws: int = 2
    gamma: float = 0.9
    eps_stable: float = DEFAULT_EPS_STABLE
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0
    setup: str = 'classify'
    hidden_dims: Tuple[int, ...] = (512, 256)
    decoder_hidden_dims: Tuple[int, ...] = (256, 512)
    activation: str = 'relu'
    optimizer: str = 'adam'
    # False 时不加 L₂（γ 扫描中的对照）
    use_l2: bool = True
    # 分类时同时记录像素，供 CIPAE 可视化
    track_pixels: bool = True
    eval_batch_size: int = 128
    train_subset: Optional[int] = None

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        self.decoder_hidden_dims = tuple(int(h) for h in self.decoder_hidden_dims)
        self.validate()

    def validate(self) -> "TrainConfig":
        checks = [
            ('latent_dim', self.latent_dim >= 1),
            ('forget', self.forget >= self.batch_size),
            ('mc_draws', self.mc_draws >= 1),
            ('gamma', 0.0 <= self.gamma <= 1.0),
            ('eps_stable', self.eps_stable >= 0.0),
            ('learning_rate', self.learning_rate > 0.0),
            ('batch_size', self.batch_size >= 1),
            ('epochs', self.epochs >= 0),
            ('setup', self.setup in SETUPS),
            ('activation', self.activation in ACTIVATIONS),
            ('optimizer', self.optimizer in OPTIMIZERS),
            ('eval_batch_size', self.eval_batch_size >= 1),
            ('train_subset', self.train_subset is None or self.train_subset >= 1),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(get_text('config_invalid', name, getattr(self, name)))
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['hidden_dims'] = list(self.hidden_dims)
        data['decoder_hidden_dims'] = list(self.decoder_hidden_dims)
        return data


@dataclass
class EpochMetrics:
    """一个 epoch 的记录"""

    epoch: int
    l1: float
    l2: float
    test_acc: Optional[float]
    seconds: float


@dataclass
class Metrics:
    epochs: List[EpochMetrics] = field(default_factory=list)

    @property
    def final_accuracy(self) -> Optional[float]:
        return self.epochs[-1].test_acc if self.epochs else None


@dataclass
class TrainResult:
    """训练产物：编码器、（VAE 时）解码器、评估用快照、指标"""

    encoder: MLPWeights
    snapshot: RecordSnapshot
    metrics: Metrics
    config: TrainConfig
    decoder: Optional[MLPWeights] = None


class TrainingDiverged(FloatingPointError):
    """损失出现非有限值；checkpoint_path 指向最后一个正常的检查点"""

    def __init__(self, message: str, checkpoint_path: Optional[Path] = None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


class MetricsWriter:
    """逐行写 JSON 记录"""

    def __init__(self, path: Optional[Path]):
        self.path = path
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text('', encoding='utf-8')

    def write(self, record: EpochMetrics) -> None:
        if self.path is None:
            return
        with open(self.path, 'a', encoding='utf-8') as f:
            f.write(json.dumps(asdict(record)) + '\n')


def _batches(order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        yield order[start:start + batch_size]


def _optimizer_step(parameters, state: AdamState, config: TrainConfig) -> None:
    if config.optimizer == 'adam':
        adam_step(parameters, state, config.learning_rate)
    else:
        sgd_step(parameters, config.learning_rate)


def _regularizer(theta, config: TrainConfig) -> Tuple[Any, Any]:
    """返回 (加入损失的 L₂, 用于记录的 L₂)"""
    l2 = ad.mean(kl_reg(theta, config.gamma))
    return (l2 if config.use_l2 else 0.0), l2


def _scalar(x) -> float:
    return float(ad.value_of(x))


def _encoder_for(config: TrainConfig, dataset: Dataset) -> MLPWeights:
    return init_weights(EncoderConfig(dataset.input_dim, config.hidden_dims, config.latent_dim,
                                      config.activation, config.seed))


def evaluate(weights: MLPWeights, snapshot: RecordSnapshot, test_set: Dataset, config: TrainConfig) -> float:
    """测试集准确率；同一 seed 下结果确定"""
    if len(test_set) == 0:
        raise ValueError(get_text('dataset_empty'))
    correct = 0
    for start in range(0, len(test_set), config.eval_batch_size):
        x = test_set.images[start:start + config.eval_batch_size]
        _, predicted = predict(x, weights, snapshot, config.mc_draws, config.eps_stable, config.seed)
        correct += int(np.sum(predicted == test_set.labels[start:start + config.eval_batch_size]))
    return correct / len(test_set)


def encode_dataset(weights: MLPWeights, dataset: Dataset, batch_size: int = 512) -> Tuple[np.ndarray, np.ndarray]:
    """整个数据集的 (μ, σ)，不求导"""
    mus, sigmas = [], []
    for start in range(0, len(dataset), batch_size):
        theta = encode(dataset.images[start:start + batch_size], weights)
        mus.append(theta.mu)
        sigmas.append(theta.sigma)
    return np.concatenate(mus), np.concatenate(sigmas)


def fit_eval_head(weights: MLPWeights, dataset: Dataset, config: TrainConfig) -> RecordSnapshot:
    """
    冻结编码器后的 CIPNN 评估头

    头部没有可训练参数：把 T 个训练样本的 (标签, μ, σ) 写入记录器即可。
    """
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(dataset))[-config.forget:]
    subset = Dataset(dataset.images[order], dataset.labels[order], dataset.num_classes, dataset.image_shape)
    mu, sigma = encode_dataset(weights, subset)
    recorder = Recorder(config.forget, track_pixels=subset.image_shape is not None)
    recorder.push_batch(subset.one_hot(), mu, sigma,
                        pixels=subset.images if subset.image_shape is not None else None)
    return recorder.snapshot()


def _finish_epoch(epoch: int, sums: np.ndarray, batches: int, started: float, test_acc: Optional[float],
                  metrics: Metrics, writer: MetricsWriter) -> None:
    l1, l2 = sums / max(batches, 1)
    record = EpochMetrics(epoch, float(l1), float(l2), test_acc, time.perf_counter() - started)
    metrics.epochs.append(record)
    writer.write(record)
    acc_text = '-' if test_acc is None else f"{test_acc:.4f}"
    log('INFO', 'epoch_summary', epoch, record.l1, record.l2, acc_text, record.seconds)


def _diverged(error: Exception, weights: MLPWeights, last_good: Dict[str, np.ndarray],
              snapshot: Optional[RecordSnapshot], config: TrainConfig, out_dir: Optional[Path],
              decoder: Optional[MLPWeights] = None, decoder_good: Optional[Dict] = None) -> TrainingDiverged:
    """恢复到上一个 epoch 结束时的权重，必要时写出检查点"""
    weights.load_arrays(last_good)
    if decoder is not None and decoder_good is not None:
        decoder.load_arrays(decoder_good)
    path = None
    if out_dir is not None and snapshot is not None:
        path = save_checkpoint(Path(out_dir) / 'last_good.npz', weights, snapshot, config.to_dict(), decoder)
    log('ERROR', 'training_diverged', error)
    return TrainingDiverged(get_text('training_diverged', error), path)


def train_classify(config: TrainConfig, dataset: Dataset, test_set: Optional[Dataset] = None,
                   out_dir: Optional[Path] = None) -> TrainResult:
    """
    有监督分类（CIPNN）

    每个批次：编码 → 把断开梯度的记录写入记录器（先于后验计算）→ 用共享噪声
    求后验 → 交叉熵 + 平均 KL 正则 → 优化器更新。
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    weights = _encoder_for(config, dataset)
    parameters = weights.parameters()
    track_pixels = config.track_pixels and dataset.image_shape is not None
    recorder = Recorder(config.forget, track_pixels=track_pixels)
    state = AdamState()
    metrics = Metrics()
    writer = MetricsWriter(None if out_dir is None else Path(out_dir) / 'metrics.jsonl')
    last_good = weights.copy_values()
    good_snapshot: Optional[RecordSnapshot] = None
    log('DEBUG', 'training_start', config.setup, len(dataset))

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        sums = np.zeros(2)
        batches = 0
        for index in _batches(rng.permutation(len(dataset)), config.batch_size):
            x = dataset.images[index]
            y = dataset.one_hot(index)
            try:
                tape = Tape()
                theta = encode(x, weights, tape)
                recorder.push_batch(y, theta.mu, theta.sigma, pixels=x if track_pixels else None)
                noise = standard_normal(rng, (config.mc_draws, config.latent_dim))
                window = recorder.snapshot(with_pixels=False)
                estimate = posterior_mc(theta, window, config.mc_draws, config.eps_stable, noise)
                l1 = classification_loss(estimate, y)
                l2_loss, l2 = _regularizer(theta, config)
                loss = total_loss(l1, l2_loss)
                tape.backward(loss)
            except FloatingPointError as e:
                raise _diverged(e, weights, last_good, good_snapshot, config, out_dir)
            _optimizer_step(parameters, state, config)
            sums += (_scalar(l1), _scalar(l2))
            batches += 1

        snapshot = recorder.snapshot()
        test_acc = evaluate(weights, snapshot, test_set, config) if test_set is not None else None
        _finish_epoch(epoch, sums, batches, started, test_acc, metrics, writer)
        last_good = weights.copy_values()
        good_snapshot = snapshot

    snapshot = good_snapshot if good_snapshot is not None else fit_eval_head(weights, dataset, config)
    return TrainResult(weights, snapshot, metrics, config)


def train_autoencoder(config: TrainConfig, dataset: Dataset, test_set: Optional[Dataset] = None,
                      out_dir: Optional[Path] = None) -> TrainResult:
    """
    自编码训练（CIPAE 或 VAE 对照），之后用冻结潜变量上的 CIPNN 头评估

    标签只在评估时使用。
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    weights = _encoder_for(config, dataset)
    decoder = None
    if config.setup == 'autoencode-vae':
        decoder = init_decoder_weights(DecoderConfig(config.latent_dim, config.decoder_hidden_dims,
                                                     dataset.input_dim, config.activation, config.seed + 1))
    parameters = weights.parameters() + (decoder.parameters() if decoder is not None else [])
    recorder = Recorder(config.forget)
    state = AdamState()
    metrics = Metrics()
    writer = MetricsWriter(None if out_dir is None else Path(out_dir) / 'metrics.jsonl')
    last_good = weights.copy_values()
    decoder_good = decoder.copy_values() if decoder is not None else None
    good_snapshot: Optional[RecordSnapshot] = None
    log('DEBUG', 'training_start', config.setup, len(dataset))

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        sums = np.zeros(2)
        batches = 0
        for index in _batches(rng.permutation(len(dataset)), config.batch_size):
            targets = pixel_targets(dataset.images[index])
            try:
                tape = Tape()
                if decoder is None:
                    theta = encode(targets.y1, weights, tape)
                    recorder.push_batch(targets.y1, theta.mu, theta.sigma)
                    noise = standard_normal(rng, (config.mc_draws, config.latent_dim))
                    recon = reconstruct(theta, recorder.snapshot(), config.mc_draws, config.eps_stable, noise)
                    l1 = bce_loss(recon, targets)
                    l2_loss, l2 = _regularizer(theta, config)
                    loss = total_loss(l1, l2_loss)
                else:
                    noise = standard_normal(rng, (len(index), config.latent_dim))
                    loss, l1, l2 = vae_step_loss(targets.y1, weights, decoder, config.gamma, noise, tape,
                                                 config.use_l2)
                tape.backward(loss)
            except FloatingPointError as e:
                raise _diverged(e, weights, last_good, good_snapshot, config, out_dir, decoder, decoder_good)
            _optimizer_step(parameters, state, config)
            sums += (_scalar(l1), _scalar(l2))
            batches += 1

        test_acc = None
        if test_set is not None:
            good_snapshot = fit_eval_head(weights, dataset, config)
            test_acc = evaluate(weights, good_snapshot, test_set, config)
        _finish_epoch(epoch, sums, batches, started, test_acc, metrics, writer)
        last_good = weights.copy_values()
        decoder_good = decoder.copy_values() if decoder is not None else None

    snapshot = good_snapshot if good_snapshot is not None else fit_eval_head(weights, dataset, config)
    return TrainResult(weights, snapshot, metrics, config, decoder)


def train(config: TrainConfig, dataset: Dataset, test_set: Optional[Dataset] = None,
          out_dir: Optional[Path] = None) -> TrainResult:
    """按 setup 分派"""
    if config.setup == 'classify':
        return train_classify(config, dataset, test_set, out_dir)
    return train_autoencoder(config, dataset, test_set, out_dir)


def train_repeated(config: TrainConfig, dataset: Dataset, test_set: Dataset, seeds: Sequence[int]) -> List[float]:
    """不同随机种子重复训练，返回每次的测试准确率"""
    accuracies = []
    for seed in seeds:
        run_config = TrainConfig(**{**config.to_dict(), 'seed': int(seed)})
        result = train(run_config, dataset, test_set)
        accuracies.append(result.metrics.final_accuracy)
    return accuracies


def dominant_class_fraction(weights: MLPWeights, snapshot: RecordSnapshot, dataset: Dataset,
                            threshold: float = 0.95) -> float:
    """
    收敛性质：在训练样本的 μ 处，最大的类条件项 exp(logH - logG) ≥ threshold 的比例

    收敛到全局最优时每个联合采样区域只对应一个类别。
    """
    mu, _ = encode_dataset(weights, dataset)
    hits = 0
    for start in range(0, len(mu), 256):
        conditional = class_conditional(mu[start:start + 256], snapshot)
        hits += int(np.sum(conditional.max(axis=-1) >= threshold))
    return hits / len(mu)


def latent_extent(weights: MLPWeights, dataset: Dataset) -> Dict[str, Any]:
    """潜空间范围：μ 的包围盒与平均 σ"""
    mu, sigma = encode_dataset(weights, dataset)
    return {
        'mu_min': mu.min(axis=0).tolist(),
        'mu_max': mu.max(axis=0).tolist(),
        'mean_sigma': float(sigma.mean()),
    }
