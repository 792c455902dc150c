"""
记录器 Θ
保存最近 T 条训练记录 (目标, μ, σ)，作为后验中经验求和的来源
"""

from dataclasses import dataclass
from typing import List, Optional

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


def _validate_record(targets: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> None:
    if np.any(targets < 0.0) or np.any(targets > 1.0) or not np.all(np.isfinite(targets)):
        raise ValueError(get_text('record_target_range'))
    if mu.shape != sigma.shape:
        raise ValueError(get_text('latent_shape_mismatch', mu.shape, sigma.shape))
    if not np.all(sigma > 0.0):
        raise ValueError(get_text('sigma_not_positive'))


@dataclass
class RecordEntry:
    """一条记录：目标向量 (one-hot 标签或像素 Bernoulli 参数) 与 μ、σ"""

    targets: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    # 分类训练时可同时保存像素，用于 CIPAE 可视化
    pixels: Optional[np.ndarray] = None

    def __post_init__(self):
        # 记录一律断开梯度
        self.targets = np.array(ad.value_of(self.targets), dtype=ad.DTYPE)
        self.mu = np.array(ad.value_of(self.mu), dtype=ad.DTYPE)
        self.sigma = np.array(ad.value_of(self.sigma), dtype=ad.DTYPE)
        if self.pixels is not None:
            self.pixels = np.array(self.pixels, dtype=ad.DTYPE)
        _validate_record(self.targets, self.mu, self.sigma)


@dataclass(frozen=True)
class RecordSnapshot:
    """记录器的只读快照，按时间从旧到新排列"""

    targets: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    pixels: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.mu) == 0:
            raise ValueError(get_text('recorder_empty'))
        for array in (self.targets, self.mu, self.sigma, self.pixels):
            if array is not None:
                array.setflags(write=False)

    def __len__(self) -> int:
        return len(self.mu)

    @property
    def params(self) -> LatentParams:
        return LatentParams(self.mu, self.sigma)

    @property
    def num_targets(self) -> int:
        return self.targets.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.mu.shape[1]

    def with_targets(self, targets: np.ndarray) -> "RecordSnapshot":
        """换一组目标（例如用像素代替标签）"""
        return RecordSnapshot(np.array(targets, dtype=ad.DTYPE), self.mu.copy(), self.sigma.copy(),
                              None if self.pixels is None else self.pixels.copy())

    def pixel_view(self) -> "RecordSnapshot":
        """以像素为目标的快照，供 CIPAE 重建与可视化"""
        if self.pixels is None:
            raise ValueError(get_text('snapshot_no_pixels'))
        return self.with_targets(self.pixels)

    @classmethod
    def from_entries(cls, entries: List[RecordEntry]) -> "RecordSnapshot":
        if not entries:
            raise ValueError(get_text('recorder_empty'))
        pixels = None
        if all(e.pixels is not None for e in entries):
            pixels = np.stack([e.pixels for e in entries])
        return cls(np.stack([e.targets for e in entries]), np.stack([e.mu for e in entries]),
                   np.stack([e.sigma for e in entries]), pixels)


class Recorder:
    """
    先进先出的遗忘窗口

    内部是定长环形缓冲区；超过容量 T 时最旧的记录被覆盖。
    """

    def __init__(self, capacity: int, track_pixels: bool = False):
        if capacity < 1:
            raise ValueError(get_text('config_invalid', 'forget', capacity))
        self.capacity = int(capacity)
        self.track_pixels = track_pixels
        self._targets: Optional[np.ndarray] = None
        self._mu: Optional[np.ndarray] = None
        self._sigma: Optional[np.ndarray] = None
        self._pixels: Optional[np.ndarray] = None
        # 下一个写入位置与当前条数
        self._head = 0
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def _allocate(self, num_targets: int, latent_dim: int, num_pixels: Optional[int]) -> None:
        self._targets = np.zeros((self.capacity, num_targets), dtype=ad.DTYPE)
        self._mu = np.zeros((self.capacity, latent_dim), dtype=ad.DTYPE)
        self._sigma = np.ones((self.capacity, latent_dim), dtype=ad.DTYPE)
        if self.track_pixels:
            self._pixels = np.zeros((self.capacity, num_pixels or 0), dtype=ad.DTYPE)

    def push(self, entry: RecordEntry) -> "Recorder":
        """追加一条记录，超出容量时淘汰最旧的"""
        return self.push_batch(entry.targets[None], entry.mu[None], entry.sigma[None],
                               None if entry.pixels is None else entry.pixels[None])

    def push_batch(self, targets, mu, sigma, pixels=None) -> "Recorder":
        """按顺序追加一批记录；μ、σ 以常量形式保存"""
        targets = np.atleast_2d(np.asarray(targets, dtype=ad.DTYPE))
        mu = np.atleast_2d(np.array(ad.value_of(mu), dtype=ad.DTYPE))
        sigma = np.atleast_2d(np.array(ad.value_of(sigma), dtype=ad.DTYPE))
        _validate_record(targets, mu, sigma)
        if self.track_pixels and pixels is None:
            raise ValueError(get_text('snapshot_no_pixels'))

        if self._mu is None:
            self._allocate(targets.shape[1], mu.shape[1],
                           None if pixels is None else np.shape(pixels)[-1])
        elif targets.shape[1] != self._targets.shape[1] or mu.shape[1] != self._mu.shape[1]:
            raise ValueError(get_text('record_shape_mismatch', targets.shape, mu.shape))

        # 一批超过容量时只有最后 T 条会留下
        start = max(0, len(mu) - self.capacity)
        for i in range(start, len(mu)):
            self._targets[self._head] = targets[i]
            self._mu[self._head] = mu[i]
            self._sigma[self._head] = sigma[i]
            if self.track_pixels:
                self._pixels[self._head] = pixels[i]
            self._head = (self._head + 1) % self.capacity
            self._count = min(self._count + 1, self.capacity)
        return self

    def _order(self) -> np.ndarray:
        if self._count < self.capacity:
            return np.arange(self._count)
        return (np.arange(self.capacity) + self._head) % self.capacity

    def snapshot(self, with_pixels: bool = True) -> RecordSnapshot:
        """不可变副本，之后的 push 不影响它；with_pixels=False 时不复制像素"""
        if self._count == 0:
            raise ValueError(get_text('recorder_empty'))
        order = self._order()
        pixels = self._pixels[order] if self.track_pixels and with_pixels else None
        return RecordSnapshot(self._targets[order], self._mu[order], self._sigma[order], pixels)
