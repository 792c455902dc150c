"""
可视化导出模块
潜变量散点表、二维潜空间上的类条件概率热图、重建网格与逐潜变量重建条带
图像统一用 Pillow 写成 PGM (P5)，可选同时写 PNG
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

try:
    # 尝试相对导入
    from .encoder import MLPWeights
    from .posterior import class_conditional, pairwise_log_density
    from .recorder import RecordSnapshot
    from .training import encode_dataset
    from ..utils.data_io import Dataset
    from ..utils.i18n import get_text, log
except ImportError:
    # 回退到绝对导入
    from core.encoder import MLPWeights
    from core.posterior import class_conditional, pairwise_log_density
    from core.recorder import RecordSnapshot
    from core.training import encode_dataset
    from utils.data_io import Dataset
    from utils.i18n import get_text, log


DEFAULT_RESOLUTION = 50
GRID_MARGIN = 1.0
STRIP_MARGIN = 2.0
STRIP_STEPS = 12

# 每次处理的网格点数
_CHUNK = 256


@dataclass
class GridSpec:
    """二维网格：每个轴的 (min, max) 与分辨率 R"""

    bounds: Tuple[Tuple[float, float], Tuple[float, float]]
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        self.bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(self.bounds) != 2:
            raise ValueError(get_text('grid_invalid', self.bounds))
        if any(lo >= hi for lo, hi in self.bounds):
            raise ValueError(get_text('grid_invalid', self.bounds))
        if int(self.resolution) < 2:
            raise ValueError(get_text('grid_invalid', f"resolution={self.resolution}"))
        self.resolution = int(self.resolution)

    @classmethod
    def around(cls, snapshot: RecordSnapshot, resolution: int = DEFAULT_RESOLUTION,
               margin: float = GRID_MARGIN) -> "GridSpec":
        """默认网格：每个轴 [min μ - 1, max μ + 1]"""
        _require_latent_dim(snapshot, 2)
        lo = snapshot.mu.min(axis=0) - margin
        hi = snapshot.mu.max(axis=0) + margin
        return cls(((lo[0], hi[0]), (lo[1], hi[1])), resolution)

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        (x0, x1), (y0, y1) = self.bounds
        return np.linspace(x0, x1, self.resolution), np.linspace(y0, y1, self.resolution)

    def points(self) -> np.ndarray:
        """
        网格点，形状 (R, R, 2)

        第 r 行第 c 列对应 z¹ = xs[c]、z² = ys[R-1-r]，即图像上方为 z² 较大的一侧。
        """
        xs, ys = self.axes()
        grid_x, grid_y = np.meshgrid(xs, ys[::-1])
        return np.stack([grid_x, grid_y], axis=-1)


def _require_latent_dim(snapshot: RecordSnapshot, n: int) -> None:
    if snapshot.latent_dim != n:
        raise ValueError(get_text('latent_dim_unsupported', n, snapshot.latent_dim))


def write_pgm(path, image: np.ndarray, png: bool = False) -> Path:
    """把 uint8 灰度数组写成 PGM (P5)，maxval 255"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    picture = Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8))
    picture.save(path, format='PPM')
    if png:
        picture.save(path.with_suffix('.png'), format='PNG')
    log('DEBUG', 'image_written', path)
    return path


def read_pgm(path) -> np.ndarray:
    """读回灰度图像"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(get_text('file_not_found', path))
    with Image.open(path) as picture:
        if picture.mode != 'L':
            raise ValueError(get_text('pgm_bad_header', path))
        return np.asarray(picture, dtype=np.uint8).copy()


def _to_gray(values: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def export_latent_scatter(weights: MLPWeights, dataset: Dataset, path) -> Path:
    """每个样本一行：mu_1..mu_N, sigma_1..sigma_N, label"""
    mu, sigma = encode_dataset(weights, dataset)
    n = mu.shape[1]
    header = ','.join([f"mu_{i}" for i in range(1, n + 1)] + [f"sigma_{i}" for i in range(1, n + 1)] + ['label'])
    table = np.column_stack([mu, sigma, dataset.labels])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # 17 位有效数字，float64 可原样读回
    fmt = ['%.17g'] * (2 * n) + ['%d']
    np.savetxt(path, table, delimiter=',', header=header, comments='', fmt=fmt)
    return path


def class_probability_grid(snapshot: RecordSnapshot, grid: GridSpec, label: int) -> np.ndarray:
    """网格点处的 exp(logH[l] - logG)，形状 (R, R)"""
    _require_latent_dim(snapshot, 2)
    if not 0 <= label < snapshot.num_targets:
        raise ValueError(get_text('config_invalid', 'label', label))
    points = grid.points().reshape(-1, 2)
    values = [class_conditional(points[start:start + _CHUNK], snapshot)[:, label]
              for start in range(0, len(points), _CHUNK)]
    return np.concatenate(values).reshape(grid.resolution, grid.resolution)


def export_class_heatmap(snapshot: RecordSnapshot, grid: GridSpec, label: int, path, png: bool = False) -> Path:
    """R×R 灰度图，像素 = 255·(1 - p)，概率 1 为黑"""
    probs = class_probability_grid(snapshot, grid, label)
    return write_pgm(path, _to_gray(1.0 - probs), png)


def reconstruct_at(z: np.ndarray, snapshot: RecordSnapshot, dims: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    固定 z 处的确定性重建：Σ_k w_k y₁(k)，w_k = exp(jld(z, θ_k) - logG)

    snapshot 的 targets 即像素目标；分类模型先取 pixel_view()。
    """
    z = np.asarray(z, dtype=np.float64)
    jld = pairwise_log_density(z, snapshot, dims)
    log_g = np.logaddexp.reduce(jld, axis=-1, keepdims=True)
    return np.exp(jld - log_g) @ snapshot.targets


def _pixel_snapshot(snapshot: RecordSnapshot) -> RecordSnapshot:
    return snapshot.pixel_view() if snapshot.pixels is not None else snapshot


def _tile(images: np.ndarray, image_shape: Tuple[int, int]) -> np.ndarray:
    """(rows, cols, J) 的重建拼成一张大图"""
    rows, cols = images.shape[:2]
    h, w = image_shape
    tiles = images.reshape(rows, cols, h, w).transpose(0, 2, 1, 3)
    return tiles.reshape(rows * h, cols * w)


def export_reconstruction_grid(snapshot: RecordSnapshot, grid: GridSpec, path,
                               image_shape: Tuple[int, int] = (28, 28), png: bool = False) -> Path:
    """每个网格点渲染一张重建图，不采样"""
    _require_latent_dim(snapshot, 2)
    pixels = _pixel_snapshot(snapshot)
    points = grid.points().reshape(-1, 2)
    recon = np.concatenate([reconstruct_at(points[start:start + _CHUNK], pixels)
                            for start in range(0, len(points), _CHUNK)])
    if recon.shape[-1] != image_shape[0] * image_shape[1]:
        raise ValueError(get_text('pixel_count_mismatch', recon.shape, image_shape))
    recon = recon.reshape(grid.resolution, grid.resolution, -1)
    return write_pgm(path, _to_gray(_tile(recon, image_shape)), png)


def latent_sweeps(mu: np.ndarray, steps: int = STRIP_STEPS, margin: float = STRIP_MARGIN) -> List[np.ndarray]:
    """每个潜变量在 [min μᵢ - 2, max μᵢ + 2] 上等距取 steps 个点"""
    return [np.linspace(mu[:, i].min() - margin, mu[:, i].max() + margin, steps) for i in range(mu.shape[1])]


def export_per_latent_strip(weights: Optional[MLPWeights], snapshot: RecordSnapshot, dataset: Optional[Dataset],
                            path, image_shape: Tuple[int, int] = (28, 28), steps: int = STRIP_STEPS,
                            png: bool = False) -> Path:
    """
    N 行，第 i 行只用第 i 个潜变量扫描重建

    扫描范围取自 dataset 的编码 μ；没有 dataset 时取快照中的 μ。
    """
    if weights is not None and dataset is not None:
        mu, _ = encode_dataset(weights, dataset)
    else:
        mu = snapshot.mu
    pixels = _pixel_snapshot(snapshot)
    rows = []
    for i, sweep in enumerate(latent_sweeps(mu, steps)):
        z = np.zeros((steps, pixels.latent_dim))
        z[:, i] = sweep
        rows.append(reconstruct_at(z, pixels, dims=[i]))
    recon = np.stack(rows)
    if recon.shape[-1] != image_shape[0] * image_shape[1]:
        raise ValueError(get_text('pixel_count_mismatch', recon.shape, image_shape))
    return write_pgm(path, _to_gray(_tile(recon, image_shape)), png)
