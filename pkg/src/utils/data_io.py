"""
数据读写模块
读取 MNIST / Fashion-MNIST 的 IDX 文件，生成合成高斯团数据，按需下载数据集
"""

import gzip
import math
import struct
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

try:
    # 尝试相对导入
    from .i18n import get_text, log
except ImportError:
    # 回退到绝对导入
    from utils.i18n import get_text, log


# IDX 魔数
IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049

# 数据集文件名与下载地址
DATASET_FILES = {
    'train': ('train-images-idx3-ubyte.gz', 'train-labels-idx1-ubyte.gz'),
    'test': ('t10k-images-idx3-ubyte.gz', 't10k-labels-idx1-ubyte.gz'),
}

DATASET_URLS = {
    'mnist': 'https://ossci-datasets.s3.amazonaws.com/mnist/',
    'fashion-mnist': 'http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/',
}

# 解压后的期望字节数：头部 + 数据
EXPECTED_SIZES = {
    'train': (16 + 60000 * 784, 8 + 60000),
    'test': (16 + 10000 * 784, 8 + 10000),
}


@dataclass
class Dataset:
    """图像（已缩放到 [0,1]）与整数标签"""

    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    image_shape: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != len(self.labels):
            raise ValueError(get_text('dataset_count_mismatch', len(self.images), len(self.labels)))
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(get_text('dataset_label_range', self.num_classes))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def input_dim(self) -> int:
        return self.images.shape[1]

    def one_hot(self, index=slice(None)) -> np.ndarray:
        labels = self.labels[index]
        out = np.zeros((len(labels), self.num_classes))
        out[np.arange(len(labels)), labels] = 1.0
        return out

    def subset(self, count: Optional[int], seed: int = 0) -> "Dataset":
        """随机取 count 个样本（None 表示全部）"""
        if count is None or count >= len(self):
            return self
        order = np.random.default_rng(seed).permutation(len(self))[:count]
        return Dataset(self.images[order], self.labels[order], self.num_classes, self.image_shape)


def _open_idx(path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(get_text('file_not_found', path))
    opener = gzip.open if path.suffix == '.gz' else open
    with opener(path, 'rb') as f:
        return f.read()


def _read_header(data: bytes, magic: int, dims: int, path) -> Tuple[int, ...]:
    header_size = 4 * (1 + dims)
    if len(data) < header_size:
        raise ValueError(get_text('idx_truncated', path, len(data), header_size))
    values = struct.unpack('>' + 'i' * (1 + dims), data[:header_size])
    if values[0] != magic:
        raise ValueError(get_text('idx_bad_magic', path, 0, values[0], magic))
    return values[1:]


def read_idx_images(path) -> np.ndarray:
    """
    读取 IDX 图像文件

    格式（大端）：i32 魔数 2051 | i32 数量 | i32 行数 | i32 列数 | u8[] 像素

    Returns:
        形状 (count, rows*cols)、缩放到 [0,1] 的数组
    """
    data = _open_idx(path)
    count, rows, cols = _read_header(data, IDX_IMAGE_MAGIC, 3, path)
    expected = 16 + count * rows * cols
    if len(data) < expected:
        raise ValueError(get_text('idx_truncated', path, len(data), expected))
    pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def read_idx_shape(path) -> Tuple[int, int]:
    """图像的 (行, 列)，只读文件头"""
    opener = gzip.open if Path(path).suffix == '.gz' else open
    with opener(path, 'rb') as f:
        header = f.read(16)
    _, rows, cols = _read_header(header, IDX_IMAGE_MAGIC, 3, path)
    return rows, cols


def read_idx_labels(path) -> np.ndarray:
    """读取 IDX 标签文件：i32 魔数 2049 | i32 数量 | u8[] 标签"""
    data = _open_idx(path)
    (count,) = _read_header(data, IDX_LABEL_MAGIC, 1, path)
    expected = 8 + count
    if len(data) < expected:
        raise ValueError(get_text('idx_truncated', path, len(data), expected))
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=8).astype(np.int64)


def write_idx_images(path, images: np.ndarray, rows: int, cols: int) -> None:
    """写 IDX 图像文件；[0,1] 的输入先乘 255"""
    images = np.asarray(images)
    if images.size and images.max() <= 1.0 and images.dtype.kind == 'f':
        images = np.rint(images * 255.0)
    raw = images.reshape(len(images), rows * cols).astype(np.uint8).tobytes()
    payload = struct.pack('>iiii', IDX_IMAGE_MAGIC, len(images), rows, cols) + raw
    opener = gzip.open if str(path).endswith('.gz') else open
    with opener(path, 'wb') as f:
        f.write(payload)


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels).astype(np.uint8)
    payload = struct.pack('>ii', IDX_LABEL_MAGIC, len(labels)) + labels.tobytes()
    opener = gzip.open if str(path).endswith('.gz') else open
    with opener(path, 'wb') as f:
        f.write(payload)


def make_blobs(per_class: int, classes: int = 3, input_dim: int = 2, spread: float = 0.3,
               seed: int = 0) -> Dataset:
    """
    合成高斯团

    类中心在前两维上等距分布于半径 4 的圆周，其余维为 0；样本 = 中心 + N(0, spread²)。
    """
    if classes < 2:
        raise ValueError(get_text('config_invalid', 'classes', classes))
    if input_dim < 2:
        raise ValueError(get_text('config_invalid', 'input_dim', input_dim))
    rng = np.random.default_rng(seed)
    angles = 2.0 * math.pi * np.arange(classes) / classes
    centers = np.zeros((classes, input_dim))
    centers[:, 0] = 4.0 * np.cos(angles)
    centers[:, 1] = 4.0 * np.sin(angles)

    labels = np.repeat(np.arange(classes), per_class)
    images = centers[labels] + spread * rng.standard_normal((len(labels), input_dim))
    order = rng.permutation(len(labels))
    return Dataset(images[order], labels[order], classes)


def fetch_dataset(name: str, root) -> Path:
    """数据文件不存在时下载，并校验解压后的长度"""
    if name not in DATASET_URLS:
        raise ValueError(get_text('unknown_dataset', name))
    target = Path(root) / name
    target.mkdir(parents=True, exist_ok=True)
    for split, files in DATASET_FILES.items():
        for filename, expected in zip(files, EXPECTED_SIZES[split]):
            path = target / filename
            if not path.exists():
                log('INFO', 'downloading', DATASET_URLS[name] + filename)
                urllib.request.urlretrieve(DATASET_URLS[name] + filename, path)
            size = len(_open_idx(path))
            if size != expected:
                raise ValueError(get_text('idx_size_mismatch', path, size, expected))
    return target


def load_idx_dataset(name: str, split: str, root, download: bool = False) -> Dataset:
    """读取 mnist / fashion-mnist 的官方 train / test 划分"""
    if name not in DATASET_URLS:
        raise ValueError(get_text('unknown_dataset', name))
    folder = Path(root) / name
    image_file, label_file = DATASET_FILES[split]
    try:
        image_path = _find_file(folder, image_file)
    except FileNotFoundError:
        if not download:
            raise
        fetch_dataset(name, root)
        image_path = _find_file(folder, image_file)
    label_path = _find_file(folder, label_file)
    images = read_idx_images(image_path)
    labels = read_idx_labels(label_path)
    return Dataset(images, labels, 10, read_idx_shape(image_path))


def _find_file(folder: Path, filename: str) -> Path:
    """优先 .gz，其次解压后的同名文件"""
    path = folder / filename
    if path.exists():
        return path
    plain = folder / filename[:-3]
    if plain.exists():
        return plain
    raise FileNotFoundError(get_text('dataset_missing', path))


def load_dataset(name: str, root, download: bool = False,
                 blobs: Optional[Dict] = None) -> Tuple[Dataset, Optional[Dataset]]:
    """
    按名字加载 (训练集, 测试集)

    name 形如 'blobs'、'mnist'、'mnist-test'、'fashion-mnist'；带 -test 后缀时
    只返回测试集（放在第一个位置）。
    """
    if name == 'blobs':
        options = dict(per_class=300, classes=3, input_dim=2, spread=0.3, seed=0)
        options.update(blobs or {})
        train = make_blobs(**{**options, 'per_class': options['per_class'] * 2 // 3})
        test = make_blobs(**{**options, 'per_class': options['per_class'] // 3,
                             'seed': options['seed'] + 1})
        return train, test
    if name.endswith('-test'):
        return load_idx_dataset(name[:-len('-test')], 'test', root, download), None
    return load_idx_dataset(name, 'train', root, download), load_idx_dataset(name, 'test', root, download)
