"""
测试公共夹具
"""

import os
import sys

import numpy as np
import pytest

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.core.recorder import RecordSnapshot
from src.utils.data_io import make_blobs


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: 合成数据上的端到端训练')


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_snapshot(rng):
    """8 条记录，N=2，m=3，one-hot 目标"""
    labels = np.array([0, 1, 2, 0, 1, 2, 0, 1])
    return RecordSnapshot(np.eye(3)[labels], rng.normal(size=(8, 2)), rng.uniform(0.5, 1.5, size=(8, 2)))


@pytest.fixture
def pixel_snapshot(rng):
    """6 条记录，N=2，目标为 4 个像素"""
    return RecordSnapshot(rng.uniform(0.0, 1.0, size=(6, 4)), rng.normal(size=(6, 2)),
                          rng.uniform(0.5, 1.5, size=(6, 2)))


@pytest.fixture
def blobs():
    return make_blobs(per_class=40, classes=3, input_dim=2, spread=0.3, seed=0)


@pytest.fixture
def tiny_images(rng):
    """20 张 4×4 的假图像与 10 类标签"""
    from src.utils.data_io import Dataset
    images = rng.uniform(0.0, 1.0, size=(20, 16))
    labels = np.arange(20) % 10
    return Dataset(images, labels, 10, (4, 4))


def linear_densities(z, mu, sigma):
    """线性域的独立高斯乘积密度，形状 (n,)"""
    return np.prod(np.exp(-0.5 * ((z - mu) / sigma) ** 2) / (np.sqrt(2.0 * np.pi) * sigma), axis=-1)
