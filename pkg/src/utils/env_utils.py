"""
运行环境工具
检查数据目录、输出目录与数值库版本
"""

import os
import platform
import sys
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import PIL

try:
    # 尝试相对导入
    from .config import data_root, out_dir
    from .data_io import DATASET_FILES, DATASET_URLS
    from .i18n import get_text
except ImportError:
    # 回退到绝对导入
    from utils.config import data_root, out_dir
    from utils.data_io import DATASET_FILES, DATASET_URLS
    from utils.i18n import get_text


def get_system_info() -> Dict[str, str]:
    """获取系统信息"""
    return {
        'platform': platform.system(),
        'python_version': sys.version.split()[0],
        'numpy_version': np.__version__,
        'pillow_version': PIL.__version__,
        'data_root': str(data_root()),
        'out_dir': str(out_dir()),
    }


def dataset_available(name: str, root=None) -> bool:
    """训练/测试的 IDX 文件是否都在（.gz 或解压后的均可）"""
    folder = Path(root or data_root()) / name
    for files in DATASET_FILES.values():
        for filename in files:
            if not (folder / filename).exists() and not (folder / filename[:-3]).exists():
                return False
    return True


def validate_data_environment(dataset: str = 'blobs', download: bool = False,
                              target: Optional[Path] = None) -> Tuple[bool, str]:
    """
    验证数据与输出环境

    Args:
        dataset: 数据集名，可带 -test 后缀
        download: 是否允许下载缺失文件
        target: 本次运行实际写入的目录，默认是输出根目录

    Returns:
        (是否通过, 本地化消息)
    """
    try:
        target = Path(target) if target is not None else out_dir()
        target.mkdir(parents=True, exist_ok=True)
        if not os.access(target, os.W_OK):
            return False, get_text('out_dir_not_writable', target)

        name = dataset[:-len('-test')] if dataset.endswith('-test') else dataset
        if name != 'blobs':
            if name not in DATASET_URLS:
                return False, get_text('unknown_dataset', dataset)
            if not download and not dataset_available(name):
                return False, get_text('dataset_dir_missing', name, data_root() / name)

        return True, get_text('env_validation_passed')

    except Exception as e:
        return False, get_text('env_check_error', e)
