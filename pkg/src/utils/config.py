"""
配置模块
环境变量默认值、JSON 配置文件读取与合并、运行配置落盘
"""

import dataclasses
import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

try:
    # 尝试相对导入
    from .i18n import get_text, log
except ImportError:
    # 回退到绝对导入
    from utils.i18n import get_text, log


# 数据集根目录与输出目录
# 优先使用环境变量配置，否则使用默认值
DEFAULT_DATA_ROOT = './data'
DATA_ROOT = os.getenv('CIPNN_DATA_ROOT', DEFAULT_DATA_ROOT)

DEFAULT_OUT_DIR = './runs'
OUT_DIR = os.getenv('CIPNN_OUT_DIR', DEFAULT_OUT_DIR)

RESOLVED_CONFIG_NAME = 'resolved_config.json'

# 训练配置之外允许出现在配置文件中的键
EXTRA_KEYS = ('dataset', 'bounds', 'resolution', 'seeds', 'gammas')


def data_root() -> Path:
    return Path(os.getenv('CIPNN_DATA_ROOT', DATA_ROOT))


def out_dir() -> Path:
    return Path(os.getenv('CIPNN_OUT_DIR', OUT_DIR))


def allowed_keys(config_type) -> set:
    return {f.name for f in dataclasses.fields(config_type)} | set(EXTRA_KEYS)


def load_config_file(path, allowed: Iterable[str]) -> Dict[str, Any]:
    """
    读取 JSON 配置文件

    Args:
        path: 文件路径
        allowed: 允许的键

    Returns:
        键值字典；含未知键时抛出 ValueError
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(get_text('file_not_found', path))
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise ValueError(get_text('config_not_json', path, e)) from e
    if not isinstance(data, dict):
        raise ValueError(get_text('config_not_json', path, type(data).__name__))
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ValueError(get_text('config_unknown_keys', path, unknown))
    return data


def merge_config(*layers: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """后面的层覆盖前面的层；值为 None 的键不参与覆盖"""
    merged: Dict[str, Any] = {}
    for layer in layers:
        for key, value in (layer or {}).items():
            if value is not None:
                merged[key] = value
    return merged


def build_config(config_type, values: Dict[str, Any]):
    """只取属于 config_type 的键来构造配置对象"""
    names = {f.name for f in dataclasses.fields(config_type)}
    return config_type(**{k: v for k, v in values.items() if k in names})


def write_resolved_config(directory, config: Dict[str, Any]) -> Path:
    """在输出目录写 resolved_config.json"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / RESOLVED_CONFIG_NAME
    path.write_text(json.dumps(config, indent=2, sort_keys=True, default=str), encoding='utf-8')
    log('DEBUG', 'resolved_config', path)
    return path
