"""
检查点容器
单个 .npz 文件：编码器/解码器权重、记录器快照、版本号与完整配置（JSON 文本）
"""

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

try:
    # 尝试相对导入
    from .autodiff import Parameter
    from .encoder import MLPWeights
    from .recorder import RecordSnapshot
    from ..utils.i18n import get_text
except ImportError:
    # 回退到绝对导入
    from core.autodiff import Parameter
    from core.encoder import MLPWeights
    from core.recorder import RecordSnapshot
    from utils.i18n import get_text


FORMAT_VERSION = 1

# 权重名形如 encoder.0.W / decoder.2.b
_LAYER_NAME = re.compile(r'^(encoder|decoder)\.(\d+)\.(W|b)$')


@dataclass
class Checkpoint:
    """载入后的检查点内容"""

    encoder: MLPWeights
    snapshot: RecordSnapshot
    config: Dict[str, Any]
    decoder: Optional[MLPWeights] = None


def save_checkpoint(path, encoder: MLPWeights, snapshot: RecordSnapshot, config: Dict[str, Any],
                    decoder: Optional[MLPWeights] = None) -> Path:
    """写入检查点，返回文件路径"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: Dict[str, np.ndarray] = {
        'format_version': np.array(FORMAT_VERSION),
        'config_json': np.array(json.dumps(config, sort_keys=True)),
        'snapshot/targets': snapshot.targets,
        'snapshot/mu': snapshot.mu,
        'snapshot/sigma': snapshot.sigma,
    }
    if snapshot.pixels is not None:
        arrays['snapshot/pixels'] = snapshot.pixels
    for weights in (encoder, decoder):
        if weights is not None:
            arrays.update(weights.named_arrays())
    with open(path, 'wb') as f:
        np.savez(f, **arrays)
    return path


def _rebuild(arrays: Dict[str, np.ndarray], prefix: str, activation: str) -> Optional[MLPWeights]:
    layers: Dict[int, Dict[str, Parameter]] = {}
    for name, value in arrays.items():
        match = _LAYER_NAME.match(name)
        if match and match.group(1) == prefix:
            layers.setdefault(int(match.group(2)), {})[match.group(3)] = Parameter(value, name=name)
    if not layers:
        return None
    weights = MLPWeights(activation=activation)
    for index in sorted(layers):
        weights.layers.append((layers[index]['W'], layers[index]['b']))
    return weights


def load_checkpoint(path) -> Checkpoint:
    """读取检查点"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(get_text('file_not_found', path))
    with np.load(path, allow_pickle=False) as data:
        arrays = {key: data[key] for key in data.files}
    version = int(arrays.pop('format_version', -1))
    if version != FORMAT_VERSION:
        raise ValueError(get_text('checkpoint_version', path, version, FORMAT_VERSION))
    config = json.loads(str(arrays.pop('config_json')))
    activation = config.get('activation', 'relu')
    snapshot = RecordSnapshot(arrays['snapshot/targets'], arrays['snapshot/mu'], arrays['snapshot/sigma'],
                              arrays.get('snapshot/pixels'))
    encoder = _rebuild(arrays, 'encoder', activation)
    if encoder is None:
        raise ValueError(get_text('checkpoint_missing', path, 'encoder'))
    return Checkpoint(encoder, snapshot, config, _rebuild(arrays, 'decoder', activation))
