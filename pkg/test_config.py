"""
配置与日志测试
"""

import json
from pathlib import Path

import pytest

from src.core.training import TrainConfig
from src.utils import i18n
from src.utils.config import (RESOLVED_CONFIG_NAME, allowed_keys, build_config, data_root, load_config_file,
                              merge_config, out_dir, write_resolved_config)


class TestConfigFile:

    def test_load_known_keys(self, tmp_path):
        path = tmp_path / 'c.json'
        path.write_text(json.dumps({'gamma': 0.95, 'dataset': 'mnist'}), encoding='utf-8')
        assert load_config_file(path, allowed_keys(TrainConfig)) == {'gamma': 0.95, 'dataset': 'mnist'}

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / 'c.json'
        path.write_text(json.dumps({'gama': 0.95}), encoding='utf-8')
        with pytest.raises(ValueError, match='gama'):
            load_config_file(path, allowed_keys(TrainConfig))

    @pytest.mark.parametrize('text', ['{not json', '[1, 2]'])
    def test_not_an_object(self, tmp_path, text):
        path = tmp_path / 'c.json'
        path.write_text(text, encoding='utf-8')
        with pytest.raises(ValueError):
            load_config_file(path, allowed_keys(TrainConfig))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config_file(tmp_path / 'absent.json', ())


class TestMerge:

    def test_later_layers_win_and_none_is_skipped(self):
        merged = merge_config({'gamma': 0.9, 'forget': 3000}, None, {'gamma': 0.5, 'forget': None})
        assert merged == {'gamma': 0.5, 'forget': 3000}

    def test_build_ignores_extra_keys(self):
        config = build_config(TrainConfig, {'latent_dim': 1, 'dataset': 'blobs', 'bounds': None})
        assert config.latent_dim == 1

    def test_resolved_config_written(self, tmp_path):
        path = write_resolved_config(tmp_path / 'run', {'gamma': 0.9, 'hidden_dims': (4, 2)})
        assert path.name == RESOLVED_CONFIG_NAME
        assert json.loads(path.read_text(encoding='utf-8')) == {'gamma': 0.9, 'hidden_dims': [4, 2]}


class TestEnvironment:

    def test_directories_follow_env(self, monkeypatch, tmp_path):
        monkeypatch.setenv('CIPNN_DATA_ROOT', str(tmp_path / 'd'))
        monkeypatch.setenv('CIPNN_OUT_DIR', str(tmp_path / 'o'))
        assert data_root() == tmp_path / 'd'
        assert out_dir() == tmp_path / 'o'


class TestLogging:

    def test_debug_is_gated(self, monkeypatch, capsys):
        monkeypatch.delenv('CIPNN_DEBUG', raising=False)
        i18n.log('DEBUG', 'recorder_empty')
        assert capsys.readouterr().err == ''
        monkeypatch.setenv('CIPNN_DEBUG', '1')
        i18n.log('DEBUG', 'recorder_empty')
        assert capsys.readouterr().err.startswith('[DEBUG] ')

    def test_levels_go_to_stderr(self, capsys):
        i18n.log('warn', 'sweep_failed', 0.5, 'boom')
        captured = capsys.readouterr()
        assert captured.out == ''
        assert captured.err.startswith('[WARN] ') and 'boom' in captured.err

    def test_language_switch(self, monkeypatch):
        monkeypatch.setenv('LANGUAGE', 'CN')
        monkeypatch.setattr(i18n, 'CURRENT_LANGUAGE', 'CN')
        i18n.set_language('en')
        assert i18n.get_current_language() == 'EN'
        assert i18n.get_text('recorder_empty') == i18n.TRANSLATIONS['EN']['recorder_empty']
        i18n.set_language('xx')
        assert i18n.get_current_language() == 'EN'

    def test_every_key_translated(self):
        assert set(i18n.TRANSLATIONS['CN']) == set(i18n.TRANSLATIONS['EN'])


class TestPresets:

    @pytest.mark.parametrize('path', sorted(Path(__file__).parent.joinpath('config_example').glob('*.json')),
                             ids=lambda p: p.stem)
    def test_presets_build(self, path):
        values = load_config_file(path, allowed_keys(TrainConfig))
        config = build_config(TrainConfig, values)
        assert config.forget >= config.batch_size
