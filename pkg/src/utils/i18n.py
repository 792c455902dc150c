"""
国际化支持模块
支持中英文切换，通过环境变量LANGUAGE控制；同时提供带级别标签的 stderr 日志
"""

import os
import sys
from typing import Dict

# 默认语言
DEFAULT_LANGUAGE = 'CN'

# 当前语言设置
CURRENT_LANGUAGE = os.getenv('LANGUAGE', DEFAULT_LANGUAGE).upper()

# 日志级别
LOG_LEVELS = ('DEBUG', 'INFO', 'WARN', 'ERROR')

# 语言包
TRANSLATIONS: Dict[str, Dict[str, str]] = {
    'CN': {
        # 自动微分
        'ad_unknown_input': '未知的输入名: {}',
        'ad_input_count': '输入数量不符：需要 {}，得到 {}',
        'ad_input_shape': '节点 {}（{}）输入形状不符：需要 {}，得到 {}',
        'ad_foreign_node': '节点 {} 不属于这条计算带',
        'ad_seed_not_scalar': '反向传播的起点必须是标量：节点 {} 形状为 {}',
        'ad_shape_mismatch': '节点 {} 的运算 {} 形状不兼容 {}: {}',
        'ad_mixed_tapes': '运算 {} 的输入来自不同的计算带',

        # 概率核心
        'latent_empty': '潜变量维度必须 ≥ 1',
        'latent_shape_mismatch': 'μ 与 σ 形状不符: {} vs {}',
        'sigma_not_positive': 'σ 必须全部为正',
        'latent_length_mismatch': '潜变量长度不符: {} vs {}',
        'lse_empty': 'log-sum-exp 的输入不能为空',
        'noise_shape_mismatch': '噪声形状 {} 与 C={}、N={} 不符',

        # 编码器 / 损失
        'non_finite_input': '输入含有非有限值',
        'non_finite_activation': '{} 的激活值出现非有限值',
        'non_finite_loss': '损失 {} 出现非有限值',
        'config_invalid': '配置项 {} 的取值无效: {}',

        # 记录器
        'record_target_range': '目标值必须在 [0, 1] 内',
        'record_shape_mismatch': '记录的批次大小不符: {} vs {}',
        'recorder_empty': '记录器为空',
        'snapshot_no_pixels': '快照中没有像素记录',

        # CIPAE
        'negative_pixels': '像素值不能为负',
        'latent_index_range': '潜变量编号 {} 超出范围 [1, {}]',
        'pixel_count_mismatch': '重建形状 {} 与目标形状 {} 不符',

        # 检查点
        'checkpoint_version': '检查点 {} 的版本 {} 不受支持（需要 {}）',
        'checkpoint_missing': '检查点 {} 缺少 {}',
        'checkpoint_shape_mismatch': '参数 {} 形状不符: {} vs {}',
        'checkpoint_written': '检查点已保存: {}',

        # 数据
        'file_not_found': '文件不存在: {}',
        'dataset_count_mismatch': '图像数 {} 与标签数 {} 不符',
        'dataset_label_range': '标签必须在 [0, {}) 内',
        'dataset_empty': '数据集为空',
        'dataset_missing': '找不到数据文件 {}（可使用 --download）',
        'unknown_dataset': '未知的数据集: {}',
        'idx_truncated': 'IDX 文件 {} 被截断：{} 字节，需要 {}',
        'idx_bad_magic': 'IDX 文件 {} 偏移 {} 处魔数错误：{}，需要 {}',
        'idx_size_mismatch': '文件 {} 长度 {}，需要 {}',
        'downloading': '下载 {}',

        # 训练
        'training_start': '开始训练 setup={}，样本数 {}',
        'epoch_summary': 'epoch {}: L1={:.4f} L2={:.4f} 测试准确率={} 用时 {:.1f}s',
        'training_diverged': '训练发散: {}',
        'repeated_accuracy': '{} 次运行的准确率: {:.4f} ± {:.4f}',
        'convergence_fraction': '单一类别占优（≥{}）的样本比例: {:.4f}',

        # 可视化
        'grid_invalid': '网格无效: {}',
        'pgm_bad_header': 'PGM 文件 {} 头部无效',
        'image_written': '图像已写出: {}',
        'latent_dim_unsupported': '该可视化需要 {} 维潜空间，当前为 {}',

        # 配置 / 命令行
        'config_unknown_keys': '配置文件 {} 含未知键: {}',
        'config_not_json': '配置文件 {} 不是有效的 JSON 对象: {}',
        'resolved_config': '配置已写入 {}',
        'eval_result': '测试准确率: {:.4f}（{} 个样本）',
        'sweep_row': 'γ={}: 准确率={} 潜空间范围={} 平均σ={}',
        'sweep_failed': 'γ={} 运行失败: {}',
        'sweep_report': '扫描报告已写入 {}',
        'selftest_result': '自检 {}: {}（{}）',
        'selftest_failed': '自检未通过: {}',
        'selftest_passed': '全部自检通过',
        'env_validation_failed': '环境验证失败: {}',
        'env_validation_passed': '环境验证通过',
        'env_check_error': '检查出错: {}',
        'out_dir_not_writable': '输出目录不可写: {}',
        'dataset_dir_missing': '找不到数据集 {}（目录 {}），可使用 --download',
        'system_info': '运行环境: {}',
        'unexpected_error': '运行失败: {}',
    },

    'EN': {
        # Autodiff
        'ad_unknown_input': 'Unknown input names: {}',
        'ad_input_count': 'Input count mismatch: expected {}, got {}',
        'ad_input_shape': 'Node {} ({}) input shape mismatch: expected {}, got {}',
        'ad_foreign_node': 'Node {} does not belong to this tape',
        'ad_seed_not_scalar': 'Backward seed must be a scalar: node {} has shape {}',
        'ad_shape_mismatch': 'Node {} op {} has incompatible shapes {}: {}',
        'ad_mixed_tapes': 'Inputs of op {} come from different tapes',

        # Probability core
        'latent_empty': 'Latent dimension must be >= 1',
        'latent_shape_mismatch': 'mu and sigma shapes differ: {} vs {}',
        'sigma_not_positive': 'sigma must be strictly positive',
        'latent_length_mismatch': 'Latent length mismatch: {} vs {}',
        'lse_empty': 'log-sum-exp input must not be empty',
        'noise_shape_mismatch': 'Noise shape {} does not match C={}, N={}',

        # Encoder / losses
        'non_finite_input': 'Input contains non-finite values',
        'non_finite_activation': 'Non-finite activations in {}',
        'non_finite_loss': 'Non-finite value in loss {}',
        'config_invalid': 'Invalid value for {}: {}',

        # Recorder
        'record_target_range': 'Targets must lie in [0, 1]',
        'record_shape_mismatch': 'Record batch size mismatch: {} vs {}',
        'recorder_empty': 'Recorder is empty',
        'snapshot_no_pixels': 'Snapshot holds no pixel records',

        # CIPAE
        'negative_pixels': 'Pixel values must not be negative',
        'latent_index_range': 'Latent index {} outside [1, {}]',
        'pixel_count_mismatch': 'Reconstruction shape {} does not match target shape {}',

        # Checkpoint
        'checkpoint_version': 'Checkpoint {} has unsupported version {} (expected {})',
        'checkpoint_missing': 'Checkpoint {} is missing {}',
        'checkpoint_shape_mismatch': 'Parameter {} shape mismatch: {} vs {}',
        'checkpoint_written': 'Checkpoint saved: {}',

        # Data
        'file_not_found': 'File not found: {}',
        'dataset_count_mismatch': 'Image count {} does not match label count {}',
        'dataset_label_range': 'Labels must lie in [0, {})',
        'dataset_empty': 'Dataset is empty',
        'dataset_missing': 'Data file {} not found (try --download)',
        'unknown_dataset': 'Unknown dataset: {}',
        'idx_truncated': 'IDX file {} is truncated: {} bytes, expected {}',
        'idx_bad_magic': 'IDX file {} has bad magic at offset {}: {}, expected {}',
        'idx_size_mismatch': 'File {} has length {}, expected {}',
        'downloading': 'Downloading {}',

        # Training
        'training_start': 'Training setup={} on {} samples',
        'epoch_summary': 'epoch {}: L1={:.4f} L2={:.4f} test_acc={} took {:.1f}s',
        'training_diverged': 'Training diverged: {}',
        'repeated_accuracy': 'Accuracy over {} runs: {:.4f} ± {:.4f}',
        'convergence_fraction': 'Fraction of samples with a dominant class (>={}): {:.4f}',

        # Visualization
        'grid_invalid': 'Invalid grid: {}',
        'pgm_bad_header': 'PGM file {} has an invalid header',
        'image_written': 'Image written: {}',
        'latent_dim_unsupported': 'This view needs a {}-D latent space, got {}',

        # Config / CLI
        'config_unknown_keys': 'Config file {} has unknown keys: {}',
        'config_not_json': 'Config file {} is not a valid JSON object: {}',
        'resolved_config': 'Config written to {}',
        'eval_result': 'Test accuracy: {:.4f} ({} samples)',
        'sweep_row': 'gamma={}: acc={} extent={} mean_sigma={}',
        'sweep_failed': 'gamma={} run failed: {}',
        'sweep_report': 'Sweep report written to {}',
        'selftest_result': 'selftest {}: {} ({})',
        'selftest_failed': 'Self-test failed: {}',
        'selftest_passed': 'All self-tests passed',
        'env_validation_failed': 'Environment validation failed: {}',
        'env_validation_passed': 'Environment validation passed',
        'env_check_error': 'Check raised an error: {}',
        'out_dir_not_writable': 'Output directory is not writable: {}',
        'dataset_dir_missing': 'Dataset {} not found (directory {}), try --download',
        'system_info': 'Environment: {}',
        'unexpected_error': 'Run failed: {}',
    }
}


def get_text(key: str, *args) -> str:
    """
    获取指定键的本地化文本

    Args:
        key: 文本键
        *args: 格式化参数

    Returns:
        本地化后的文本
    """
    # 获取当前语言的翻译
    current_translations = TRANSLATIONS.get(
        CURRENT_LANGUAGE, TRANSLATIONS[DEFAULT_LANGUAGE])

    # 获取文本，如果不存在则使用默认语言
    text = current_translations.get(key)
    if text is None:
        text = TRANSLATIONS[DEFAULT_LANGUAGE].get(key, key)

    # 格式化文本
    if args:
        try:
            return text.format(*args)
        except (IndexError, ValueError):
            return text

    return text


def debug_enabled() -> bool:
    """CIPNN_DEBUG=1 时输出 DEBUG 日志"""
    return os.getenv('CIPNN_DEBUG', '0') == '1'


def log(level: str, key: str, *args) -> None:
    """向 stderr 打印一行 [LEVEL] 文本"""
    level = level.upper()
    if level not in LOG_LEVELS:
        raise ValueError(get_text('config_invalid', 'level', level))
    if level == 'DEBUG' and not debug_enabled():
        return
    print(f"[{level}] {get_text(key, *args)}", file=sys.stderr)


def set_language(language: str):
    """
    设置当前语言

    Args:
        language: 语言代码 ('CN' 或 'EN')
    """
    global CURRENT_LANGUAGE
    language = language.upper()
    if language in get_available_languages():
        CURRENT_LANGUAGE = language
        # 同时更新环境变量
        os.environ['LANGUAGE'] = language


def get_current_language() -> str:
    """获取当前语言"""
    return CURRENT_LANGUAGE


def get_available_languages() -> list:
    """获取可用的语言列表"""
    return list(TRANSLATIONS.keys())
