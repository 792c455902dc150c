"""
CIPNN 命令行入口
训练、评估、可视化导出、γ 扫描与自检
"""

import argparse
import json
import os
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

# 设置Python IO编码为UTF-8，确保中文字符正确处理
os.environ.setdefault('PYTHONIOENCODING', 'utf-8')

# 处理模块导入路径
if __name__ == "__main__":
    # 直接运行 python src/cli.py 时把 src 目录加入路径
    current_dir = os.path.dirname(os.path.abspath(__file__))
    if current_dir not in sys.path:
        sys.path.insert(0, current_dir)

try:
    # 尝试相对导入（当作为包的一部分时）
    from .core.checkpoint import load_checkpoint, save_checkpoint
    from .core.selftest import run_selftests
    from .core.training import (TrainConfig, dominant_class_fraction, evaluate, latent_extent, train,
                                train_repeated)
    from .core.viz import (DEFAULT_RESOLUTION, GridSpec, export_class_heatmap, export_latent_scatter,
                           export_per_latent_strip, export_reconstruction_grid)
    from .utils.config import (allowed_keys, build_config, data_root, load_config_file, merge_config,
                               out_dir, write_resolved_config)
    from .utils.data_io import load_dataset
    from .utils.env_utils import get_system_info, validate_data_environment
    from .utils.i18n import debug_enabled, get_text, log
except ImportError:
    # 回退到绝对导入（当作为模块运行时）
    from core.checkpoint import load_checkpoint, save_checkpoint
    from core.selftest import run_selftests
    from core.training import (TrainConfig, dominant_class_fraction, evaluate, latent_extent, train,
                               train_repeated)
    from core.viz import (DEFAULT_RESOLUTION, GridSpec, export_class_heatmap, export_latent_scatter,
                          export_per_latent_strip, export_reconstruction_grid)
    from utils.config import (allowed_keys, build_config, data_root, load_config_file, merge_config,
                              out_dir, write_resolved_config)
    from utils.data_io import load_dataset
    from utils.env_utils import get_system_info, validate_data_environment
    from utils.i18n import debug_enabled, get_text, log


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# γ 扫描的默认取值，'none' 表示不加 L₂
DEFAULT_SWEEP = ('none', '1', '0.9', '0.6', '0.3', '0')

# 命令行参数名 → 配置字段
FLAG_FIELDS = {
    'latent_dim': 'latent_dim',
    'forget': 'forget',
    'monte_carlo': 'mc_draws',
    'gamma': 'gamma',
    'epsilon': 'eps_stable',
    'lr': 'learning_rate',
    'batch_size': 'batch_size',
    'epochs': 'epochs',
    'seed': 'seed',
    'hidden_dims': 'hidden_dims',
    'activation': 'activation',
    'optimizer': 'optimizer',
    'use_l2': 'use_l2',
    'track_pixels': 'track_pixels',
    'train_subset': 'train_subset',
    'dataset': 'dataset',
    'resolution': 'resolution',
    'bounds': 'bounds',
}


class UsageError(ValueError):
    """参数或配置无效"""


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='JSON 配置文件，键为 TrainConfig 字段')
    parser.add_argument('--dataset', help='blobs / mnist / fashion-mnist')
    parser.add_argument('--latent-dim', type=int)
    parser.add_argument('--forget', type=int, help='遗忘数 T')
    parser.add_argument('--monte-carlo', type=int, help='蒙特卡洛次数 C')
    parser.add_argument('--gamma', type=float, help='正则因子 γ')
    parser.add_argument('--epsilon', type=float, help='稳定数 ε')
    parser.add_argument('--lr', type=float, help='学习率 η')
    parser.add_argument('--batch-size', type=int)
    parser.add_argument('--epochs', type=int)
    parser.add_argument('--seed', type=int)
    parser.add_argument('--hidden-dims', type=int, nargs='+')
    parser.add_argument('--activation', choices=['relu', 'tanh'])
    parser.add_argument('--optimizer', choices=['adam', 'sgd'])
    parser.add_argument('--no-l2', dest='use_l2', action='store_const', const=False, default=None)
    parser.add_argument('--no-track-pixels', dest='track_pixels', action='store_const', const=False, default=None)
    parser.add_argument('--train-subset', type=int)
    parser.add_argument('--download', action='store_true')
    parser.add_argument('--out-dir')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='cipnn', description='CIPNN / CIPAE')
    sub = parser.add_subparsers(dest='command', required=True)

    classify = sub.add_parser('train-classify', help='有监督分类')
    _add_train_flags(classify)
    classify.add_argument('--seeds', type=int, default=1, help='重复运行次数，报告准确率均值与标准差')

    autoencode = sub.add_parser('train-ae', help='自编码（CIPAE 或 VAE）并用 CIPNN 评估')
    _add_train_flags(autoencode)
    autoencode.add_argument('--decoder', choices=['cipae', 'vae'], default='cipae')
    autoencode.add_argument('--seeds', type=int, default=1)

    evaluate_cmd = sub.add_parser('eval', help='用检查点评估测试集')
    evaluate_cmd.add_argument('--checkpoint', required=True)
    evaluate_cmd.add_argument('--dataset', default='mnist-test')
    evaluate_cmd.add_argument('--monte-carlo', type=int)
    evaluate_cmd.add_argument('--epsilon', type=float)
    evaluate_cmd.add_argument('--seed', type=int)
    evaluate_cmd.add_argument('--download', action='store_true')
    evaluate_cmd.add_argument('--out-dir')

    viz = sub.add_parser('viz', help='导出散点表、热图、重建网格与条带')
    viz.add_argument('--checkpoint', required=True)
    viz.add_argument('--dataset', help='导出散点表所用的数据集，如 mnist-test')
    viz.add_argument('--resolution', type=int)
    viz.add_argument('--bounds', type=float, nargs=4, metavar=('X0', 'X1', 'Y0', 'Y1'))
    viz.add_argument('--steps', type=int, default=12)
    viz.add_argument('--png', action='store_true')
    viz.add_argument('--download', action='store_true')
    viz.add_argument('--out-dir')

    sweep = sub.add_parser('sweep-gamma', help='不同 γ 下训练并对比准确率与潜空间范围')
    _add_train_flags(sweep)
    sweep.add_argument('--gammas', nargs='+', default=list(DEFAULT_SWEEP))

    sub.add_parser('selftest', help='数值自检')
    return parser


def _flag_values(args: argparse.Namespace) -> Dict[str, Any]:
    values = {}
    for flag, name in FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[name] = value
    return values


def resolve_train_config(args: argparse.Namespace, setup: str) -> Dict[str, Any]:
    """默认值 < 配置文件 < 命令行参数"""
    file_values = None
    if getattr(args, 'config', None):
        try:
            file_values = load_config_file(args.config, allowed_keys(TrainConfig))
        except (FileNotFoundError, ValueError) as e:
            raise UsageError(str(e)) from e
    merged = merge_config({'dataset': 'mnist', 'setup': setup}, file_values, _flag_values(args))
    merged['setup'] = setup
    try:
        config = build_config(TrainConfig, merged)
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from e
    return {**merged, **config.to_dict()}


def _run_dir(args: argparse.Namespace) -> Path:
    return Path(args.out_dir) if getattr(args, 'out_dir', None) else out_dir() / args.command


def _load(dataset: str, download: bool, run_dir: Path):
    is_valid, message = validate_data_environment(dataset, download, run_dir)
    if not is_valid:
        raise UsageError(get_text('env_validation_failed', message))
    log('DEBUG', 'env_validation_passed')
    return load_dataset(dataset, data_root(), download)


def _train_run(args: argparse.Namespace, setup: str) -> int:
    resolved = resolve_train_config(args, setup)
    config = build_config(TrainConfig, resolved)
    run_dir = _run_dir(args)
    write_resolved_config(run_dir, {**resolved, 'command': args.command})
    train_set, test_set = _load(resolved['dataset'], args.download, run_dir)
    if setup != 'classify' and train_set.image_shape is None:
        # 自编码的目标是像素，需要图像数据集
        raise UsageError(get_text('config_invalid', 'dataset', resolved['dataset']))
    train_set = train_set.subset(config.train_subset, config.seed)

    if args.seeds > 1:
        accuracies = train_repeated(config, train_set, test_set, range(config.seed, config.seed + args.seeds))
        log('INFO', 'repeated_accuracy', len(accuracies), float(np.mean(accuracies)), float(np.std(accuracies)))
        (run_dir / 'accuracies.json').write_text(json.dumps(accuracies), encoding='utf-8')
        return EXIT_OK

    result = train(config, train_set, test_set, run_dir)
    path = save_checkpoint(run_dir / 'model.npz', result.encoder, result.snapshot, resolved, result.decoder)
    log('INFO', 'checkpoint_written', path)
    if setup == 'classify':
        fraction = dominant_class_fraction(result.encoder, result.snapshot, train_set)
        log('INFO', 'convergence_fraction', 0.95, fraction)
    return EXIT_OK


def _eval_run(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    resolved = merge_config(checkpoint.config, _flag_values(args))
    config = build_config(TrainConfig, resolved)
    run_dir = _run_dir(args)
    write_resolved_config(run_dir, {**resolved, 'command': 'eval', 'dataset': args.dataset,
                                    'checkpoint': str(args.checkpoint)})
    first, second = _load(args.dataset, args.download, run_dir)
    test_set = second if second is not None else first
    accuracy = evaluate(checkpoint.encoder, checkpoint.snapshot, test_set, config)
    print(get_text('eval_result', accuracy, len(test_set)))
    return EXIT_OK


def _viz_run(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    snapshot = checkpoint.snapshot
    run_dir = _run_dir(args)
    image_shape = (28, 28)

    outputs: List[str] = []
    dataset = None
    if args.dataset:
        first, second = _load(args.dataset, args.download, run_dir)
        dataset = second if second is not None else first
        if dataset.image_shape is not None:
            image_shape = dataset.image_shape
        outputs.append(str(export_latent_scatter(checkpoint.encoder, dataset, run_dir / 'latent_scatter.csv')))

    grid = None
    if snapshot.latent_dim == 2:
        try:
            if args.bounds:
                x0, x1, y0, y1 = args.bounds
                grid = GridSpec(((x0, x1), (y0, y1)), args.resolution or DEFAULT_RESOLUTION)
            else:
                grid = GridSpec.around(snapshot, args.resolution or DEFAULT_RESOLUTION)
        except ValueError as e:
            raise UsageError(str(e)) from e
        for label in range(snapshot.num_targets):
            outputs.append(str(export_class_heatmap(snapshot, grid, label, run_dir / f'heatmap_class{label}.pgm',
                                                    args.png)))

    if snapshot.pixels is not None:
        if grid is not None:
            outputs.append(str(export_reconstruction_grid(snapshot, grid, run_dir / 'reconstruction_grid.pgm',
                                                          image_shape, args.png)))
        outputs.append(str(export_per_latent_strip(checkpoint.encoder, snapshot, dataset,
                                                   run_dir / 'latent_strips.pgm', image_shape, args.steps,
                                                   args.png)))

    write_resolved_config(run_dir, {**checkpoint.config, 'command': 'viz', 'checkpoint': str(args.checkpoint),
                                    'dataset': args.dataset, 'bounds': grid.bounds if grid else None,
                                    'resolution': grid.resolution if grid else None, 'outputs': outputs})
    for path in outputs:
        log('INFO', 'image_written', path)
    return EXIT_OK


def _parse_gamma(value: str) -> Optional[float]:
    """'none' 表示不加 L₂"""
    if value.lower() in ('none', 'no-l2'):
        return None
    try:
        return float(value)
    except ValueError as e:
        raise UsageError(get_text('config_invalid', 'gamma', value)) from e


def sweep_gamma(gammas: Sequence[Optional[float]], base: Dict[str, Any], train_set, test_set,
                run_dir: Path) -> List[Dict[str, Any]]:
    """
    对每个 γ（None 为不加 L₂）用相同种子训练一次

    单次运行失败只记录在报告里，扫描继续。
    """
    run_dir.mkdir(parents=True, exist_ok=True)
    report_path = run_dir / 'sweep.jsonl'
    report_path.write_text('', encoding='utf-8')
    rows = []
    for gamma in gammas:
        overrides = {'use_l2': False} if gamma is None else {'gamma': gamma, 'use_l2': True}
        row: Dict[str, Any] = {'gamma': 'none' if gamma is None else gamma}
        try:
            config = build_config(TrainConfig, {**base, **overrides})
            result = train(config, train_set, test_set)
            row['test_acc'] = result.metrics.final_accuracy
            row.update(latent_extent(result.encoder, test_set if test_set is not None else train_set))
            log('INFO', 'sweep_row', row['gamma'], row['test_acc'], list(zip(row['mu_min'], row['mu_max'])),
                row['mean_sigma'])
        except (ValueError, FloatingPointError) as e:
            log('WARN', 'sweep_failed', row['gamma'], e)
            row['error'] = str(e)
        rows.append(row)
        with open(report_path, 'a', encoding='utf-8') as f:
            f.write(json.dumps(row) + '\n')
    (run_dir / 'sweep.txt').write_text(format_sweep_table(rows), encoding='utf-8')
    log('INFO', 'sweep_report', report_path)
    return rows


def format_sweep_table(rows: List[Dict[str, Any]]) -> str:
    lines = [f"{'gamma':>8}  {'test_acc':>8}  {'mean_sigma':>10}  extent"]
    for row in rows:
        if 'error' in row:
            lines.append(f"{row['gamma']!s:>8}  {'failed':>8}  {'-':>10}  {row['error']}")
            continue
        acc = '-' if row['test_acc'] is None else f"{row['test_acc']:.4f}"
        extent = ' '.join(f"[{lo:.2f},{hi:.2f}]" for lo, hi in zip(row['mu_min'], row['mu_max']))
        lines.append(f"{row['gamma']!s:>8}  {acc:>8}  {row['mean_sigma']:>10.4f}  {extent}")
    return '\n'.join(lines) + '\n'


def _sweep_run(args: argparse.Namespace) -> int:
    gammas = [_parse_gamma(g) for g in args.gammas]
    resolved = resolve_train_config(args, 'classify')
    run_dir = _run_dir(args)
    write_resolved_config(run_dir, {**resolved, 'command': 'sweep-gamma', 'gammas': args.gammas})
    train_set, test_set = _load(resolved['dataset'], args.download, run_dir)
    train_set = train_set.subset(resolved.get('train_subset'), resolved['seed'])
    rows = sweep_gamma(gammas, resolved, train_set, test_set, run_dir)
    print(format_sweep_table(rows), end='')
    return EXIT_OK if any('error' not in row for row in rows) else EXIT_FAILURE


def _selftest_run(args: argparse.Namespace) -> int:
    results = run_selftests()
    failed = [r.name for r in results if not r.passed]
    if failed:
        log('ERROR', 'selftest_failed', ', '.join(failed))
        return EXIT_FAILURE
    log('INFO', 'selftest_passed')
    return EXIT_OK


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """解析参数并执行子命令，返回退出码"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    log('DEBUG', 'system_info', get_system_info())
    try:
        if args.command == 'train-classify':
            return _train_run(args, 'classify')
        if args.command == 'train-ae':
            return _train_run(args, f"autoencode-{args.decoder}")
        if args.command == 'eval':
            return _eval_run(args)
        if args.command == 'viz':
            return _viz_run(args)
        if args.command == 'sweep-gamma':
            return _sweep_run(args)
        return _selftest_run(args)
    except UsageError as e:
        log('ERROR', 'unexpected_error', e)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_FAILURE
    except Exception as e:
        log('ERROR', 'unexpected_error', e)
        if debug_enabled():
            traceback.print_exc()
        return EXIT_FAILURE


def main():
    """主入口函数"""
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
