import argparse
import logging
import os
import sys

from ..exceptions import ConfigError, EnhancerError
from ..models.enhance_config import ABLATION_PRESETS, EnhanceConfig, apply_preset
from ..services.batch_runner import RunPlan, run

_logger = logging.getLogger(__name__)

# flag destination -> flat configuration key
_FLAG_KEYS = {
    'gamma': 'gamma',
    'iters': 'iterations',
    'lr': 'lr',
    'seed': 'seed',
    'lambda_i': 'lambda_i',
    'lambda_k': 'lambda_k',
    'lambda_n': 'lambda_n',
    'lambda_rs': 'lambda_rs',
    'r_depth': 'r_depth',
    'i_depth': 'i_depth',
    'n_depth': 'n_depth',
    'width': 'width',
    'reduction': 'reduction',
    'dark_fraction': 'dark_fraction',
    'log_every': 'log_every',
    'dump_intermediates': 'dump_intermediates',
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog='zeroshot-retinex',
        description='Zero-shot low-light enhancement by per-image Retinex decomposition.',
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument('--input', required=True, help='Image file or directory of images')
    parser.add_argument('--output', default='output', help='Directory for enhanced images')
    parser.add_argument('--config', help='key = value file; command-line flags override it')
    parser.add_argument('--preset', choices=sorted(ABLATION_PRESETS), help='Named ablation configuration')
    parser.add_argument('--report', help='Write a key=value run report here')
    parser.add_argument('--workers', type=int, default=1, help='Images processed concurrently')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    tuning = parser.add_argument_group('enhancement')
    tuning.add_argument('--gamma', type=float, help='Illumination gamma in (0, 1] (default 0.4)')
    tuning.add_argument('--iters', type=int, help='Optimization iterations (default 1000)')
    tuning.add_argument('--lr', type=float, help='Adam learning rate (default 0.001)')
    tuning.add_argument('--seed', type=int, help='Initialization seed (default 0)')
    tuning.add_argument('--lambda-i', type=float, help='Illumination smoothness weight (default 2)')
    tuning.add_argument('--lambda-k', type=float, help='Reflectance smoothness weight (default 2)')
    tuning.add_argument('--lambda-n', type=float, help='Noise weight (default 6000)')
    tuning.add_argument('--lambda-rs', type=float, help='Reflectance fidelity weight (default 1)')
    tuning.add_argument('--r-depth', type=int, help='Reflectance network depth (default 6)')
    tuning.add_argument('--i-depth', type=int, help='Illumination network depth (default 3)')
    tuning.add_argument('--n-depth', type=int, help='Noise network depth (default 5)')
    tuning.add_argument('--width', type=int, help='Hidden feature channels (default 32)')
    tuning.add_argument('--reduction', choices=['sum', 'mean'], help='L1 reduction (default mean)')
    tuning.add_argument('--dark-fraction', type=float, help='Dark region fraction (default 0.4)')
    tuning.add_argument('--log-every', type=int, help='Iterations between debug log lines')
    tuning.add_argument('--dump-intermediates', action='store_true',
                        help='Also save R, I, N and adjusted illumination maps')
    return parser


def load_config_file(path):
    """Read a UTF-8 ``key = value`` file with ``#`` comments into a dict of strings"""
    try:
        with open(path, encoding='utf-8') as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e

    values = {}
    for lineno, line in enumerate(lines, start=1):
        content = line.split('#', 1)[0].strip()
        if not content:
            continue
        key, sep, value = content.partition('=')
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        values[key.strip()] = value.strip()
    return values


def parse_args(argv=None):
    """Turn command-line arguments into a RunPlan; usage errors exit with status 2"""
    parser = build_parser()
    ns = vars(parser.parse_args(argv))

    try:
        cfg = EnhanceConfig()
        if 'preset' in ns:
            cfg = apply_preset(cfg, ns['preset'])
        if 'config' in ns:
            cfg = cfg.with_overrides(**load_config_file(ns['config']))
        flags = {key: ns[dest] for dest, key in _FLAG_KEYS.items() if dest in ns}
        cfg = cfg.with_overrides(**flags)
    except ConfigError as e:
        parser.error(str(e))

    if not os.path.exists(ns['input']):
        parser.error(f"input does not exist: {ns['input']}")
    if ns['workers'] < 1:
        parser.error(f"--workers must be >= 1, got {ns['workers']}")

    plan = RunPlan(
        input_path=ns['input'],
        output_dir=ns['output'],
        config=cfg,
        report_path=ns.get('report'),
        workers=ns['workers'],
        log_level=ns['log_level'],
    )
    return plan


def main(argv=None):
    plan = parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, plan.log_level),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    try:
        return run(plan)
    except EnhancerError as e:
        _logger.error(f"Run failed: {e}")
        return 1


if __name__ == '__main__':
    sys.exit(main())
