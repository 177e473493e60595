import argparse
import logging
import sys

from src.config import ConfigError, parse_assignments, parse_config
from src.strategy_manager import list_strategies

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(message)s')
logger = logging.getLogger("main")


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='Experiment config (JSON); defaults only when omitted')
    parser.add_argument('--set', dest='assignments', action='append', default=[], metavar='SECTION.FIELD=VALUE',
                        help='Override a config field (repeatable)')
    parser.add_argument('--strategy', choices=list_strategies(), help='Selection strategy')
    parser.add_argument('--rounds', type=int, help='Number of rounds R')
    parser.add_argument('--seeds', type=int, nargs='+', help='Experiment seeds')
    parser.add_argument('--workers', type=int, help='Parallel client-training workers')
    parser.add_argument('--output-dir', help='Directory for CSV outputs')
    parser.add_argument('-v', '--verbose', action='store_true', help='Log per-iteration split details')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='FedTier - federated learning client selection simulator')
    sub = parser.add_subparsers(dest='command')

    run = sub.add_parser('run', help='Run one experiment on every configured seed')
    _add_config_arguments(run)

    compare = sub.add_parser('compare', help='Compare strategies on identical data and seeds')
    _add_config_arguments(compare)
    compare.add_argument('--strategies', nargs='+', choices=list_strategies(), default=list_strategies(),
                         help='Strategies to compare (default: all)')

    ablate = sub.add_parser('ablate', help='Sweep one ablation axis')
    ablate.add_argument('axis', help='update_signal, quartile_range, eta, max_iterations or fl_algorithm')
    _add_config_arguments(ablate)

    inspect = sub.add_parser('inspect', help='Pretty-print a splits CSV')
    inspect.add_argument('path', help='Path to a splits_<seed>.csv file')

    partition = sub.add_parser('partition', help='Export the per-client partition summary')
    _add_config_arguments(partition)
    partition.add_argument('--seed', type=int, help='Partition seed (default: first configured seed)')
    partition.add_argument('--out', help='Output CSV path')

    sub.add_parser('list-scenarios', help='List the label-skew scenario presets')
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    overrides = parse_assignments(args.assignments)
    shortcuts = {
        'strategy': args.strategy,
        'federation.rounds': args.rounds,
        'seeds': args.seeds,
        'federation.workers': args.workers,
        'output.output_dir': args.output_dir,
    }
    overrides.update({key: value for key, value in shortcuts.items() if value is not None})
    if 'strategy' not in overrides and args.config is None:
        # A bare command line still needs a strategy
        overrides['strategy'] = 'hierarchical'
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command is None:
        from src.cli import FedTierCLI
        cli = FedTierCLI()
        cli.main_loop()
        return 0

    from src import harness

    if args.command == 'inspect':
        return harness.inspect_cmd(args.path)
    if args.command == 'list-scenarios':
        return harness.list_scenarios_cmd()

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        config = parse_config(args.config, _overrides(args))
    except ConfigError as e:
        logger.error(str(e))
        return 1

    if args.command == 'run':
        return harness.run_cmd(config)
    if args.command == 'compare':
        return harness.compare_cmd(config, args.strategies)
    if args.command == 'ablate':
        return harness.ablation_cmd(args.axis, config)
    if args.command == 'partition':
        seed = args.seed if args.seed is not None else config.seeds[0]
        return harness.partition_cmd(config, seed, args.out)
    return 1


if __name__ == "__main__":
    sys.exit(main())
