#!/usr/bin/env python3
"""
Spherical Needlet Approximation Toolkit

Command-line entry point. Commands:
1. filter:      sample the needlet filter h and the frame filter H
2. kernel:      profile of a level-j needlet
3. approx:      one order-J needlet approximation of a Wendland test function
4. convergence: L2 errors over Wendland indices and orders
5. local:       localized refinement inside a spherical cap

Every command writes a CSV file whose '#' header records the configuration.
"""

import sys
import logging
import argparse
from pathlib import Path
from typing import Dict

from src import __version__
from src.errors import DesignParseError, DomainError, NeedletError
from src.experiments import NeedletExperiments, load_config, parse_int_list


# Configure logging with detailed format
Path('logs').mkdir(exist_ok=True)

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.FileHandler('logs/needlets.log'),
        logging.StreamHandler(sys.stdout)
    ]
)

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_USAGE = 2


def print_banner():
    """Display application banner."""
    print("\n" + "="*70)
    print("🌐 SPHERICAL NEEDLET APPROXIMATION TOOLKIT")
    print("="*70)
    print(f"Version: {__version__} | Filters + Needlet Frames + Convergence Studies")
    print("="*70 + "\n")


def apply_overrides(config: Dict, args: argparse.Namespace) -> Dict:
    """
    Copy command-line flags over configuration values.

    Args:
        config: Configuration loaded from YAML (with defaults)
        args: Parsed arguments

    Returns:
        The updated configuration
    """
    if args.kappa is not None:
        config['filter']['kappa'] = args.kappa
    if args.order is not None:
        config['approximation']['order'] = args.order
        config['kernel']['level'] = args.order
    if args.orders is not None:
        config['approximation']['orders'] = parse_int_list(args.orders)
    if args.wendland is not None:
        indices = parse_int_list(args.wendland)
        config['approximation']['wendland'] = indices
        config['local']['wendland'] = indices[0]
    if args.quad is not None:
        config['quadrature']['source'] = args.quad
    if args.grid is not None:
        config['output']['grid'] = args.grid
    if args.cap is not None:
        config['local']['cap'] = args.cap
    if args.j_low is not None:
        config['local']['j_low'] = args.j_low
    if args.j_high is not None:
        config['local']['j_high'] = args.j_high
    if args.workers is not None:
        config['approximation']['workers'] = args.workers
    if args.disc_degree is not None:
        config['approximation']['disc_degree'] = args.disc_degree
    if args.allow_uncertified:
        config['approximation']['allow_uncertified'] = True
    if args.out is not None:
        config['output']['file'] = args.out
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Spherical needlet approximation toolkit',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s filter --kappa 5                          # h and H samples
  %(prog)s kernel --order 4                          # level-4 needlet profile
  %(prog)s approx --wendland 2 --order 4             # one approximation
  %(prog)s convergence --wendland 0,1,2 --orders 1-5 # convergence table
  %(prog)s local --cap 0,1,0:0.5236 --grid 90x180    # localized refinement
  %(prog)s convergence --quad dir:designs/           # use design files
        """
    )

    parser.add_argument(
        'command',
        choices=['filter', 'kernel', 'approx', 'convergence', 'local'],
        help='Experiment to run'
    )
    parser.add_argument('--config', type=str, default='config.yaml',
                        help='Path to configuration file (default: config.yaml)')
    parser.add_argument('--kappa', type=int, help='Filter smoothness (1-12)')
    parser.add_argument('--order', type=int, help='Needlet order J (kernel: level j)')
    parser.add_argument('--orders', type=str, help="Orders for convergence, e.g. '1-5'")
    parser.add_argument('--wendland', type=str, help="Wendland indices, e.g. '0,1,2'")
    parser.add_argument('--quad', type=str, help='Quadrature source: tensor or dir:<path>')
    parser.add_argument('--grid', type=str, help="Evaluation grid: 'nlat x nlon' or rule:<degree>")
    parser.add_argument('--cap', type=str, help="Refinement cap 'cx,cy,cz:radius'")
    parser.add_argument('--j-low', dest='j_low', type=int, help='Order used outside the cap')
    parser.add_argument('--j-high', dest='j_high', type=int, help='Highest level inside the cap')
    parser.add_argument('--workers', type=int, help='Threads for kernel evaluation')
    parser.add_argument('--disc-degree', dest='disc_degree', type=int,
                        help='Fixed discretization degree (default: 3*2^(J-1)-1 plus disc_degree_extra)')
    parser.add_argument('--allow-uncertified', action='store_true',
                        help='Run with a --disc-degree below the required degree (exit code 1)')
    parser.add_argument('--out', type=str, help='Output CSV path')
    parser.add_argument('-v', '--verbose', action='store_true', help='Enable verbose logging')
    return parser


def main(argv=None) -> int:
    """Main entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)

    # Set log level
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
        logger.debug("Verbose logging enabled")

    print_banner()

    try:
        config = apply_overrides(load_config(args.config), args)
        runner = NeedletExperiments(config)
        path = runner.run(args.command)
    except DomainError as e:
        logger.error(f"Invalid input: {e}")
        print(f"\n❌ {e}")
        return EXIT_USAGE
    except DesignParseError as e:
        logger.error(f"Design file error: {e}")
        print(f"\n❌ {e}")
        return EXIT_FAILURE
    except NeedletError as e:
        logger.error(f"Run failed: {e}")
        print(f"\n❌ {e}")
        return EXIT_FAILURE

    if runner.uncertified:
        for message in runner.uncertified:
            logger.warning(f"Uncertified: {message}")
        print(f"\n⚠️  Results written to {path}, but the discretization was not certified")
        return EXIT_FAILURE

    print(f"\n✅ Results written to {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
