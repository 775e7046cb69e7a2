"""
Command-line surface of the workbench.

Exit codes: 0 on success, 1 on a runtime, structure or I/O error (or a failed
equivalence check), 2 on a usage error.
"""
import argparse
import logging
import sys
from typing import List, Optional, Sequence

from . import messages
from .entropy import FORMULAS
from .errors import PolarSpikeError
from .trainer import DATASET_KINDS
from .workbench import Workbench

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _int_tuple(text: str) -> tuple:
    try:
        values = tuple(int(v) for v in text.split(',') if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _quant(text: str) -> tuple:
    parts = text.split(',')
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected L,theta,alpha,beta, got {text!r}")
    try:
        return int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected L,theta,alpha,beta, got {text!r}")


def _add_input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--input', help="CSV of input samples, one per row")
    parser.add_argument('--header', action='store_true',
                        help="the input CSV starts with a header row")
    parser.add_argument('--input-shape', type=_int_tuple,
                        help="per-sample shape, e.g. 1,8,8 for conv models")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='polarspike',
        description="Quantization-aware ANN to spiking network conversion workbench.")
    parser.add_argument('--seed', type=int, help="seed of the PCG64 generator")
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('dataset', help="write a synthetic dataset CSV (features..., label)")
    p.add_argument('--kind', choices=DATASET_KINDS, default='gaussians')
    p.add_argument('--n', type=int)
    p.add_argument('--num-classes', type=int, default=2)
    p.add_argument('--header', action='store_true')
    p.add_argument('--out', required=True)

    p = sub.add_parser('train', help="train a quantization-aware MLP")
    p.add_argument('--dataset', choices=DATASET_KINDS, default='gaussians')
    p.add_argument('--n', type=int, help="dataset size before the train/test split")
    p.add_argument('--epochs', type=int)
    p.add_argument('--batch-size', type=int)
    p.add_argument('--learning-rate', type=float)
    p.add_argument('--hidden', type=_int_tuple, help="hidden widths, e.g. 16,8")
    p.add_argument('--quant', type=_quant, help="L,theta,alpha,beta of the hidden PQA layers")
    p.add_argument('--metrics-out')
    p.add_argument('--exact', action='store_true', help="also store hex-float tensors")
    p.add_argument('--out', required=True)

    p = sub.add_parser('convert', help="convert an ANN model file into an SNN one")
    p.add_argument('--in', dest='in_path', required=True)
    p.add_argument('--exact', action='store_true')
    p.add_argument('--out', required=True)

    p = sub.add_parser('run', help="simulate an SNN for T timesteps")
    p.add_argument('--model', required=True)
    p.add_argument('--input', required=True)
    p.add_argument('--timesteps', type=int, required=True)
    p.add_argument('--header', action='store_true')
    p.add_argument('--labels', action='store_true',
                   help="the last CSV column holds labels; report accuracy")
    p.add_argument('--input-shape', type=_int_tuple)
    p.add_argument('--record-spikes', action='store_true')
    p.add_argument('--out', required=True)

    p = sub.add_parser('verify', help="check T=1 equivalence of an ANN/SNN pair")
    p.add_argument('--ann', required=True)
    p.add_argument('--snn', required=True)
    p.add_argument('--n-samples', type=int)
    _add_input_flags(p)
    p.add_argument('--v-init', type=float, help="override every initial membrane potential")
    p.add_argument('--tolerance', type=float)
    p.add_argument('--out')

    p = sub.add_parser('entropy-grid', help="entropy ratio R over the (alpha, beta) grid")
    p.add_argument('--L', dest='levels', type=int, required=True)
    p.add_argument('--theta', type=float, required=True)
    p.add_argument('--step', default='auto', help="grid spacing, 'auto' for 1/L")
    p.add_argument('--formula', choices=FORMULAS)
    p.add_argument('--json-out')
    p.add_argument('--ppm-out')
    p.add_argument('--out', required=True)

    p = sub.add_parser('alpha-beta-sweep',
                       help="train one model per (alpha, beta) cell and compare accuracy with R")
    p.add_argument('--L', dest='levels', type=int, required=True)
    p.add_argument('--theta', type=float, required=True)
    p.add_argument('--step', default='auto', help="grid spacing, 'auto' for 1/L")
    p.add_argument('--formula', choices=FORMULAS)
    p.add_argument('--dataset', choices=DATASET_KINDS, default='gaussians')
    p.add_argument('--n', type=int, help="dataset size before the train/test split")
    p.add_argument('--epochs', type=int)
    p.add_argument('--hidden', type=_int_tuple, help="hidden widths, e.g. 16,8")
    p.add_argument('--out', required=True)

    p = sub.add_parser('energy', help="average power of a recorded run")
    p.add_argument('--run-report', required=True)
    p.add_argument('--eta', type=float)
    p.add_argument('--xi', type=float)
    p.add_argument('--layers-out')
    p.add_argument('--out')

    p = sub.add_parser('energy-compare',
                       help="spikes and power of an ANN converted to AIF and to binary IF neurons")
    p.add_argument('--ann', required=True)
    p.add_argument('--timesteps-list', type=_int_tuple, default=(1, 2, 4, 8))
    p.add_argument('--n-samples', type=int)
    _add_input_flags(p)
    p.add_argument('--labels', action='store_true',
                   help="the last CSV column holds labels; report accuracy")
    p.add_argument('--eta', type=float)
    p.add_argument('--xi', type=float)
    p.add_argument('--layers-out')
    p.add_argument('--out', required=True)

    p = sub.add_parser('error-analysis', help="conversion error and spike-count deviations per T")
    p.add_argument('--ann', required=True)
    p.add_argument('--snn', required=True)
    p.add_argument('--timesteps-list', type=_int_tuple, default=(1, 2, 4, 8, 16))
    p.add_argument('--n-samples', type=int)
    _add_input_flags(p)
    p.add_argument('--out', required=True)

    p = sub.add_parser('history', help="list recorded runs")
    p.add_argument('--limit', type=int, default=10)

    return parser


# Commands whose handlers take the global --seed.
SEEDED_COMMANDS = (
    'dataset', 'train', 'verify', 'error-analysis', 'alpha-beta-sweep', 'energy-compare')


def main(argv: Optional[Sequence[str]] = None, workbench: Optional[Workbench] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    if workbench is None:
        from config import Config
        workbench = Workbench(Config())
    if args.log_level:
        logging.getLogger('polarspike').setLevel(args.log_level)

    kwargs = vars(args).copy()
    command = kwargs.pop('command')
    kwargs.pop('log_level')
    seed = kwargs.pop('seed')
    if command in SEEDED_COMMANDS:
        kwargs['seed'] = seed
    handler = getattr(workbench, 'cmd_' + command.replace('-', '_'))

    workbench.logger.info("Running %s", command)
    try:
        outcome = handler(**kwargs)
    except (PolarSpikeError, OSError) as e:
        workbench.logger.debug("%s failed", command, exc_info=True)
        print(messages.ERROR.format(command=command, error=e), file=sys.stderr)
        if command != 'history':
            workbench.record(command, {}, seed, argv, EXIT_FAILURE)
        return EXIT_FAILURE

    print(outcome.message)
    if command != 'history':
        workbench.record(command, outcome.metrics, seed, argv, outcome.exit_code)
    return outcome.exit_code


def run(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))
