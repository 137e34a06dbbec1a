"""``geneo-lab`` command line."""
import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from ..config import LabConfig
from ..diagram_toolkit import ComplexityAssignment, complexity, format_word, parse_file
from ..errors import ConfigError, GeneoLabError, MissingBindingError
from ..geo_toolkit import load_geos
from ..observer_toolkit import EvaluationSet, complexity_from_dict, load_observer, surrogate_distance
from ..perception_toolkit import load_spaces
from .hx_config import ExperimentConfig, ModelSpec
from .hx_diagrams import OBSERVERS, model_diagram
from .hx_runner import (
    RunReport, cmd_fetch_mnist, cmd_rescaled, cmd_run, cmd_sample_patterns, cmd_train_blackbox,
)
from .hx_verify import SUITES, run_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2


def experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    """The --config file (or an empty document over GENEO_LAB_DATA) with command-line overrides."""
    overrides = {
        'seed': args.seed,
        'threads': args.threads,
        'out': os.path.abspath(args.out) if args.out else None,
    }
    if args.config:
        return ExperimentConfig.load(args.config, **overrides)
    return ExperimentConfig.from_dict({}, os.getcwd(), **overrides)


def _read_json(path: str, what: str) -> Any:
    try:
        with open(path, encoding='utf-8') as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Cannot read {what} {path}: {str(e)}")
        raise ConfigError(f"Cannot read {what} {path}: {e}") from e


def _emit(doc: Dict[str, Any]) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True, default=str))


def _report(report: RunReport) -> int:
    frame = pd.DataFrame([r.__dict__ for r in report.rows])
    if not frame.empty:
        print(frame.to_string(index=False))
    print(f"Results written to {report.out_dir}")
    if report.failures:
        print(f"Failed rows: {', '.join(report.failures)}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


# -- handlers ----------------------------------------------------------------------------

def handle_run(args: argparse.Namespace) -> int:
    return _report(cmd_run(experiment_config(args)))


def handle_rescaled(args: argparse.Namespace) -> int:
    return _report(cmd_rescaled(experiment_config(args)))


def handle_verify(args: argparse.Namespace) -> int:
    names = args.suites or list(SUITES)
    seed = args.seed if args.seed is not None else LabConfig.DEFAULT_SEED
    status = EXIT_OK
    for name in names:
        result = run_suite(name, args.instances, seed, args.inject_expansive)
        verdict = 'pass' if result.ok else 'FAIL'
        stats = ', '.join(f'{k}={v:.6g}' for k, v in result.stats.items())
        print(f"{name}: {verdict} ({result.instances} instances, {result.seconds:.1f}s){' ' + stats if stats else ''}")
        for failure in result.failures:
            print(f"  {failure}")
        if not result.ok:
            status = EXIT_FAILED
    return status


def handle_distance(args: argparse.Namespace) -> int:
    spaces = {s.id: s for s in load_spaces(args.spaces)}
    geos = load_geos(args.geos, spaces)
    for name in (args.alpha, args.beta):
        if name not in geos:
            raise MissingBindingError(f"No Geo named {name} in {args.geos}")
    alpha, beta = geos[args.alpha], geos[args.beta]
    observer = load_observer(args.observer, spaces)
    result = surrogate_distance(observer, alpha, beta, EvaluationSet.whole(alpha.dom), args.threads or 1)
    frame = pd.DataFrame([(pair.id, pair.forward.id, pair.backward.id, value) for pair, value in result.costs],
                         columns=['pair', 'forward', 'backward', 'cost'])
    if args.format == 'json':
        _emit({'alpha': alpha.name, 'beta': beta.name, 'distance': result.value,
               'pair': result.pair.label if result.pair else None, 'costs': frame.to_dict(orient='records')})
        return EXIT_OK
    frame.to_csv(sys.stdout, index=False, float_format='%.6f')
    best = result.pair.label if result.pair else 'none'
    print(f"# h({alpha.name}, {beta.name}) = {result.value:.6f} via {best}")
    return EXIT_OK


def _assignment(path: Optional[str], base: ComplexityAssignment) -> ComplexityAssignment:
    """Diagram defaults overridden by an observer file (its ``complexity`` block) or a plain mapping."""
    if not path:
        return base
    doc = _read_json(path, 'observer')
    values = doc.get('complexity', doc) if isinstance(doc, dict) else None
    if not isinstance(values, dict):
        raise ConfigError(f"Observer file {path} holds no complexity mapping")
    merged = dict(base.values)
    merged.update(complexity_from_dict(values).values)
    return ComplexityAssignment(merged, doc.get('name', os.path.basename(path)))


def handle_complexity(args: argparse.Namespace) -> int:
    if args.model:
        spec = ModelSpec(args.model, args.model, 1.0, 1, patterns=args.patterns, hidden=tuple(args.hidden),
                         channels=tuple(args.channels), dense=args.dense)
        spec.check()
        md = model_diagram(spec, tuple(args.shape))
        observers = [args.observer] if args.observer else list(OBSERVERS)
        _emit({'model': spec.kind, 'shape': list(args.shape),
               'complexity': {name: md.complexity(name) for name in observers}})
        return EXIT_OK
    if not (args.file and args.diagram):
        raise ConfigError("complexity needs a diagram file and name, or --model")
    program = parse_file(args.file)
    typed = program.typed(args.diagram)
    c = _assignment(args.observer, ComplexityAssignment.from_signature(program.signature, name='default'))
    _emit({'diagram': args.diagram, 'observer': c.name, 'complexity': complexity(typed, c)})
    return EXIT_OK


def handle_check_diagram(args: argparse.Namespace) -> int:
    program = parse_file(args.file)
    names = [args.diagram] if args.diagram else list(program.diagrams)
    c = _assignment(args.observer, ComplexityAssignment.from_signature(program.signature, name='default'))
    rows: List[Dict[str, Any]] = []
    for name in names:
        typed = program.typed(name)
        rows.append({'diagram': name, 'input': format_word(typed.input), 'output': format_word(typed.output),
                     'complexity': complexity(typed, c)})
    for row in rows:
        print(f"{row['diagram']}: {row['input']} -> {row['output']}  complexity[{c.name}] = {row['complexity']:g}")
    return EXIT_OK


def handle_sample_patterns(args: argparse.Namespace) -> int:
    cfg = experiment_config(args)
    out_path = args.output or os.path.join(cfg.out_dir, 'patterns.json')
    print(cmd_sample_patterns(cfg, out_path))
    return EXIT_OK


def handle_train_blackbox(args: argparse.Namespace) -> int:
    _emit(cmd_train_blackbox(experiment_config(args)))
    return EXIT_OK


def handle_fetch_mnist(args: argparse.Namespace) -> int:
    directory = args.directory or LabConfig.DATA_DIR
    if not directory:
        raise ConfigError("fetch-mnist needs a directory or GENEO_LAB_DATA")
    _emit(cmd_fetch_mnist(directory, args.overwrite, args.base_url))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='experiment config (JSON)')
    common.add_argument('--seed', type=int, help='seed for splits, initialization and property suites')
    common.add_argument('--threads', type=int, help='worker threads (default GENEO_LAB_THREADS)')
    common.add_argument('--out', help='output directory')
    common.add_argument('--log-level', default=None, help='logging level (default GENEO_LAB_LOG_LEVEL)')

    parser = argparse.ArgumentParser(prog='geneo-lab',
                                     description='GENEO surrogate models, observer distances and complexity.')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('run', parents=[common], help='train and compare the configured models').set_defaults(
        handler=handle_run)
    sub.add_parser('rescaled', parents=[common], help='retrain the models on downscaled images').set_defaults(
        handler=handle_rescaled)

    p = sub.add_parser('verify', parents=[common], help='run randomized property suites')
    p.add_argument('suites', nargs='*', metavar='SUITE',
                   help=f"any of {', '.join(SUITES)} (default: all)")
    p.add_argument('--instances', type=int, help='instances per suite (default: per-suite)')
    p.add_argument('--inject-expansive', action='store_true',
                   help='add an expansive arrow to every generated translation category')
    p.set_defaults(handler=handle_verify)

    p = sub.add_parser('distance', parents=[common], help='surrogate distance between two lookup Geos')
    p.add_argument('--spaces', required=True, help='space documents (JSON)')
    p.add_argument('--geos', required=True, help='Geo documents (JSON)')
    p.add_argument('--observer', required=True, help='observer document (JSON)')
    p.add_argument('--format', choices=('csv', 'json'), default='csv')
    p.add_argument('alpha')
    p.add_argument('beta')
    p.set_defaults(handler=handle_distance)

    p = sub.add_parser('complexity', parents=[common], help='complexity of a diagram or a model pipeline')
    p.add_argument('file', nargs='?', help='diagram source file')
    p.add_argument('diagram', nargs='?', help='diagram name')
    p.add_argument('--observer', help="complexity JSON, or 'params'/'nonlinearities' with --model")
    p.add_argument('--model', choices=('geo1', 'geo2', 'mlp', 'cnn'))
    p.add_argument('--patterns', type=int, default=0)
    p.add_argument('--hidden', type=int, nargs='*', default=[])
    p.add_argument('--channels', type=int, nargs=2, default=[44, 84])
    p.add_argument('--dense', type=int, default=92)
    p.add_argument('--shape', type=int, nargs=2, default=[28, 28])
    p.set_defaults(handler=handle_complexity)

    p = sub.add_parser('check-diagram', parents=[common], help='typecheck diagrams and print their complexity')
    p.add_argument('file')
    p.add_argument('--diagram', help='only this diagram')
    p.add_argument('--observer', help='complexity JSON overriding the @ annotations')
    p.set_defaults(handler=handle_check_diagram)

    p = sub.add_parser('sample-patterns', parents=[common], help='sample and save a pattern bank')
    p.add_argument('--output', help='bank manifest path (default <out>/patterns.json)')
    p.set_defaults(handler=handle_sample_patterns)

    sub.add_parser('train-blackbox', parents=[common], help='train and save the CNN black-box').set_defaults(
        handler=handle_train_blackbox)

    p = sub.add_parser('fetch-mnist', parents=[common], help='download the MNIST IDX files')
    p.add_argument('directory', nargs='?', help='target directory (default GENEO_LAB_DATA)')
    p.add_argument('--overwrite', action='store_true')
    p.add_argument('--base-url', help='mirror (default GENEO_LAB_MNIST_URL)')
    p.set_defaults(handler=handle_fetch_mnist)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=(args.log_level or LabConfig.LOG_LEVEL).upper(),
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        return args.handler(args)
    except GeneoLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
