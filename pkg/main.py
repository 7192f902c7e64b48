import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

from backend.experiments.runner import ExperimentConfig, run_experiment, synthesize
from backend.models.SVRCD import SVRCDLearner
from backend.models.hill_climbing import hc_baseline
from backend.models.metrics import evaluate
from backend.models.multi_logit import param_count
from backend.models.score import HyperParams
from backend.utils.DataProcessor import (DatasetFileProcessor, EdgeListProcessor, RunArtifactManager,
                                         read_edge_list, write_edge_list)
from backend.utils.config import DEFAULT_EXPERIMENT, GRAPH_TYPES, LOG_FORMAT, LOSS_SCALES, MODES, PM_SOURCES
from backend.utils.exceptions import ConfigError, StructureLearningError

logger = logging.getLogger(__name__)

HP_FLAGS = ('lambda1', 'lambda2', 'gamma', 'm', 'sweeps', 'tol', 'tau')


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as ConfigError instead of exiting."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_hyperparams(parser):
    group = parser.add_argument_group('optimizer')
    group.add_argument('--lambda1', type=float, help='group-lasso weight')
    group.add_argument('--lambda2', type=float, help='DAG penalty weight')
    group.add_argument('--gamma', type=float, help='step size on the per-row likelihood gradient')
    group.add_argument('--m', type=int, help='inner epoch length (default: n)')
    group.add_argument('--sweeps', type=int, help='maximum outer sweeps')
    group.add_argument('--tol', type=float, help='relative objective decrease to stop at')
    group.add_argument('--tau', type=float, help='edge-extraction norm threshold')
    group.add_argument('--loss-scale', dest='loss_scale', choices=LOSS_SCALES, help='likelihood scaling')
    group.add_argument('--pm-source', dest='pm_source', choices=PM_SOURCES,
                       help='edge set the per-sweep path matrix is built from')


def _hyperparams(args) -> HyperParams:
    flags = {k: getattr(args, k) for k in HP_FLAGS + ('loss_scale', 'pm_source') if getattr(args, k) is not None}
    return HyperParams(**flags)


def build_parser() -> CliParser:
    parser = CliParser(prog='svrcd-bn', description='Bayesian-network structure learning with SVRCD.')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    parser.add_argument('-q', '--quiet', action='store_true', help='warnings only')
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('generate', help='synthesize a truth graph and a dataset')
    gen.add_argument('--graph-type', dest='graph_type', choices=GRAPH_TYPES, default=DEFAULT_EXPERIMENT['graph_type'])
    gen.add_argument('--p', type=int, default=DEFAULT_EXPERIMENT['p'])
    gen.add_argument('--n', type=int, default=DEFAULT_EXPERIMENT['n'])
    gen.add_argument('--edge-count', dest='edge_count', type=int)
    gen.add_argument('--power', type=float, default=DEFAULT_EXPERIMENT['scale_free_power'])
    gen.add_argument('--noise', type=float, default=0.0, help='fraction of entries to corrupt')
    gen.add_argument('--seed', type=int, default=DEFAULT_EXPERIMENT['seed'])
    gen.add_argument('--out', required=True, help='output directory')

    learn = commands.add_parser('learn', help='learn a DAG from a dataset CSV')
    learn.add_argument('data', help='dataset CSV')
    learn.add_argument('--spec', help='cardinality sidecar JSON')
    learn.add_argument('--method', choices=('svrcd', 'hc'), default='svrcd')
    learn.add_argument('--max-parents', dest='max_parents', type=int, default=DEFAULT_EXPERIMENT['max_parents'])
    learn.add_argument('--seed', type=int, default=DEFAULT_EXPERIMENT['seed'])
    learn.add_argument('--out', help='edge-list output path (default: stdout)')
    learn.add_argument('--trace', help='per-sweep trace CSV output path')
    _add_hyperparams(learn)

    ev = commands.add_parser('evaluate', help='compare an estimated edge list with the truth')
    ev.add_argument('estimated')
    ev.add_argument('truth')
    ev.add_argument('--out', help='metrics CSV output path')

    exp = commands.add_parser('experiment', help='run a benchmark study')
    exp.add_argument('--config', help='JSON file mirroring ExperimentConfig')
    exp.add_argument('--mode', choices=MODES)
    exp.add_argument('--graph-type', dest='graph_type', choices=GRAPH_TYPES)
    exp.add_argument('--p', type=int)
    exp.add_argument('--n', type=int)
    exp.add_argument('--replicates', type=int)
    exp.add_argument('--noise', type=float, nargs='+')
    exp.add_argument('--values', dest='sweep_values', type=float, nargs='+', help='explicit sweep grid')
    exp.add_argument('--edge-count', dest='edge_count', type=int)
    exp.add_argument('--max-parents', dest='max_parents', type=int)
    exp.add_argument('--seed', type=int)
    exp.add_argument('--workers', type=int)
    exp.add_argument('--out')
    _add_hyperparams(exp)
    return parser


def cmd_generate(args) -> int:
    cfg = ExperimentConfig(graph_type=args.graph_type, p=args.p, n=args.n, seed=args.seed,
                           edge_count=args.edge_count, scale_free_power=args.power)
    truth, data = synthesize(cfg, args.n, args.p, 0, args.noise)

    out = Path(args.out)
    write_edge_list(truth, out / 'truth.edges')
    DatasetFileProcessor.save_to_file(data, out / 'data.csv')
    DatasetFileProcessor.save_spec(data.specs, out / 'data.spec.json')
    print(f"{args.graph_type} graph: p={truth.p}, s0={truth.n_edges}; dataset n={data.n} -> {out}")
    return 0


def cmd_learn(args) -> int:
    data = DatasetFileProcessor.load_from_file(args.data, args.spec)
    trace = None
    if args.method == 'svrcd':
        result = SVRCDLearner(_hyperparams(args), seed=args.seed).fit(data)
        graph, trace = result.graph, result.trace_frame()
    else:
        graph = hc_baseline(data, args.max_parents)

    if args.out:
        write_edge_list(graph, args.out)
    else:
        sys.stdout.write(EdgeListProcessor.format(graph))
    if args.trace and trace is not None:
        RunArtifactManager(Path(args.trace).parent).write_table(Path(args.trace).name, trace)

    sizes = pd.DataFrame([{
        'edges': graph.n_edges,
        'multi_logit_params': param_count(data.specs, graph, 'multi_logit'),
        'product_multinomial_params': param_count(data.specs, graph, 'product_multinomial'),
    }])
    logger.info("learned graph:\n%s", sizes.to_string(index=False))
    return 0


def cmd_evaluate(args) -> int:
    report = evaluate(read_edge_list(args.estimated), read_edge_list(args.truth))
    table = pd.DataFrame([report.as_dict()])
    print(table.round(4).to_string(index=False))
    if args.out:
        RunArtifactManager(Path(args.out).parent).write_table(Path(args.out).name, table)
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    flags = {k: getattr(args, k) for k in ('mode', 'graph_type', 'p', 'n', 'replicates', 'noise', 'sweep_values',
                                           'edge_count', 'max_parents', 'seed', 'workers', 'out')}
    flags.update({k: getattr(args, k) for k in HP_FLAGS + ('loss_scale', 'pm_source')})
    cfg = cfg.with_overrides(**flags)
    if cfg.mode == 'scalability' and (args.n is not None or args.p is not None):
        cfg = cfg.with_overrides(grid=[(cfg.n, cfg.p)])

    record = run_experiment(cfg)
    table = record.aggregate.copy()
    seconds = pd.DataFrame({'setting': record.replicates['setting'], 'method': record.replicates['method'],
                            'seconds': record.wall_times})
    table = table.merge(seconds.groupby(['setting', 'method'], sort=False, as_index=False).mean(),
                        on=['setting', 'method'])
    columns = ['setting', 'method', 'replicates', 'P', 'E', 'R', 'M', 'FP', 'TPR', 'FDR', 'SHD', 'JI', 'seconds']
    print(table[columns].round(2).to_string(index=False))
    print(f"results: {cfg.out} (hash {record.content_hash[:12]})")
    return 0


COMMANDS = {
    'generate': cmd_generate,
    'learn': cmd_learn,
    'evaluate': cmd_evaluate,
    'experiment': cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (StructureLearningError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
