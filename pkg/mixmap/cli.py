"""Command-line front end.

    python -m mixmap.cli build --lambda 14 --r 1 --n-max 4
    python -m mixmap.cli verify --suite markov --N 6
    python -m mixmap.cli graph --subgraph H --n 1 --format dot
    python -m mixmap.cli entropy --method separated-local --n 2 --p 2
    python -m mixmap.cli measure --n 5 --bins 100

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""
import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence

from tqdm import tqdm

from .config import load_config
from .errors import MixMapError, ParameterError
from .export import PIECE_HEADER, SAMPLE_HEADER, dumps, piece_rows, write_csv, write_json, write_text
from .ledger import RunLedger
from .logs import setup_logging
from .construction.map_core import PiecewiseMap, build_map
from .construction.params import MapParams
from .construction.verification import (CheckReport, random_mixing_trials, verify_monotone_pieces,
                                        verify_partition, verify_periodic_orbits, verify_slope_bound,
                                        verify_smoothness_at_one)
from .chain.markov_graph import (Vertex, build_truncated_graph, export_graph, extension_graph,
                                 subgraph_Hn, verify_markov_property)
from .chain.symbolic import verify_coding, verify_conjugacy
from .chain.entropy import (entropy_chain, entropy_loop_count, entropy_spectral, entropy_subgraph_exact,
                            greedy_separated_count, local_entropy_lower, measure_mu_n, mu_n_entropy_check,
                            separated_upper_bound, spectral_radius_of_derivative, spectral_trace,
                            transience_evidence)

logger = logging.getLogger('MixMap.CLI')

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

SUITES = ('smoothness', 'monotone', 'partition', 'periodic', 'slope', 'markov',
          'mixing', 'coding', 'entropy-chain', 'transience', 'measure')
ENTROPY_METHODS = ('subgraph-exact', 'spectral', 'loop-count', 'separated-upper', 'greedy',
                   'separated-local', 'derivative')
FORMATS = ('json', 'csv', 'dot')


def parse_levels(text: str) -> List[int]:
    """'3' -> [3], '1..8' -> [1, ..., 8], '2,4,6' -> [2, 4, 6]."""
    try:
        if '..' in text:
            lo, hi = text.split('..', 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ParameterError(f"cannot read level list {text!r}") from e


@dataclass
class RunConfig:
    command: str
    lam: str
    r: int
    n_max: int
    N: int
    n: List[int]
    p: int
    epsilon: float
    delta: Optional[float]
    bins: int
    seed: int
    trials: int
    fmt: str
    out: Optional[str]
    suites: List[str] = field(default_factory=list)
    method: str = 'subgraph-exact'
    subgraph: Optional[str] = None
    bits: bool = False
    length: int = 12
    vertex: str = 'S:Hump'
    samples: Optional[int] = None
    output_dir: str = 'output'
    ledger_path: Optional[str] = None
    params: Optional[MapParams] = None

    @classmethod
    def from_args(cls, args: argparse.Namespace, defaults: Dict[str, Any]) -> 'RunConfig':
        def pick(name, key=None):
            value = getattr(args, name, None)
            return defaults.get(key or name) if value is None else value

        def given(name, fallback):
            value = getattr(args, name, None)
            return fallback if value is None else value

        suites = getattr(args, 'suite', None) or ['all']
        if 'all' in suites:
            suites = list(SUITES)
        return cls(
            command=args.command,
            lam=str(pick('lam', 'lambda')),
            r=int(pick('r')),
            n_max=int(pick('n_max')),
            N=int(pick('N')),
            n=parse_levels(getattr(args, 'n', None) or '1..4'),
            p=given('p', 2),
            epsilon=given('epsilon', 0.05),
            delta=getattr(args, 'delta', None),
            bins=int(pick('bins')),
            seed=int(pick('seed')),
            trials=given('trials', 100),
            fmt=getattr(args, 'format', None) or ('dot' if args.command == 'graph' else 'json'),
            out=getattr(args, 'out', None),
            suites=suites,
            method=getattr(args, 'method', None) or 'subgraph-exact',
            subgraph=getattr(args, 'subgraph', None),
            bits=bool(getattr(args, 'bits', False)),
            length=given('length', 12),
            vertex=getattr(args, 'vertex', None) or 'S:Hump',
            samples=getattr(args, 'samples', None),
            output_dir=defaults.get('output_dir', 'output'),
            ledger_path=defaults.get('ledger_path'),
        )

    def validate(self) -> None:
        """Enforce every parameter constraint before dispatch.

        Raises:
            ParameterError: on the first violated constraint.
        """
        self.params = MapParams.create(self.lam, self.r)
        if self.n_max < 1:
            raise ParameterError(f"--n-max must be >= 1, got {self.n_max}")
        if self.N < 0:
            raise ParameterError(f"--N must be >= 0, got {self.N}")
        if not self.n or min(self.n) < 1:
            raise ParameterError(f"--n levels must be >= 1, got {self.n}")
        if self.p < 1:
            raise ParameterError(f"--p must be >= 1, got {self.p}")
        if not self.epsilon > 0:
            raise ParameterError(f"--epsilon must be positive, got {self.epsilon}")
        if self.delta is not None and not self.delta > 0:
            raise ParameterError(f"--delta must be positive, got {self.delta}")
        if self.bins < 2:
            raise ParameterError(f"--bins must be >= 2, got {self.bins}")
        if self.trials < 1:
            raise ParameterError(f"--trials must be >= 1, got {self.trials}")
        if self.length < 1:
            raise ParameterError(f"--length must be >= 1, got {self.length}")
        if self.samples is not None and self.samples < 2:
            raise ParameterError(f"--samples must be >= 2, got {self.samples}")
        if self.fmt not in FORMATS:
            raise ParameterError(f"--format must be one of {FORMATS}, got {self.fmt!r}")
        if self.fmt == 'dot' and self.command != 'graph':
            raise ParameterError("--format dot is only available for graph")
        unknown = set(self.suites) - set(SUITES)
        if unknown:
            raise ParameterError(f"unknown suites {sorted(unknown)}")

    def to_dict(self) -> Dict[str, Any]:
        """The fields that determine outputs (paths excluded)."""
        return {
            "command": self.command, "lambda": self.lam, "r": self.r, "n_max": self.n_max,
            "N": self.N, "n": self.n, "p": self.p, "epsilon": self.epsilon, "delta": self.delta,
            "bins": self.bins, "seed": self.seed, "trials": self.trials, "suites": self.suites,
            "method": self.method, "subgraph": self.subgraph, "bits": self.bits,
            "length": self.length, "vertex": self.vertex, "samples": self.samples,
        }

    def output_path(self, stem: str) -> str:
        if self.out:
            return self.out
        return os.path.join(self.output_dir, f"{stem}.{self.fmt}")


def _print_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    cells = [[str(h) for h in header]] + [[str(v) for v in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    for index, row in enumerate(cells):
        print('  '.join(value.rjust(width) for value, width in zip(row, widths)))
        if index == 0:
            print('  '.join('-' * width for width in widths))


def _build(config: RunConfig, n_max: Optional[int] = None) -> PiecewiseMap:
    return build_map(config.params, max(n_max or 0, config.n_max))


# Subcommands

def cmd_build(config: RunConfig) -> int:
    f = _build(config)
    table = f.constants_table(config.n_max)
    _print_table(['n', 'x_n', 'y_n', 'M_n', 'k_n', 'w_n'],
                 [[row['n'], row['x'], row['y'], row['M'], f"{row['k']:.6g}", f"{row['w']:.9f}"]
                  for row in table])
    stem = f"map_lambda{config.lam}_r{config.r}".replace('/', '-')
    if config.fmt == 'csv':
        path = write_csv(config.output_path(stem), PIECE_HEADER, piece_rows(f.pieces()))
    else:
        document = f.to_document()
        document["levels"] = table
        path = write_json(config.output_path(stem), document)
    logger.info(f"Map written to {path}")
    if config.samples:
        sample_path = os.path.splitext(config.output_path(stem))[0] + '_samples.csv'
        write_csv(sample_path, SAMPLE_HEADER, f.sample_rows(config.samples))
        logger.info(f"Samples written to {sample_path}")
    return EXIT_OK


def _transience_check(config: RunConfig, f: PiecewiseMap) -> List[CheckReport]:
    evidence = transience_evidence(config.params, max(config.N, 3))
    report = CheckReport(name=f"transience[N={max(config.N, 3)}]", details=evidence.to_dict())
    if not evidence.passed:
        report.fail(f"transience evidence failed: gaps {evidence.gaps}")
    return [report]


SUITE_RUNNERS: Dict[str, Callable[[RunConfig, PiecewiseMap], List[CheckReport]]] = {
    'smoothness': lambda c, f: [verify_smoothness_at_one(f, k) for k in range(1, c.r + 1)],
    'monotone': lambda c, f: [verify_monotone_pieces(f, n) for n in c.n],
    'partition': lambda c, f: [verify_partition(f)],
    'periodic': lambda c, f: [verify_periodic_orbits(f, max(c.n))],
    'slope': lambda c, f: [verify_slope_bound(f, seed=c.seed)],
    'markov': lambda c, f: [verify_markov_property(f, c.N)],
    'mixing': lambda c, f: [random_mixing_trials(f, c.trials, c.seed)],
    'coding': lambda c, f: [verify_coding(f, min(max(c.n), 5), c.trials, c.seed),
                            verify_conjugacy(f, [4.0 * (j + 0.5) / c.trials for j in range(c.trials)])],
    'entropy-chain': lambda c, f: [entropy_chain(f, c.n)],
    'transience': _transience_check,
    'measure': lambda c, f: [mu_n_entropy_check(c.params, n) for n in c.n],
}


def cmd_verify(config: RunConfig) -> int:
    f = _build(config, max(max(config.n), config.N))
    reports: List[CheckReport] = []
    with tqdm(total=len(config.suites), desc="Suites", unit="suite", colour="blue") as pbar:
        for suite in config.suites:
            logger.info(f"Running suite {suite}")
            try:
                reports.extend(SUITE_RUNNERS[suite](config, f))
            except MixMapError as e:
                logger.error(f"Failed to run suite {suite}: {str(e)}")
                failed = CheckReport(name=suite)
                failed.fail(str(e))
                reports.append(failed)
            pbar.update(1)

    passed = all(r.passed for r in reports)
    _print_table(['suite', 'status', 'failures'],
                 [[r.name, 'pass' if r.passed else 'FAIL', len(r.failures)] for r in reports])
    manifest = {"passed": passed, "config": config.to_dict(), "suites": [r.to_dict() for r in reports]}
    path = write_json(config.output_path('verify'), manifest)
    logger.info(f"Verification report written to {path}")
    if config.ledger_path:
        RunLedger(config.ledger_path).record('verify', config.to_dict(), manifest)
    return EXIT_OK if passed else EXIT_FAILED


def cmd_graph(config: RunConfig) -> int:
    if config.subgraph == 'H':
        graph = subgraph_Hn(config.params, config.n[0])
        stem = f"graph_H{config.n[0]}"
    elif config.subgraph == 'extension':
        graph = extension_graph(config.params)(config.N)
        stem = f"graph_extension_N{config.N}"
    else:
        graph = build_truncated_graph(config.params, config.N)
        stem = f"graph_G_N{config.N}"
    path = config.output_path(stem)
    if config.fmt == 'csv':
        write_csv(path, ['source', 'target'], ([v.label, w.label] for v, w in graph.edges()))
    else:
        write_text(path, export_graph(graph, config.fmt))
    print(f"{graph.name}: {graph.vertex_count()} vertices, {graph.edge_count()} edges")
    logger.info(f"Graph written to {path}")
    return EXIT_OK


def cmd_entropy(config: RunConfig) -> int:
    method, params = config.method, config.params
    n = config.n[-1]
    if method == 'subgraph-exact':
        result = entropy_subgraph_exact(params, n)
    elif method == 'spectral':
        result = spectral_trace(params, config.N)
    elif method == 'loop-count':
        graph = subgraph_Hn(params, n) if config.subgraph == 'H' else build_truncated_graph(params, config.N)
        result = entropy_loop_count(graph, Vertex.from_label(config.vertex), config.length)
    elif method == 'separated-upper':
        result = separated_upper_bound(params, n, config.epsilon)
    elif method == 'separated-local':
        result = local_entropy_lower(_build(config, n), n, config.p, config.delta)
    elif method == 'greedy':
        count = greedy_separated_count(_build(config), n, config.epsilon)
        print(dumps(count.to_dict()), end='')
        write_json(config.output_path(f"greedy_n{n}"), count.to_dict())
        return EXIT_OK
    elif method == 'derivative':
        radius = spectral_radius_of_derivative(_build(config))
        print(dumps(radius.to_dict()), end='')
        write_json(config.output_path("derivative_radius"), radius.to_dict())
        return EXIT_OK
    else:
        raise ParameterError(f"unknown entropy method {method!r}")

    unit = 'bits' if config.bits else 'nats'
    _print_table(['parameter', f'value ({unit})'], result.trace_rows(config.bits))
    stem = f"entropy_{method}"
    if config.fmt == 'csv':
        path = write_csv(config.output_path(stem), ['parameter', f'value_{unit}'], result.trace_rows(config.bits))
    else:
        path = write_json(config.output_path(stem), result.to_dict(config.bits))
    logger.info(f"{result.method}: {result.to_dict(config.bits)['value_' + unit]:.9f} {unit} -> {path}")
    return EXIT_OK if result.passed else EXIT_FAILED


def cmd_measure(config: RunConfig) -> int:
    n = config.n[-1]
    measure = measure_mu_n(config.params, n, config.bins)
    edges, masses = measure.histogram(config.bins)
    rows = [[float(edges[j]), float(edges[j + 1]), float(masses[j]), str(masses[j])]
            for j in range(config.bins)]
    print(f"mu_{n}: entropy {measure.entropy:.9f}, mass of [0, 1/5] = {measure.mass_below(Fraction(1, 5))}")
    stem = f"measure_n{n}_bins{config.bins}"
    if config.fmt == 'csv':
        path = write_csv(config.output_path(stem), ['bin_left', 'bin_right', 'mass', 'mass_exact'], rows)
    else:
        document = measure.to_dict()
        document["histogram"] = rows
        path = write_json(config.output_path(stem), document)
    logger.info(f"Histogram written to {path}")
    return EXIT_OK


COMMANDS = {
    'build': cmd_build,
    'verify': cmd_verify,
    'graph': cmd_graph,
    'entropy': cmd_entropy,
    'measure': cmd_measure,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='mixmap', description="C^r mixing interval maps and their Markov graphs")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--lambda', dest='lam', type=str, help="slope base lambda (>= 14)")
    common.add_argument('--r', type=int, help="smoothness order")
    common.add_argument('--n-max', dest='n_max', type=int, help="levels to materialize")
    common.add_argument('--seed', type=int, help="seed for randomized probes")
    common.add_argument('--format', choices=FORMATS, help="output format")
    common.add_argument('--out', type=str, help="output path")

    sub = parser.add_subparsers(dest='command', required=True)
    build = sub.add_parser('build', parents=[common], help="build and export the map")
    build.add_argument('--samples', type=int, help="also write x, f, f' on this many grid points")

    verify = sub.add_parser('verify', parents=[common], help="run verification suites")
    verify.add_argument('--suite', action='append', choices=SUITES + ('all',))
    verify.add_argument('--N', type=int)
    verify.add_argument('--n', type=str, help="level, range a..b or list a,b,c")
    verify.add_argument('--trials', type=int)

    graph = sub.add_parser('graph', parents=[common], help="export a graph")
    graph.add_argument('--subgraph', choices=('H', 'extension'))
    graph.add_argument('--N', type=int)
    graph.add_argument('--n', type=str)

    entropy = sub.add_parser('entropy', parents=[common], help="entropy estimates")
    entropy.add_argument('--method', choices=ENTROPY_METHODS)
    entropy.add_argument('--n', type=str)
    entropy.add_argument('--N', type=int)
    entropy.add_argument('--p', type=int)
    entropy.add_argument('--epsilon', type=float)
    entropy.add_argument('--delta', type=float)
    entropy.add_argument('--length', type=int)
    entropy.add_argument('--vertex', type=str)
    entropy.add_argument('--subgraph', choices=('H',))
    entropy.add_argument('--bits', action='store_true')

    measure = sub.add_parser('measure', parents=[common], help="histogram of mu_n")
    measure.add_argument('--n', type=str)
    measure.add_argument('--bins', type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    defaults = load_config()
    setup_logging('mixmap', defaults.get('log_dir'), defaults.get('log_level'))
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        config = RunConfig.from_args(args, defaults)
        config.validate()
    except ParameterError as e:
        logger.error(f"Invalid configuration: {str(e)}")
        return EXIT_CONFIG
    try:
        return COMMANDS[config.command](config)
    except ParameterError as e:
        logger.error(f"Invalid configuration: {str(e)}")
        return EXIT_CONFIG
    except MixMapError as e:
        logger.error(f"Failed to run {config.command}: {str(e)}")
        return EXIT_FAILED


if __name__ == '__main__':
    sys.exit(main())
