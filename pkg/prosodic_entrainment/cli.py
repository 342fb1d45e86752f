"""
Command line interface.

.. code-block:: bash

    prosodic-entrainment synth --out corpus --coupling EX=0.9 --seed 1
    prosodic-entrainment run --corpus corpus --out report --resamples 10 --plot-cell EX IP convergence
    prosodic-entrainment run --manifest report/run_manifest.json --out replay

Single stages read and write the same output folder, so ``extract``, ``detect``, ``features``,
``entrain`` and ``stats`` run in that order are equivalent to ``run``.

Exit codes: 0 ok, 2 bad input, 3 bad configuration.
"""

__all__ = ['main', 'build_parser', 'load_config', 'parse_coupling']

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .config import PipelineConfig, get_config_path
from .corpus import Corpus
from .entrain import read_records
from .misc import ConfigError, ProsodyInputError, get_log
from .pipeline import (MANIFEST_NAME, detect_stage, entrain_stage, extract_stage, features_stage, read_manifest,
                       run_pipeline, stats_stage)
from .plot import write_profile
from .synth import SynthScenario, generate_corpus

logger = logging.getLogger(__name__)

EXIT_INPUT = 2
EXIT_CONFIG = 3


def parse_coupling(values: Optional[Sequence[str]]) -> Dict[str, float]:
    """``['EX=0.9', 'IN=-0.5']`` to ``{'EX': 0.9, 'IN': -0.5}``."""
    coupling = {}
    for value in values or []:
        label, _, rho = value.partition('=')
        try:
            coupling[label] = float(rho)
        except ValueError:
            raise ProsodyInputError(f'coupling must read LABEL=RHO, not {value!r}', field='coupling')
    return coupling


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """
    Manifest config, else the config file (``--config`` or the environment variable), else defaults;
    then the flags.
    """
    if getattr(args, 'manifest', None):
        config, _ = read_manifest(args.manifest)
    else:
        path = get_config_path(getattr(args, 'config', None))
        config = PipelineConfig.load(path) if path is not None else PipelineConfig()
    return config.override(seed=getattr(args, 'seed', None),
                           n_resamples=getattr(args, 'resamples', None),
                           alpha=getattr(args, 'alpha', None),
                           condition=getattr(args, 'condition', None),
                           frozen_groupings=getattr(args, 'frozen_groupings', False),
                           per_feature=getattr(args, 'per_feature', False),
                           n_perm=getattr(args, 'permutations', None))


def _corpus(args: argparse.Namespace) -> Corpus:
    if args.corpus is None:
        raise ProsodyInputError('no corpus given', field='--corpus')
    return Corpus.from_directory(args.corpus)


# ========== subcommands ====================================================================

def run_extract(args: argparse.Namespace) -> None:
    config = load_config(args)
    extract_stage(_corpus(args), config, Path(args.out))


def run_detect(args: argparse.Namespace) -> None:
    config = load_config(args)
    detect_stage(_corpus(args), config, Path(args.out))


def run_features(args: argparse.Namespace) -> None:
    config = load_config(args)
    features_stage(_corpus(args), config, Path(args.out))


def run_entrain(args: argparse.Namespace) -> None:
    config = load_config(args)
    _, report = entrain_stage(config, Path(args.out))
    print(report.to_frame().to_string(index=False))


def run_stats(args: argparse.Namespace) -> None:
    config = load_config(args)
    tables = stats_stage(_corpus(args), config, Path(args.out))
    print(tables['proportions'].to_string(index=False))


def run_synth(args: argparse.Namespace) -> None:
    if args.scenario:
        try:
            data = json.loads(Path(args.scenario).read_text())
        except (OSError, json.JSONDecodeError) as error:
            raise ProsodyInputError(f'unreadable scenario: {error}', filename=args.scenario)
    else:
        data = {}
    for key, value in (('n_dialogs', args.dialogs), ('n_segments_per_dialog', args.segments),
                       ('noise_sd', args.noise_sd), ('seed', args.seed), ('mode', args.mode)):
        if value is not None:
            data[key] = value
    if args.coupling:
        data['coupling'] = parse_coupling(args.coupling)
    scenario = SynthScenario.from_dict(data)
    generate_corpus(scenario).write(args.out)


def run_plot(args: argparse.Namespace) -> None:
    records = read_records(Path(args.out) / 'entrain.jsonl')
    label, feature_set, measure = args.cell
    folder = Path(args.figures) if args.figures else Path(args.out) / 'profiles'
    write_profile(records, label, feature_set, measure, folder, args.condition)


def run_all(args: argparse.Namespace) -> None:
    expected = None
    corpus = args.corpus
    if args.manifest:
        _, manifest = read_manifest(args.manifest)
        expected = manifest.get('inputs')
        corpus = corpus if corpus is not None else manifest.get('corpus')
    if corpus is None:
        raise ProsodyInputError('no corpus given', field='--corpus')
    config = load_config(args)
    report = run_pipeline(corpus, config, args.out, plot_cells=[tuple(cell) for cell in args.plot_cell or []],
                          expected_inputs=expected)
    print(f'{report.n_segments} segments, {report.n_records} records; bundle in {report.out}; '
          f'manifest {report.out / MANIFEST_NAME}')


# ========== parser =========================================================================

def _common(parser: argparse.ArgumentParser, corpus: bool = True) -> None:
    if corpus:
        parser.add_argument('--corpus', type=str, default=None, help='corpus directory')
    parser.add_argument('--out', type=str, required=True, help='output directory')
    parser.add_argument('--config', type=str, default=None, help='JSON config file')
    parser.add_argument('--log_level', type=int, default=logging.INFO, help='logging level (10 debug, 20 info)')


def _analysis(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--seed', type=int, default=None, help='root seed of the pairing resamples')
    parser.add_argument('--resamples', type=int, default=None, help='number of pairing resamples')
    parser.add_argument('--alpha', type=float, default=None, help='significance level')
    parser.add_argument('--condition', choices=['coop', 'comp', 'both'], default=None,
                        help='conditions to report (both: each separately)')
    parser.add_argument('--frozen-groupings', dest='frozen_groupings', action='store_true',
                        help='frequency groups of the reference table instead of the corpus')
    parser.add_argument('--per-feature', dest='per_feature', action='store_true',
                        help='one t-test per feature instead of per pooled feature set')
    parser.add_argument('--permutations', type=int, default=None, help='permutations of the group tests')
    parser.add_argument('--manifest', type=str, default=None, help='replay the config of a run_manifest.json')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Prosodic entrainment by dialog act')
    subparsers = parser.add_subparsers(dest='command', help='pipeline stage')
    subparsers.required = True

    extract_parser = subparsers.add_parser('extract', help='f0 and energy tracks')
    _common(extract_parser)
    _analysis(extract_parser)
    extract_parser.set_defaults(func=run_extract)

    detect_parser = subparsers.add_parser('detect', help='syllable nuclei, phrase boundaries and accents')
    _common(detect_parser)
    _analysis(detect_parser)
    detect_parser.set_defaults(func=run_detect)

    features_parser = subparsers.add_parser('features', help='feature table')
    _common(features_parser)
    _analysis(features_parser)
    features_parser.set_defaults(func=run_features)

    entrain_parser = subparsers.add_parser('entrain', help='pairings and distances')
    _common(entrain_parser, corpus=False)
    _analysis(entrain_parser)
    entrain_parser.set_defaults(func=run_entrain)

    stats_parser = subparsers.add_parser('stats', help='sign cells, proportions and group tests')
    _common(stats_parser)
    _analysis(stats_parser)
    stats_parser.set_defaults(func=run_stats)

    synth_parser = subparsers.add_parser('synth', help='synthetic corpus')
    synth_parser.add_argument('--out', type=str, required=True, help='corpus directory to write')
    synth_parser.add_argument('--scenario', type=str, default=None, help='JSON scenario file')
    synth_parser.add_argument('--mode', choices=['features', 'contour'], default=None)
    synth_parser.add_argument('--dialogs', type=int, default=None)
    synth_parser.add_argument('--segments', type=int, default=None, help='segments per dialog')
    synth_parser.add_argument('--coupling', nargs='+', default=None, metavar='LABEL=RHO')
    synth_parser.add_argument('--noise-sd', dest='noise_sd', type=float, default=None)
    synth_parser.add_argument('--seed', type=int, default=None)
    synth_parser.add_argument('--log_level', type=int, default=logging.INFO)
    synth_parser.set_defaults(func=run_synth)

    plot_parser = subparsers.add_parser('plot', help='SVG profile of one cell')
    plot_parser.add_argument('--out', type=str, required=True, help='output directory holding entrain.jsonl')
    plot_parser.add_argument('--cell', nargs=3, required=True, metavar=('LABEL', 'SET', 'MEASURE'))
    plot_parser.add_argument('--condition', choices=['coop', 'comp'], default=None)
    plot_parser.add_argument('--figures', type=str, default=None, help='folder of the SVG (default out/profiles)')
    plot_parser.add_argument('--log_level', type=int, default=logging.INFO)
    plot_parser.set_defaults(func=run_plot)

    run_parser = subparsers.add_parser('run', help='all stages')
    _common(run_parser)
    _analysis(run_parser)
    run_parser.add_argument('--plot-cell', dest='plot_cell', nargs=3, action='append', default=None,
                            metavar=('LABEL', 'SET', 'MEASURE'), help='draw the profile of a cell (repeatable)')
    run_parser.set_defaults(func=run_all)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    get_log(args.log_level)
    try:
        args.func(args)
    except ConfigError as error:
        logger.error(f'configuration error: {error}')
        return EXIT_CONFIG
    except ProsodyInputError as error:
        logger.error(f'input error: {error}')
        return EXIT_INPUT
    return 0


if __name__ == '__main__':
    sys.exit(main())
