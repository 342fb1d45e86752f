"""
The pipeline stages and the run that chains them. Stages talk through files in the output folder:

.. code-block:: text

    out/
        tracks/<dialog>_<speaker>.f0.tsv       semitone track (time value valid)
        tracks/<dialog>_<speaker>.energy.tsv   RMS energy
        tracks/bases.tsv                       semitone base per channel
        structure/<dialog>_<speaker>.json      nuclei, phrase boundaries, accents
        features.tsv
        entrain.jsonl  skips.tsv
        segments.tsv  group_counts.tsv  cells.tsv  signs.tsv  sign_grid.tsv
        proportions.tsv  interactions.tsv  group_tests.tsv
        profiles/*.svg                         optional
        run_manifest.json

A feature level corpus (``features.tsv`` without a word tier) skips tracks and structure.
Nothing written carries a timestamp, so a rerun with the same manifest reproduces the bundle byte for byte.
"""

__all__ = ['Channel', 'RunReport', 'write_track', 'read_track', 'extract_stage', 'detect_stage',
           'features_stage', 'entrain_stage', 'stats_stage', 'run_pipeline', 'build_manifest', 'read_manifest',
           'MANIFEST_NAME']

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import PipelineConfig
from .corpus import Corpus, read_feature_table, write_feature_table
from .dialacts import assign_groupings, compute_da_probs, group_counts, segments_to_frame
from .entrain import SkipReport, compute_records, read_records, sample_pairs, validate_pairs, write_records
from .features import ID_COLUMNS, channel_features, qualified_names
from .misc import ConfigError, ProsodyInputError, get_log
from .plot import write_profile
from .signal import SampledTrack, preprocess_f0, rms_energy
from .stats import (conditions_for, group_tests, interaction_table, label_levels, pivot_signs, proportion_table,
                    sign_table, summarize_resamples)
from .structure import ProsodicStructure, detect_structure, detect_syllable_nuclei, mark_pauses

logger = logging.getLogger(__name__)

Channel = Tuple[str, str]
MANIFEST_NAME = 'run_manifest.json'


def _tsv(table: pd.DataFrame, path: Path) -> None:
    table.to_csv(path, sep='\t', index=False, na_rep='', float_format='%.10g')


def _channel_name(channel: Channel) -> str:
    return f'{channel[0]}_{channel[1]}'


# ========== tracks =========================================================================

def write_track(path: Union[str, Path], track: SampledTrack) -> None:
    _tsv(pd.DataFrame({'time': np.round(track.times, 6), 'value': track.values,
                       'valid': track.valid_mask.astype(int)}), Path(path))


def read_track(path: Union[str, Path]) -> SampledTrack:
    path = Path(path)
    if not path.exists():
        raise ProsodyInputError('missing track, run the extract stage first', filename=path)
    table = pd.read_csv(path, sep='\t')
    if len(table) == 0:
        raise ProsodyInputError('empty input', filename=path)
    step = float(np.median(np.diff(table.time.values))) if len(table) > 1 else 0.01
    return SampledTrack(values=table.value.values, sample_rate=round(1 / step, 6), t0=float(table.time.values[0]),
                        valid_mask=table.valid.values.astype(bool))


def extract_stage(corpus: Corpus, config: PipelineConfig,
                  out: Path) -> Dict[Channel, Tuple[SampledTrack, SampledTrack]]:
    """
    Per channel: f0 (precomputed or tracked) cleaned, smoothed and in semitones, plus RMS energy
    (all invalid without audio).
    """
    signal = config.signal
    folder = out / 'tracks'
    folder.mkdir(parents=True, exist_ok=True)
    tracks = {}
    bases = []
    for channel in corpus.channels():
        audio = corpus.load_audio(*channel)
        f0 = corpus.load_f0(*channel, audio=audio, f_min=signal.f_min, f_max=signal.f_max,
                            sample_rate=signal.sample_rate, frame_length=signal.frame_length,
                            voicing_threshold=signal.voicing_threshold)
        try:
            semitones, base = preprocess_f0(f0, signal)
        except ProsodyInputError as error:
            raise ProsodyInputError(error.message, filename=corpus.f0_path(*channel), field=error.field)
        if audio is None:
            energy = SampledTrack(np.full(len(semitones), np.nan), semitones.sample_rate, semitones.t0)
        else:
            energy = rms_energy(audio, signal.sample_rate, signal.energy_window)
        write_track(folder / f'{_channel_name(channel)}.f0.tsv', semitones)
        write_track(folder / f'{_channel_name(channel)}.energy.tsv', energy)
        bases.append({'dialog_id': channel[0], 'speaker': channel[1], 'base_hz': base.base_hz})
        tracks[channel] = (semitones, energy)
        logger.debug(f'{_channel_name(channel)}: base {base.base_hz:.1f} Hz, {len(semitones)} samples')
    _tsv(pd.DataFrame(bases, columns=['dialog_id', 'speaker', 'base_hz']), folder / 'bases.tsv')
    logger.info(f'tracks of {len(tracks)} channels extracted')
    return tracks


def _load_tracks(corpus: Corpus, out: Path) -> Dict[Channel, Tuple[SampledTrack, SampledTrack]]:
    return {channel: (read_track(out / 'tracks' / f'{_channel_name(channel)}.f0.tsv'),
                      read_track(out / 'tracks' / f'{_channel_name(channel)}.energy.tsv'))
            for channel in corpus.channels()}


# ========== structure ======================================================================

def detect_stage(corpus: Corpus, config: PipelineConfig, out: Path,
                 tracks: Optional[Dict[Channel, Tuple[SampledTrack, SampledTrack]]] = None
                 ) -> Dict[Channel, ProsodicStructure]:
    """
    Nuclei from the audio (none without it), then phrase boundaries and accents per channel.
    """
    tracks = _load_tracks(corpus, out) if tracks is None else tracks
    folder = out / 'structure'
    folder.mkdir(parents=True, exist_ok=True)
    structures = {}
    for channel in corpus.channels():
        words = corpus.words.get(channel, [])
        semitones, energy = tracks[channel]
        audio = corpus.load_audio(*channel)
        nuclei = [] if audio is None else detect_syllable_nuclei(audio, config.structure)
        if not words:
            logger.warning(f'{_channel_name(channel)}: no words, no structure')
            structure = ProsodicStructure(nuclei=nuclei)
        else:
            structure = detect_structure(words, semitones, energy if audio is not None else None, nuclei,
                                         config.structure, config.stylize)
        structures[channel] = structure
        (folder / f'{_channel_name(channel)}.json').write_text(
            json.dumps({'nuclei': structure.nuclei, 'phrase_boundaries': structure.phrase_boundaries,
                        'accents': structure.accents}, indent=1) + '\n')
        logger.debug(f'{_channel_name(channel)}: {len(structure.nuclei)} nuclei, '
                     f'{len(structure.phrase_boundaries)} boundaries, {len(structure.accents)} accents')
    logger.info(f'structure of {len(structures)} channels detected')
    return structures


def _load_structures(corpus: Corpus, out: Path) -> Dict[Channel, ProsodicStructure]:
    structures = {}
    for channel in corpus.channels():
        path = out / 'structure' / f'{_channel_name(channel)}.json'
        if not path.exists():
            raise ProsodyInputError('missing structure, run the detect stage first', filename=path)
        structures[channel] = ProsodicStructure(**json.loads(path.read_text()))
    return structures


# ========== features =======================================================================

def features_stage(corpus: Corpus, config: PipelineConfig, out: Path,
                   tracks: Optional[Dict[Channel, Tuple[SampledTrack, SampledTrack]]] = None,
                   structures: Optional[Dict[Channel, ProsodicStructure]] = None) -> pd.DataFrame:
    """
    Feature table of all segments, written to ``features.tsv``. A feature level corpus
    contributes its own table, restricted to the known dialog acts.
    """
    out.mkdir(parents=True, exist_ok=True)
    if corpus.is_feature_level:
        table = read_feature_table(corpus.root / 'features.tsv')
        known = {segment.segment_id for segment in corpus.segments}
        dropped = int((~table.segment_id.isin(known)).sum())
        if dropped:
            logger.warning(f'{dropped} feature rows without a dialog act dropped')
        table = table[table.segment_id.isin(known)]
        table = table.reindex(columns=ID_COLUMNS + qualified_names())
    else:
        tracks = _load_tracks(corpus, out) if tracks is None else tracks
        structures = _load_structures(corpus, out) if structures is None else structures
        frames = []
        for channel in corpus.channels():
            segments = [s for s in corpus[channel[0]] if s.speaker == channel[1]]
            words = mark_pauses(corpus.words.get(channel, []), config.structure.pause_threshold)
            semitones, energy = tracks[channel]
            frames.append(channel_features(segments, words, semitones, energy, structures[channel],
                                           config.features, config.stylize))
        table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
            columns=ID_COLUMNS + qualified_names())
    table = table.sort_values(['dialog_id', 'index'], kind='mergesort').reset_index(drop=True)
    write_feature_table(table, out / 'features.tsv')
    logger.info(f'features of {len(table)} segments')
    return table


# ========== entrainment ====================================================================

def entrain_stage(config: PipelineConfig, out: Path,
                  table: Optional[pd.DataFrame] = None) -> Tuple[pd.DataFrame, SkipReport]:
    table = read_feature_table(out / 'features.tsv') if table is None else table
    entrain = config.entrain
    pairs, report = sample_pairs(table, entrain.seed, entrain.n_resamples, entrain.condition_matched)
    validate_pairs(table, pairs)
    records = compute_records(table, pairs)
    write_records(records, out / 'entrain.jsonl')
    _tsv(report.to_frame(), out / 'skips.tsv')
    for resample, skipped in sorted(report.skipped.items()):
        if skipped:
            logger.info(f'resample {resample}: {len(skipped)} of {report.n_targets} targets skipped '
                        f'({report.no_within[resample]} without within, {report.no_across[resample]} '
                        f'without across partner)')
    return records, report


# ========== statistics =====================================================================

def stats_stage(corpus: Corpus, config: PipelineConfig, out: Path,
                records: Optional[pd.DataFrame] = None) -> Dict[str, pd.DataFrame]:
    """
    Groupings, sign cells and their resample summary, proportion tables and group tests.
    """
    records = read_records(out / 'entrain.jsonl') if records is None else records
    stats = config.stats
    probs = compute_da_probs(corpus.segments)
    groupings = assign_groupings(corpus.segments, probs, frozen=config.frozen_groupings)
    segments = segments_to_frame(corpus.segments, groupings)
    conditions = conditions_for(stats.condition)
    cells = sign_table(records, stats.alpha, stats.per_feature, conditions)
    summary = summarize_resamples(cells) if len(cells) else cells
    with_predictability = records.merge(segments[['segment_id', 'predictability']], on='segment_id').dropna(
        subset=['predictability'])
    predictability_cells = sign_table(with_predictability, stats.alpha, stats.per_feature, conditions,
                                      extra_keys=['predictability'])
    predictability_summary = summarize_resamples(predictability_cells) if len(predictability_cells) else None
    levels = label_levels(segments)
    tables = {'segments': segments,
              'group_counts': group_counts(corpus.segments, groupings),
              'cells': cells,
              'signs': summary,
              'proportions': proportion_table(summary, levels, predictability_summary) if len(summary) else
              pd.DataFrame(columns=['dimension', 'level', 'condition', 'n_cells', 'p_plus', 'p_minus']),
              'interactions': interaction_table(summary, levels) if len(summary) else
              pd.DataFrame(columns=['condition', 'authority', 'support', 'n_cells', 'p_plus', 'p_minus']),
              'group_tests': group_tests(records, segments, stats.condition, stats.n_perm, config.entrain.seed)}
    for name, table in tables.items():
        _tsv(table, out / f'{name}.tsv')
    if len(summary):
        pivot_signs(summary).to_csv(out / 'sign_grid.tsv', sep='\t')
    n_plus = int((summary.sign == '+').sum()) if len(summary) else 0
    n_minus = int((summary.sign == '-').sum()) if len(summary) else 0
    logger.info(f'{len(summary)} cells: {n_plus} entrainment, {n_minus} disentrainment')
    return tables


# ========== run ============================================================================

def _version() -> str:
    from . import __version__
    return __version__


def build_manifest(corpus: Corpus, config: PipelineConfig) -> Dict:
    return {'version': _version(),
            'corpus': str(corpus.root),
            'seed': config.entrain.seed,
            'config': config.to_dict(),
            'inputs': corpus.digest()}


def read_manifest(path: Union[str, Path]) -> Tuple[PipelineConfig, Dict]:
    """
    Config and manifest of a previous run.
    """
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f'{path}: manifest not found')
    except json.JSONDecodeError as error:
        raise ConfigError(f'{path}: not valid JSON ({error.msg}, line {error.lineno})')
    if 'config' not in manifest:
        raise ConfigError(f'{path}: manifest has no config')
    return PipelineConfig.from_dict(manifest['config'], source=str(path)), manifest


@dataclass
class RunReport:
    out: Path
    manifest: Dict
    skips: SkipReport
    n_segments: int = 0
    n_records: int = 0
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    profiles: List[Path] = field(default_factory=list)


def run_pipeline(corpus_dir: Union[str, Path], config: PipelineConfig, out_dir: Union[str, Path],
                 plot_cells: Sequence[Tuple[str, str, str]] = (),
                 expected_inputs: Optional[Dict[str, str]] = None,
                 log_level: Optional[int] = None) -> RunReport:
    """
    All stages, corpus to report bundle.

    :param plot_cells: (da_label, feature_set, measure) cells to draw, one SVG per reported condition
    :param expected_inputs: input digests of a replayed manifest; a mismatch is logged
    """
    if log_level is not None:
        get_log(log_level)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = Corpus.from_directory(corpus_dir)
    manifest = build_manifest(corpus, config)
    if expected_inputs is not None and expected_inputs != manifest['inputs']:
        changed = sorted(set(expected_inputs.items()) ^ set(manifest['inputs'].items()))
        logger.warning(f'corpus differs from the replayed manifest in {len(changed)} entries')
    # ----------------------------------
    if corpus.is_feature_level:
        logger.info('feature level corpus: no signal processing or structure detection')
        table = features_stage(corpus, config, out)
    else:
        tracks = extract_stage(corpus, config, out)
        structures = detect_stage(corpus, config, out, tracks)
        table = features_stage(corpus, config, out, tracks, structures)
    # ----------------------------------
    records, skips = entrain_stage(config, out, table)
    tables = stats_stage(corpus, config, out, records)
    # ----------------------------------
    profiles = []
    for da_label, feature_set, measure in plot_cells:
        for condition in conditions_for(config.stats.condition):
            try:
                profiles.append(write_profile(records, da_label, feature_set, measure, out / 'profiles', condition))
            except ProsodyInputError as error:
                logger.warning(f'profile skipped: {error}')
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + '\n')
    logger.info(f'report bundle written to {out}')
    return RunReport(out=out, manifest=manifest, skips=skips, n_segments=len(table), n_records=len(records),
                     tables=tables, profiles=profiles)
