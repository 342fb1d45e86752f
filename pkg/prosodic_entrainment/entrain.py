"""
Within / across dialog pairing and the two distance measures.

For a target dialog act of speaker A, the within partner is a randomly drawn act with
the same label uttered earlier in the same dialog by the partner, and the across partner
a randomly drawn act with the same label by a speaker C who never talks to A anywhere in the
corpus (by default from a dialog of the same condition). Per feature

* convergence distance: ``|x_A - x_B|``
* synchrony distance: ``|(x_A - mean_A) - (x_B - mean_B)|`` with per-dialog speaker means
* delta ``d = d_s - d_d``: below 0 the within pair is closer (entrainment), above 0 further apart

Pairings are redrawn ``n_resamples`` times from child seeds of one seed, so a run is reproducible.

.. code-block:: python

    pairs, report = sample_pairs(features_table, seed=0, n_resamples=10)
    records = compute_records(features_table, pairs)
    write_records(records, 'out/entrain.jsonl')
"""

__all__ = ['SegmentPair', 'SkipReport', 'MEASURES', 'RECORD_COLUMNS', 'speaker_means', 'sample_pairs',
           'validate_pairs', 'convergence_distance', 'synchrony_distance', 'delta_d', 'compute_records',
           'write_records', 'read_records']

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
import pandas as pd

from .features import FeatureSet, ID_COLUMNS
from .misc import ProsodyInputError

logger = logging.getLogger(__name__)

MEASURES = ('convergence', 'synchrony')

RECORD_COLUMNS = ['resample', 'segment_id', 'dialog_id', 'speaker', 'da_label', 'condition',
                  'partner_within', 'partner_across', 'feature_set', 'feature', 'measure', 'd_s', 'd_d', 'd']


@dataclass(frozen=True)
class SegmentPair:
    resample: int
    target: str
    partner: str
    kind: str  # within | across


@dataclass
class SkipReport:
    """
    Per resample: targets considered and those skipped for lack of a within or an across partner.
    """
    n_targets: int = 0
    no_within: Dict[int, int] = field(default_factory=dict)
    no_across: Dict[int, int] = field(default_factory=dict)
    skipped: Dict[int, List[str]] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{'resample': r, 'targets': self.n_targets, 'no_within': self.no_within[r],
                              'no_across': self.no_across[r], 'skipped': len(self.skipped[r])}
                             for r in sorted(self.skipped)])


def _feature_columns(table: pd.DataFrame) -> List[str]:
    prefixes = tuple(f'{fs.name}.' for fs in FeatureSet)
    return [column for column in table.columns if column.startswith(prefixes)]


def _check_table(table: pd.DataFrame) -> None:
    missing = [column for column in ID_COLUMNS if column not in table.columns]
    if missing:
        raise ProsodyInputError('feature table lacks identifier columns', field=', '.join(missing))


def speaker_means(table: pd.DataFrame) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Mean and count of every feature per (dialog_id, speaker), missing values left out.

    :return: means and counts, both indexed by (dialog_id, speaker)
    """
    grouped = table.groupby(['dialog_id', 'speaker'], sort=True)[_feature_columns(table)]
    return grouped.mean(), grouped.count()


def _ordered(table: pd.DataFrame) -> pd.DataFrame:
    _check_table(table)
    return table.sort_values(['dialog_id', 'index'], kind='mergesort').reset_index(drop=True)


def _unrelated_speakers(table: pd.DataFrame) -> Dict[str, Set[str]]:
    dialogs_of: Dict[str, Set[str]] = defaultdict(set)
    for dialog_id, speaker in zip(table.dialog_id, table.speaker):
        dialogs_of[speaker].add(dialog_id)
    speakers_in: Dict[str, Set[str]] = defaultdict(set)
    for speaker, dialogs in dialogs_of.items():
        for dialog_id in dialogs:
            speakers_in[dialog_id].add(speaker)
    unrelated = {}
    for speaker, dialogs in dialogs_of.items():
        related = set().union(*(speakers_in[d] for d in dialogs))
        unrelated[speaker] = set(dialogs_of) - related
    return unrelated


def sample_pairs(table: pd.DataFrame, seed: int = 0, n_resamples: int = 10,
                 condition_matched: bool = True) -> Tuple[List[SegmentPair], SkipReport]:
    """
    Draw one within and one across partner per target, ``n_resamples`` times.

    A target lacking either partner is skipped in that resample and counted in the report.

    :param table: feature table (identifier columns are enough)
    :param seed: root seed; resample r uses the r-th child of ``numpy.random.SeedSequence(seed)``
    :param condition_matched: across partners come from dialogs of the target's condition
    """
    table = _ordered(table)
    unrelated = _unrelated_speakers(table)
    by_dialog_label: Dict[Tuple[str, str], List[int]] = defaultdict(list)
    by_label: Dict[Tuple[str, Optional[str]], List[int]] = defaultdict(list)
    for row, (dialog_id, label, condition) in enumerate(zip(table.dialog_id, table.da_label, table.condition)):
        by_dialog_label[(dialog_id, label)].append(row)
        by_label[(label, condition if condition_matched else None)].append(row)
    speakers = table.speaker.values
    dialogs = table.dialog_id.values
    labels = table.da_label.values
    conditions = table.condition.values
    segment_ids = table.segment_id.values
    indices = table['index'].values
    across_cache: Dict[Tuple[str, str, Optional[str]], np.ndarray] = {}
    pairs: List[SegmentPair] = []
    report = SkipReport(n_targets=len(table))
    for resample, child in enumerate(np.random.SeedSequence(seed).spawn(n_resamples)):
        rng = np.random.default_rng(child)
        report.no_within[resample] = report.no_across[resample] = 0
        report.skipped[resample] = []
        for row in range(len(table)):
            dialog_id, speaker, label = dialogs[row], speakers[row], labels[row]
            condition = conditions[row] if condition_matched else None
            within = [other for other in by_dialog_label[(dialog_id, label)]
                      if speakers[other] != speaker and indices[other] < indices[row]]
            key = (speaker, label, condition)
            if key not in across_cache:
                pool = by_label[(label, condition)]
                across_cache[key] = np.array([other for other in pool if speakers[other] in unrelated[speaker]],
                                             dtype=int)
            across = across_cache[key]
            if not within:
                report.no_within[resample] += 1
            if len(across) == 0:
                report.no_across[resample] += 1
            if not within or len(across) == 0:
                report.skipped[resample].append(segment_ids[row])
                continue
            target = segment_ids[row]
            pairs.append(SegmentPair(resample, target, segment_ids[within[rng.integers(len(within))]], 'within'))
            pairs.append(SegmentPair(resample, target, segment_ids[across[rng.integers(len(across))]], 'across'))
    logger.info(f'{len(pairs) // 2} pairings over {n_resamples} resamples; '
                f'{sum(len(v) for v in report.skipped.values())} target draws skipped')
    return pairs, report


def validate_pairs(table: pd.DataFrame, pairs: Sequence[SegmentPair]) -> None:
    """
    Assert the pairing rules on every pair: same label; within partners earlier in the same
    dialog by another speaker; across partners in another dialog by a speaker who shares no dialog
    with the target speaker.
    """
    table = _ordered(table)
    rows = table.set_index('segment_id')
    unrelated = _unrelated_speakers(table)
    for pair in pairs:
        target, partner = rows.loc[pair.target], rows.loc[pair.partner]
        assert target.da_label == partner.da_label, f'{pair}: labels differ'
        if pair.kind == 'within':
            assert target.dialog_id == partner.dialog_id, f'{pair}: not in the same dialog'
            assert target.speaker != partner.speaker, f'{pair}: same speaker'
            assert partner['index'] < target['index'], f'{pair}: partner does not precede target'
        else:
            assert target.dialog_id != partner.dialog_id, f'{pair}: same dialog'
            assert partner.speaker in unrelated[target.speaker], f'{pair}: speakers are related'


def convergence_distance(x_a: float, x_b: float) -> float:
    return abs(x_a - x_b)


def synchrony_distance(x_a: float, x_b: float, mean_a: float, mean_b: float) -> float:
    return abs((x_a - mean_a) - (x_b - mean_b))


def delta_d(d_s: float, d_d: float) -> float:
    return d_s - d_d


def compute_records(table: pd.DataFrame, pairs: Sequence[SegmentPair]) -> pd.DataFrame:
    """
    One record per (resample, target segment, feature, measure) where the target and both partners
    carry the feature. Synchrony also needs at least 2 values of the feature for each speaker
    in the dialog the value comes from.
    """
    table = _ordered(table)
    columns = _feature_columns(table)
    values = table[columns].to_numpy(dtype=float)
    keys = ['dialog_id', 'speaker']
    means = table.groupby(keys)[columns].transform('mean').to_numpy(dtype=float)
    counts = table.groupby(keys)[columns].transform('count').to_numpy()
    centred = np.where(counts >= 2, values - means, np.nan)
    position = {segment_id: i for i, segment_id in enumerate(table.segment_id)}
    partners: Dict[Tuple[int, str], Dict[str, str]] = defaultdict(dict)
    for pair in pairs:
        partners[(pair.resample, pair.target)][pair.kind] = pair.partner
    complete = [(resample, target, kinds['within'], kinds['across'])
                for (resample, target), kinds in partners.items() if 'within' in kinds and 'across' in kinds]
    if not complete:
        return pd.DataFrame(columns=RECORD_COLUMNS)
    resamples = np.array([c[0] for c in complete])
    target_rows = np.array([position[c[1]] for c in complete])
    within_rows = np.array([position[c[2]] for c in complete])
    across_rows = np.array([position[c[3]] for c in complete])
    feature_sets = [column.split('.', 1)[0] for column in columns]
    feature_names = [column.split('.', 1)[1] for column in columns]
    frames = []
    for measure, source in (('convergence', values), ('synchrony', centred)):
        d_s = np.abs(source[target_rows] - source[within_rows])
        d_d = np.abs(source[target_rows] - source[across_rows])
        pair_index, feature_index = np.nonzero(np.isfinite(d_s) & np.isfinite(d_d))
        rows = target_rows[pair_index]
        frames.append(pd.DataFrame({
            'resample': resamples[pair_index],
            'segment_id': table.segment_id.values[rows],
            'dialog_id': table.dialog_id.values[rows],
            'speaker': table.speaker.values[rows],
            'da_label': table.da_label.values[rows],
            'condition': table.condition.values[rows],
            'partner_within': table.segment_id.values[within_rows[pair_index]],
            'partner_across': table.segment_id.values[across_rows[pair_index]],
            'feature_set': np.array(feature_sets, dtype=object)[feature_index],
            'feature': np.array(feature_names, dtype=object)[feature_index],
            'measure': measure,
            'd_s': d_s[pair_index, feature_index],
            'd_d': d_d[pair_index, feature_index],
        }))
    records = pd.concat(frames, ignore_index=True)
    records['d'] = records.d_s - records.d_d
    records = records.sort_values(['resample', 'dialog_id', 'segment_id', 'measure', 'feature_set', 'feature'],
                                  kind='mergesort').reset_index(drop=True)
    logger.info(f'{len(records)} entrainment records')
    return records[RECORD_COLUMNS]


def write_records(records: pd.DataFrame, path: Union[str, Path]) -> None:
    """JSON lines, one object per record."""
    records[RECORD_COLUMNS].to_json(path, orient='records', lines=True, double_precision=10)


def read_records(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise ProsodyInputError('missing entrainment records', filename=path)
    if path.stat().st_size == 0:
        return pd.DataFrame(columns=RECORD_COLUMNS)
    records = pd.read_json(path, orient='records', lines=True, dtype={'segment_id': str, 'dialog_id': str,
                                                                      'speaker': str, 'partner_within': str,
                                                                      'partner_across': str})
    missing = [column for column in RECORD_COLUMNS if column not in records.columns]
    if missing:
        raise ProsodyInputError('entrainment records lack fields', filename=path, field=', '.join(missing))
    return records[RECORD_COLUMNS]
