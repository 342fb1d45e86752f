"""
Significance of entrainment and its dependence on dialog act grouping.

* :func:`sign_table`: per condition, dialog act, feature set and measure, within vs across
  distances are compared by a two-sided Welch t-test; ``+`` if the within distances are
  significantly smaller (entrainment), ``-`` if significantly larger (disentrainment), ``0`` otherwise
* :func:`summarize_resamples`: sign agreement over the pairing resamples
* :func:`proportion_table` / :func:`interaction_table`: share of ``+`` and ``-`` cells per grouping level
* :func:`group_tests`: stratified permutation tests of delta d between grouping levels,
  speakers as strata, in place of mixed effects models (no chi-square statistics are produced)

No multiple comparison correction is applied.
"""

__all__ = ['SignCell', 'ProportionRow', 'SIGNS', 'PROPORTION_FIXTURE', 'INTERACTION_FIXTURE',
           'welch_ttest', 'sign_table', 'summarize_resamples', 'pivot_signs', 'label_levels',
           'proportion_table', 'interaction_table', 'permutation_group_test', 'group_tests', 'conditions_for']

import logging
import zlib
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats as sps

from .dialacts import DIMENSIONS, LABELS
from .misc import DegenerateSamples, ProsodyInputError

logger = logging.getLogger(__name__)

SIGNS = ('+', '-', '0')

#: (condition, dimension, level) -> (p_plus, p_minus) reported on the game corpus, for documentation
PROPORTION_FIXTURE: Dict[Tuple[str, str, str], Tuple[float, float]] = {
    ('coop', 'authority', 'high'): (.5, .1), ('coop', 'authority', 'low'): (.2, .3),
    ('coop', 'support', 'yes'): (.3, .1), ('coop', 'support', 'no'): (.3, .1),
    ('coop', 'frequency', 'high'): (.4, .1), ('coop', 'frequency', 'low'): (.1, .1),
    ('coop', 'predictability', 'high'): (.3, .1), ('coop', 'predictability', 'low'): (.2, .1),
    ('comp', 'authority', 'high'): (.5, .1), ('comp', 'authority', 'low'): (.6, 0.),
    ('comp', 'support', 'yes'): (.2, .2), ('comp', 'support', 'no'): (.7, 0.),
    ('comp', 'frequency', 'high'): (.6, 0.), ('comp', 'frequency', 'low'): (.5, 0.),
    ('comp', 'predictability', 'high'): (.6, 0.), ('comp', 'predictability', 'low'): (.2, .3),
}

#: (condition, authority, support) -> (p_plus, p_minus), same source
INTERACTION_FIXTURE: Dict[Tuple[str, str, str], Tuple[float, float]] = {
    ('coop', 'high', 'yes'): (.34, .04), ('coop', 'low', 'yes'): (.2, .25),
    ('coop', 'high', 'no'): (0., .5), ('coop', 'low', 'no'): (.33, .12),
    ('comp', 'high', 'yes'): (.28, .18), ('comp', 'low', 'yes'): (.1, 0.),
    ('comp', 'high', 'no'): (.6, 0.), ('comp', 'low', 'no'): (.47, .03),
}


@dataclass(frozen=True)
class SignCell:
    da_label: str
    feature_set: str
    measure: str
    sign: str
    p_value: float
    mean_d_s: float
    mean_d_d: float


@dataclass(frozen=True)
class ProportionRow:
    dimension: str
    level: str
    condition: str
    p_plus: float
    p_minus: float

    def __post_init__(self):
        assert self.p_plus + self.p_minus <= 1 + 1e-12, 'proportions exceed 1'


def welch_ttest(sample1: Sequence[float], sample2: Sequence[float]) -> Tuple[float, float, float]:
    """
    Two-sided t-test for independent samples with unequal variances.

    :return: t, Welch-Satterthwaite degrees of freedom, p. Two constant samples with the same
        mean give (0, n1 + n2 - 2, 1)
    :raises DegenerateSamples: fewer than 2 values, or constant samples with different means
    """
    a = np.asarray(sample1, dtype=float)
    b = np.asarray(sample2, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise DegenerateSamples('degenerate samples: fewer than 2 values')
    var_a, var_b = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    if var_a + var_b == 0:
        if a.mean() == b.mean():
            return 0., float(len(a) + len(b) - 2), 1.
        raise DegenerateSamples('degenerate samples: zero variance with different means')
    df = (var_a + var_b) ** 2 / (var_a ** 2 / (len(a) - 1) + var_b ** 2 / (len(b) - 1))
    result = sps.ttest_ind(a, b, equal_var=False)
    p = float(np.clip(result.pvalue, np.finfo(float).tiny, 1.))
    return float(result.statistic), float(df), p


def conditions_for(condition: str) -> List[str]:
    """``coop`` / ``comp`` / ``both`` to the list of conditions reported separately."""
    return ['coop', 'comp'] if condition == 'both' else [condition]


def _cell_sign(d_s: np.ndarray, d_d: np.ndarray, alpha: float) -> Dict:
    row = {'n': len(d_s), 'mean_d_s': float(np.mean(d_s)) if len(d_s) else np.nan,
           'mean_d_d': float(np.mean(d_d)) if len(d_d) else np.nan,
           't': np.nan, 'df': np.nan, 'p_value': np.nan, 'sign': '0', 'note': ''}
    try:
        row['t'], row['df'], row['p_value'] = welch_ttest(d_s, d_d)
    except DegenerateSamples:
        row['note'] = 'n/a'
        return row
    if row['p_value'] < alpha:
        row['sign'] = '+' if row['mean_d_s'] < row['mean_d_d'] else '-' if row['mean_d_s'] > row['mean_d_d'] else '0'
    return row


def sign_table(records: pd.DataFrame, alpha: float = 0.05, per_feature: bool = False,
               conditions: Sequence[str] = ('coop', 'comp'),
               extra_keys: Sequence[str] = ()) -> pd.DataFrame:
    """
    One row per (resample, condition, da_label, feature_set, measure) cell, pooling the
    distances of all features of the set, or one per feature with ``per_feature``.
    Cells with fewer than 2 distances or constant distances get sign ``0`` and note ``n/a``.

    :param records: entrainment records
    :param extra_keys: further record columns to split cells by, e.g. ``predictability``
    """
    keys = ['resample', 'condition', 'da_label', 'feature_set', 'measure'] + (['feature'] if per_feature else [])
    keys += list(extra_keys)
    subset = records[records.condition.isin(list(conditions))]
    rows = []
    for key, cell in subset.groupby(keys, sort=True):
        row = dict(zip(keys, key))
        # sorted values make the cell independent of the record order
        row.update(_cell_sign(np.sort(cell.d_s.values), np.sort(cell.d_d.values), alpha))
        rows.append(row)
    columns = keys + ['n', 'mean_d_s', 'mean_d_d', 't', 'df', 'p_value', 'sign', 'note']
    return pd.DataFrame(rows, columns=columns)


def summarize_resamples(cells: pd.DataFrame) -> pd.DataFrame:
    """
    Collapse the resamples of each cell: fraction of resamples with ``+`` and with ``-``,
    min / median / max p, and the majority sign (``0`` without a majority). A cell that is
    ``n/a`` in every resample stays ``n/a``.
    """
    keys = [column for column in cells.columns
            if column not in ('resample', 'n', 'mean_d_s', 'mean_d_d', 't', 'df', 'p_value', 'sign', 'note')]
    rows = []
    for key, group in cells.groupby(keys, sort=True):
        key = key if isinstance(key, tuple) else (key,)
        frac_plus = float(np.mean(group.sign == '+'))
        frac_minus = float(np.mean(group.sign == '-'))
        p = group.p_value.dropna()
        rows.append({**dict(zip(keys, key)),
                     'n_resamples': len(group),
                     'frac_plus': frac_plus, 'frac_minus': frac_minus,
                     'p_min': p.min() if len(p) else np.nan,
                     'p_median': p.median() if len(p) else np.nan,
                     'p_max': p.max() if len(p) else np.nan,
                     'mean_d_s': group.mean_d_s.mean(), 'mean_d_d': group.mean_d_d.mean(),
                     'sign': '+' if frac_plus > .5 else '-' if frac_minus > .5 else '0',
                     'note': 'n/a' if (group.note == 'n/a').all() else ''})
    return pd.DataFrame(rows)


def pivot_signs(summary: pd.DataFrame) -> pd.DataFrame:
    """
    Grid of signs: rows (condition, feature_set, measure), one column per dialog act label.
    """
    grid = summary.pivot_table(index=['condition', 'feature_set', 'measure'], columns='da_label',
                               values='sign', aggfunc='first')
    return grid.reindex(columns=[label for label in LABELS if label in grid.columns]).fillna('')


def label_levels(segments: pd.DataFrame) -> pd.DataFrame:
    """
    Authority, support and frequency per label from a segments frame with grouping columns.
    """
    return segments.groupby('da_label')[['authority', 'support', 'frequency']].first()


def _proportions(cells: pd.DataFrame) -> Tuple[int, float, float]:
    usable = cells[cells.note != 'n/a']
    if len(usable) == 0:
        return 0, np.nan, np.nan
    return len(usable), float(np.mean(usable.sign == '+')), float(np.mean(usable.sign == '-'))


def proportion_table(summary: pd.DataFrame, levels: pd.DataFrame,
                     predictability_summary: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """
    Proportion of ``+`` and ``-`` cells per grouping level and condition. Each dialog act
    contributes its (feature set, measure) cells to the levels of its label; predictability
    cells come from a summary split by the occurrence's predictability. ``n/a`` cells are left out.

    :param summary: output of :func:`summarize_resamples`
    :param levels: output of :func:`label_levels`
    """
    rows = []
    merged = summary.merge(levels, left_on='da_label', right_index=True, how='inner')
    sources = [(dimension, merged) for dimension in ('authority', 'support', 'frequency')]
    if predictability_summary is not None and 'predictability' in predictability_summary.columns:
        sources.append(('predictability', predictability_summary))
    for dimension, table in sources:
        for (condition, level), cells in table.groupby(['condition', dimension], sort=True):
            n, p_plus, p_minus = _proportions(cells)
            if n == 0:
                continue
            ProportionRow(dimension, level, condition, p_plus, p_minus)
            rows.append({'dimension': dimension, 'level': level, 'condition': condition, 'n_cells': n,
                         'p_plus': p_plus, 'p_minus': p_minus})
    return pd.DataFrame(rows, columns=['dimension', 'level', 'condition', 'n_cells', 'p_plus', 'p_minus'])


def interaction_table(summary: pd.DataFrame, levels: pd.DataFrame) -> pd.DataFrame:
    """
    As :func:`proportion_table` for the four authority x support combinations.
    """
    merged = summary.merge(levels, left_on='da_label', right_index=True, how='inner')
    rows = []
    for (condition, authority, support), cells in merged.groupby(['condition', 'authority', 'support'], sort=True):
        n, p_plus, p_minus = _proportions(cells)
        if n == 0:
            continue
        rows.append({'condition': condition, 'authority': authority, 'support': support, 'n_cells': n,
                     'p_plus': p_plus, 'p_minus': p_minus})
    return pd.DataFrame(rows, columns=['condition', 'authority', 'support', 'n_cells', 'p_plus', 'p_minus'])


def permutation_group_test(values: Sequence[float], levels: Sequence, strata: Sequence,
                           n_perm: int = 10000, seed: int = 0, chunk: int = 500) -> float:
    """
    Two-sided permutation p-value for the difference in means between two levels, permuting
    the level labels within each stratum (speaker). Strata holding a single level are left out.

    ``p = (1 + #{|T_perm| >= |T_obs|}) / (n_perm + 1)``

    :param values: e.g. delta d per unit
    :param levels: factor level per value, exactly two distinct levels
    :param strata: stratum per value
    """
    if n_perm < 1:
        raise ProsodyInputError('no permutations', field='n_perm')
    values = np.asarray(values, dtype=float)
    levels = np.asarray(levels)
    strata = np.asarray(strata)
    mixed = pd.Series(levels).groupby(strata).transform('nunique').values > 1
    values, levels, strata = values[mixed], levels[mixed], strata[mixed]
    distinct = np.unique(levels)
    if len(distinct) != 2:
        raise ProsodyInputError(f'permutation test needs two factor levels, found {len(distinct)}', field='levels')
    first = levels == distinct[0]
    n_first, n_second = first.sum(), (~first).sum()
    if n_first < 2 or n_second < 2:
        raise ProsodyInputError('permutation test needs at least 2 values per level', field='levels')
    order = np.argsort(strata, kind='mergesort')
    values, first, strata = values[order], first[order], strata[order]
    blocks = np.flatnonzero(np.r_[True, strata[1:] != strata[:-1], True])
    total = values.sum()

    def difference(sums: np.ndarray) -> np.ndarray:
        return sums / n_first - (total - sums) / n_second

    observed = abs(difference(np.array([values[first].sum()]))[0])
    rng = np.random.default_rng(seed)
    exceed = 0
    done = 0
    while done < n_perm:
        size = min(chunk, n_perm - done)
        permuted = np.empty((size, len(values)), dtype=bool)
        for lo, hi in zip(blocks[:-1], blocks[1:]):
            permuted[:, lo:hi] = rng.permuted(np.broadcast_to(first[lo:hi], (size, hi - lo)), axis=1)
        exceed += int(np.sum(np.abs(difference(permuted @ values)) >= observed - 1e-12))
        done += size
    return (1 + exceed) / (n_perm + 1)


def _cell_seed(seed: int, *parts: str) -> int:
    return int(np.random.SeedSequence([seed, zlib.crc32('|'.join(parts).encode())]).generate_state(1)[0])


def _segment_deltas(records: pd.DataFrame) -> pd.DataFrame:
    """
    Mean delta d per (segment, measure) over its features, each feature's deltas scaled by their sd.
    Only the first resample is used, so every target counts once.
    """
    first = records[records['resample'] == records['resample'].min()].copy()
    scale = first.groupby(['measure', 'feature_set', 'feature']).d.transform('std')
    first['d_scaled'] = first.d / scale.where(scale > 0, 1.).fillna(1.)
    return (first.groupby(['segment_id', 'speaker', 'condition', 'da_label', 'measure'], sort=True)
            .d_scaled.mean().reset_index())


def group_tests(records: pd.DataFrame, segments: pd.DataFrame, condition: str = 'both',
                n_perm: int = 10000, seed: int = 0) -> pd.DataFrame:
    """
    Permutation tests of delta d between the two levels of each grouping dimension, within
    each reported condition and pooled over both, repeated on subsets: each measure and
    (for the other dimensions) the high and low authority acts.

    :param segments: segments frame with grouping columns (``segment_id`` and the dimensions)
    """
    units = _segment_deltas(records).merge(segments[['segment_id'] + list(DIMENSIONS)], on='segment_id')
    condition_sets = [(c, [c]) for c in conditions_for(condition)]
    if condition == 'both':
        condition_sets.append(('both', ['coop', 'comp']))
    subsets = [('all', None, None), ('measure=convergence', 'measure', 'convergence'),
               ('measure=synchrony', 'measure', 'synchrony'),
               ('authority=high', 'authority', 'high'), ('authority=low', 'authority', 'low')]
    rows = []
    for condition_name, included in condition_sets:
        scope = units[units.condition.isin(included)]
        for subset_name, column, value in subsets:
            chosen = scope if column is None else scope[scope[column] == value]
            for dimension in DIMENSIONS:
                if column == dimension:
                    continue
                data = chosen.dropna(subset=[dimension])
                row = {'condition': condition_name, 'subset': subset_name, 'dimension': dimension,
                       'n': len(data), 'p_value': np.nan, 'note': ''}
                for level in sorted(data[dimension].unique()):
                    row[f'mean_d.{level}'] = data.loc[data[dimension] == level, 'd_scaled'].mean()
                try:
                    row['p_value'] = permutation_group_test(data.d_scaled.values, data[dimension].values,
                                                            data.speaker.values, n_perm,
                                                            _cell_seed(seed, condition_name, subset_name, dimension))
                except ProsodyInputError as error:
                    row['note'] = f'n/a: {error.message}'
                rows.append(row)
    table = pd.DataFrame(rows)
    level_columns = sorted(c for c in table.columns if c.startswith('mean_d.'))
    return table[['condition', 'subset', 'dimension', 'n'] + level_columns + ['p_value', 'note']]
