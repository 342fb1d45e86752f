import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from prosodic_entrainment.dialacts import DIMENSIONS
from prosodic_entrainment.entrain import RECORD_COLUMNS
from prosodic_entrainment.misc import DegenerateSamples, ProsodyInputError
from prosodic_entrainment.stats import (INTERACTION_FIXTURE, PROPORTION_FIXTURE, ProportionRow, group_tests,
                                        interaction_table, permutation_group_test, pivot_signs, proportion_table,
                                        sign_table, summarize_resamples, welch_ttest)


def make_records(d_s, d_d, label='EX', condition='coop', feature_set='IP', measure='convergence', resample=0,
                 speaker='A'):
    n = len(d_s)
    return pd.DataFrame({
        'resample': resample, 'segment_id': [f'{label}:{i}' for i in range(n)], 'dialog_id': 'd00',
        'speaker': speaker, 'da_label': label, 'condition': condition, 'partner_within': 'x', 'partner_across': 'y',
        'feature_set': feature_set, 'feature': [f'f{i % 3}' for i in range(n)], 'measure': measure,
        'd_s': np.asarray(d_s, dtype=float), 'd_d': np.asarray(d_d, dtype=float),
        'd': np.asarray(d_s, dtype=float) - np.asarray(d_d, dtype=float)})[RECORD_COLUMNS]


LEVELS = pd.DataFrame({'authority': ['high', 'low', 'high'], 'support': ['yes', 'no', 'no'],
                       'frequency': ['high', 'high', 'low']}, index=pd.Index(['EX', 'QY', 'IN'], name='da_label'))


# ========== Welch t-test ===================================================================

def test_welch_shifted_by_one():
    t, df, p = welch_ttest([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert t == pytest.approx(-1.)
    assert df == pytest.approx(8.)
    assert p == pytest.approx(0.347, abs=1e-3)


def test_welch_identical_samples():
    t, _, p = welch_ttest([1., 2., 4.], [1., 2., 4.])
    assert t == 0.
    assert p == pytest.approx(1.)


def test_welch_constant_samples():
    assert welch_ttest([2., 2.], [2., 2., 2.]) == (0., 3., 1.)
    with pytest.raises(DegenerateSamples, match='degenerate samples'):
        welch_ttest([2., 2.], [3., 3.])
    with pytest.raises(DegenerateSamples):
        welch_ttest([1.], [1., 2.])


def test_welch_well_separated(rng):
    _, _, p = welch_ttest(rng.normal(0, 1, 20), rng.normal(10, 1, 20))
    assert p < 1e-10


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=20), st.lists(st.floats(-100, 100), min_size=3,
                                                                         max_size=20))
def test_welch_statistic_by_hand(sample1, sample2):
    a, b = np.array(sample1), np.array(sample2)
    se = a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b)
    if se < 1e-6:
        return
    t, df, p = welch_ttest(a, b)
    assert t == pytest.approx((a.mean() - b.mean()) / np.sqrt(se), rel=1e-6, abs=1e-9)
    assert min(len(a), len(b)) - 1 - 1e-9 <= df <= len(a) + len(b) - 2 + 1e-9
    assert p == pytest.approx(2 * sps.t.sf(abs(t), df), rel=1e-6, abs=1e-12)


GRID_SAMPLE = st.lists(st.integers(-10000, 10000).map(lambda i: i / 100), min_size=2, max_size=20)


@given(GRID_SAMPLE, GRID_SAMPLE)
def test_welch_symmetric(sample1, sample2):
    try:
        t, df, p = welch_ttest(sample1, sample2)
    except DegenerateSamples:
        with pytest.raises(DegenerateSamples):
            welch_ttest(sample2, sample1)
        return
    t_swapped, df_swapped, p_swapped = welch_ttest(sample2, sample1)
    assert t_swapped == pytest.approx(-t, rel=1e-9, abs=1e-12)
    assert df_swapped == pytest.approx(df, rel=1e-9)
    assert p_swapped == pytest.approx(p, rel=1e-9, abs=1e-300)
    assert 0 < p <= 1 and df > 0


# ========== sign cells =====================================================================

def test_copied_partner_is_entrainment(rng):
    d_d = rng.uniform(0.5, 2., 30)
    cells = sign_table(make_records(np.zeros(30), d_d))
    assert cells.sign.tolist() == ['+']
    assert cells.n.tolist() == [30]


def test_distant_within_partner_is_disentrainment(rng):
    cells = sign_table(make_records(rng.uniform(3, 4, 30), rng.uniform(0, 1, 30)))
    assert cells.sign.tolist() == ['-']


def test_insufficient_cell():
    cells = sign_table(make_records([0.1], [0.5]))
    assert cells.sign.tolist() == ['0']
    assert cells.note.tolist() == ['n/a']


def test_per_feature_cells(rng):
    records = make_records(np.zeros(30), rng.uniform(0.5, 2., 30))
    assert len(sign_table(records, per_feature=True)) == 3


def test_conditions_reported_separately(rng):
    records = pd.concat([make_records(np.zeros(10), rng.uniform(1, 2, 10)),
                         make_records(rng.uniform(1, 2, 10), rng.uniform(1, 2, 10), condition='comp')])
    assert sign_table(records, conditions=['comp']).condition.unique().tolist() == ['comp']
    assert sorted(sign_table(records).condition) == ['comp', 'coop']


def test_majority_sign_over_resamples(rng):
    records = pd.concat([make_records(np.zeros(20), rng.uniform(1, 2, 20), resample=0),
                         make_records(np.zeros(20), rng.uniform(1, 2, 20), resample=1),
                         make_records(rng.uniform(1, 2, 20), rng.uniform(1, 2, 20) + 5, resample=2)])
    records.loc[records['resample'] == 2, ['d_s', 'd_d']] = 1.
    summary = summarize_resamples(sign_table(records))
    assert summary.frac_plus.tolist() == [pytest.approx(2 / 3)]
    assert summary.sign.tolist() == ['+']
    assert summary.n_resamples.tolist() == [3]


def test_sign_grid_in_label_order(rng):
    records = pd.concat([make_records(np.zeros(10), rng.uniform(1, 2, 10), label='QY'),
                         make_records(np.zeros(10), rng.uniform(1, 2, 10), label='EX')])
    grid = pivot_signs(summarize_resamples(sign_table(records)))
    assert grid.columns.tolist() == ['EX', 'QY']
    assert grid.loc[('coop', 'IP', 'convergence')].tolist() == ['+', '+']


def uniform_records(k, label, feature_set, condition):
    d_s = np.random.default_rng(k).uniform(0, 2, 12)
    d_d = np.random.default_rng(50 + k).uniform(0, 2, 12)
    return make_records(d_s, d_d, label=label, feature_set=feature_set, condition=condition)


MIXED = pd.concat([uniform_records(k, *cell) for k, cell in enumerate([('EX', 'IP', 'coop'), ('EX', 'GF0', 'coop'),
                                                                        ('QY', 'IP', 'comp'), ('IN', 'RHY', 'comp')])],
                  ignore_index=True)


@given(st.integers(0, 2 ** 32 - 1))
def test_sign_table_ignores_record_order(seed):
    shuffled = MIXED.sample(frac=1., random_state=seed).reset_index(drop=True)
    pd.testing.assert_frame_equal(sign_table(shuffled), sign_table(MIXED))


# ========== proportions ====================================================================

def test_all_high_authority_cells_entrained(rng):
    records = pd.concat([make_records(np.zeros(10), rng.uniform(1, 2, 10), label=label, feature_set=fs)
                         for label in ('EX', 'IN') for fs in ('IP', 'GF0')]
                        + [make_records([1.] * 10, [1.] * 10, label='QY')])
    table = proportion_table(summarize_resamples(sign_table(records)), LEVELS).set_index(['dimension', 'level'])
    high = table.loc[('authority', 'high')]
    assert (high.p_plus, high.p_minus, high.n_cells) == (1., 0., 4)
    low = table.loc[('authority', 'low')]
    assert (low.p_plus, low.p_minus) == (0., 0.)


def test_predictability_cells_from_their_own_split(rng):
    records = pd.concat([make_records(np.zeros(10), rng.uniform(1, 2, 10)).assign(predictability='high'),
                         make_records(rng.uniform(2, 3, 10), rng.uniform(0, 1, 10)).assign(predictability='low')])
    summary = summarize_resamples(sign_table(records))
    split = summarize_resamples(sign_table(records, extra_keys=['predictability']))
    table = proportion_table(summary, LEVELS, split).set_index(['dimension', 'level'])
    assert table.loc[('predictability', 'high'), 'p_plus'] == 1.
    assert table.loc[('predictability', 'low'), 'p_minus'] == 1.


def test_interactions(rng):
    records = pd.concat([make_records(np.zeros(10), rng.uniform(1, 2, 10), label='IN'),
                         make_records(rng.uniform(2, 3, 10), rng.uniform(0, 1, 10), label='QY')])
    table = interaction_table(summarize_resamples(sign_table(records)), LEVELS)
    assert table[['authority', 'support', 'p_plus', 'p_minus']].values.tolist() == [['high', 'no', 1., 0.],
                                                                                     ['low', 'no', 0., 1.]]


def test_proportions_cannot_exceed_one():
    with pytest.raises(AssertionError):
        ProportionRow('authority', 'high', 'coop', 0.7, 0.4)


def test_reference_proportions():
    assert PROPORTION_FIXTURE[('coop', 'authority', 'high')] == (.5, .1)
    assert PROPORTION_FIXTURE[('comp', 'support', 'no')] == (.7, 0.)
    for p_plus, p_minus in list(PROPORTION_FIXTURE.values()) + list(INTERACTION_FIXTURE.values()):
        ProportionRow('any', 'any', 'any', p_plus, p_minus)
    assert len(PROPORTION_FIXTURE) == 2 * 2 * len(DIMENSIONS)


# ========== permutation tests ==============================================================

def stratified(rng, shift=0., n_speakers=10, per_level=5):
    values, levels, strata = [], [], []
    for speaker in range(n_speakers):
        for level in ('a', 'b'):
            values.extend(rng.normal(shift if level == 'a' else 0., 1., per_level))
            levels.extend([level] * per_level)
            strata.extend([speaker] * per_level)
    return np.array(values), np.array(levels), np.array(strata)


def test_no_permutations(rng):
    with pytest.raises(ProsodyInputError, match='no permutations'):
        permutation_group_test(*stratified(rng), n_perm=0)


def test_shifted_level_detected(rng):
    assert permutation_group_test(*stratified(rng, shift=-3.), n_perm=5000, seed=1) < 0.001


def test_permutation_deterministic(rng):
    data = stratified(rng)
    assert permutation_group_test(*data, n_perm=300, seed=4) == permutation_group_test(*data, n_perm=300, seed=4)


def test_single_level_strata_left_out():
    values = np.array([0., 0., 0., 0., 50., 60.])
    levels = np.array(['a', 'b', 'a', 'b', 'a', 'a'])
    strata = np.array([1, 1, 2, 2, 3, 3])
    with pytest.raises(ProsodyInputError, match='at least 2 values per level'):
        permutation_group_test(values[[0, 1, 4, 5]], levels[[0, 1, 4, 5]], strata[[0, 1, 4, 5]])
    assert permutation_group_test(values, levels, strata, n_perm=100) == 1.


def test_one_level_only():
    with pytest.raises(ProsodyInputError, match='two factor levels'):
        permutation_group_test([1., 2., 3.], ['a', 'a', 'a'], [1, 2, 3])


@pytest.mark.slow
def test_null_p_values_uniform():
    rng = np.random.default_rng(11)
    p_values = [permutation_group_test(*stratified(rng, n_speakers=4), n_perm=199, seed=k) for k in range(300)]
    assert sps.kstest(p_values, 'uniform').pvalue > 0.001


# ========== group tests ====================================================================

def grouped_records(rng):
    records, segments = [], []
    for speaker in ('S0', 'S1', 'S2', 'S3'):
        for k in range(10):
            for label, shift, authority, support in (('EX', -3., 'high', 'yes'), ('QY', 0., 'low', 'no')):
                segment_id = f'{speaker}:{label}:{k}'
                segments.append({'segment_id': segment_id, 'authority': authority, 'support': support,
                                 'frequency': 'high', 'predictability': 'high' if k % 2 else 'low'})
                for measure in ('convergence', 'synchrony'):
                    d = shift + rng.normal(0, 1)
                    records.append({'resample': 0, 'segment_id': segment_id, 'dialog_id': 'd00', 'speaker': speaker,
                                    'da_label': label, 'condition': 'coop', 'partner_within': 'x',
                                    'partner_across': 'y', 'feature_set': 'GF0', 'feature': 'max',
                                    'measure': measure, 'd_s': 1., 'd_d': 1. - d, 'd': d})
    return pd.DataFrame(records)[RECORD_COLUMNS], pd.DataFrame(segments)


def test_group_tests(rng):
    records, segments = grouped_records(rng)
    table = group_tests(records, segments, condition='coop', n_perm=999, seed=0).set_index(
        ['condition', 'subset', 'dimension'])
    assert set(table.index.get_level_values('condition')) == {'coop'}
    assert table.loc[('coop', 'all', 'authority'), 'p_value'] < 0.01
    assert table.loc[('coop', 'all', 'authority'), 'mean_d.high'] < table.loc[('coop', 'all', 'authority'),
                                                                               'mean_d.low']
    assert table.loc[('coop', 'all', 'frequency'), 'note'].startswith('n/a')
    assert ('coop', 'authority=high', 'authority') not in table.index
    assert table.loc[('coop', 'measure=synchrony', 'authority'), 'n'] == 80


def test_group_tests_pool_both_conditions(rng):
    records, segments = grouped_records(rng)
    table = group_tests(records, segments, condition='both', n_perm=99, seed=0)
    assert set(table.condition) == {'coop', 'comp', 'both'}
    assert table[table.condition == 'comp'].n.eq(0).all()


def test_group_tests_count_each_target_once(rng):
    records, segments = grouped_records(rng)
    repeated = pd.concat([records, records.assign(resample=1, d=records.d + 100.)], ignore_index=True)
    table = group_tests(repeated, segments, condition='coop', n_perm=99, seed=0).set_index(
        ['condition', 'subset', 'dimension'])
    expected = group_tests(records, segments, condition='coop', n_perm=99, seed=0).set_index(
        ['condition', 'subset', 'dimension'])
    assert table.loc[('coop', 'measure=synchrony', 'authority'), 'n'] == 80
    pd.testing.assert_frame_equal(table, expected)
