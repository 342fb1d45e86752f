import numpy as np
import pytest
from hypothesis import given, strategies as st

from prosodic_entrainment.dialacts import (GROUPING_TABLE, LABELS, Condition, DialogActSegment, assign_groupings,
                                           compute_da_probs, group_counts, occurrence_bigrams, segments_to_frame)
from prosodic_entrainment.misc import ProsodyInputError


def dialog(labels, dialog_id='d00', condition=Condition.COOPERATIVE):
    return [DialogActSegment(dialog_id, 'AB'[i % 2], label, 2. * i, 2. * i + 1., condition, i)
            for i, label in enumerate(labels)]


# ========== probabilities ==================================================================

def test_unigram_probabilities():
    unigram, _ = compute_da_probs(dialog(['EX', 'AC', 'EX', 'QY']))
    assert unigram == {'AC': 0.25, 'EX': 0.5, 'QY': 0.25}


def test_bigram_probabilities():
    _, bigram = compute_da_probs(dialog(['EX', 'AC', 'EX', 'QY']))
    assert bigram[('EX', 'AC')] == 0.5
    assert bigram[('EX', 'QY')] == 0.5
    assert bigram[('AC', 'EX')] == 1.


def test_single_segment():
    unigram, bigram = compute_da_probs(dialog(['RY']))
    assert unigram == {'RY': 1.}
    assert bigram == {}


def test_no_segments():
    with pytest.raises(ProsodyInputError, match='no dialog act segments'):
        compute_da_probs([])


def test_bigrams_do_not_cross_dialogs():
    segments = dialog(['EX', 'AC']) + dialog(['QY', 'EX'], dialog_id='d01')
    _, bigram = compute_da_probs(segments)
    assert ('AC', 'QY') not in bigram
    occurrences = occurrence_bigrams(segments, bigram)
    assert occurrences['d00:0'] is None and occurrences['d01:0'] is None
    assert occurrences['d00:1'] == 1.


# ========== groupings ======================================================================

def test_fixed_dimensions():
    segments = dialog(['EX', 'IN', 'QY'])
    groupings = assign_groupings(segments, compute_da_probs(segments))
    assert (groupings['d00:0'].authority, groupings['d00:0'].support) == ('high', 'yes')
    assert (groupings['d00:1'].authority, groupings['d00:1'].support) == ('high', 'no')
    assert (groupings['d00:2'].authority, groupings['d00:2'].support) == ('low', 'no')


def test_median_split_of_label_probabilities():
    probabilities = [.30, .20, .10, .10, .10, .05, .05, .04, .02, .02, .01, .01]
    counts = {label: int(round(100 * p)) for label, p in zip(LABELS, probabilities)}
    labels = [label for label, count in counts.items() for _ in range(count)]
    segments = dialog(labels)
    groupings = assign_groupings(segments, compute_da_probs(segments))
    frequency = {s.label: groupings[s.segment_id].frequency for s in segments}
    # median 0.05: the five labels above it are high, the tied ones low
    assert sorted(label for label, level in frequency.items() if level == 'high') == sorted(LABELS[:5])


@given(st.lists(st.sampled_from(LABELS), min_size=2, max_size=60))
def test_at_most_half_the_labels_frequent(labels):
    segments = dialog(labels)
    groupings = assign_groupings(segments, compute_da_probs(segments))
    frequent = {s.label for s in segments if groupings[s.segment_id].frequency == 'high'}
    assert len(frequent) <= 6


@given(st.lists(st.integers(min_value=0, max_value=20), min_size=12, max_size=12).filter(any))
def test_median_split_matches_counting(counts):
    labels = [label for label, count in zip(LABELS, counts) for _ in range(count)]
    segments = dialog(labels)
    unigram, _ = compute_da_probs(segments)
    groupings = assign_groupings(segments, (unigram, {}))
    probabilities = {label: unigram.get(label, 0.) for label in LABELS}
    for segment in segments:
        # above the median of 12 values means at least 6 labels strictly less probable
        below = sum(p < probabilities[segment.label] for p in probabilities.values())
        assert (groupings[segment.segment_id].frequency == 'high') == (below >= 6)


def test_frozen_frequency():
    segments = dialog(['AL'] * 10 + ['EX'])
    groupings = assign_groupings(segments, compute_da_probs(segments), frozen=True)
    assert groupings['d00:0'].frequency == GROUPING_TABLE['AL'][2] == 'low'
    assert groupings['d00:10'].frequency == 'high'


def test_predictability_split():
    segments = dialog(['EX', 'AC', 'EX', 'AC', 'EX', 'QY'])
    groupings = assign_groupings(segments, compute_da_probs(segments))
    assert groupings['d00:0'].predictability is None
    # occurrence probabilities 2/3, 1, 2/3, 1, 1/3 with median 2/3; ties are low
    assert groupings['d00:2'].predictability == 'high'
    assert groupings['d00:1'].predictability == 'low'
    assert groupings['d00:5'].predictability == 'low'


def test_label_outside_inventory():
    segments = dialog(['EX', 'XX'])
    with pytest.raises(ProsodyInputError, match='label outside inventory'):
        assign_groupings(segments, compute_da_probs(segments))


def test_group_counts_and_frame():
    segments = dialog(['EX', 'AC', 'EX', 'QY'])
    groupings = assign_groupings(segments, compute_da_probs(segments))
    counts = group_counts(segments, groupings)
    authority = counts[counts.dimension == 'authority'].set_index('level')['count']
    assert authority.to_dict() == {'high': 2, 'low': 2}
    predictability = counts[counts.dimension == 'predictability']['count'].sum()
    assert predictability == 3
    frame = segments_to_frame(segments, groupings)
    assert frame.columns.tolist()[-4:] == ['authority', 'support', 'frequency', 'predictability']
    assert frame.segment_id.tolist() == ['d00:0', 'd00:1', 'd00:2', 'd00:3']


# ========== segments =======================================================================

@pytest.mark.parametrize('text, condition', [('coop', Condition.COOPERATIVE), ('Competitive', Condition.COMPETITIVE),
                                             (' comp ', Condition.COMPETITIVE)])
def test_condition_parse(text, condition):
    assert Condition.parse(text) is condition


def test_unknown_condition():
    with pytest.raises(ValueError):
        Condition.parse('neutral')


def test_segment_must_have_positive_duration():
    with pytest.raises(ProsodyInputError):
        DialogActSegment('d00', 'A', 'EX', 3., 3., Condition.COOPERATIVE)


def test_segment_id():
    segment = DialogActSegment('d07', 'A', 'EX', 0., np.float64(1.), Condition.COMPETITIVE, 12)
    assert segment.segment_id == 'd07:12'
    assert segment.condition.short == 'comp'
