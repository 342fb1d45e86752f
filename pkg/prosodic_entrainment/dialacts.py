"""
Dialog act inventory and its grouping dimensions.

Twelve conversational moves, each grouped by

* authority (high / low) and support (yes / no): fixed per label
* frequency (high / low): label probability above the median of the 12 label probabilities
* predictability (high / low): per occurrence, bigram probability P(label | previous label)
  above the median over all occurrences; dialog-initial acts have none

Probabilities rather than counts so that groupings carry over across corpora.
``frozen=True`` uses the reference frequency column instead of the corpus at hand.
"""

__all__ = ['LABELS', 'GROUPING_TABLE', 'TABLE2_COUNTS', 'DIMENSIONS', 'Condition', 'DialogActSegment',
           'DaGrouping', 'compute_da_probs', 'occurrence_bigrams', 'assign_groupings', 'group_counts',
           'segments_to_frame']

import enum
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .misc import ProsodyInputError

logger = logging.getLogger(__name__)

LABELS = ('AC', 'AL', 'CH', 'CL', 'EX', 'IN', 'QW', 'QY', 'RE', 'RN', 'RW', 'RY')

#: label -> (authority, support, frequency)
GROUPING_TABLE: Dict[str, Tuple[str, str, str]] = {
    'AC': ('low', 'yes', 'high'),   # acknowledge
    'AL': ('low', 'yes', 'low'),    # align
    'CH': ('low', 'no', 'high'),    # check
    'CL': ('high', 'yes', 'low'),   # clarify
    'EX': ('high', 'yes', 'high'),  # explain
    'IN': ('high', 'no', 'low'),    # instruct
    'QW': ('low', 'no', 'low'),     # wh-question
    'QY': ('low', 'no', 'high'),    # yes/no-question
    'RE': ('low', 'no', 'high'),    # ready
    'RN': ('high', 'yes', 'low'),   # reply no
    'RW': ('high', 'yes', 'low'),   # reply wh
    'RY': ('high', 'yes', 'high'),  # reply yes
}

DIMENSIONS = ('authority', 'support', 'frequency', 'predictability')

#: level counts on the 4011 segments of the game corpus, kept for documentation
TABLE2_COUNTS = {'authority': {'high': 1982, 'low': 2029},
                 'support': {'yes': 2651, 'no': 1360},
                 'frequency': {'high': 3558, 'low': 453},
                 'predictability': {'high': 3813, 'low': 198}}


class Condition(enum.Enum):
    """
    Game condition of a dialog: COOPERATIVE or COMPETITIVE
    """
    COOPERATIVE = enum.auto()
    COMPETITIVE = enum.auto()

    @classmethod
    def parse(cls, value) -> 'Condition':
        if isinstance(value, Condition):
            return value
        key = str(value).strip().lower()
        if key in ('cooperative', 'coop'):
            return cls.COOPERATIVE
        if key in ('competitive', 'comp'):
            return cls.COMPETITIVE
        raise ValueError(f'unknown condition {value!r}')

    @property
    def short(self) -> str:
        return 'coop' if self is Condition.COOPERATIVE else 'comp'


@dataclass(frozen=True)
class DialogActSegment:
    dialog_id: str
    speaker: str
    label: str
    start: float
    end: float
    condition: Condition
    index: int = 0

    def __post_init__(self):
        if not self.start < self.end:
            raise ProsodyInputError(f'segment must start before it ends ({self.start} >= {self.end})',
                                    field='start/end')

    @property
    def segment_id(self) -> str:
        return f'{self.dialog_id}:{self.index}'

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class DaGrouping:
    authority: str
    support: str
    frequency: str
    predictability: Optional[str]

    def level(self, dimension: str) -> Optional[str]:
        return getattr(self, dimension)


def _in_dialog_order(segments: Iterable[DialogActSegment]) -> List[DialogActSegment]:
    return sorted(segments, key=lambda s: (s.dialog_id, s.index))


def compute_da_probs(segments: Sequence[DialogActSegment]) -> Tuple[Dict[str, float], Dict[Tuple[str, str], float]]:
    """
    Maximum likelihood unigram and bigram probabilities. The bigram context is the
    preceding segment of the same dialog, whoever the speaker.

    :return: ``{label: P(label)}``, ``{(previous, label): P(label | previous)}``
    """
    if len(segments) == 0:
        raise ProsodyInputError('no dialog act segments')
    unigrams = Counter(s.label for s in segments)
    total = sum(unigrams.values())
    unigram = {label: count / total for label, count in sorted(unigrams.items())}
    pairs: Counter = Counter()
    contexts: Counter = Counter()
    by_dialog = defaultdict(list)
    for segment in _in_dialog_order(segments):
        by_dialog[segment.dialog_id].append(segment)
    for dialog in by_dialog.values():
        for previous, current in zip(dialog[:-1], dialog[1:]):
            pairs[(previous.label, current.label)] += 1
            contexts[previous.label] += 1
    bigram = {pair: count / contexts[pair[0]] for pair, count in sorted(pairs.items())}
    return unigram, bigram


def occurrence_bigrams(segments: Sequence[DialogActSegment],
                       bigram: Dict[Tuple[str, str], float]) -> Dict[str, Optional[float]]:
    """
    ``{segment_id: P(label | previous label)}``, None for the first segment of a dialog.
    """
    result: Dict[str, Optional[float]] = {}
    previous: Optional[DialogActSegment] = None
    for segment in _in_dialog_order(segments):
        if previous is None or previous.dialog_id != segment.dialog_id:
            result[segment.segment_id] = None
        else:
            result[segment.segment_id] = bigram.get((previous.label, segment.label), 0.)
        previous = segment
    return result


def assign_groupings(segments: Sequence[DialogActSegment],
                     probs: Tuple[Dict[str, float], Dict[Tuple[str, str], float]],
                     frozen: bool = False) -> Dict[str, DaGrouping]:
    """
    Grouping of every segment, keyed by ``segment_id``. Median splits are strict:
    a value equal to the median is low.

    :param probs: output of :func:`compute_da_probs`
    :param frozen: use the reference frequency column rather than the median split
    """
    unigram, bigram = probs
    for segment in segments:
        if segment.label not in GROUPING_TABLE:
            raise ProsodyInputError(f'label outside inventory: {segment.label}', field='da_label')
    label_probs = np.array([unigram.get(label, 0.) for label in LABELS])
    label_median = np.median(label_probs)
    frequency = {label: 'high' if p > label_median else 'low' for label, p in zip(LABELS, label_probs)}
    if frozen:
        frequency = {label: row[2] for label, row in GROUPING_TABLE.items()}
    occurrences = occurrence_bigrams(segments, bigram)
    known = [p for p in occurrences.values() if p is not None]
    occurrence_median = np.median(known) if known else np.nan
    groupings = {}
    for segment in segments:
        authority, support, _ = GROUPING_TABLE[segment.label]
        p = occurrences[segment.segment_id]
        predictability = None if p is None else ('high' if p > occurrence_median else 'low')
        groupings[segment.segment_id] = DaGrouping(authority, support, frequency[segment.label], predictability)
    return groupings


def group_counts(segments: Sequence[DialogActSegment], groupings: Dict[str, DaGrouping]) -> pd.DataFrame:
    """
    Number of segments per dimension level (dialog-initial segments have no predictability).
    """
    rows = []
    for dimension in DIMENSIONS:
        counts = Counter(groupings[s.segment_id].level(dimension) for s in segments)
        for level in sorted(level for level in counts if level is not None):
            rows.append({'dimension': dimension, 'level': level, 'count': counts[level]})
    return pd.DataFrame(rows, columns=['dimension', 'level', 'count'])


def segments_to_frame(segments: Sequence[DialogActSegment],
                      groupings: Optional[Dict[str, DaGrouping]] = None) -> pd.DataFrame:
    rows = []
    for segment in _in_dialog_order(segments):
        row = {'segment_id': segment.segment_id, 'dialog_id': segment.dialog_id, 'speaker': segment.speaker,
               'da_label': segment.label, 'start': segment.start, 'end': segment.end,
               'condition': segment.condition.short, 'index': segment.index}
        if groupings is not None:
            grouping = groupings[segment.segment_id]
            row.update({dimension: grouping.level(dimension) for dimension in DIMENSIONS})
        rows.append(row)
    return pd.DataFrame(rows)
