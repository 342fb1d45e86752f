"""
Reading a corpus directory.

.. code-block:: text

    corpus/
        dialog_acts.tsv   dialog_id speaker start end da_label condition
        words.tsv         dialog_id speaker start end word [stress_nucleus_time]
        f0/<dialog>_<speaker>.f0      time_sec f0_hz (optional if audio is given)
        audio/<dialog>_<speaker>.wav  16 bit mono (optional if f0 is given and no nuclei are needed)
        features.tsv      precomputed feature table (feature level corpora)

TSV files have a header row. A corpus with ``features.tsv`` and no ``words.tsv`` is a
feature level corpus and skips signal processing altogether.
Dialog act tags outside the 12-tag inventory are ignored with a warning.
"""

__all__ = ['DIALOG_ACT_COLUMNS', 'WORD_COLUMNS', 'read_dialog_acts', 'write_dialog_acts', 'read_words',
           'write_words', 'read_feature_table', 'write_feature_table', 'Corpus']

import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .dialacts import GROUPING_TABLE, Condition, DialogActSegment
from .features import ID_COLUMNS, qualified_names
from .misc import ProsodyInputError, file_digest
from .signal import AudioBuffer, SampledTrack, extract_f0_autocorr, read_f0_track, read_wav
from .structure import WordSegment, mark_pauses

logger = logging.getLogger(__name__)

DIALOG_ACT_COLUMNS = ['dialog_id', 'speaker', 'start', 'end', 'da_label', 'condition']
WORD_COLUMNS = ['dialog_id', 'speaker', 'start', 'end', 'word']


def _read_tsv(path: Path, columns: Sequence[str]) -> pd.DataFrame:
    if not path.exists():
        raise ProsodyInputError('missing tier', filename=path)
    try:
        table = pd.read_csv(path, sep='\t', dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ProsodyInputError('empty tier', filename=path)
    missing = [column for column in columns if column not in table.columns]
    if missing:
        raise ProsodyInputError('missing column', filename=path, field=', '.join(missing), line=1)
    return table


def _numeric(table: pd.DataFrame, column: str, path: Path) -> np.ndarray:
    values = pd.to_numeric(table[column], errors='coerce')
    bad = np.flatnonzero(values.isna().values)
    if len(bad):
        # header is line 1
        raise ProsodyInputError('not a number', filename=path, field=column, line=int(bad[0]) + 2)
    return values.values.astype(float)


def read_dialog_acts(path: Union[str, Path]) -> List[DialogActSegment]:
    """
    Dialog act tier. Segments are indexed per dialog in order of their start time.
    """
    path = Path(path)
    table = _read_tsv(path, DIALOG_ACT_COLUMNS)
    starts, ends = _numeric(table, 'start', path), _numeric(table, 'end', path)
    rows = []
    ignored = 0
    for i, (dialog_id, speaker, label, condition) in enumerate(zip(table.dialog_id, table.speaker,
                                                                   table.da_label, table.condition)):
        line = i + 2
        if label not in GROUPING_TABLE:
            ignored += 1
            logger.warning(f'{path} line {line}: dialog act {label!r} outside the inventory, ignored')
            continue
        if not starts[i] < ends[i]:
            raise ProsodyInputError('start must precede end', filename=path, field='start', line=line)
        try:
            parsed = Condition.parse(condition)
        except ValueError:
            raise ProsodyInputError(f'unknown condition {condition!r}', filename=path, field='condition', line=line)
        rows.append((dialog_id, starts[i], ends[i], speaker, label, parsed))
    if ignored:
        logger.warning(f'{ignored} dialog acts outside the inventory ignored')
    conditions: Dict[str, Condition] = {}
    counters: Dict[str, int] = defaultdict(int)
    segments = []
    for dialog_id, start, end, speaker, label, condition in sorted(rows, key=lambda r: (r[0], r[1], r[2])):
        if conditions.setdefault(dialog_id, condition) is not condition:
            raise ProsodyInputError(f'dialog {dialog_id} has more than one condition', filename=path,
                                    field='condition')
        segments.append(DialogActSegment(dialog_id=dialog_id, speaker=speaker, label=label, start=start, end=end,
                                         condition=condition, index=counters[dialog_id]))
        counters[dialog_id] += 1
    return segments


def write_dialog_acts(path: Union[str, Path], segments: Sequence[DialogActSegment]) -> None:
    table = pd.DataFrame([{'dialog_id': s.dialog_id, 'speaker': s.speaker, 'start': round(s.start, 4),
                           'end': round(s.end, 4), 'da_label': s.label, 'condition': s.condition.short}
                          for s in segments], columns=DIALOG_ACT_COLUMNS)
    table.to_csv(path, sep='\t', index=False)


def read_words(path: Union[str, Path], pause_threshold: float = 0.2) -> Dict[Tuple[str, str], List[WordSegment]]:
    """
    Word tier grouped by (dialog_id, speaker), sorted by start and pause-flagged. The optional
    ``stress_nucleus_time`` column may be left empty per word.
    """
    path = Path(path)
    table = _read_tsv(path, WORD_COLUMNS)
    starts, ends = _numeric(table, 'start', path), _numeric(table, 'end', path)
    stress = np.full(len(table), np.nan)
    if 'stress_nucleus_time' in table.columns:
        given = (table.stress_nucleus_time.str.strip() != '').values
        parsed = pd.to_numeric(table.stress_nucleus_time.where(given), errors='coerce').values
        bad = np.flatnonzero(given & np.isnan(parsed))
        if len(bad):
            raise ProsodyInputError('not a number', filename=path, field='stress_nucleus_time', line=int(bad[0]) + 2)
        stress = parsed.astype(float)
    words: Dict[Tuple[str, str], List[WordSegment]] = defaultdict(list)
    for i, (dialog_id, speaker, word) in enumerate(zip(table.dialog_id, table.speaker, table.word)):
        if not starts[i] < ends[i]:
            raise ProsodyInputError('start must precede end', filename=path, field='start', line=i + 2)
        words[(dialog_id, speaker)].append(
            WordSegment(start=starts[i], end=ends[i], word=word,
                        stressed_syllable_nucleus=None if np.isnan(stress[i]) else float(stress[i]),
                        dialog_id=dialog_id, speaker=speaker))
    return {key: mark_pauses(value, pause_threshold) for key, value in sorted(words.items())}


def write_words(path: Union[str, Path], words: Sequence[WordSegment]) -> None:
    table = pd.DataFrame([{'dialog_id': w.dialog_id, 'speaker': w.speaker, 'start': round(w.start, 4),
                           'end': round(w.end, 4), 'word': w.word,
                           'stress_nucleus_time': '' if w.stressed_syllable_nucleus is None
                           else round(w.stressed_syllable_nucleus, 4)}
                          for w in words], columns=WORD_COLUMNS + ['stress_nucleus_time'])
    table.to_csv(path, sep='\t', index=False)


def read_feature_table(path: Union[str, Path]) -> pd.DataFrame:
    """
    Feature table: identifier columns plus set-qualified feature columns, empty cells for missing features.
    """
    path = Path(path)
    if not path.exists():
        raise ProsodyInputError('missing feature table', filename=path)
    header = pd.read_csv(path, sep='\t', nrows=0).columns
    dtypes = {column: str for column in ID_COLUMNS}
    dtypes.update({'index': int, 'start': float, 'end': float})
    missing = [column for column in ID_COLUMNS if column not in header]
    if missing:
        raise ProsodyInputError('missing column', filename=path, field=', '.join(missing), line=1)
    known = set(qualified_names())
    unknown = [column for column in header if column not in ID_COLUMNS and column not in known]
    if unknown:
        raise ProsodyInputError('unknown feature column', filename=path, field=', '.join(unknown), line=1)
    table = pd.read_csv(path, sep='\t', dtype={c: t for c, t in dtypes.items() if c in header})
    for column in header:
        if column in known and not pd.api.types.is_numeric_dtype(table[column]):
            raise ProsodyInputError('not a number', filename=path, field=column)
    return table


def write_feature_table(table: pd.DataFrame, path: Union[str, Path]) -> None:
    table.to_csv(path, sep='\t', index=False, na_rep='', float_format='%.10g')


class Corpus:
    """
    Dialogs of a corpus directory.

    .. code-block:: python

        corpus = Corpus.from_directory('corpus')
        for dialog_id in corpus:
            segments = corpus[dialog_id]

    :param root: corpus directory
    :param segments: all dialog act segments
    :param words: word tier per (dialog_id, speaker), None for feature level corpora
    """

    def __init__(self, root: Path, segments: List[DialogActSegment],
                 words: Optional[Dict[Tuple[str, str], List[WordSegment]]] = None):
        self.root = Path(root)
        self.segments = segments
        self.words = words
        self._by_dialog: Dict[str, List[DialogActSegment]] = defaultdict(list)
        for segment in segments:
            self._by_dialog[segment.dialog_id].append(segment)

    @classmethod
    def from_directory(cls, root: Union[str, Path]) -> 'Corpus':
        root = Path(root)
        if not root.is_dir():
            raise ProsodyInputError('corpus directory not found', filename=root)
        segments = read_dialog_acts(root / 'dialog_acts.tsv')
        words = None
        if (root / 'words.tsv').exists():
            words = read_words(root / 'words.tsv')
        elif not (root / 'features.tsv').exists():
            raise ProsodyInputError('missing tier: need words.tsv (or a precomputed features.tsv)',
                                    filename=root / 'words.tsv')
        logger.info(f'{root}: {len(segments)} dialog acts in {len(set(s.dialog_id for s in segments))} dialogs')
        return cls(root, segments, words)

    @property
    def is_feature_level(self) -> bool:
        return self.words is None

    def __len__(self) -> int:
        return len(self._by_dialog)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._by_dialog))

    def __getitem__(self, dialog_id: str) -> List[DialogActSegment]:
        return self._by_dialog[dialog_id]

    def speakers(self, dialog_id: str) -> List[str]:
        return sorted(set(s.speaker for s in self[dialog_id]))

    def channels(self) -> List[Tuple[str, str]]:
        return [(dialog_id, speaker) for dialog_id in self for speaker in self.speakers(dialog_id)]

    def f0_path(self, dialog_id: str, speaker: str) -> Path:
        return self.root / 'f0' / f'{dialog_id}_{speaker}.f0'

    def audio_path(self, dialog_id: str, speaker: str) -> Path:
        return self.root / 'audio' / f'{dialog_id}_{speaker}.wav'

    def load_audio(self, dialog_id: str, speaker: str) -> Optional[AudioBuffer]:
        path = self.audio_path(dialog_id, speaker)
        return read_wav(path) if path.exists() else None

    def load_f0(self, dialog_id: str, speaker: str, audio: Optional[AudioBuffer] = None,
                **tracker) -> SampledTrack:
        """
        Precomputed f0 if present, else tracked from the audio.

        :param tracker: keyword arguments of :func:`extract_f0_autocorr`
        """
        path = self.f0_path(dialog_id, speaker)
        if path.exists():
            return read_f0_track(path)
        audio = self.load_audio(dialog_id, speaker) if audio is None else audio
        if audio is None:
            raise ProsodyInputError('missing f0 track and audio', filename=path)
        return extract_f0_autocorr(audio, **tracker)

    def input_files(self) -> List[Path]:
        names = ['dialog_acts.tsv', 'words.tsv', 'features.tsv']
        files = [self.root / name for name in names if (self.root / name).exists()]
        for folder in ('f0', 'audio'):
            if (self.root / folder).is_dir():
                files.extend(sorted((self.root / folder).iterdir()))
        return files

    def digest(self) -> Dict[str, str]:
        """sha256 of every input file, keyed by its path relative to the corpus root."""
        return {path.relative_to(self.root).as_posix(): file_digest(path) for path in self.input_files()}
