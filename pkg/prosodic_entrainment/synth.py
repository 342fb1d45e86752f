"""
Synthetic dialog corpora with planted prosodic structure and planted (dis)entrainment.

Dialog ``i`` is held by speaker pair ``i // 2`` and alternates between the cooperative
(even ``i``) and the competitive (odd ``i``) condition, so every pair plays both conditions
and speakers of different pairs never meet.

Coupling per dialog act label, ``rho`` in [-1, 1]:

* ``rho > 0``: both speakers' acts with that label in a dialog share a component of weight
  ``sqrt(rho)``, so within-dialog pairs are closer than across-dialog pairs
* ``rho < 0``: the two speakers get opposite offsets of size ``2 sqrt(|rho|) noise_sd``
  (random sign per dialog), so within-dialog pairs are further apart
* ``rho = 0``: independent

Two modes:

* ``features``: feature values drawn directly (speaker mean + coupling + noise), written as ``features.tsv``
* ``contour``: f0 tracks built from declining phrase registers, cosine syllable modulation and a
  planted accent polynomial on accented syllables, harmonic audio with syllable-sized energy bumps,
  word and dialog act tiers. Phrases rise from a speaker floor that carries no coupling; the coupling
  acts on the phrase range above it, so level and range features follow it. ``truth.json`` lists the
  planted nuclei, boundaries and accents per channel.

.. code-block:: bash

    prosodic-entrainment synth --out corpus --mode features --coupling EX=0.9 IN=-0.9 --seed 1
"""

__all__ = ['SynthScenario', 'SynthCorpus', 'generate_corpus', 'dialog_layout']

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .corpus import write_dialog_acts, write_feature_table, write_words
from .dialacts import LABELS, Condition, DialogActSegment
from .features import ID_COLUMNS, qualified_names
from .misc import ProsodyInputError
from .signal import AudioBuffer, SampledTrack, write_f0_track, write_wav
from .structure import WordSegment

logger = logging.getLogger(__name__)

Channel = Tuple[str, str]


@dataclass
class SynthScenario:
    n_dialogs: int = 10
    n_segments_per_dialog: int = 200
    da_distribution: Dict[str, float] = field(default_factory=lambda: {label: 1 / len(LABELS) for label in LABELS})
    coupling: Dict[str, float] = field(default_factory=dict)
    noise_sd: float = 1.
    speaker_sd: float = 0.1
    seed: int = 0
    mode: str = 'features'
    accent_poly: Tuple[float, float, float, float] = (0.5, 0.3, 0., -0.2)
    audio_rate: int = 8000

    def __post_init__(self):
        self.accent_poly = tuple(float(c) for c in self.accent_poly)
        self.validate()

    def validate(self) -> None:
        if self.mode not in ('features', 'contour'):
            raise ProsodyInputError(f'unknown synthesis mode {self.mode!r}', field='mode')
        unknown = sorted((set(self.da_distribution) | set(self.coupling)) - set(LABELS))
        if unknown:
            raise ProsodyInputError(f'label outside inventory: {", ".join(unknown)}', field='da_distribution')
        probabilities = np.array(list(self.da_distribution.values()), dtype=float)
        if len(probabilities) == 0 or np.any(probabilities < 0) or abs(probabilities.sum() - 1) > 1e-9:
            raise ProsodyInputError('invalid distribution: probabilities must be non-negative and sum to 1',
                                    field='da_distribution')
        for label, rho in self.coupling.items():
            if not -1 <= rho <= 1:
                raise ProsodyInputError(f'coupling of {label} must lie in [-1, 1], not {rho}', field='coupling')
        if self.n_dialogs < 4:
            raise ProsodyInputError('at least 4 dialogs are needed for condition matched across pairs',
                                    field='n_dialogs')
        if self.n_segments_per_dialog < 2:
            raise ProsodyInputError('at least 2 segments per dialog are needed', field='n_segments_per_dialog')
        if self.noise_sd <= 0 or self.speaker_sd < 0:
            raise ProsodyInputError('noise_sd must be positive and speaker_sd non-negative', field='noise_sd')

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['accent_poly'] = list(self.accent_poly)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'SynthScenario':
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ProsodyInputError(f'unknown scenario keys: {", ".join(unknown)}')
        return cls(**data)


@dataclass
class SynthCorpus:
    scenario: SynthScenario
    segments: List[DialogActSegment]
    features: Optional[pd.DataFrame] = None
    words: List[WordSegment] = field(default_factory=list)
    f0: Dict[Channel, SampledTrack] = field(default_factory=dict)
    audio: Dict[Channel, AudioBuffer] = field(default_factory=dict)
    truth: Dict = field(default_factory=dict)

    def write(self, folder: Union[str, Path]) -> Path:
        """
        Write in the layout :class:`prosodic_entrainment.corpus.Corpus` reads, plus ``truth.json``.
        """
        folder = Path(folder)
        folder.mkdir(parents=True, exist_ok=True)
        write_dialog_acts(folder / 'dialog_acts.tsv', self.segments)
        if self.features is not None:
            write_feature_table(self.features, folder / 'features.tsv')
        if self.words:
            write_words(folder / 'words.tsv', self.words)
            (folder / 'f0').mkdir(exist_ok=True)
            (folder / 'audio').mkdir(exist_ok=True)
            for (dialog_id, speaker), track in sorted(self.f0.items()):
                write_f0_track(folder / 'f0' / f'{dialog_id}_{speaker}.f0', track)
            for (dialog_id, speaker), audio in sorted(self.audio.items()):
                write_wav(folder / 'audio' / f'{dialog_id}_{speaker}.wav', audio)
        (folder / 'truth.json').write_text(json.dumps(self.truth, indent=2, sort_keys=True) + '\n')
        logger.info(f'synthetic {self.scenario.mode} corpus written to {folder}')
        return folder


def dialog_layout(n_dialogs: int) -> List[Tuple[str, Condition, Tuple[str, str]]]:
    """(dialog_id, condition, speaker pair) of every dialog."""
    layout = []
    for i in range(n_dialogs):
        pair = i // 2
        condition = Condition.COOPERATIVE if i % 2 == 0 else Condition.COMPETITIVE
        layout.append((f'd{i:02d}', condition, (f'S{2 * pair:02d}', f'S{2 * pair + 1:02d}')))
    return layout


def _turns(rng: np.random.Generator, n: int, scenario: SynthScenario) -> Tuple[List[int], List[str]]:
    labels = list(scenario.da_distribution)
    p = np.array([scenario.da_distribution[label] for label in labels])
    drawn = [labels[i] for i in rng.choice(len(labels), size=n, p=p / p.sum())]
    sides, side = [], int(rng.integers(2))
    for _ in range(n):
        sides.append(side)
        if rng.random() < 0.8:
            side = 1 - side
    return sides, drawn


def _coupled(rng: np.random.Generator, rho: float, side: int, shared: np.ndarray, signs: np.ndarray,
             scale: float, size: int) -> np.ndarray:
    """Coupling component plus noise for one segment (feature vector or generative parameters)."""
    noise = rng.normal(0, 1, size)
    if rho > 0:
        return np.sqrt(rho) * shared + np.sqrt(1 - rho) * scale * noise
    if rho < 0:
        return (1 if side == 0 else -1) * signs * 2 * np.sqrt(-rho) * scale + scale * noise
    return scale * noise


def generate_corpus(scenario: SynthScenario) -> SynthCorpus:
    """
    Deterministic given the scenario: the speakers and each dialog draw from their own child
    seeds of ``scenario.seed``.
    """
    scenario.validate()
    children = np.random.SeedSequence(scenario.seed).spawn(scenario.n_dialogs + 1)
    speaker_rng = np.random.default_rng(children[0])
    layout = dialog_layout(scenario.n_dialogs)
    if scenario.mode == 'features':
        return _feature_corpus(scenario, layout, speaker_rng, children[1:])
    return _contour_corpus(scenario, layout, speaker_rng, children[1:])


# ========== feature level =================================================================

def _feature_corpus(scenario: SynthScenario, layout, speaker_rng, children) -> SynthCorpus:
    columns = qualified_names()
    n_features = len(columns)
    speakers = sorted({s for _, _, pair in layout for s in pair})
    means = {speaker: speaker_rng.normal(0, scenario.speaker_sd, n_features) for speaker in speakers}
    segments, rows = [], []
    for (dialog_id, condition, pair), child in zip(layout, children):
        rng = np.random.default_rng(child)
        shared = {label: rng.normal(0, scenario.noise_sd, n_features) for label in LABELS}
        signs = {label: rng.choice([-1., 1.], n_features) for label in LABELS}
        sides, labels = _turns(rng, scenario.n_segments_per_dialog, scenario)
        for j, (side, label) in enumerate(zip(sides, labels)):
            speaker = pair[side]
            rho = scenario.coupling.get(label, 0.)
            values = means[speaker] + _coupled(rng, rho, side, shared[label], signs[label],
                                               scenario.noise_sd, n_features)
            segment = DialogActSegment(dialog_id, speaker, label, 2. * j, 2. * j + 1.5, condition, j)
            segments.append(segment)
            row = {'segment_id': segment.segment_id, 'dialog_id': dialog_id, 'index': j, 'start': segment.start,
                   'end': segment.end, 'speaker': speaker, 'da_label': label, 'condition': condition.short}
            row.update(zip(columns, np.round(values, 8)))
            rows.append(row)
    features = pd.DataFrame(rows, columns=ID_COLUMNS + columns)
    truth = {'scenario': scenario.to_dict(),
             'speaker_pairs': {dialog_id: list(pair) for dialog_id, _, pair in layout}}
    logger.info(f'{len(segments)} synthetic segments in {len(layout)} dialogs')
    return SynthCorpus(scenario=scenario, segments=segments, features=features, truth=truth)


# ========== contour level =================================================================

_SAMPLE_RATE = 100.
_SYLLABLE_RATE = 5.
_ACCENT_HALF = 0.15
_BLEND = 0.06
_BUMP = 0.1
_SPAN = 5.
_SPAN_SCALE = 1.5


@dataclass
class _Word:
    start: float
    end: float
    kind: str
    nuclei: List[float]
    stress: float


def _word(start: float, duration: float, kind: str) -> _Word:
    duration = round(duration, 2)
    n_syllables = max(1, int(round(duration / 0.2)))
    nuclei = [round(start + (k + 0.5) * duration / n_syllables, 2) for k in range(n_syllables)]
    return _Word(round(start, 2), round(start + duration, 2), kind, nuclei, nuclei[n_syllables // 2])


def _plan_phrase(rng: np.random.Generator, start: float) -> List[_Word]:
    """Accented content word first, no two function words in a row, a lengthened word last."""
    target = rng.uniform(1.3, 2.0)
    words = [_word(start, rng.uniform(0.55, 0.7), 'content')]
    while words[-1].end - start < target:
        kinds = ['content', 'medium'] + ([] if words[-1].kind == 'function' else ['function'])
        kind = kinds[int(rng.integers(len(kinds)))]
        duration = {'content': rng.uniform(0.55, 0.7), 'function': 0.08, 'medium': rng.uniform(0.2, 0.4)}[kind]
        words.append(_word(words[-1].end, duration, kind))
    words.append(_word(words[-1].end, rng.uniform(0.38, 0.45), 'final'))
    return words


def _phrase_contour(times: np.ndarray, words: List[_Word], floor: float, span: float,
                    poly: Tuple[float, ...], declination: float = 4.) -> np.ndarray:
    start, end = words[0].start, words[-1].end
    tau = (times - start) / (end - start)
    base = floor - declination * tau
    norm = 0.5 + 0.5 * np.cos(2 * np.pi * _SYLLABLE_RATE * (times - start))
    shape = np.polynomial.Polynomial(poly)
    for word in words:
        if word.kind != 'content':
            continue
        offset = times - word.stress
        inside = np.abs(offset) <= _ACCENT_HALF + 1e-9
        norm = np.where(inside, shape(offset / _ACCENT_HALF), norm)
        # blend the modulation into the accent edges so that the contour stays continuous
        for edge, sign in ((-_ACCENT_HALF, -1), (_ACCENT_HALF, 1)):
            distance = sign * (offset - edge)
            near = (distance > 1e-9) & (distance < _BLEND)
            weight = 1 - distance / _BLEND
            norm = np.where(near, weight * shape(sign) + (1 - weight) * norm, norm)
    return base + span * norm


def _render_audio(duration: float, f0_track: SampledTrack, nuclei: List[float], accented: set,
                  rate: int) -> AudioBuffer:
    n = int(round(duration * rate))
    t = np.arange(n) / rate
    f0 = np.interp(t, f0_track.times, np.where(f0_track.valid_mask, f0_track.values, 100.))
    phase = 2 * np.pi * np.cumsum(f0) / rate
    carrier = sum(np.sin(k * phase) / k for k in range(1, 6))
    envelope = np.zeros(n)
    half = int(round(_BUMP / 2 * rate))
    window = np.hanning(2 * half + 1)
    for nucleus in nuclei:
        centre = int(round(nucleus * rate))
        lo, hi = max(0, centre - half), min(n, centre + half + 1)
        amplitude = 1. if nucleus in accented else 0.35
        envelope[lo:hi] += amplitude * window[lo - centre + half:hi - centre + half]
    return AudioBuffer(samples=0.25 * envelope * carrier, sample_rate=rate)


def _contour_corpus(scenario: SynthScenario, layout, speaker_rng, children) -> SynthCorpus:
    speakers = sorted({s for _, _, pair in layout for s in pair})
    floors = {speaker: speaker_rng.normal(0, 1.) for speaker in speakers}
    references = {speaker: (110. if i % 2 else 200.) for i, speaker in enumerate(speakers)}
    segments: List[DialogActSegment] = []
    all_words: List[WordSegment] = []
    f0_tracks: Dict[Channel, SampledTrack] = {}
    audio: Dict[Channel, AudioBuffer] = {}
    channels_truth: Dict[str, Dict[str, List[float]]] = {}
    for (dialog_id, condition, pair), child in zip(layout, children):
        rng = np.random.default_rng(child)
        shared = {label: rng.normal(0, 1, 1) for label in LABELS}
        signs = {label: rng.choice([-1., 1.], 1) for label in LABELS}
        sides, labels = _turns(rng, scenario.n_segments_per_dialog, scenario)
        plans: Dict[str, List[Tuple[List[_Word], float, float]]] = {speaker: [] for speaker in pair}
        t = 0.5
        for j, (side, label) in enumerate(zip(sides, labels)):
            speaker = pair[side]
            rho = scenario.coupling.get(label, 0.)
            span_shift = _coupled(rng, rho, side, shared[label] * scenario.noise_sd, signs[label],
                                  scenario.noise_sd, 1)[0]
            # the floor carries no coupling: the channel's semitone base sits on it
            floor = floors[speaker] + rng.normal(0, 0.5 * scenario.noise_sd)
            span = float(np.clip(_SPAN + _SPAN_SCALE * span_shift, 2., 9.))
            start = t
            for _ in range(1 if rng.random() < 0.5 else 2):
                phrase = _plan_phrase(rng, t)
                plans[speaker].append((phrase, floor, span))
                t = phrase[-1].end
            segments.append(DialogActSegment(dialog_id, speaker, label, round(start, 2), round(t, 2), condition, j))
            t = round(t + rng.uniform(0.5, 0.9), 2)
        duration = t + 0.5
        n_samples = int(round(duration * _SAMPLE_RATE)) + 1
        times = np.arange(n_samples) / _SAMPLE_RATE
        for speaker in pair:
            semitones = np.full(n_samples, np.nan)
            nuclei, boundaries, accents = [], [], []
            for phrase, floor, span in plans[speaker]:
                inside = (times >= phrase[0].start - 1e-9) & (times <= phrase[-1].end + 1e-9)
                semitones[inside] = _phrase_contour(times[inside], phrase, floor, span, scenario.accent_poly)
                boundaries.append(phrase[-1].end)
                for word in phrase:
                    nuclei.extend(word.nuclei)
                    if word.kind == 'content':
                        accents.append(word.stress)
                    all_words.append(WordSegment(word.start, word.end, word.kind, word.stress,
                                                 dialog_id=dialog_id, speaker=speaker))
            voiced = np.isfinite(semitones)
            hz = np.where(voiced, references[speaker] * 2 ** (np.nan_to_num(semitones) / 12), 0.)
            track = SampledTrack(values=np.round(hz, 4), sample_rate=_SAMPLE_RATE, t0=0., valid_mask=voiced)
            f0_tracks[(dialog_id, speaker)] = track
            audio[(dialog_id, speaker)] = _render_audio(duration, track, nuclei, set(accents), scenario.audio_rate)
            channels_truth[f'{dialog_id}_{speaker}'] = {'nuclei': sorted(nuclei), 'boundaries': sorted(boundaries),
                                                        'accents': sorted(accents)}
    truth = {'scenario': scenario.to_dict(),
             'speaker_pairs': {dialog_id: list(pair) for dialog_id, _, pair in layout},
             'channels': channels_truth}
    logger.info(f'{len(segments)} synthetic segments with contours in {len(layout)} dialogs')
    return SynthCorpus(scenario=scenario, segments=segments, words=sorted(all_words, key=lambda w: (
        w.dialog_id, w.speaker, w.start)), f0=f0_tracks, audio=audio, truth=truth)
