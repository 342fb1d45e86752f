import json
import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from prosodic_entrainment.config import PipelineConfig
from prosodic_entrainment.corpus import Corpus
from prosodic_entrainment.misc import CannotBootstrap
from prosodic_entrainment.pipeline import detect_stage, extract_stage
from prosodic_entrainment.signal import AudioBuffer, SampledTrack
from prosodic_entrainment.structure import (CentroidModel, ProsodicStructure, WordSegment, accent_candidates,
                                            boundary_features, detect_phrase_boundaries, detect_pitch_accents,
                                            detect_structure, detect_syllable_nuclei, mark_pauses,
                                            nucleus_durations)

FS = 16000


def bursts(centres, duration: float = 1., length: float = 0.15) -> AudioBuffer:
    samples = np.zeros(int(duration * FS))
    half = int(length * FS) // 2
    carrier = np.sin(2 * np.pi * 500 * np.arange(2 * half) / FS)
    for centre in centres:
        i = int(round(centre * FS))
        samples[i - half:i + half] += 0.5 * np.hanning(2 * half) * carrier
    return AudioBuffer(samples, FS)


def words_from(spans, **kwargs):
    return [WordSegment(start, end, f'w{i}', **kwargs) for i, (start, end) in enumerate(spans)]


def declining_phrases(phrases, duration: float) -> SampledTrack:
    """Semitone track falling 4 st over each phrase and reset at the next one; unvoiced in between."""
    t = np.arange(int(round(duration * 100)) + 1) / 100
    values = np.full(len(t), np.nan)
    for start, end in phrases:
        inside = (t >= start - 1e-9) & (t <= end + 1e-9)
        values[inside] = 2 - 4 * (t[inside] - start) / (end - start) + 0.5 * np.cos(2 * np.pi * 5 * t[inside])
    return SampledTrack(values)


# ========== nuclei =========================================================================

def test_silence_has_no_nuclei():
    assert detect_syllable_nuclei(AudioBuffer(np.zeros(FS), FS)) == []


def test_single_burst():
    nuclei = detect_syllable_nuclei(bursts([0.5]))
    assert len(nuclei) == 1
    assert nuclei[0] == pytest.approx(0.5, abs=0.02)


def test_two_bursts():
    nuclei = detect_syllable_nuclei(bursts([0.3, 0.7]))
    assert len(nuclei) == 2
    assert np.allclose(nuclei, [0.3, 0.7], atol=0.02)


@given(st.integers(-4, 4))
def test_nuclei_ignore_power_of_two_gain(exponent):
    audio = bursts([0.2, 0.45, 0.8])
    assert detect_syllable_nuclei(AudioBuffer(2. ** exponent * audio.samples, FS)) == detect_syllable_nuclei(audio)


@pytest.mark.parametrize('gain', [0.3, 7.])
def test_nuclei_ignore_gain(gain):
    audio = bursts([0.2, 0.45, 0.8])
    assert detect_syllable_nuclei(AudioBuffer(gain * audio.samples, FS)) == detect_syllable_nuclei(audio)


def test_nucleus_duration_at_half_peak():
    energy = SampledTrack(np.array([0., 1., 2., 3., 4., 3., 2., 1., 0.]))
    assert nucleus_durations(energy, [0.04]) == pytest.approx([0.05])


# ========== pauses and boundaries ==========================================================

def test_mark_pauses():
    words = mark_pauses(words_from([(1.2, 1.5), (0., 0.5), (0.55, 1.)]), pause_threshold=0.1)
    assert [w.start for w in words] == [0., 0.55, 1.2]
    assert [w.is_pause_followed for w in words] == [False, True, True]


SPANS = [(0., 0.5), (0.5, 1.), (1., 1.5), (2., 2.5), (2.5, 3.), (3., 3.5), (3.5, 4.), (4., 4.5), (4.5, 5.)]


def test_boundary_features_have_one_row_per_word():
    words = mark_pauses(words_from(SPANS))
    table = boundary_features(words, declining_phrases([(0., 1.5), (2., 5.)], 5.), [])
    assert table.boundary.tolist() == [end for _, end in SPANS]
    assert table['nuc.dur.z'].isna().all()
    # the register resets across the pause
    assert table['mid.reset'][2] > table['mid.reset'][1]


def test_pause_boundaries_kept_and_vicinity_excluded():
    words = mark_pauses(words_from(SPANS))
    f0 = declining_phrases([(0., 1.5), (2., 3.5), (3.5, 5.)], 5.)
    boundaries, model = detect_phrase_boundaries(words, f0, [])
    assert {1.5, 5.} <= set(boundaries)
    # within 1 s of a pause or its resumption
    assert not {0.5, 1., 2.5, 3., 4., 4.5} & set(boundaries)
    assert np.all(np.diff(boundaries) >= 1.)
    assert isinstance(model, CentroidModel)


def test_no_pause_cannot_bootstrap():
    words = words_from(SPANS[:3])
    with pytest.raises(CannotBootstrap, match='no pauses'):
        detect_phrase_boundaries(words, declining_phrases([(0., 1.5)], 1.5), [])


def test_single_word_cannot_bootstrap():
    words = mark_pauses(words_from([(0., 0.6)]))
    with pytest.raises(CannotBootstrap, match='fewer than two words'):
        detect_phrase_boundaries(words, declining_phrases([(0., 0.6)], 0.6), [])


def test_centroid_weights_sum_to_one():
    features = np.array([[0., 5.], [0.1, 5.], [3., 5.], [3.1, 5.]])
    model = CentroidModel.bootstrap(features, np.array([0, 0, 1, 1]), np.array([1, 1, 0, 0]), ['a', 'b'])
    assert model.weights.sum() == pytest.approx(1.)
    assert model.weights[1] == pytest.approx(0.)
    assert model.predict(np.array([[2.9, 5.], [0.2, 5.]])).tolist() == [True, False]


def test_centroid_without_negatives():
    with pytest.raises(CannotBootstrap):
        CentroidModel.bootstrap(np.zeros((2, 1)), np.array([True, True]), np.array([False, False]), ['a'])


# ========== accents ========================================================================

def test_accent_candidate_choice():
    words = [WordSegment(0., 0.6, 'marked', stressed_syllable_nucleus=0.42),
             WordSegment(0.6, 1.2, 'loud'),
             WordSegment(1.2, 1.8, 'plain'),
             WordSegment(1.8, 1.9, 'empty')]
    nuclei = [0.1, 0.3, 0.5, 0.7, 0.9, 1.3, 1.5]
    energy = SampledTrack(np.where(np.isclose(np.arange(200) / 100, 0.9), 2., 1.))
    assert accent_candidates(words, nuclei, energy) == [0.5, 0.9, 1.3, None]
    assert accent_candidates(words, nuclei) == [0.5, 0.7, 1.3, None]


def accent_scene():
    durations = [0.6, 0.08, 0.3, 0.6, 0.08, 0.3, 0.6, 0.08, 0.3]
    starts = np.round(0.1 + np.concatenate([[0.], np.cumsum(durations[:-1])]), 2)
    words = [WordSegment(float(s), float(round(s + d, 2)), f'w{i}')
             for i, (s, d) in enumerate(zip(starts, durations))]
    nuclei = [round((w.start + w.end) / 2, 2) for w in words]
    t = np.arange(int(round(words[-1].end * 100)) + 11) / 100
    values = np.zeros(len(t))
    for word, nucleus in zip(words, nuclei):
        if word.duration > 0.5:
            values += 4 * np.exp(-((t - nucleus) / 0.08) ** 2)
    return words, nuclei, SampledTrack(values)


def test_long_words_accented_short_ones_not():
    words, nuclei, f0 = accent_scene()
    accents, _ = detect_pitch_accents(words, f0, None, nuclei)
    long_nuclei = {n for w, n in zip(words, nuclei) if w.duration > 0.5}
    short_nuclei = {n for w, n in zip(words, nuclei) if w.duration < 0.1}
    assert long_nuclei <= set(accents)
    assert not short_nuclei & set(accents)
    assert set(accents) <= set(nuclei)


def test_structure_falls_back_to_word_timing(caplog):
    words = [WordSegment(0.2, 0.8, 'only')]
    f0 = SampledTrack(np.full(100, 3.))
    with caplog.at_level(logging.WARNING, logger='prosodic_entrainment.structure'):
        structure = detect_structure(words, f0, None, [0.5])
    assert structure.phrase_boundaries == [0.8]
    assert structure.accents == [0.5]
    assert 'using pause boundaries only' in caplog.text
    assert 'accenting the long words only' in caplog.text


def test_structure_lists_sorted_and_unique():
    structure = ProsodicStructure(nuclei=[0.3, 0.1, 0.3], phrase_boundaries=[2., 1.], accents=[])
    assert structure.nuclei == [0.1, 0.3]
    assert structure.phrase_boundaries == [1., 2.]


# ========== planted structure ==============================================================

def match_counts(found, truth, tolerance):
    """(found events near a planted one, planted events near a found one)"""
    hits = sum(any(abs(f - t) <= tolerance for t in truth) for f in found)
    recalled = sum(any(abs(f - t) <= tolerance for f in found) for t in truth)
    return hits, recalled


@pytest.mark.slow
def test_planted_structure_recovered(contour_corpus, tmp_path):
    corpus = Corpus.from_directory(contour_corpus)
    config = PipelineConfig()
    tracks = extract_stage(corpus, config, tmp_path)
    detect_stage(corpus, config, tmp_path, tracks)
    truth = json.loads((contour_corpus / 'truth.json').read_text())['channels']
    for kind, key, tolerance in (('boundaries', 'phrase_boundaries', 0.02), ('accents', 'accents', 0.03)):
        hits = recalled = n_found = n_planted = 0
        for name, channel in truth.items():
            detected = json.loads((tmp_path / 'structure' / f'{name}.json').read_text())[key]
            h, r = match_counts(detected, channel[kind], tolerance)
            hits, recalled = hits + h, recalled + r
            n_found, n_planted = n_found + len(detected), n_planted + len(channel[kind])
        precision, recall = hits / n_found, recalled / n_planted
        assert 2 * precision * recall / (precision + recall) >= 0.8, kind
