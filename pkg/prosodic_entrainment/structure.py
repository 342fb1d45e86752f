"""
Prosodic structure: syllable nuclei, phrase boundaries and pitch accents.

Nuclei are energy peaks of the band-passed signal that stand out against a
wider, co-centred reference window. Boundaries and accents are found by a
nearest centroid classifier whose centroids are bootstrapped from cases the
word timing alone decides:

* boundaries: a pause is always preceded by a boundary, and there are no
  further boundaries within 1 s of a pause (phrases last at least 1 s)
* accents: words longer than 0.5 s carry an accent, words shorter than 0.1 s do not

.. code-block:: python

    nuclei = detect_syllable_nuclei(audio)
    boundaries, model = detect_phrase_boundaries(words, semitones, nuclei, energy)
    accents, _ = detect_pitch_accents(words, semitones, energy, nuclei, boundaries)
"""

__all__ = ['WordSegment', 'CentroidModel', 'ProsodicStructure', 'detect_syllable_nuclei', 'nucleus_durations',
           'mark_pauses', 'boundary_features', 'detect_phrase_boundaries', 'accent_candidates',
           'accent_features', 'detect_pitch_accents', 'detect_structure']

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.signal import butter, sosfilt, sosfiltfilt

from .config import StructureConfig, StylizeConfig
from .misc import CannotBootstrap, ProsodyInputError
from .signal import AudioBuffer, SampledTrack, TIME_EPS
from .stylize import RegisterStylization, fit_accent_poly, fit_register, phrase_windows, range_normalize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WordSegment:
    start: float
    end: float
    word: str = ''
    stressed_syllable_nucleus: Optional[float] = None
    is_pause_followed: bool = False
    dialog_id: str = ''
    speaker: str = ''

    def __post_init__(self):
        if not self.start < self.end:
            raise ProsodyInputError(f'word {self.word!r} must start before it ends ({self.start} >= {self.end})',
                                    field='start/end')

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True, eq=False)
class CentroidModel:
    """
    Weighted nearest centroid classifier on z-standardised features.
    Missing feature values count as lying on the centroid, i.e. they add no distance.
    """
    centroid_pos: np.ndarray
    centroid_neg: np.ndarray
    weights: np.ndarray
    feature_names: List[str]
    feature_mean: np.ndarray
    feature_sd: np.ndarray

    def __post_init__(self):
        n = len(self.feature_names)
        assert len(self.centroid_pos) == len(self.centroid_neg) == len(self.weights) == n, 'dimension mismatch'
        assert np.all(self.weights >= 0), 'negative weight'
        assert abs(self.weights.sum() - 1) < 1e-9, 'weights do not sum to 1'

    @classmethod
    def bootstrap(cls, features: np.ndarray, positive: np.ndarray, negative: np.ndarray,
                  feature_names: Sequence[str]) -> 'CentroidModel':
        """
        Centroids are the means of the initial positive and negative rows; the weight of a
        feature is the distance between the centroids over the pooled sd, normalised to sum 1
        (uniform if no feature separates the two).

        :param features: rows x features, NaN for missing
        :param positive: boolean row mask of the initial positives
        :param negative: boolean row mask of the initial negatives
        """
        positive = np.asarray(positive, dtype=bool)
        negative = np.asarray(negative, dtype=bool)
        if not positive.any() or not negative.any():
            raise CannotBootstrap(f'cannot bootstrap: {positive.sum()} positive and '
                                  f'{negative.sum()} negative initial representatives')
        features = np.asarray(features, dtype=float)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', RuntimeWarning)
            mean = np.nan_to_num(np.nanmean(features, axis=0))
            sd = np.nanstd(features, axis=0)
            sd = np.where(np.isfinite(sd) & (sd > 0), sd, 1.)
            z = (features - mean) / sd
            pos = np.nanmean(z[positive], axis=0)
            neg = np.nanmean(z[negative], axis=0)
            n_pos = np.sum(np.isfinite(z[positive]), axis=0)
            n_neg = np.sum(np.isfinite(z[negative]), axis=0)
            ss = np.nansum((z[positive] - pos) ** 2, axis=0) + np.nansum((z[negative] - neg) ** 2, axis=0)
            dof = n_pos + n_neg - 2
            pooled = np.sqrt(np.divide(ss, dof, out=np.zeros_like(ss), where=dof > 0))
        separation = np.nan_to_num(np.abs(pos - neg))
        raw = np.divide(separation, pooled, out=separation.copy(), where=pooled > 1e-12)
        weights = raw / raw.sum() if raw.sum() > 0 else np.full(len(raw), 1 / len(raw))
        return cls(centroid_pos=np.nan_to_num(pos), centroid_neg=np.nan_to_num(neg), weights=weights,
                   feature_names=list(feature_names), feature_mean=mean, feature_sd=sd)

    def distances(self, features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Weighted Euclidean distances of each row to the positive and to the negative centroid."""
        z = (np.asarray(features, dtype=float) - self.feature_mean) / self.feature_sd
        d_pos = np.nan_to_num(z - self.centroid_pos) ** 2
        d_neg = np.nan_to_num(z - self.centroid_neg) ** 2
        return np.sqrt(d_pos @ self.weights), np.sqrt(d_neg @ self.weights)

    def predict(self, features: np.ndarray) -> np.ndarray:
        d_pos, d_neg = self.distances(features)
        return d_pos < d_neg


@dataclass
class ProsodicStructure:
    nuclei: List[float] = field(default_factory=list)
    phrase_boundaries: List[float] = field(default_factory=list)
    accents: List[float] = field(default_factory=list)

    def __post_init__(self):
        for name in ('nuclei', 'phrase_boundaries', 'accents'):
            values = [float(v) for v in sorted(set(getattr(self, name)))]
            setattr(self, name, values)


# ========== syllable nuclei ================================================================

def _window_energy(cumulative: np.ndarray, centres: np.ndarray, width: int) -> np.ndarray:
    n = len(cumulative) - 1
    lo = np.clip(centres - width // 2, 0, n)
    hi = np.clip(centres - width // 2 + width, 0, n)
    return (cumulative[hi] - cumulative[lo]) / width


def _bandpass(audio: AudioBuffer, low: float, high: float) -> np.ndarray:
    high = min(high, 0.45 * audio.sample_rate)
    sos = butter(4, [low, high], btype='band', fs=audio.sample_rate, output='sos')
    padlen = 3 * (2 * len(sos) + 1)
    if len(audio) > padlen:
        return sosfiltfilt(sos, audio.samples)
    return sosfilt(sos, audio.samples)


def detect_syllable_nuclei(audio: AudioBuffer, config: Optional[StructureConfig] = None) -> List[float]:
    """
    Syllable nuclei as local maxima of the energy in the analysis window (50 ms)
    that exceed ``energy_factor`` times the energy of the co-centred reference window
    (200 ms) and ``min_energy_fraction`` of the recording maximum. Windows move in
    50 ms steps; each peak is then refined on a 10 ms grid and peaks closer than
    ``min_nucleus_gap`` are thinned, the stronger surviving.

    :return: sorted nucleus times (s); empty for silence
    """
    config = StructureConfig() if config is None else config
    if len(audio) == 0:
        return []
    fs = audio.sample_rate
    filtered = _bandpass(audio, config.band_low, config.band_high)
    cumulative = np.concatenate([[0.], np.cumsum(filtered ** 2)])
    analysis = max(1, int(round(config.analysis_window * fs)))
    reference = max(1, int(round(config.reference_window * fs)))
    step = max(1, int(round(config.step * fs)))
    centres = np.arange(0, len(audio), step)
    energy = _window_energy(cumulative, centres, analysis)
    ceiling = energy.max() if len(energy) else 0.
    if ceiling <= 0:
        return []
    background = _window_energy(cumulative, centres, reference)
    padded = np.concatenate([[-np.inf], energy, [-np.inf]])
    peaks = (padded[1:-1] >= padded[:-2]) & (padded[1:-1] > padded[2:])
    peaks &= energy >= config.energy_factor * background
    peaks &= energy >= config.min_energy_fraction * ceiling
    fine_step = int(round(0.01 * fs))
    candidates = []
    for centre in centres[peaks]:
        grid = centre + np.arange(-2, 3) * fine_step
        grid = grid[(grid >= 0) & (grid < len(audio))]
        fine = _window_energy(cumulative, grid, analysis)
        best = int(np.argmax(fine))
        candidates.append((fine[best], grid[best] / fs))
    accepted: List[float] = []
    for _, time in sorted(candidates, key=lambda pair: -pair[0]):
        if all(abs(time - other) >= config.min_nucleus_gap - TIME_EPS for other in accepted):
            accepted.append(time)
    logger.debug(f'{len(accepted)} syllable nuclei in {audio.duration:.1f} s')
    return sorted(accepted)


def nucleus_durations(energy: SampledTrack, nuclei: Sequence[float]) -> np.ndarray:
    """
    Extent around each nucleus over which the energy stays at or above half its peak (s).
    """
    values = energy.values
    durations = np.zeros(len(nuclei))
    for n, time in enumerate(nuclei):
        i = int(np.clip(round((time - energy.t0) * energy.sample_rate), 0, len(values) - 1))
        half = 0.5 * values[i]
        left, right = i, i
        while left > 0 and values[left - 1] >= half:
            left -= 1
        while right < len(values) - 1 and values[right + 1] >= half:
            right += 1
        durations[n] = (right - left + 1) / energy.sample_rate
    return durations


# ========== phrase boundaries ==============================================================

def mark_pauses(words: Sequence[WordSegment], pause_threshold: float = 0.2) -> List[WordSegment]:
    """
    Sort a speaker's words and flag those followed by a gap longer than ``pause_threshold``;
    the last word is always pause-followed.
    """
    ordered = sorted(words, key=lambda w: w.start)
    marked = []
    for i, word in enumerate(ordered):
        last = i == len(ordered) - 1
        marked.append(replace(word, is_pause_followed=last or ordered[i + 1].start - word.end > pause_threshold))
    return marked


def _safe_register(f0: SampledTrack, window: Tuple[float, float]) -> Optional[RegisterStylization]:
    start, end = max(window[0], f0.t0), min(window[1], f0.end)
    if end - start < 2 / f0.sample_rate:
        return None
    try:
        return fit_register(f0, (start, end))
    except ProsodyInputError:
        return None


def boundary_features(words: Sequence[WordSegment], f0: SampledTrack, nuclei: Sequence[float],
                      energy: Optional[SampledTrack] = None,
                      config: Optional[StructureConfig] = None) -> pd.DataFrame:
    """
    Register discontinuity at every right word edge, plus pre-boundary lengthening.

    * ``mid.rmsd``: RMSD over normalised time between the mid lines fitted before the
      boundary and after the next word onset
    * ``mid.reset``: jump from the end of the pre-boundary mid line to the start of the post one
    * ``nuc.dur.z``: duration z-score (per speaker) of the last nucleus of the word

    :return: one row per word, column ``boundary`` holds the time
    """
    config = StructureConfig() if config is None else config
    width = config.boundary_window
    z_scores = np.full(len(nuclei), np.nan)
    if energy is not None and len(nuclei):
        durations = nucleus_durations(energy, nuclei)
        sd = durations.std()
        z_scores = (durations - durations.mean()) / sd if sd > 0 else np.zeros(len(nuclei))
    nuclei = np.asarray(nuclei, dtype=float)
    tau = np.linspace(0, 1, 51)
    rows = []
    for i, word in enumerate(words):
        boundary = word.end
        onset = words[i + 1].start if i + 1 < len(words) else boundary
        pre = _safe_register(f0, (boundary - width, boundary))
        post = _safe_register(f0, (onset, onset + width))
        row = {'boundary': boundary, 'mid.rmsd': np.nan, 'mid.reset': np.nan, 'nuc.dur.z': np.nan}
        if pre is not None and post is not None:
            pre_mid = pre.mid_intercept + pre.mid_slope * tau
            post_mid = post.mid_intercept + post.mid_slope * tau
            row['mid.rmsd'] = float(np.sqrt(np.mean((pre_mid - post_mid) ** 2)))
            row['mid.reset'] = abs(post.mid_intercept - (pre.mid_intercept + pre.mid_slope))
        inside = np.flatnonzero((nuclei >= word.start - TIME_EPS) & (nuclei <= word.end + TIME_EPS))
        if len(inside):
            row['nuc.dur.z'] = z_scores[inside[-1]]
        rows.append(row)
    return pd.DataFrame(rows, columns=['boundary', 'mid.rmsd', 'mid.reset', 'nuc.dur.z'])


def _usable_columns(table: pd.DataFrame, names: Sequence[str]) -> List[str]:
    return [name for name in names if table[name].notna().any()]


def detect_phrase_boundaries(words: Sequence[WordSegment], f0: SampledTrack, nuclei: Sequence[float],
                             energy: Optional[SampledTrack] = None,
                             config: Optional[StructureConfig] = None) -> Tuple[List[float], CentroidModel]:
    """
    Phrase boundaries of one speaker in one dialog.

    Pause-followed word edges are initial positives and stay boundaries; non-pause edges within
    ``pause_vicinity`` of a pause (before it or after the resumption) are initial negatives and
    stay non-boundaries. The other edges go to the nearer centroid, and the positives among them are
    accepted greedily by confidence as long as they keep ``min_phrase_length`` to every accepted boundary.

    :param words: the speaker's words with ``is_pause_followed`` set, see :func:`mark_pauses`
    :param f0: semitone track of the speaker
    :param nuclei: the speaker's syllable nuclei
    :param energy: RMS energy of the speaker, for the lengthening feature
    """
    config = StructureConfig() if config is None else config
    words = sorted(words, key=lambda w: w.start)
    if len(words) < 2:
        raise CannotBootstrap('cannot bootstrap: fewer than two words')
    pauses = np.array([w.is_pause_followed for w in words])
    if not pauses.any():
        raise CannotBootstrap('cannot bootstrap: no pauses in dialog')
    table = boundary_features(words, f0, nuclei, energy, config)
    edges = table.boundary.values
    resumptions = [words[i + 1].start for i in np.flatnonzero(pauses) if i + 1 < len(words)]
    anchors = np.concatenate([edges[pauses], resumptions])
    near = np.min(np.abs(edges[:, None] - anchors[None, :]), axis=1) <= config.pause_vicinity + TIME_EPS
    negatives = ~pauses & near
    names = _usable_columns(table, ['mid.rmsd', 'mid.reset', 'nuc.dur.z'])
    if not names:
        raise CannotBootstrap('cannot bootstrap: no boundary features could be computed')
    features = table[names].values
    model = CentroidModel.bootstrap(features, pauses, negatives, names)
    d_pos, d_neg = model.distances(features)
    candidates = np.flatnonzero(~pauses & ~negatives & (d_pos < d_neg))
    accepted = list(edges[pauses])
    for i in sorted(candidates, key=lambda j: -(d_neg[j] - d_pos[j])):
        if all(abs(edges[i] - other) >= config.min_phrase_length - TIME_EPS for other in accepted):
            accepted.append(edges[i])
    logger.debug(f'{len(accepted)} boundaries ({pauses.sum()} at pauses) for {len(words)} words')
    return sorted(float(b) for b in set(accepted)), model


# ========== pitch accents ==================================================================

def accent_candidates(words: Sequence[WordSegment], nuclei: Sequence[float],
                      energy: Optional[SampledTrack] = None) -> List[Optional[float]]:
    """
    Per word the nucleus closest to its stress mark, or without a mark its loudest nucleus
    (the first one if there is no energy). None for words without a nucleus.
    """
    nuclei = np.asarray(nuclei, dtype=float)
    candidates = []
    for word in words:
        inside = nuclei[(nuclei >= word.start - TIME_EPS) & (nuclei <= word.end + TIME_EPS)]
        if len(inside) == 0:
            candidates.append(None)
        elif word.stressed_syllable_nucleus is not None:
            candidates.append(float(inside[np.argmin(np.abs(inside - word.stressed_syllable_nucleus))]))
        elif energy is not None:
            candidates.append(float(inside[np.argmax([energy.value_at(t) for t in inside])]))
        else:
            candidates.append(float(inside[0]))
    return candidates


def _peak_energy(energy: SampledTrack, time: float, reach: float = 0.025) -> float:
    part = energy.segment(time - reach, time + reach)
    return float(part.values.max()) if len(part) else np.nan


def accent_features(words: Sequence[WordSegment], candidates: Sequence[Optional[float]], f0: SampledTrack,
                    energy: Optional[SampledTrack], boundaries: Sequence[float],
                    config: Optional[StylizeConfig] = None) -> pd.DataFrame:
    """
    Local pitch shape (s0-s3 on the phrase-range normalised f0) and peak energy per candidate.
    """
    config = StylizeConfig() if config is None else config
    windows = phrase_windows(boundaries, words[0].start, words[-1].end, onsets=[w.start for w in words])
    registers: Dict[Tuple[float, float], Optional[RegisterStylization]] = {}
    rows = []
    for time in candidates:
        row = {'s0': np.nan, 's1': np.nan, 's2': np.nan, 's3': np.nan, 'en.peak': np.nan}
        if time is None:
            rows.append(row)
            continue
        window = next((w for w in windows if w[0] - TIME_EPS <= time <= w[1] + TIME_EPS), None)
        if window is not None:
            if window not in registers:
                registers[window] = _safe_register(f0, window)
            register = registers[window]
            if register is not None:
                norm = range_normalize(f0.segment(*window), register, config.range_floor)
                try:
                    poly = fit_accent_poly(norm, time, config.accent_window, window)
                    row.update(dict(zip(['s0', 's1', 's2', 's3'], poly)))
                except ProsodyInputError:
                    pass
        if energy is not None:
            row['en.peak'] = _peak_energy(energy, time)
        rows.append(row)
    return pd.DataFrame(rows, columns=['s0', 's1', 's2', 's3', 'en.peak'])


def detect_pitch_accents(words: Sequence[WordSegment], f0: SampledTrack, energy: Optional[SampledTrack],
                         nuclei: Sequence[float],
                         boundaries: Optional[Sequence[float]] = None,
                         config: Optional[StructureConfig] = None,
                         stylize_config: Optional[StylizeConfig] = None) -> Tuple[List[float], CentroidModel]:
    """
    Accented nuclei of one speaker in one dialog. Words longer than ``accent_long`` seed the accented
    centroid, words shorter than ``accent_short`` the unaccented one; the remaining candidates go
    to the nearer centroid.

    :param boundaries: phrase boundaries; the pause-followed word ends if not given
    :return: sorted accent times (each one a nucleus time) and the classifier
    """
    config = StructureConfig() if config is None else config
    words = sorted(words, key=lambda w: w.start)
    if not words:
        raise CannotBootstrap('cannot bootstrap: no words')
    if boundaries is None:
        boundaries = [w.end for w in words if w.is_pause_followed]
    candidates = accent_candidates(words, nuclei, energy)
    keep = [i for i, time in enumerate(candidates) if time is not None]
    if not keep:
        raise CannotBootstrap('cannot bootstrap: no word contains a nucleus')
    durations = np.array([words[i].duration for i in keep])
    positives = durations > config.accent_long
    negatives = durations < config.accent_short
    kept_words = [words[i] for i in keep]
    kept_times = [candidates[i] for i in keep]
    table = accent_features(kept_words, kept_times, f0, energy, boundaries, stylize_config)
    names = _usable_columns(table, ['s0', 's1', 's2', 's3', 'en.peak'])
    if not names:
        raise CannotBootstrap('cannot bootstrap: no accent features could be computed')
    features = table[names].values
    model = CentroidModel.bootstrap(features, positives, negatives, names)
    d_pos, d_neg = model.distances(features)
    accented = positives | (~positives & ~negatives & (d_pos < d_neg))
    logger.debug(f'{accented.sum()} accents among {len(keep)} candidate nuclei')
    return sorted(set(kept_times[i] for i in np.flatnonzero(accented))), model


def detect_structure(words: Sequence[WordSegment], f0: SampledTrack, energy: Optional[SampledTrack],
                     nuclei: Sequence[float],
                     config: Optional[StructureConfig] = None,
                     stylize_config: Optional[StylizeConfig] = None) -> ProsodicStructure:
    """
    Boundaries and accents of one speaker channel, falling back to the word timing
    (pause boundaries, accents on long words) when a classifier cannot be bootstrapped.
    """
    config = StructureConfig() if config is None else config
    words = mark_pauses(words, config.pause_threshold)
    try:
        boundaries, _ = detect_phrase_boundaries(words, f0, nuclei, energy, config)
    except CannotBootstrap as error:
        logger.warning(f'{error}; using pause boundaries only')
        boundaries = [w.end for w in words if w.is_pause_followed]
    try:
        accents, _ = detect_pitch_accents(words, f0, energy, nuclei, boundaries, config, stylize_config)
    except CannotBootstrap as error:
        logger.warning(f'{error}; accenting the long words only')
        candidates = accent_candidates(words, nuclei, energy)
        accents = [t for w, t in zip(words, candidates) if t is not None and w.duration > config.accent_long]
    return ProsodicStructure(nuclei=list(nuclei), phrase_boundaries=boundaries, accents=accents)
