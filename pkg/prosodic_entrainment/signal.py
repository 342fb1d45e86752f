"""
f0 and energy tracks and their preprocessing chain.

f0 comes either from the autocorrelation tracker below or from a precomputed
two-column ``time f0_hz`` file (0 or negative = unvoiced). The chain applied to it is

* outliers (median +/- k IQR) marked invalid
* gaps bridged by linear interpolation
* Savitzky-Golay smoothing (cubic, 5 samples)
* semitones relative to the median of the values below the 5th percentile

.. code-block:: python

    from prosodic_entrainment.signal import read_f0_track, preprocess_f0
    semitones, base = preprocess_f0(read_f0_track('f0/d01_A.f0'))

Energy is the RMS of 50 ms Hamming windows at the f0 sample rate.
"""

__all__ = ['SampledTrack', 'AudioBuffer', 'SemitoneBase',
           'extract_f0_autocorr', 'interpolate_gaps', 'mark_outliers', 'savgol_smooth',
           'semitone_transform', 'rms_energy', 'preprocess_f0',
           'read_f0_track', 'write_f0_track', 'read_wav', 'write_wav']

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.io import wavfile
from scipy.signal import savgol_filter

from .config import SignalConfig
from .misc import ProsodyInputError

logger = logging.getLogger(__name__)

# tolerance on sample times when restricting a track to an interval
TIME_EPS = 1e-9


@dataclass
class SampledTrack:
    """
    Uniformly sampled scalar contour.

    :param values: Hz, semitones or RMS energy
    :param sample_rate: Hz
    :param t0: time of the first sample (s)
    :param valid_mask: False for unvoiced, outlier or missing samples. Defaults to the finite values.
    """
    values: np.ndarray
    sample_rate: float = 100.
    t0: float = 0.
    valid_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.valid_mask is None:
            self.valid_mask = np.isfinite(self.values)
        else:
            self.valid_mask = np.asarray(self.valid_mask, dtype=bool).ravel().copy()
        if len(self.valid_mask) != len(self.values):
            raise ValueError(f'values ({len(self.values)}) and valid_mask ({len(self.valid_mask)}) differ in length')
        if self.sample_rate <= 0:
            raise ValueError(f'sample_rate must be positive, not {self.sample_rate}')

    def __len__(self) -> int:
        return len(self.values)

    @property
    def dt(self) -> float:
        return 1. / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.values)) / self.sample_rate

    @property
    def end(self) -> float:
        """Time of the last sample."""
        return self.t0 + (len(self.values) - 1) / self.sample_rate

    @property
    def is_fully_valid(self) -> bool:
        return bool(np.all(self.valid_mask))

    def replace(self, values: Optional[np.ndarray] = None,
                valid_mask: Optional[np.ndarray] = None) -> 'SampledTrack':
        return SampledTrack(values=self.values.copy() if values is None else values,
                            sample_rate=self.sample_rate,
                            t0=self.t0,
                            valid_mask=self.valid_mask.copy() if valid_mask is None else valid_mask)

    def mask_between(self, start: float, end: float) -> np.ndarray:
        times = self.times
        return (times >= start - TIME_EPS) & (times <= end + TIME_EPS)

    def segment(self, start: float, end: float) -> 'SampledTrack':
        """
        Samples with ``start <= t <= end``, keeping their times.
        """
        idx = np.flatnonzero(self.mask_between(start, end))
        if len(idx) == 0:
            return SampledTrack(np.zeros(0), self.sample_rate, start, np.zeros(0, dtype=bool))
        return SampledTrack(values=self.values[idx],
                            sample_rate=self.sample_rate,
                            t0=self.t0 + idx[0] / self.sample_rate,
                            valid_mask=self.valid_mask[idx])

    def valid_values(self) -> np.ndarray:
        return self.values[self.valid_mask]

    def valid_times(self) -> np.ndarray:
        return self.times[self.valid_mask]

    def value_at(self, t: float) -> float:
        """Linear interpolation over the valid samples."""
        return float(np.interp(t, self.valid_times(), self.valid_values()))


@dataclass
class AudioBuffer:
    """
    Mono linear PCM scaled to [-1, 1].
    """
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1:
            raise ProsodyInputError('audio must be mono', field='channels')
        if self.sample_rate < 8000:
            raise ProsodyInputError(f'sample rate {self.sample_rate} Hz is below 8000 Hz', field='sample_rate')

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class SemitoneBase:
    base_hz: float

    def __post_init__(self):
        if not self.base_hz > 0:
            raise ProsodyInputError('invalid Hz', field='base_hz')


def _frame_centres(n_samples: int, audio_rate: int, sample_rate: float) -> np.ndarray:
    n_frames = int(np.floor(n_samples * sample_rate / audio_rate + TIME_EPS))
    return np.round(np.arange(n_frames) * audio_rate / sample_rate).astype(int)


def extract_f0_autocorr(audio: AudioBuffer,
                        f_min: float = 75.,
                        f_max: float = 500.,
                        sample_rate: float = 100.,
                        frame_length: float = 0.04,
                        voicing_threshold: float = 0.45) -> SampledTrack:
    """
    Normalised cross-correlation pitch tracker.

    Frame k is centred at ``k / sample_rate``. The lag is the first local maximum
    of the normalised correlation within 95% of the best one (guards against
    octave errors), refined by parabolic interpolation. Frames whose peak is below
    ``voicing_threshold`` or whose f0 falls outside ``[f_min, f_max]`` are invalid.

    :param audio: mono buffer
    :param f_min: pitch floor (Hz)
    :param f_max: pitch ceiling (Hz)
    :param sample_rate: frame rate of the returned track
    :param frame_length: analysis frame (s)
    :param voicing_threshold: minimum peak of the normalised correlation
    :return: track in Hz
    """
    if len(audio) == 0:
        raise ProsodyInputError('empty input', field='samples')
    if f_min >= f_max:
        raise ProsodyInputError('bad range', field='f_min/f_max')
    fs = audio.sample_rate
    width = int(round(frame_length * fs))
    if len(audio) < width:
        raise ProsodyInputError('audio shorter than one analysis frame', field='samples')
    lag_min = max(1, int(np.floor(fs / f_max)))
    lag_max = int(np.ceil(fs / f_min)) + 1
    half = width // 2
    x = np.concatenate([np.zeros(half), audio.samples, np.zeros(half + lag_max + 1)])
    cumulative = np.concatenate([[0.], np.cumsum(x ** 2)])
    centres = _frame_centres(len(audio), fs, sample_rate)
    values = np.zeros(len(centres))
    voiced = np.zeros(len(centres), dtype=bool)
    lags = np.arange(lag_max + 1)
    for k, centre in enumerate(centres):
        start = centre  # padded coordinates: centre - half + half
        frame = x[start:start + width]
        energy0 = cumulative[start + width] - cumulative[start]
        if energy0 <= 1e-12 * width:
            continue
        cross = np.correlate(x[start:start + width + lag_max], frame, mode='valid')[:lag_max + 1]
        energies = cumulative[start + lags + width] - cumulative[start + lags]
        with np.errstate(divide='ignore', invalid='ignore'):
            nccf = np.where(energies > 0, cross / np.sqrt(energy0 * energies), 0.)
        window = nccf[lag_min:lag_max + 1]
        best = window.max()
        if best < voicing_threshold:
            continue
        peak = int(np.argmax(window)) + lag_min
        for lag in range(lag_min + 1, lag_max):
            if nccf[lag] >= 0.95 * best and nccf[lag] >= nccf[lag - 1] and nccf[lag] >= nccf[lag + 1]:
                peak = lag
                break
        lag = float(peak)
        if lag_min < peak < lag_max:
            left, mid, right = nccf[peak - 1], nccf[peak], nccf[peak + 1]
            curvature = left - 2 * mid + right
            if curvature < 0:
                lag += 0.5 * (left - right) / curvature
        f0 = fs / lag
        if f_min <= f0 <= f_max:
            values[k] = f0
            voiced[k] = True
    logger.debug(f'f0 tracker: {voiced.sum()} of {len(voiced)} frames voiced')
    return SampledTrack(values=values, sample_rate=sample_rate, t0=0., valid_mask=voiced)


def interpolate_gaps(track: SampledTrack) -> SampledTrack:
    """
    Bridge invalid samples linearly between their valid neighbours;
    leading and trailing gaps take the nearest valid value.
    """
    valid = track.valid_mask & np.isfinite(track.values)
    if not valid.any():
        raise ProsodyInputError('no voiced frames', field='f0')
    idx = np.arange(len(track))
    values = track.values.copy()
    values[~valid] = np.interp(idx[~valid], idx[valid], track.values[valid])
    return track.replace(values=values, valid_mask=np.ones(len(track), dtype=bool))


def mark_outliers(track: SampledTrack, k: float = 2.) -> SampledTrack:
    """
    Invalidate valid samples outside median +/- k IQR.
    Fewer than 5 valid samples or a zero IQR leave the track untouched.
    """
    valid = track.valid_mask & np.isfinite(track.values)
    if valid.sum() < 5:
        return track.replace()
    values = track.values[valid]
    median = np.median(values)
    q25, q75 = np.percentile(values, [25, 75])
    iqr = q75 - q25
    if iqr == 0:
        return track.replace()
    outlier = valid & (np.abs(track.values - median) > k * iqr)
    if outlier.any():
        logger.debug(f'{outlier.sum()} f0 outliers outside {median:.1f} +/- {k * iqr:.1f}')
    return track.replace(valid_mask=track.valid_mask & ~outlier)


def savgol_smooth(track: SampledTrack, window: int = 5, order: int = 3, mode: str = 'mirror') -> SampledTrack:
    """
    Savitzky-Golay smoothing. Interior samples get the centred cubic fit over 5 samples,
    i.e. coefficients (-3, 12, 17, 12, -3) / 35; the edges are mirrored.
    """
    if len(track) < window:
        raise ProsodyInputError('track too short', field='f0')
    if not track.is_fully_valid:
        raise ProsodyInputError('track has invalid samples, interpolate first', field='f0')
    return track.replace(values=savgol_filter(track.values, window, order, mode=mode))


def semitone_transform(track: SampledTrack) -> Tuple[SampledTrack, SemitoneBase]:
    """
    ``12 log2(f0 / base)`` with base the median of the values strictly below the
    5th percentile, or the overall median when there are none (e.g. constant tracks).
    """
    valid = track.valid_mask & np.isfinite(track.values)
    values = track.values[valid]
    if len(values) == 0:
        raise ProsodyInputError('no voiced frames', field='f0')
    if np.any(values <= 0):
        raise ProsodyInputError('invalid Hz', field='f0')
    low = values[values < np.percentile(values, 5)]
    base = SemitoneBase(float(np.median(low) if len(low) else np.median(values)))
    semitones = np.full(len(track), np.nan)
    semitones[valid] = 12 * np.log2(values / base.base_hz)
    return track.replace(values=semitones), base


def rms_energy(audio: AudioBuffer, sample_rate: float = 100., window: float = 0.05) -> SampledTrack:
    """
    RMS of Hamming weighted samples, ``sqrt(sum((w x)^2) / sum(w^2))``, in windows centred
    on the frame times. Windows running over the edges are zero padded.
    """
    fs = audio.sample_rate
    width = int(round(window * fs))
    if len(audio) < width:
        raise ProsodyInputError('audio shorter than the energy window', field='samples')
    hamming = np.hamming(width)
    half = width // 2
    padded = np.concatenate([np.zeros(half), audio.samples, np.zeros(width)])
    frames = np.lib.stride_tricks.sliding_window_view(padded, width)
    centres = _frame_centres(len(audio), fs, sample_rate)
    weighted = frames[centres] * hamming
    values = np.sqrt(np.sum(weighted ** 2, axis=1) / np.sum(hamming ** 2))
    return SampledTrack(values=values, sample_rate=sample_rate, t0=0.)


def preprocess_f0(track: SampledTrack, config: Optional[SignalConfig] = None) -> Tuple[SampledTrack, SemitoneBase]:
    """
    Outliers, interpolation, smoothing and semitones, in that order.
    """
    config = SignalConfig() if config is None else config
    cleaned = mark_outliers(track, config.outlier_k)
    bridged = interpolate_gaps(cleaned)
    smooth = savgol_smooth(bridged, config.savgol_window, config.savgol_order, config.savgol_mode)
    return semitone_transform(smooth)


# ========== files ==========================================================================

def read_f0_track(path: Union[str, Path], sample_rate: Optional[float] = None) -> SampledTrack:
    """
    Two whitespace separated columns ``time_sec f0_hz``; 0 or negative f0 is unvoiced.
    The sample rate is taken from the median time step unless given.
    """
    path = Path(path)
    if not path.exists():
        raise ProsodyInputError('missing f0 track', filename=path)
    try:
        table = pd.read_csv(path, sep=r'\s+', header=None, comment='#', dtype=str)
    except pd.errors.EmptyDataError:
        raise ProsodyInputError('empty input', filename=path)
    if table.shape[0] == 0:
        raise ProsodyInputError('empty input', filename=path)
    if table.shape[1] != 2:
        raise ProsodyInputError(f'expected 2 columns, found {table.shape[1]}', filename=path, line=1)
    table.columns = ['time', 'f0']
    for column in table.columns:
        numeric = pd.to_numeric(table[column], errors='coerce')
        bad = np.flatnonzero(numeric.isna().values)
        if len(bad):
            raise ProsodyInputError('not a number', filename=path, field=column, line=int(bad[0]) + 1)
        table[column] = numeric
    times = table.time.values
    f0 = table.f0.values
    if sample_rate is None:
        if len(times) < 2:
            sample_rate = 100.
        else:
            step = float(np.median(np.diff(times)))
            if step <= 0:
                raise ProsodyInputError('times must increase', filename=path, field='time')
            sample_rate = round(1. / step, 6)
    voiced = f0 > 0
    return SampledTrack(values=np.where(voiced, f0, np.nan), sample_rate=sample_rate, t0=float(times[0]),
                        valid_mask=voiced)


def write_f0_track(path: Union[str, Path], track: SampledTrack) -> None:
    values = np.where(track.valid_mask, track.values, 0.)
    table = pd.DataFrame({'time': np.round(track.times, 6), 'f0': np.round(values, 4)})
    table.to_csv(path, sep=' ', header=False, index=False)


def read_wav(path: Union[str, Path]) -> AudioBuffer:
    """
    16-bit PCM mono WAV scaled to [-1, 1].
    """
    path = Path(path)
    if not path.exists():
        raise ProsodyInputError('missing audio', filename=path)
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise ProsodyInputError('audio must be mono', filename=path, field='channels')
    if data.dtype == np.int16:
        samples = data.astype(float) / 32768.
    elif np.issubdtype(data.dtype, np.floating):
        samples = data.astype(float)
    else:
        raise ProsodyInputError(f'unsupported sample format {data.dtype}', filename=path, field='format')
    return AudioBuffer(samples=samples, sample_rate=int(rate))


def write_wav(path: Union[str, Path], audio: AudioBuffer) -> None:
    pcm = np.round(np.clip(audio.samples, -1, 32767 / 32768) * 32768).astype(np.int16)
    wavfile.write(path, audio.sample_rate, pcm)
