"""
Superpositional f0 stylization.

Phrase register is a base-, mid- and topline plus a range line (top minus base),
all linear over time normalised to [0, 1] within the fitting window. Locally,
the phrase-range-normalised contour around an accent is a cubic over time
normalised to [-1, 1], the accent's own register is re-fitted in the 300 ms
window, and the Gestalt deviation is the RMSD between accent and phrase lines.

.. code-block:: python

    reg = fit_register(semitones, (12.3, 14.1))
    norm = range_normalize(semitones.segment(12.3, 14.1), reg)
    s0, s1, s2, s3 = fit_accent_poly(norm, 13.02)
"""

__all__ = ['RegisterStylization', 'AccentShape', 'fit_register', 'range_normalize', 'fit_accent_poly',
           'gestalt_deviation', 'stylize_accent', 'phrase_windows']

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from .misc import ProsodyInputError
from .signal import SampledTrack, TIME_EPS

logger = logging.getLogger(__name__)

Window = Tuple[float, float]


@dataclass(frozen=True)
class RegisterStylization:
    """
    Register lines over normalised time ``tau = (t - start) / (end - start)``.
    Intercepts in semitones, slopes in semitones per unit of normalised time.
    """
    base_intercept: float
    base_slope: float
    mid_intercept: float
    mid_slope: float
    top_intercept: float
    top_slope: float
    rng_intercept: float
    rng_slope: float
    window: Window

    def normalized_time(self, t) -> np.ndarray:
        start, end = self.window
        span = end - start
        if span <= 0:
            return np.zeros_like(np.asarray(t, dtype=float))
        return (np.asarray(t, dtype=float) - start) / span

    def _line(self, intercept: float, slope: float, t) -> np.ndarray:
        return intercept + slope * self.normalized_time(t)

    def base(self, t) -> np.ndarray:
        return self._line(self.base_intercept, self.base_slope, t)

    def mid(self, t) -> np.ndarray:
        return self._line(self.mid_intercept, self.mid_slope, t)

    def top(self, t) -> np.ndarray:
        return self._line(self.top_intercept, self.top_slope, t)

    def rng(self, t) -> np.ndarray:
        return self._line(self.rng_intercept, self.rng_slope, t)


@dataclass(frozen=True)
class AccentShape:
    poly: Tuple[float, float, float, float]
    local_register: RegisterStylization
    gestalt_lev_rmsd: float
    gestalt_rng_rmsd: float
    nucleus_time: float


def _linear_fit(tau: np.ndarray, values: np.ndarray) -> Tuple[float, float]:
    """(intercept, slope); slope 0 when there are fewer than two distinct times."""
    if len(np.unique(tau)) < 2:
        return float(np.mean(values)), 0.
    slope, intercept = np.polyfit(tau, values, 1)
    return float(intercept), float(slope)


def fit_register(f0: SampledTrack, window: Window,
                 sub_window: float = 0.05, step: float = 0.01) -> RegisterStylization:
    """
    Base-, mid-, top- and range line of the f0 (semitones) within ``window``.

    A ``sub_window`` is shifted by ``step`` over the samples. In each position the
    mid point is the median of all values, the base point the median of the values whose
    deviation from the midline is at or below the 10th percentile, the top point the median
    of those at or above the 90th percentile; each point sits at the median time of its values.
    The 10th and 90th percentiles are computed once over all deviations in the whole window
    (minimum and maximum below 10 samples), not separately inside each sub-window. The
    sub-windows only pick which values enter each point, so the lines follow the register
    envelope around a sloping midline rather than the local spread. The range line is fitted
    to the non-negative top minus base distances at the sub-window centres.

    :param f0: semitone track
    :param window: (start, end) in seconds
    :param sub_window: seconds
    :param step: seconds
    """
    start, end = window
    part = f0.segment(start, end)
    mask = part.valid_mask & np.isfinite(part.values)
    values = part.values[mask]
    tau = (part.times[mask] - start) / (end - start) if end > start else np.zeros(mask.sum())
    if len(values) == 0:
        raise ProsodyInputError('empty segment', field='f0')
    width = max(1, int(round(sub_window * f0.sample_rate)))
    shift = max(1, int(round(step * f0.sample_rate)))
    if len(values) < width:
        low, high = values.min(), values.max()
        base = float(np.median(values[values <= low]))
        top = float(np.median(values[values >= high]))
        mid = float(np.median(values))
        return RegisterStylization(base, 0., mid, 0., top, 0., max(top - base, 0.), 0., (start, end))
    starts = range(0, len(values) - width + 1, shift)
    centres = np.array([np.median(tau[i:i + width]) for i in starts])
    mid_line = _linear_fit(centres, np.array([np.median(values[i:i + width]) for i in starts]))
    deviation = values - (mid_line[0] + mid_line[1] * tau)
    if len(values) < 10:
        low, high = deviation.min(), deviation.max()
    else:
        low, high = np.percentile(deviation, [10, 90])
    points = {'base': ([], []), 'top': ([], [])}
    for i in starts:
        chunk, chunk_tau, chunk_dev = values[i:i + width], tau[i:i + width], deviation[i:i + width]
        for name, selected in (('base', chunk_dev <= low), ('top', chunk_dev >= high)):
            if selected.any():
                points[name][0].append(np.median(chunk_tau[selected]))
                points[name][1].append(np.median(chunk[selected]))
    for name, selected in (('base', deviation <= low), ('top', deviation >= high)):
        if not points[name][0]:
            # extreme samples only in the uncovered tail
            points[name][0].append(np.median(tau[selected]))
            points[name][1].append(np.median(values[selected]))
    lines = {name: _linear_fit(np.asarray(t), np.asarray(v)) for name, (t, v) in points.items()}
    lines['mid'] = mid_line
    distances = (lines['top'][0] + lines['top'][1] * centres) - (lines['base'][0] + lines['base'][1] * centres)
    rng = _linear_fit(centres, np.clip(distances, 0, None))
    return RegisterStylization(base_intercept=lines['base'][0], base_slope=lines['base'][1],
                               mid_intercept=lines['mid'][0], mid_slope=lines['mid'][1],
                               top_intercept=lines['top'][0], top_slope=lines['top'][1],
                               rng_intercept=rng[0], rng_slope=rng[1],
                               window=(start, end))


def range_normalize(f0: SampledTrack, reg: RegisterStylization, floor: float = 0.1) -> SampledTrack:
    """
    Base line maps to 0, top line to 1. Spans narrower than ``floor`` semitones are divided by ``floor``.
    """
    times = f0.times
    base = reg.base(times)
    span = reg.top(times) - base
    span = np.where(span < floor, floor, span)
    return f0.replace(values=(f0.values - base) / span)


def _accent_bounds(track: SampledTrack, nucleus: float, window: float,
                   bounds: Optional[Window]) -> Window:
    lo, hi = nucleus - window / 2, nucleus + window / 2
    if len(track):
        lo, hi = max(lo, track.t0), min(hi, track.end)
    if bounds is not None:
        lo, hi = max(lo, bounds[0]), min(hi, bounds[1])
    return lo, hi


def fit_accent_poly(norm_f0: SampledTrack, nucleus: float, window: float = 0.3,
                    bounds: Optional[Window] = None) -> Tuple[float, float, float, float]:
    """
    Cubic ``s0 + s1 t + s2 t^2 + s3 t^3`` over the window centred on ``nucleus``
    with time normalised to [-1, 1]. The window is clipped to the track and to ``bounds``
    and the time normalisation follows the clipped extent.

    :param norm_f0: range normalised f0
    :param nucleus: seconds
    :param window: seconds
    :param bounds: optional (start, end) the window may not leave, e.g. the dialog act
    :return: (s0, s1, s2, s3)
    """
    lo, hi = _accent_bounds(norm_f0, nucleus, window, bounds)
    mask = norm_f0.mask_between(lo, hi) & norm_f0.valid_mask & np.isfinite(norm_f0.values)
    if mask.sum() < 4 or hi <= lo:
        raise ProsodyInputError('accent window underpopulated', field='f0')
    tau = 2 * (norm_f0.times[mask] - lo) / (hi - lo) - 1
    coefs = P.polyfit(tau, norm_f0.values[mask], 3)
    return tuple(float(c) for c in coefs)


def gestalt_deviation(local: RegisterStylization, phrase: RegisterStylization, window: Window,
                      sample_rate: float = 100.) -> Tuple[float, float]:
    """
    RMSD between accent and phrase mid lines, and between their range lines,
    each line evaluated in its own time normalisation on the window's sample grid.

    :return: (lev_rmsd, rng_rmsd)
    """
    start, end = window
    grid = np.linspace(start, end, int(round((end - start) * sample_rate)) + 1)
    lev = np.sqrt(np.mean((local.mid(grid) - phrase.mid(grid)) ** 2))
    rng = np.sqrt(np.mean((local.rng(grid) - phrase.rng(grid)) ** 2))
    return float(lev), float(rng)


def stylize_accent(f0: SampledTrack, phrase: RegisterStylization, nucleus: float,
                   window: float = 0.3,
                   bounds: Optional[Window] = None,
                   sub_window: float = 0.05,
                   step: float = 0.01,
                   floor: float = 0.1) -> AccentShape:
    """
    Full local description of one pitch event: shape polynomial on the phrase-range
    normalised contour, local register and its deviation from the phrase register.

    :param f0: semitone track
    :param phrase: register of the phrase the nucleus lies in
    """
    bounds = phrase.window if bounds is None else (max(bounds[0], phrase.window[0]),
                                                    min(bounds[1], phrase.window[1]))
    norm = range_normalize(f0.segment(*phrase.window), phrase, floor)
    poly = fit_accent_poly(norm, nucleus, window, bounds)
    lo, hi = _accent_bounds(norm, nucleus, window, bounds)
    local = fit_register(f0, (lo, hi), sub_window, step)
    lev, rng = gestalt_deviation(local, phrase, (lo, hi), f0.sample_rate)
    return AccentShape(poly=poly, local_register=local, gestalt_lev_rmsd=lev, gestalt_rng_rmsd=rng,
                       nucleus_time=nucleus)


def phrase_windows(boundaries: Sequence[float], start: float, end: float,
                   onsets: Optional[Sequence[float]] = None) -> List[Window]:
    """
    Phrase intervals between ``start``, the boundaries strictly inside, and ``end``.
    With word ``onsets`` a phrase following a boundary starts at the first onset
    after it, so the pause is not part of the phrase; phrases without onsets are dropped.
    """
    inner = [b for b in sorted(boundaries) if start + TIME_EPS < b < end - TIME_EPS]
    edges = [start] + inner + [end]
    windows = []
    for a, b in zip(edges[:-1], edges[1:]):
        if onsets is not None and a > start:
            later = [o for o in onsets if a - TIME_EPS <= o < b]
            if not later:
                continue
            a = min(later)
        if b > a:
            windows.append((a, b))
    return windows
