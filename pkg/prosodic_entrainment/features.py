"""
The five prosodic feature sets of a dialog act segment.

====  ===========================================================================
GEN   energy max, med, sd
GF0   f0 max, med, sd
IP    range / level intercept and slope of the first (.F) and last (.L) phrase
ACC   c0-3, range / level lines and Gestalt deviations of the first and last accent
RHY   syllable rate, syllable influence on the energy and on the f0 contour
====  ===========================================================================

In tables the names are qualified by their set, e.g. ``IP.rng.c0.F``.
A feature that cannot be computed (no phrase, no accent, too short for rhythm)
is absent from its vector and empty in the table.
"""

__all__ = ['FeatureSet', 'FEATURE_NAMES', 'feature_names', 'qualified_names', 'FeatureVector', 'DialogActContext',
           'track_stats', 'gen_features', 'gf0_features', 'ip_features', 'acc_features', 'dct_weight',
           'rhy_features', 'extract_segment_features', 'channel_features', 'ID_COLUMNS']

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.fft import dct

from .config import FeatureConfig, StylizeConfig
from .dialacts import DialogActSegment
from .misc import ProsodyInputError
from .signal import SampledTrack, TIME_EPS
from .structure import ProsodicStructure, WordSegment
from .stylize import AccentShape, RegisterStylization, fit_register, phrase_windows, stylize_accent

logger = logging.getLogger(__name__)


class FeatureSet(enum.Enum):
    """
    Feature sets: GEN, GF0, IP, ACC, RHY
    """
    GEN = enum.auto()
    GF0 = enum.auto()
    IP = enum.auto()
    ACC = enum.auto()
    RHY = enum.auto()


_POSITIONS = ('F', 'L')
_REGISTER = ('rng.c0', 'rng.c1', 'lev.c0', 'lev.c1')

FEATURE_NAMES: Dict[FeatureSet, List[str]] = {
    FeatureSet.GEN: ['max', 'med', 'sd'],
    FeatureSet.GF0: ['max', 'med', 'sd'],
    FeatureSet.IP: [f'{name}.{pos}' for pos in _POSITIONS for name in _REGISTER],
    FeatureSet.ACC: [f'{name}.{pos}' for pos in _POSITIONS
                     for name in ('c0', 'c1', 'c2', 'c3') + _REGISTER + ('gst.lev', 'gst.rng')],
    FeatureSet.RHY: ['syl.rate', 'syl.prop.en', 'syl.prop.f0'],
}

ID_COLUMNS = ['segment_id', 'dialog_id', 'index', 'start', 'end', 'speaker', 'da_label', 'condition']


def feature_names(feature_set: FeatureSet) -> List[str]:
    return list(FEATURE_NAMES[feature_set])


def qualified_names() -> List[str]:
    """All table column names, set by set."""
    return [f'{fs.name}.{name}' for fs in FeatureSet for name in FEATURE_NAMES[fs]]


@dataclass
class FeatureVector:
    set_id: FeatureSet
    entries: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.entries) - set(FEATURE_NAMES[self.set_id])
        assert not unknown, f'not {self.set_id.name} features: {sorted(unknown)}'
        self.entries = {name: float(value) for name, value in self.entries.items() if np.isfinite(value)}

    def __getitem__(self, name: str) -> float:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def qualified(self) -> Dict[str, float]:
        return {f'{self.set_id.name}.{name}': value for name, value in self.entries.items()}


@dataclass
class DialogActContext:
    """
    What the IP and ACC features of a segment are read from: the phrases and the local
    pitch events overlapping it, in time order.
    """
    segment: DialogActSegment
    phrases: List[RegisterStylization] = field(default_factory=list)
    accents: List[AccentShape] = field(default_factory=list)
    nuclei_in_segment: List[float] = field(default_factory=list)

    def __post_init__(self):
        self.phrases = sorted(self.phrases, key=lambda reg: reg.window[0])
        self.accents = sorted(self.accents, key=lambda acc: acc.nucleus_time)


def track_stats(track: SampledTrack, start: float, end: float) -> Tuple[float, float, float]:
    """
    Maximum, median and population sd of the valid samples in ``[start, end]``.
    The sd of a constant segment is exactly 0.
    """
    part = track.segment(start, end)
    values = part.values[part.valid_mask & np.isfinite(part.values)]
    if len(values) == 0:
        raise ProsodyInputError('empty segment', field='track')
    sd = 0. if values.min() == values.max() else float(values.std())
    return float(values.max()), float(np.median(values)), sd


def _stats_vector(feature_set: FeatureSet, track: SampledTrack, segment: DialogActSegment) -> FeatureVector:
    try:
        stats = track_stats(track, segment.start, segment.end)
    except ProsodyInputError:
        return FeatureVector(feature_set)
    return FeatureVector(feature_set, dict(zip(FEATURE_NAMES[feature_set], stats)))


def gen_features(energy: SampledTrack, segment: DialogActSegment) -> FeatureVector:
    return _stats_vector(FeatureSet.GEN, energy, segment)


def gf0_features(f0: SampledTrack, segment: DialogActSegment) -> FeatureVector:
    return _stats_vector(FeatureSet.GF0, f0, segment)


def _register_entries(reg: RegisterStylization, pos: str) -> Dict[str, float]:
    return {f'rng.c0.{pos}': reg.rng_intercept, f'rng.c1.{pos}': reg.rng_slope,
            f'lev.c0.{pos}': reg.mid_intercept, f'lev.c1.{pos}': reg.mid_slope}


def ip_features(ctx: DialogActContext) -> FeatureVector:
    """
    Register of the first and the (possibly identical) last phrase overlapping the segment.
    """
    if not ctx.phrases:
        return FeatureVector(FeatureSet.IP)
    entries = {}
    for pos, reg in zip(_POSITIONS, (ctx.phrases[0], ctx.phrases[-1])):
        entries.update(_register_entries(reg, pos))
    return FeatureVector(FeatureSet.IP, entries)


def acc_features(ctx: DialogActContext) -> FeatureVector:
    """
    Shape, local register and Gestalt deviation of the first and last pitch event in the segment.
    """
    if not ctx.accents:
        return FeatureVector(FeatureSet.ACC)
    entries = {}
    for pos, accent in zip(_POSITIONS, (ctx.accents[0], ctx.accents[-1])):
        entries.update({f'c{i}.{pos}': c for i, c in enumerate(accent.poly)})
        entries.update(_register_entries(accent.local_register, pos))
        entries[f'gst.lev.{pos}'] = accent.gestalt_lev_rmsd
        entries[f'gst.rng.{pos}'] = accent.gestalt_rng_rmsd
    return FeatureVector(FeatureSet.ACC, entries)


def dct_weight(contour: SampledTrack, rate: float, cutoff: float = 10., band: float = 1.,
               exclude_dc: bool = True) -> float:
    """
    Relative weight of the cosine transform coefficients within ``rate +/- band`` Hz
    among those up to ``cutoff`` Hz.

    Orthonormal DCT-II; coefficient k of N samples spaced dt lies at ``k / (2 N dt)`` Hz.
    Absolute amplitudes are summed, the DC coefficient left out by default.
    A flat contour has weight 0.

    :param contour: fully valid track, e.g. f0 in semitones or energy
    :param rate: syllable rate (Hz)
    """
    values = contour.values[contour.valid_mask & np.isfinite(contour.values)]
    if len(values) < 2:
        return 0.
    coefs = np.abs(dct(values, type=2, norm='ortho'))
    freqs = np.arange(len(values)) / (2 * len(values) * contour.dt)
    usable = np.ones(len(values), dtype=bool)
    if exclude_dc:
        usable[0] = False
    in_band = usable & (freqs >= rate - band - TIME_EPS) & (freqs <= rate + band + TIME_EPS)
    below = usable & (freqs <= cutoff + TIME_EPS)
    denominator = coefs[below].sum()
    if denominator <= 1e-9 * max(coefs.max(), 1e-300):
        return 0.
    return float(coefs[in_band & below].sum() / denominator)


def rhy_features(f0: SampledTrack, energy: SampledTrack, nuclei: Sequence[float], start: float, end: float,
                 config: Optional[FeatureConfig] = None) -> FeatureVector:
    """
    Syllable rate in the segment and how strongly it shapes the energy and f0 contours.
    The two weights need at least ``min_rhythm_duration`` seconds.
    """
    config = FeatureConfig() if config is None else config
    duration = end - start
    if duration <= 0:
        raise ProsodyInputError('empty segment', field='start/end')
    nuclei = np.asarray(nuclei, dtype=float)
    rate = float(np.sum((nuclei >= start - TIME_EPS) & (nuclei <= end + TIME_EPS)) / duration)
    entries = {'syl.rate': rate}
    if duration >= config.min_rhythm_duration - TIME_EPS:
        for name, track in (('syl.prop.en', energy), ('syl.prop.f0', f0)):
            part = track.segment(start, end)
            if int(np.sum(part.valid_mask & np.isfinite(part.values))) >= 2:
                entries[name] = dct_weight(part, rate, config.dct_cutoff, config.dct_band, config.exclude_dc)
    return FeatureVector(FeatureSet.RHY, entries)


def extract_segment_features(ctx: DialogActContext, f0: SampledTrack, energy: SampledTrack,
                             config: Optional[FeatureConfig] = None) -> Dict[FeatureSet, FeatureVector]:
    segment = ctx.segment
    return {FeatureSet.GEN: gen_features(energy, segment),
            FeatureSet.GF0: gf0_features(f0, segment),
            FeatureSet.IP: ip_features(ctx),
            FeatureSet.ACC: acc_features(ctx),
            FeatureSet.RHY: rhy_features(f0, energy, ctx.nuclei_in_segment, segment.start, segment.end, config)}


def _overlaps(window: Tuple[float, float], start: float, end: float) -> bool:
    return window[0] < end and window[1] > start


def channel_features(segments: Sequence[DialogActSegment], words: Sequence[WordSegment], f0: SampledTrack,
                     energy: SampledTrack, structure: ProsodicStructure,
                     config: Optional[FeatureConfig] = None,
                     stylize_config: Optional[StylizeConfig] = None) -> pd.DataFrame:
    """
    Feature table rows of all segments of one speaker in one dialog.

    Phrases run from the first word onset after a boundary to the next boundary; each accent
    is stylized against the register of its phrase and clipped to it.

    :param f0: semitone track of the speaker
    :return: one row per segment, identifier columns plus qualified feature columns
    """
    stylize_config = StylizeConfig() if stylize_config is None else stylize_config
    words = sorted(words, key=lambda w: w.start)
    registers: List[RegisterStylization] = []
    if words:
        for window in phrase_windows(structure.phrase_boundaries, words[0].start, words[-1].end,
                                     onsets=[w.start for w in words]):
            try:
                registers.append(fit_register(f0, window, stylize_config.register_window,
                                              stylize_config.register_step))
            except ProsodyInputError:
                logger.debug(f'no f0 in phrase {window}')
    shapes: List[AccentShape] = []
    for time in structure.accents:
        phrase = next((reg for reg in registers if reg.window[0] - TIME_EPS <= time <= reg.window[1] + TIME_EPS),
                      None)
        if phrase is None:
            continue
        try:
            shapes.append(stylize_accent(f0, phrase, time, stylize_config.accent_window,
                                         sub_window=stylize_config.register_window,
                                         step=stylize_config.register_step,
                                         floor=stylize_config.range_floor))
        except ProsodyInputError:
            logger.debug(f'accent at {time:.2f} s not stylized')
    nuclei = np.asarray(structure.nuclei, dtype=float)
    rows = []
    for segment in segments:
        ctx = DialogActContext(segment=segment,
                               phrases=[reg for reg in registers if _overlaps(reg.window, segment.start, segment.end)],
                               accents=[shape for shape in shapes
                                        if segment.start - TIME_EPS <= shape.nucleus_time <= segment.end + TIME_EPS],
                               nuclei_in_segment=list(nuclei[(nuclei >= segment.start - TIME_EPS)
                                                             & (nuclei <= segment.end + TIME_EPS)]))
        row = {'segment_id': segment.segment_id, 'dialog_id': segment.dialog_id, 'index': segment.index,
               'start': segment.start, 'end': segment.end, 'speaker': segment.speaker,
               'da_label': segment.label, 'condition': segment.condition.short}
        for vector in extract_segment_features(ctx, f0, energy, config).values():
            row.update(vector.qualified())
        rows.append(row)
    return pd.DataFrame(rows, columns=ID_COLUMNS + qualified_names())
