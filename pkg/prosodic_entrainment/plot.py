"""
Entrainment profile of one (dialog act, feature set, measure) cell as SVG.

Features run down the vertical axis; the mean within distance of each feature is drawn
as a solid jagged line, the mean across distance as a dashed one. Vertical rules mark the
overall means (``gid`` ``mean_within`` solid, ``mean_across`` dashed): entrainment shows as the
solid rule left of the dashed one.
"""

__all__ = ['plot_profiles', 'write_profile']

import io
import logging
from pathlib import Path
from typing import Optional, Union

import matplotlib
from matplotlib.figure import Figure

from .features import FeatureSet, feature_names
from .misc import ProsodyInputError

logger = logging.getLogger(__name__)

_SVG_SETTINGS = {'svg.hashsalt': 'prosodic-entrainment', 'svg.fonttype': 'none'}


def plot_profiles(records, da_label: str, feature_set: str, measure: str,
                  condition: Optional[str] = None) -> str:
    """
    :param records: entrainment records, all resamples are pooled
    :param condition: ``coop`` or ``comp``; both if None
    :return: SVG document
    """
    cell = records[(records.da_label == da_label) & (records.feature_set == feature_set)
                   & (records.measure == measure)]
    if condition is not None:
        cell = cell[cell.condition == condition]
    if len(cell) == 0:
        raise ProsodyInputError(f'no data for {da_label} {feature_set} {measure}', field='cell')
    means = cell.groupby('feature')[['d_s', 'd_d']].mean()
    try:
        order = [name for name in feature_names(FeatureSet[feature_set]) if name in means.index]
    except KeyError:
        order = sorted(means.index)
    means = means.loc[order]
    positions = list(range(len(order)))
    with matplotlib.rc_context(_SVG_SETTINGS):
        figure = Figure(figsize=(5, 1.5 + 0.3 * len(order)))
        ax = figure.subplots()
        ax.plot(means.d_s.values, positions, color='black', linestyle='-', marker='o', markersize=3,
                label='within')
        ax.plot(means.d_d.values, positions, color='black', linestyle='--', marker='o', markersize=3,
                label='across')
        ax.axvline(cell.d_s.mean(), color='tab:blue', linestyle='-', gid='mean_within')
        ax.axvline(cell.d_d.mean(), color='tab:red', linestyle='--', gid='mean_across')
        ax.set_yticks(positions)
        ax.set_yticklabels(order)
        ax.invert_yaxis()
        ax.set_xlabel(f'{measure} distance')
        title = f'{da_label} {feature_set}' + (f' ({condition})' if condition else '')
        ax.set_title(title)
        ax.legend(loc='lower right', fontsize='small')
        figure.tight_layout()
        buffer = io.StringIO()
        figure.savefig(buffer, format='svg', metadata={'Date': None})
    logger.debug(f'profile {title}: {len(cell)} records over {len(order)} features')
    return buffer.getvalue()


def write_profile(records, da_label: str, feature_set: str, measure: str, folder: Union[str, Path],
                  condition: Optional[str] = None) -> Path:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    name = '_'.join([da_label, feature_set, measure] + ([condition] if condition else [])) + '.svg'
    path = folder / name
    path.write_text(plot_profiles(records, da_label, feature_set, measure, condition))
    logger.info(f'profile written to {path}')
    return path
