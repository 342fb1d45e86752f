"""
Tunables of the pipeline, one dataclass per stage.

Defaults are the values of the measurement procedure where it states them
(50 ms / 10 ms register windows, 300 ms accent window, 1 s minimum phrase,
0.5 s / 0.1 s accent initialisation thresholds, 100 Hz tracks, alpha 0.05,
10 Hz DCT cutoff, +/-1 Hz syllable band); the rest are documented choices.

.. code-block:: python

    from prosodic_entrainment.config import PipelineConfig
    config = PipelineConfig.load('config.json').override(seed=42, alpha=0.01)
    config.dump('out/config.json')

The config file is JSON. Flags override the file and the environment variable
``PROSODIC_ENTRAINMENT_CONFIG`` gives the file path when no ``--config`` is passed.
"""

__all__ = ['SignalConfig', 'StructureConfig', 'StylizeConfig', 'FeatureConfig', 'EntrainConfig',
           'StatsConfig', 'PipelineConfig', 'CONFIG_ENV', 'get_config_path']

import copy
import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .misc import ConfigError

CONFIG_ENV = 'PROSODIC_ENTRAINMENT_CONFIG'


@dataclass
class SignalConfig:
    sample_rate: float = 100.
    f_min: float = 75.
    f_max: float = 500.
    frame_length: float = 0.04
    voicing_threshold: float = 0.45
    outlier_k: float = 2.
    energy_window: float = 0.05
    savgol_window: int = 5
    savgol_order: int = 3
    savgol_mode: str = 'mirror'


@dataclass
class StructureConfig:
    band_low: float = 200.
    band_high: float = 3000.
    analysis_window: float = 0.05
    reference_window: float = 0.2
    step: float = 0.05
    energy_factor: float = 1.1
    min_energy_fraction: float = 0.05
    min_nucleus_gap: float = 0.1
    pause_threshold: float = 0.2
    boundary_window: float = 0.5
    pause_vicinity: float = 1.
    min_phrase_length: float = 1.
    accent_long: float = 0.5
    accent_short: float = 0.1


@dataclass
class StylizeConfig:
    register_window: float = 0.05
    register_step: float = 0.01
    accent_window: float = 0.3
    range_floor: float = 0.1


@dataclass
class FeatureConfig:
    dct_cutoff: float = 10.
    dct_band: float = 1.
    exclude_dc: bool = True
    min_rhythm_duration: float = 0.2


@dataclass
class EntrainConfig:
    seed: int = 0
    n_resamples: int = 10
    condition_matched: bool = True


@dataclass
class StatsConfig:
    alpha: float = 0.05
    per_feature: bool = False
    condition: str = 'both'
    n_perm: int = 10000


_SECTIONS = {'signal': SignalConfig,
             'structure': StructureConfig,
             'stylize': StylizeConfig,
             'features': FeatureConfig,
             'entrain': EntrainConfig,
             'stats': StatsConfig}


@dataclass
class PipelineConfig:
    signal: SignalConfig = field(default_factory=SignalConfig)
    structure: StructureConfig = field(default_factory=StructureConfig)
    stylize: StylizeConfig = field(default_factory=StylizeConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    entrain: EntrainConfig = field(default_factory=EntrainConfig)
    stats: StatsConfig = field(default_factory=StatsConfig)
    frozen_groupings: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.stats.condition not in ('coop', 'comp', 'both'):
            raise ConfigError(f'stats.condition must be coop, comp or both, not {self.stats.condition!r}')
        if not 0 < self.stats.alpha < 1:
            raise ConfigError(f'stats.alpha must lie in (0, 1), not {self.stats.alpha}')
        if self.entrain.n_resamples < 1:
            raise ConfigError('entrain.n_resamples must be at least 1')
        if self.signal.f_min >= self.signal.f_max:
            raise ConfigError('signal.f_min must be below signal.f_max')
        if self.signal.sample_rate <= 0:
            raise ConfigError('signal.sample_rate must be positive')

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], source: str = '<dict>') -> 'PipelineConfig':
        """
        Build from a (possibly partial) nested dictionary. Missing keys keep their defaults.

        :param data: e.g. ``{'stats': {'alpha': 0.01}, 'frozen_groupings': True}``
        :param source: named in error messages
        """
        if not isinstance(data, dict):
            raise ConfigError(f'{source}: top level must be an object')
        kwargs = {}
        for key, value in data.items():
            if key == 'frozen_groupings':
                if not isinstance(value, bool):
                    raise ConfigError(f'{source}: frozen_groupings must be a boolean')
                kwargs[key] = value
                continue
            if key not in _SECTIONS:
                raise ConfigError(f'{source}: unknown section {key!r}')
            if not isinstance(value, dict):
                raise ConfigError(f'{source}: section {key!r} must be an object')
            section = _SECTIONS[key]
            defaults = section()
            checked = {}
            for name, entry in value.items():
                if not hasattr(defaults, name):
                    raise ConfigError(f'{source}: unknown key {key}.{name}')
                checked[name] = cls._coerce(entry, getattr(defaults, name), f'{source}: {key}.{name}')
            kwargs[key] = section(**checked)
        return cls(**kwargs)

    @staticmethod
    def _coerce(value: Any, default: Any, where: str) -> Any:
        # bool is an int subclass, so it is checked first
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f'{where} must be a boolean')
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f'{where} must be an integer')
            return value
        if isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f'{where} must be a number')
            return float(value)
        if not isinstance(value, type(default)):
            raise ConfigError(f'{where} must be a {type(default).__name__}')
        return value

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def dump(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.dumps() + '\n')

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'PipelineConfig':
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f'{path}: config file not found')
        except json.JSONDecodeError as error:
            raise ConfigError(f'{path}: not valid JSON ({error.msg}, line {error.lineno})')
        return cls.from_dict(data, source=str(path))

    def override(self,
                 seed: Optional[int] = None,
                 n_resamples: Optional[int] = None,
                 alpha: Optional[float] = None,
                 condition: Optional[str] = None,
                 frozen_groupings: Optional[bool] = None,
                 per_feature: Optional[bool] = None,
                 n_perm: Optional[int] = None) -> 'PipelineConfig':
        """
        Copy with the given (non-None) command line values applied.
        """
        new = copy.deepcopy(self)
        if seed is not None:
            new.entrain.seed = int(seed)
        if n_resamples is not None:
            new.entrain.n_resamples = int(n_resamples)
        if alpha is not None:
            new.stats.alpha = float(alpha)
        if condition is not None:
            new.stats.condition = condition
        if frozen_groupings:
            new.frozen_groupings = True
        if per_feature:
            new.stats.per_feature = True
        if n_perm is not None:
            new.stats.n_perm = int(n_perm)
        new.validate()
        return new


def get_config_path(cli_value: Optional[Union[str, Path]] = None) -> Optional[Path]:
    """
    The ``--config`` value if given, else the environment variable, else None.
    """
    if cli_value is not None:
        return Path(cli_value)
    elif os.environ.get(CONFIG_ENV):
        return Path(os.environ[CONFIG_ENV])
    return None
