import json

import pytest

from prosodic_entrainment.config import CONFIG_ENV, PipelineConfig, get_config_path
from prosodic_entrainment.misc import ConfigError


def test_defaults():
    config = PipelineConfig()
    assert config.signal.sample_rate == 100.
    assert config.stylize.accent_window == 0.3
    assert config.structure.min_phrase_length == 1.
    assert (config.structure.accent_long, config.structure.accent_short) == (0.5, 0.1)
    assert (config.stats.alpha, config.stats.condition) == (0.05, 'both')
    assert config.entrain.condition_matched and not config.frozen_groupings


def test_partial_dictionary_keeps_defaults():
    config = PipelineConfig.from_dict({'stats': {'alpha': 0.01}, 'entrain': {'n_resamples': 3},
                                       'frozen_groupings': True})
    assert config.stats.alpha == 0.01
    assert config.stats.condition == 'both'
    assert config.entrain.n_resamples == 3 and config.entrain.seed == 0
    assert config.frozen_groupings


def test_integer_accepted_for_a_number():
    config = PipelineConfig.from_dict({'signal': {'f_max': 400}})
    assert config.signal.f_max == 400. and isinstance(config.signal.f_max, float)


@pytest.mark.parametrize('data, message', [
    ([], 'top level must be an object'),
    ({'plotting': {}}, 'unknown section'),
    ({'stats': 0.05}, 'must be an object'),
    ({'stats': {'beta': 1}}, 'unknown key stats.beta'),
    ({'stats': {'per_feature': 1}}, 'must be a boolean'),
    ({'entrain': {'seed': 1.5}}, 'must be an integer'),
    ({'entrain': {'n_resamples': True}}, 'must be an integer'),
    ({'stats': {'alpha': '0.05'}}, 'must be a number'),
    ({'frozen_groupings': 'yes'}, 'must be a boolean'),
])
def test_malformed_dictionary(data, message):
    with pytest.raises(ConfigError, match=message):
        PipelineConfig.from_dict(data)


@pytest.mark.parametrize('data, message', [
    ({'stats': {'condition': 'neutral'}}, 'coop, comp or both'),
    ({'stats': {'alpha': 1.}}, r'\(0, 1\)'),
    ({'entrain': {'n_resamples': 0}}, 'at least 1'),
    ({'signal': {'f_min': 500.}}, 'f_min'),
])
def test_invalid_values(data, message):
    with pytest.raises(ConfigError, match=message):
        PipelineConfig.from_dict(data)


def test_override():
    config = PipelineConfig()
    new = config.override(seed=42, alpha=0.01, condition='coop', per_feature=True, n_perm=99)
    assert (new.entrain.seed, new.stats.alpha, new.stats.condition, new.stats.n_perm) == (42, 0.01, 'coop', 99)
    assert new.stats.per_feature
    # the original is untouched
    assert (config.entrain.seed, config.stats.alpha) == (0, 0.05)
    assert config.override() == config
    with pytest.raises(ConfigError):
        config.override(n_resamples=0)


def test_dump_and_load(tmp_path):
    config = PipelineConfig().override(seed=7, condition='comp')
    config.dump(tmp_path / 'config.json')
    assert PipelineConfig.load(tmp_path / 'config.json') == config
    assert list(json.loads(config.dumps())) == sorted(config.to_dict())


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match='config file not found'):
        PipelineConfig.load(tmp_path / 'absent.json')
    (tmp_path / 'broken.json').write_text('{"stats": ')
    with pytest.raises(ConfigError, match='not valid JSON'):
        PipelineConfig.load(tmp_path / 'broken.json')


def test_config_path_precedence(monkeypatch, tmp_path):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    assert get_config_path() is None
    monkeypatch.setenv(CONFIG_ENV, str(tmp_path / 'env.json'))
    assert get_config_path() == tmp_path / 'env.json'
    assert get_config_path(tmp_path / 'cli.json') == tmp_path / 'cli.json'
