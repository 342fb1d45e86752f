import os

import hypothesis
import numpy as np
import pytest

from prosodic_entrainment.synth import SynthScenario, generate_corpus

hypothesis.settings.register_profile('fast', max_examples=10, deadline=None)
hypothesis.settings.register_profile('ci', max_examples=100, deadline=None)
hypothesis.settings.load_profile(os.environ.get('HYPOTHESIS_PROFILE', 'fast'))


@pytest.fixture(scope='session')
def feature_corpus(tmp_path_factory):
    """Feature level corpus: EX entrained, IN disentrained, the rest independent."""
    scenario = SynthScenario(n_dialogs=8, n_segments_per_dialog=120, coupling={'EX': 0.9, 'IN': -0.9}, seed=3)
    return generate_corpus(scenario).write(tmp_path_factory.mktemp('feature_corpus'))


@pytest.fixture(scope='session')
def contour_synth():
    scenario = SynthScenario(mode='contour', n_dialogs=4, n_segments_per_dialog=10, seed=5)
    return generate_corpus(scenario)


@pytest.fixture(scope='session')
def contour_corpus(tmp_path_factory, contour_synth):
    return contour_synth.write(tmp_path_factory.mktemp('contour_corpus'))


@pytest.fixture
def rng():
    return np.random.default_rng(20240229)
