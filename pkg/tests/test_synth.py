import filecmp

import numpy as np
import pandas as pd
import pytest

from prosodic_entrainment.config import PipelineConfig
from prosodic_entrainment.dialacts import LABELS
from prosodic_entrainment.entrain import compute_records, sample_pairs
from prosodic_entrainment.features import ID_COLUMNS, qualified_names
from prosodic_entrainment.misc import ProsodyInputError
from prosodic_entrainment.pipeline import run_pipeline
from prosodic_entrainment.stats import sign_table
from prosodic_entrainment.synth import SynthScenario, dialog_layout, generate_corpus


@pytest.mark.parametrize('kwargs, message', [
    ({'mode': 'audio'}, 'unknown synthesis mode'),
    ({'coupling': {'XX': 0.5}}, 'label outside inventory'),
    ({'da_distribution': {'EX': 0.5, 'AC': 0.4}}, 'invalid distribution'),
    ({'da_distribution': {'EX': 1.5, 'AC': -0.5}}, 'invalid distribution'),
    ({'coupling': {'EX': 1.2}}, r'must lie in \[-1, 1\]'),
    ({'n_dialogs': 3}, 'at least 4 dialogs'),
    ({'n_segments_per_dialog': 1}, 'at least 2 segments'),
    ({'noise_sd': 0.}, 'noise_sd must be positive'),
])
def test_invalid_scenario(kwargs, message):
    with pytest.raises(ProsodyInputError, match=message):
        SynthScenario(**kwargs)


def test_unknown_scenario_keys():
    with pytest.raises(ProsodyInputError, match='unknown scenario keys: rho'):
        SynthScenario.from_dict({'rho': 0.5})
    scenario = SynthScenario.from_dict({'n_dialogs': 4, 'coupling': {'EX': 0.5}})
    assert SynthScenario.from_dict(scenario.to_dict()) == scenario


def test_dialog_layout():
    layout = dialog_layout(4)
    assert [dialog_id for dialog_id, _, _ in layout] == ['d00', 'd01', 'd02', 'd03']
    assert [condition.short for _, condition, _ in layout] == ['coop', 'comp', 'coop', 'comp']
    # each pair of speakers meets once per condition
    assert layout[0][2] == layout[1][2] == ('S00', 'S01')
    assert layout[2][2] == ('S02', 'S03')


def test_feature_corpus_shape():
    scenario = SynthScenario(n_dialogs=4, n_segments_per_dialog=30, da_distribution={'EX': 0.5, 'AC': 0.5}, seed=1)
    synth = generate_corpus(scenario)
    assert len(synth.segments) == len(synth.features) == 120
    assert synth.features.columns.tolist() == ID_COLUMNS + qualified_names()
    assert set(synth.features.da_label) <= {'EX', 'AC'}
    assert synth.features[qualified_names()].notna().all().all()
    for dialog_id, group in synth.features.groupby('dialog_id'):
        assert group['index'].tolist() == list(range(30))
        assert group.speaker.nunique() == 2


def test_written_corpus_is_byte_identical(tmp_path):
    scenario = SynthScenario(n_dialogs=4, n_segments_per_dialog=20, coupling={'EX': 0.8}, seed=11)
    first = generate_corpus(scenario).write(tmp_path / 'first')
    second = generate_corpus(SynthScenario(**scenario.to_dict())).write(tmp_path / 'second')
    names = ['dialog_acts.tsv', 'features.tsv', 'truth.json']
    match, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
    assert match == names and not mismatch and not errors


def test_seed_changes_the_corpus():
    one = generate_corpus(SynthScenario(n_dialogs=4, n_segments_per_dialog=20, seed=1)).features
    two = generate_corpus(SynthScenario(n_dialogs=4, n_segments_per_dialog=20, seed=2)).features
    assert not np.allclose(one['GF0.max'].values, two['GF0.max'].values)


def test_coupling_planted_in_the_bundle(feature_corpus, tmp_path):
    config = PipelineConfig().override(n_resamples=3, n_perm=99)
    report = run_pipeline(feature_corpus, config, tmp_path)
    signs = report.tables['signs']
    convergence = signs[(signs.measure == 'convergence')]
    for condition in ('coop', 'comp'):
        cells = convergence[convergence.condition == condition].set_index(['da_label', 'feature_set']).sign
        assert (cells.loc['EX'] == '+').all(), condition
        assert (cells.loc['IN'] == '-').all(), condition


def test_contour_truth_is_consistent(contour_synth):
    truth = contour_synth.truth['channels']
    assert len(truth) == 8
    for name, channel in truth.items():
        assert set(channel['accents']) <= set(channel['nuclei']), name
        assert channel['boundaries'] == sorted(channel['boundaries'])
    for segment in contour_synth.segments:
        channel = truth[f'{segment.dialog_id}_{segment.speaker}']
        inside = [b for b in channel['boundaries'] if segment.start < b <= segment.end + 1e-9]
        # one or two phrases, each of at least a second
        assert 1 <= len(inside) <= 2
        assert inside[-1] == pytest.approx(segment.end)
        assert np.all(np.diff([segment.start] + inside) >= 1.)


def test_contour_words_cover_the_segments(contour_synth):
    for segment in contour_synth.segments:
        words = [w for w in contour_synth.words if (w.dialog_id, w.speaker) == (segment.dialog_id, segment.speaker)
                 and segment.start - 1e-9 <= w.start < segment.end]
        assert words[0].start == pytest.approx(segment.start)
        assert words[-1].end == pytest.approx(segment.end)
        assert all(w.stressed_syllable_nucleus is not None for w in words)


def test_contour_tracks_and_audio(contour_synth):
    for channel, track in contour_synth.f0.items():
        audio = contour_synth.audio[channel]
        assert audio.sample_rate == 8000
        assert len(audio.samples) / 8000 == pytest.approx(track.end, abs=0.02)
        assert np.all(track.values[track.valid_mask] > 0)


# ========== calibration ====================================================================

def cell_signs(scenario: SynthScenario) -> pd.DataFrame:
    """Signs of every cell of a feature corpus, one pairing draw."""
    table = generate_corpus(scenario).features
    pairs, _ = sample_pairs(table, seed=scenario.seed, n_resamples=1)
    return sign_table(compute_records(table, pairs))


@pytest.mark.slow
def test_null_false_positive_rate():
    cells = pd.concat([cell_signs(SynthScenario(n_dialogs=10, n_segments_per_dialog=200, seed=1000 + seed))
                       for seed in range(200)], ignore_index=True)
    tested = cells[cells.note != 'n/a']
    rate = tested.sign.isin(['+', '-']).mean()
    assert len(tested) > 0.9 * len(cells)
    assert 0.02 <= rate <= 0.07


@pytest.mark.slow
def test_planted_signs_over_seeds():
    cells = pd.concat([cell_signs(SynthScenario(n_dialogs=10, n_segments_per_dialog=200,
                                                coupling={'EX': 0.9, 'IN': -0.9}, seed=seed))
                       for seed in range(10)], ignore_index=True)
    assert len(cells[cells.da_label == 'EX']) == 10 * 2 * 5 * 2
    assert (cells[cells.da_label == 'EX'].sign == '+').mean() >= 0.9
    assert (cells[cells.da_label == 'IN'].sign == '-').mean() >= 0.9


@pytest.mark.slow
def test_contour_coupling_survives_the_chain(tmp_path):
    """Entrained EX and disentrained IN read back from the f0 contours, over three corpora."""
    distribution = {label: 0.05 for label in LABELS}
    distribution.update(EX=0.25, IN=0.25)
    cells = []
    for seed in (2, 3, 4):
        scenario = SynthScenario(mode='contour', n_dialogs=8, n_segments_per_dialog=40, da_distribution=distribution,
                                 coupling={'EX': 0.9, 'IN': -0.9}, seed=seed)
        corpus = generate_corpus(scenario).write(tmp_path / f'corpus{seed}')
        report = run_pipeline(corpus, PipelineConfig().override(n_resamples=3, n_perm=99), tmp_path / f'out{seed}')
        signs = report.tables['signs']
        cells.append(signs[signs.da_label.isin(['EX', 'IN']) & signs.feature_set.isin(['GF0', 'IP'])
                           & (signs.measure == 'convergence')])
    cells = pd.concat(cells, ignore_index=True)
    assert len(cells) == 3 * 2 * 2 * 2
    planted = cells.da_label.map({'EX': '+', 'IN': '-'})
    assert (cells.sign == planted).mean() >= 0.8
    assert not ((cells.da_label == 'EX') & (cells.sign == '-')).any()
