import math

import numpy as np
import pytest
from scipy import stats

from xanes_emc.errors import ConfigError, InvalidInputError
from xanes_emc.model import evaluate_model
from xanes_emc.priors import PROPOSED, ModelSpec, log_prior
from xanes_emc.model import PeakConfig
from xanes_emc.synthetic import MIN_SEPARATION, TruthSpec, default_truth, draw_truth, synthesize


def test_default_truth_design(truth):
    p = truth.params
    assert p.config == PeakConfig(5, 5)
    assert p.step.E0 == 543.1
    assert truth.n_points == 703 and truth.b_true == 3000.0
    assert (truth.e_min, truth.e_max) == (530.0, 590.0)
    assert all(q.dE < 0 for q in p.below) and all(q.dE > 0 for q in p.above)
    centers = [p.step.DeltaE] + [q.dE for q in p.peaks]
    gaps = np.abs(np.subtract.outer(centers, centers))[np.triu_indices(len(centers), 1)]
    assert gaps.min() >= MIN_SEPARATION
    for q in p.peaks:
        assert 530.0 <= p.step.E0 + q.dE <= 590.0
    # tall, sharp below the edge; low, broad above
    assert np.mean([q.F for q in p.below]) > np.mean([q.F for q in p.above])
    assert np.mean([q.W for q in p.below]) < np.mean([q.W for q in p.above])
    assert math.isfinite(log_prior(ModelSpec(PROPOSED, p.config), p))


def test_default_truth_is_fixed():
    assert default_truth() == default_truth()


def test_noiseless_matches_model(truth):
    d = synthesize(truth, noise=False)
    np.testing.assert_array_equal(d.intensity, evaluate_model(truth.params, truth.energies()))


def test_noise_statistics(truth, truth_data):
    r = truth_data.intensity - evaluate_model(truth.params, truth_data.energy)
    assert r.var(ddof=1) == pytest.approx(1 / 3000, rel=0.15)
    assert abs(r.mean()) <= 3 / math.sqrt(3000 * 703)


def test_residual_normality_across_seeds(truth):
    clean = evaluate_model(truth.params, truth.energies())
    fails = 0
    for seed in range(100):
        r = synthesize(truth.with_seed(seed)).intensity - clean
        res = stats.anderson(r, "norm")
        crit_1pct = res.critical_values[list(res.significance_level).index(1.0)]
        fails += res.statistic > crit_1pct
    assert fails <= 5


def test_reproducible(truth):
    a = synthesize(truth.with_seed(11))
    b = synthesize(truth.with_seed(11))
    assert a.intensity.tobytes() == b.intensity.tobytes()
    assert not np.array_equal(a.intensity, synthesize(truth.with_seed(12)).intensity)


def test_truth_spec_validation(truth):
    with pytest.raises(InvalidInputError):
        TruthSpec(truth.params, b_true=0.0)
    with pytest.raises(InvalidInputError):
        TruthSpec(truth.params, n_points=0)
    with pytest.raises(ConfigError):
        draw_truth(K1=40, max_tries=20)


def test_other_configs():
    p = draw_truth(seed=3, K1=2, K2=4)
    assert p.config == PeakConfig(2, 4)
