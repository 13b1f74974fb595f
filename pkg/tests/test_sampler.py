import math

import numpy as np
import pytest
from scipy import integrate, stats

import toys
from xanes_emc import _kernel
from xanes_emc.errors import ConfigError, DegenerateInputError, InvalidInputError
from xanes_emc.model import Dataset, PeakConfig, error_function
from xanes_emc.priors import CONVENTIONAL, PROPOSED, ModelSpec, sample_prior_vector
from xanes_emc.sampler import (ChainState, SamplerConfig, autocorrelation, build_ladder,
                               exchange_probability, exchange_step, init_state, ladder_from_b,
                               metropolis_sweep, replica_rngs, run_emc, sort_peaks)


def test_ladder_reference_values():
    lad = build_ladder(92, 1.18, 3000)
    assert lad.b[0] == 0.0
    assert lad.b[89] == 3000.0
    assert lad.b[91] == pytest.approx(4177.2, rel=1e-12)
    assert lad.b[1] == pytest.approx(3000 * 1.18 ** (2 - 90), rel=1e-12)
    assert np.all(np.diff(lad.b) > 0)
    assert lad.anchor_index == 89
    conv = build_ladder(120, 1.132, 3000)
    assert conv.b[117] == 3000.0


@pytest.mark.parametrize("args", [(2, 1.2, 3000), (5, 1.0, 3000), (5, 1.2, 0), (5, 0.9, 10)])
def test_ladder_rejects(args):
    with pytest.raises(ConfigError):
        build_ladder(*args)


def test_ladder_from_b():
    with pytest.raises(ConfigError):
        ladder_from_b([0.1, 1.0])
    with pytest.raises(ConfigError):
        ladder_from_b([0.0, 2.0, 1.0])
    assert ladder_from_b([0, 1, 2, 4]).L == 4


def test_exchange_probability_cases():
    assert exchange_probability(0.3, 0.5, 1.0, 2.0, 10) == 1.0
    assert exchange_probability(0.7, 0.2, 5.0, 5.0, 10) == 1.0
    assert exchange_probability(1.0, 0.5, 1.0, 1.2, 10) == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert exchange_probability(1.0, 0.5, 1.0, 1.2, 10) == pytest.approx(0.36788, abs=5e-6)


def _state(regime, peaks, data, seed=0, L=4):
    model = ModelSpec(regime, peaks)
    lad = build_ladder(L, 1.5, 3000)
    rngs, _ = replica_rngs(seed, L)
    return init_state(model, data, lad, rngs), model


@pytest.mark.parametrize("regime,peaks,grid", [
    (PROPOSED, PeakConfig(2, 2), "uniform"),
    (CONVENTIONAL, PeakConfig(3, 0), "uniform"),
    (PROPOSED, PeakConfig(1, 2), "irregular"),
])
def test_incremental_dsse_matches_recompute(regime, peaks, grid, truth_data):
    data = truth_data
    if grid == "irregular":
        E = np.sort(np.random.default_rng(1).uniform(530, 590, 300))
        data = Dataset(E, np.interp(E, truth_data.energy, truth_data.intensity))
    st, model = _state(regime, peaks, data)
    rng = np.random.default_rng(9)
    for s in range(st.L):
        base = error_function(model.from_vector(st.theta[s]), data) * 2 * data.N
        for p in range(model.n_params):
            for _ in range(3):
                x = st.theta[s, p] + rng.normal(0, 0.3 * model.component_specs()[p].scale)
                if p in (2, 5) or (p >= 6 and (p - 6) % 3 == 2):
                    x = abs(x) + 0.05  # widths stay positive
                v = st.theta[s].copy()
                v[p] = x
                fresh = error_function(model.from_vector(v), data) * 2 * data.N - base
                got = _kernel.trial_dsse(st.E, st.I, st.h, st.relative, st.theta[s], st.resid[s],
                                         st.comp[s], st.unit[s], st.lo[s], st.hi[s], p, x)
                assert got == pytest.approx(fresh, rel=1e-9, abs=1e-10 * base)


@pytest.mark.parametrize("regime,peaks", [(PROPOSED, PeakConfig(3, 3)), (CONVENTIONAL, PeakConfig(4, 0))])
def test_cache_consistent_after_sweeps(regime, peaks, truth_data):
    st, model = _state(regime, peaks, truth_data)
    rngs, ex = replica_rngs(4, st.L)
    for m in range(20):
        metropolis_sweep(st, rng=rngs, n_sweeps=5)
        exchange_step(st, parity=m % 2, rng=ex)
    assert st.audit(truth_data) < 1e-9


def test_zero_change_always_accepted():
    model, data, g, init, steps = toys.linear_gaussian()
    lad = ladder_from_b([0.0, 100.0])
    st = init_state(model, data, lad, None, init)
    st_steps = np.tile(steps, (2, 1)) * 1e-300  # proposals identical to current values
    _, acc, prop = metropolis_sweep(st, rng=np.random.default_rng(0), step=st_steps, n_sweeps=100)
    assert np.all(acc[:, 6] == prop[:, 6]) and prop[0, 6] == 100


def test_out_of_support_rejected(truth_data):
    st, model = _state(PROPOSED, PeakConfig(0, 0), truth_data)
    st.theta[:, 0] = 0.9  # H on the upper edge of U(0.8, 0.9)
    for s in range(st.L):
        st.refresh_slot(s)
    step = np.zeros((st.L, model.n_params))
    step[:, 0] = 1e-12
    z_rng = np.random.default_rng(3)
    for _ in range(5):
        metropolis_sweep(st, rng=z_rng, step=step, n_sweeps=50)
        assert np.all(st.theta[:, 0] <= 0.9) and np.all(st.theta[:, 0] >= 0.8)
    step[:, 0] = 1e6  # every proposal leaves the support
    before = st.theta.copy()
    _, acc, prop = metropolis_sweep(st, rng=z_rng, step=step, n_sweeps=200)
    assert acc[:, 0].sum() == 0 and prop[:, 0].sum() == 200 * st.L
    np.testing.assert_array_equal(st.theta, before)


def _rwm_rate(s_over_sigma):
    """Acceptance of random-walk Metropolis on N(0,1) by quadrature."""
    def inner(z, x):
        return stats.norm.pdf(x) * stats.norm.pdf(z) * min(1.0, math.exp(-0.5 * ((x + s_over_sigma * z) ** 2 - x * x)))
    return integrate.dblquad(inner, -10, 10, -10, 10, epsabs=1e-10)[0]


def test_quadrature_rate_closed_form():
    # known result: (2/pi) atan(2 sigma / s)
    assert _rwm_rate(2.4) == pytest.approx(2 / math.pi * math.atan(2 / 2.4), abs=1e-6)


def test_toy_acceptance_rate():
    model, data, g, init, steps = toys.linear_gaussian()
    b = 100.0
    lad = ladder_from_b([0.0, b])
    st = init_state(model, data, lad, None, init)
    _, sd = toys.linear_gaussian_posterior(data.intensity, g, b)
    step = np.tile(steps, (2, 1))
    step[1, 6] = 1.5 * sd
    rngs, _ = replica_rngs(11, 2)
    metropolis_sweep(st, rng=rngs, step=step, n_sweeps=1000)
    _, acc, prop = metropolis_sweep(st, rng=rngs, step=step, n_sweeps=200_000)
    rate = acc[1, 6] / prop[1, 6]
    assert rate == pytest.approx(_rwm_rate(1.5), abs=0.01)


def test_toy_posterior_histogram():
    model, data, g, init, steps = toys.linear_gaussian()
    lad = build_ladder(8, 2.0, 100.0)
    cfg = SamplerConfig(total=20000, burn_in=2000, sweeps_per_mcs=5, seed=2, step_sizes=steps,
                        initial=init)
    rec = run_emc(model, data, lad, cfg)
    l = lad.anchor_index
    mean, sd = toys.linear_gaussian_posterior(data.intensity, g, lad.b[l])
    edges = mean + sd * np.linspace(-4, 4, 17)
    x = rec.theta[:, l, 6]
    emp = np.histogram(x, edges)[0] / x.size
    ref = np.diff(stats.norm(mean, sd).cdf(edges))
    assert 0.5 * np.abs(emp - ref).sum() <= 0.02


def test_two_well_mixing():
    model, data, steps = toys.two_well()
    b_cold = 2.0
    xs = np.linspace(540, 560, 20001)
    lp = np.array([-b_cold * data.N * error_function(model.from_vector(toys.two_well_vector(x)), data)
                   for x in xs])
    w = np.exp(lp - lp.max())
    want = w[xs < 550].sum() / w.sum()
    assert 0.6 < want < 0.75

    b = np.concatenate([[0.0], b_cold * 0.6 ** np.arange(11)[::-1]])
    lad = ladder_from_b(b)
    init = toys.two_well_vector(555.0)  # start every replica in the shallower well
    cfg = SamplerConfig(total=6000, burn_in=1000, sweeps_per_mcs=10, seed=0, step_sizes=steps,
                        initial=init, tune=False)
    rec = run_emc(model, data, lad, cfg)
    assert (rec.theta[:, -1, 7] < 550).mean() == pytest.approx(want, abs=0.05)

    # one cold chain without exchanges stays where it started
    st = init_state(model, data, lad, None, init)
    rngs, _ = replica_rngs(1, lad.L)
    frac = []
    for _ in range(500):
        metropolis_sweep(st, rng=rngs, step=np.tile(steps, (lad.L, 1)), n_sweeps=10)
        frac.append(st.vector(lad.L - 1)[7] < 550)
    assert np.mean(frac) < 0.05


def test_exchange_identical_states_noop(truth_data):
    st, model = _state(PROPOSED, PeakConfig(1, 1), truth_data, L=6)
    st.theta[:] = st.theta[0]
    for s in range(st.L):
        st.refresh_slot(s)
    before = [st.vector(l) for l in range(st.L)]
    exchange_step(st, parity=0, rng=np.random.default_rng(0))
    for l in range(st.L):
        np.testing.assert_array_equal(st.vector(l), before[l])


def test_exchange_moves_cached_values_exactly(truth_data):
    st, model = _state(PROPOSED, PeakConfig(1, 1), truth_data, L=6)
    errs = st.error().copy()
    vecs = [st.vector(l) for l in range(st.L)]
    acc = np.zeros(st.L - 1, dtype=np.int64)
    prop = np.zeros(st.L - 1, dtype=np.int64)
    exchange_step(st, parity=1, rng=np.random.default_rng(0), n_acc=acc, n_prop=prop)
    assert np.array_equal(prop, [0, 1, 0, 1, 0])
    perm = [next(k for k in range(st.L) if np.array_equal(st.vector(l), vecs[k])) for l in range(st.L)]
    assert sorted(perm) == list(range(st.L))
    assert np.array_equal(st.error(), errs[perm])
    with pytest.raises(ConfigError):
        exchange_step(st, parity=2, rng=np.random.default_rng(0))


def test_bookkeeping_single_record(truth_data):
    model = ModelSpec(PROPOSED, PeakConfig(1, 1))
    rec = run_emc(model, truth_data, build_ladder(4, 2, 3000), SamplerConfig(total=2, burn_in=1, sweeps_per_mcs=1))
    assert rec.M == 1 and rec.theta.shape == (1, 4, model.n_params)
    assert rec.trace.shape == (2, 4)
    rec = run_emc(model, truth_data, build_ladder(4, 2, 3000),
                  SamplerConfig(total=11, burn_in=1, sweeps_per_mcs=1, thin=3))
    assert list(rec.mcs) == [1, 4, 7, 10]


@pytest.mark.parametrize("kw", [dict(total=5, burn_in=5), dict(total=0, burn_in=0), dict(sweeps_per_mcs=0),
                                dict(thin=0), dict(n_workers=0), dict(step_fraction=0.0)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        SamplerConfig(**kw).validate()


def test_sort_peaks_within_population():
    model = ModelSpec(PROPOSED, PeakConfig(2, 2))
    v = np.concatenate([[0.85, 543, 1, 1, 0, 3], [1, -2, 1], [2, -9, 2], [0.3, 20, 8], [0.4, 5, 9]])
    s = sort_peaks(v, model)
    np.testing.assert_array_equal(s[6:], [2, -9, 2, 1, -2, 1, 0.4, 5, 9, 0.3, 20, 8])


def test_determinism_across_workers(truth_data):
    model = ModelSpec(PROPOSED, PeakConfig(2, 1))
    lad = build_ladder(9, 1.8, 3000)
    recs = [run_emc(model, truth_data, lad, SamplerConfig(total=30, burn_in=10, sweeps_per_mcs=3, seed=17,
                                                         n_workers=w)) for w in (1, 2, 8)]
    for r in recs[1:]:
        assert np.array_equal(r.theta, recs[0].theta)
        assert np.array_equal(r.error, recs[0].error)
        assert np.array_equal(r.exchange_accepted, recs[0].exchange_accepted)
        assert np.array_equal(r.metropolis_accepted, recs[0].metropolis_accepted)
    other = run_emc(model, truth_data, lad, SamplerConfig(total=30, burn_in=10, sweeps_per_mcs=3, seed=18))
    assert not np.array_equal(other.theta, recs[0].theta)


def test_prior_replica_is_prior_only(truth_data):
    # the b=0 replica must follow the same path whatever the data
    model = ModelSpec(PROPOSED, PeakConfig(1, 1))
    lad = build_ladder(4, 2, 3000)
    far = Dataset(truth_data.energy, truth_data.intensity + 1e3)
    paths = []
    for data in (truth_data, far):
        rngs, _ = replica_rngs(1, lad.L)
        st = init_state(model, data, lad, rngs)
        metropolis_sweep(st, rng=rngs, n_sweeps=200)
        paths.append(st.vector(0))
    np.testing.assert_array_equal(paths[0], paths[1])


def test_state_shape_checked(truth_data):
    model = ModelSpec(PROPOSED, PeakConfig(1, 0))
    with pytest.raises(InvalidInputError):
        ChainState(model, truth_data, build_ladder(4, 2, 3000), np.zeros((3, model.n_params)))
    v = sample_prior_vector(model, np.random.default_rng(0))
    st = ChainState(model, truth_data, build_ladder(4, 2, 3000), np.tile(v, (4, 1)))
    assert st.error(0) == pytest.approx(error_function(model.from_vector(v), truth_data), rel=1e-12)


def test_autocorrelation_cases():
    x = np.random.default_rng(0).normal(size=1000)
    assert autocorrelation(x, 5)[0] == 1.0
    alt = np.tile([1.0, -1.0], 500)
    assert autocorrelation(alt, 3)[1] == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(DegenerateInputError):
        autocorrelation(np.ones(10), 2)
    with pytest.raises(InvalidInputError):
        autocorrelation(x[:5], 5)


def test_autocorrelation_ar1():
    rng = np.random.default_rng(123)
    n = 1_000_000
    from scipy.signal import lfilter
    x = lfilter([1.0], [1.0, -0.9], rng.normal(size=n))
    rho = autocorrelation(x, 10)
    np.testing.assert_allclose(rho, 0.9 ** np.arange(11), atol=0.02)
