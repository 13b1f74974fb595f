"""End-to-end acceptance criteria.

Each test prints one ``CRITERION n: PASS|FAIL|NOT RUN`` line (also gathered
in the terminal summary). Every tolerance and schedule is pinned below.

Criterion 3 at the stated schedules needs tens of thousands of core-hours
(81 models x 10 seeds x 60k MCS) and only runs with
``XANES_FULL_ACCEPTANCE=1``.
"""

import json
import math
import os
import time

import numpy as np
import pytest
from scipy import stats

import toys
from acceptance_log import report
from xanes_emc import io
from xanes_emc.evidence import (EvidenceTable, estimate_log_ztilde, free_energy, free_energy_profile,
                                map_estimate, model_evidence, peak_count_posterior, select_model,
                                summarize)
from xanes_emc.model import PeakConfig, error_function, evaluate_peaks, make_params
from xanes_emc.priors import CONVENTIONAL, PROPOSED, ModelSpec, default_hyperparams
from xanes_emc.sampler import (CONVENTIONAL_LADDER, PROPOSED_LADDER, SamplerConfig, autocorrelation,
                               build_ladder, exchange_probability, run_emc)
from xanes_emc.synthetic import default_truth, synthesize

pytestmark = pytest.mark.acceptance

SEEDS = range(10)
WORKERS = int(os.environ.get("XANES_WORKERS", "1"))
FULL = os.environ.get("XANES_FULL_ACCEPTANCE") == "1"

# criterion 1
TOY_LADDER = (30, 1.5, 100.0)
TOY_SCHEDULE = dict(total=10000, burn_in=5000, sweeps_per_mcs=50, seed=3)
TOY_TOL_NATS = 0.05
TOY_MAX_SECONDS = 120.0

# criteria 2, 4, 5: no schedule is stated, so a pinned reduced one is used
REDUCED = dict(total=1000, burn_in=400, sweeps_per_mcs=5)
C2_MIN_HITS, C2_MAX_RUNG_GAP = 9, 1
C4_MIN_HITS, C4_LAG = 8, 100
C5_RATIO = 1.2
NOISE_LEVEL_TOL = 0.20

# criterion 3
FULL_SCHEDULE = dict(total=60000, burn_in=30000, sweeps_per_mcs=50)
DESK_SCHEDULE = dict(total=20000, burn_in=10000, sweeps_per_mcs=50)
C3_GRID = [(k1, k2) for k1 in range(9) for k2 in range(9)]
C3_MIN_FULL, C3_MIN_DESK = 8, 7

# criterion 6
KS_ALPHA = 1e-3
KS_DRAWS = 100_000
REPLICA1 = dict(total=12000, burn_in=2000, sweeps_per_mcs=5, thin=10, seed=0)

# criterion 8
DET_LADDER = (12, 1.9, 3000.0)
DET_SCHEDULE = dict(total=40, burn_in=20, sweeps_per_mcs=5, seed=123)
DET_WORKERS = (1, 2, 8)


@pytest.fixture(scope="module")
def paired_runs():
    """Proposed (5,5) and conventional K=10 runs on ten noise seeds."""
    truth = default_truth()
    out = []
    for seed in SEEDS:
        data = synthesize(truth.with_seed(seed))
        cfg = dict(REDUCED, seed=seed, n_workers=WORKERS)
        prop_model = ModelSpec(PROPOSED, PeakConfig(5, 5))
        conv_model = ModelSpec(CONVENTIONAL, PeakConfig.conventional(10))
        prop = run_emc(prop_model, data, build_ladder(*PROPOSED_LADDER), SamplerConfig(**cfg))
        conv = run_emc(conv_model, data, build_ladder(*CONVENTIONAL_LADDER), SamplerConfig(**cfg))
        out.append((seed, data, prop, conv))
    return truth, out


def test_criterion_1_evidence_oracle():
    model, data, g, init, steps = toys.linear_gaussian()
    lad = build_ladder(*TOY_LADDER)
    t0 = time.perf_counter()
    rec = run_emc(model, data, lad, SamplerConfig(step_sizes=steps, initial=init, **TOY_SCHEDULE))
    F = free_energy_profile(estimate_log_ztilde(rec), lad.b, data.N)
    elapsed = time.perf_counter() - t0
    gaps = [abs(F[l] + toys.linear_gaussian_logz(data.intensity, g, lad.b[l])) for l in range(1, lad.L)]
    ok = max(gaps) <= TOY_TOL_NATS and elapsed < TOY_MAX_SECONDS
    report(1, ok, f"max |F_est - F_exact| over {lad.L - 1} rungs = {max(gaps):.4f} nats "
                  f"(tol {TOY_TOL_NATS}); runtime {elapsed:.1f}s (limit {TOY_MAX_SECONDS:.0f}s, 1 thread)")
    assert ok


def test_criterion_2_noise_recovery(paired_runs):
    truth, runs = paired_runs
    hits, where, noise = 0, [], []
    for seed, data, prop, _ in runs:
        F = free_energy_profile(estimate_log_ztilde(prop), prop.b, prop.N)
        l = int(np.nanargmin(F[1:])) + 1
        anchor = int(np.flatnonzero(prop.b == 3000.0)[0])
        hits += abs(l - anchor) <= C2_MAX_RUNG_GAP
        where.append(round(float(prop.b[l])))
        noise.append(prop.error[:, anchor].mean() * 2 * 3000.0)
    ok = hits >= C2_MIN_HITS
    report(2, ok, f"argmin_l F within {C2_MAX_RUNG_GAP} rung of b=3000 in {hits}/10 seeds "
                  f"(need {C2_MIN_HITS}); argmin b per seed {where}; schedule {REDUCED}")
    assert ok
    # mean E_N at the b=3000 replica should sit near the noise level 1/(2*3000)
    assert max(abs(r - 1.0) for r in noise) <= NOISE_LEVEL_TOL


def _selection_over(grid, data, schedule, seed):
    ladder = build_ladder(*PROPOSED_LADDER)
    entries = []
    for key in grid:
        rec = run_emc(ModelSpec(PROPOSED, PeakConfig(*key)), data, ladder,
                      SamplerConfig(seed=seed, n_workers=WORKERS, **schedule))
        entries.append(model_evidence(rec, key))
    table = EvidenceTable.from_entries(entries)
    return summarize(table)


def _criterion_3_hits(schedule):
    truth = default_truth()
    hits = 0
    for seed in SEEDS:
        res = _selection_over(C3_GRID, synthesize(truth.with_seed(seed)), schedule, seed)
        hits += max(res.p_k1, key=res.p_k1.get) == 5
    return hits


def test_criterion_3_model_selection():
    if not FULL:
        report(3, "NOT RUN", "needs 2 x 810 EMC runs of 20k-60k MCS at L=92 (2-7 h each on one core); "
                             "set XANES_FULL_ACCEPTANCE=1 to run")
        pytest.skip("criterion 3 is gated behind XANES_FULL_ACCEPTANCE=1")
    full = _criterion_3_hits(FULL_SCHEDULE)
    desk = _criterion_3_hits(DESK_SCHEDULE)
    ok = full >= C3_MIN_FULL and desk >= C3_MIN_DESK
    report(3, ok, f"argmax p(K1|D)=5 in {full}/10 (full, need {C3_MIN_FULL}) and "
                  f"{desk}/10 (desk, need {C3_MIN_DESK})")
    assert ok


def test_criterion_4_sampler_efficiency(paired_runs):
    _, runs = paired_runs
    hits, pairs = 0, []
    for seed, _, prop, conv in runs:
        rp = autocorrelation(prop.error[:, list(prop.b).index(3000.0)], C4_LAG)[C4_LAG]
        rc = autocorrelation(conv.error[:, list(conv.b).index(3000.0)], C4_LAG)[C4_LAG]
        hits += rp <= rc
        pairs.append(f"{rp:.2f}/{rc:.2f}")
    ok = hits >= C4_MIN_HITS
    report(4, ok, f"rho_{C4_LAG}(proposed) <= rho_{C4_LAG}(conventional K=10) in {hits}/10 seeds "
                  f"(need {C4_MIN_HITS}); prop/conv {pairs}")
    assert ok


def test_criterion_5_map_quality(paired_runs):
    truth, runs = paired_runs
    ratios = []
    for seed, data, prop, _ in runs:
        F = free_energy_profile(estimate_log_ztilde(prop), prop.b, prop.N)
        l = int(np.nanargmin(F[1:])) + 1
        vec, _, _ = map_estimate(prop, l=l)
        fit = prop.model.from_vector(vec)
        ratios.append(error_function(fit, data) / error_function(truth.params, data))
    ok = ratios[0] <= C5_RATIO
    report(5, ok, f"E_N(MAP)/E_N(truth) = {ratios[0]:.4f} on the default dataset (limit {C5_RATIO}); "
                  f"max over 10 seeds {max(ratios):.4f}")
    assert ok


def test_criterion_6_prior_correctness():
    rng = np.random.default_rng(2020)
    worst = 1.0
    for regime in (PROPOSED, CONVENTIONAL):
        ps = default_hyperparams(regime)
        for spec in list(ps.step.values()) + list(ps.below.values()) + list(ps.above.values()):
            worst = min(worst, stats.kstest(spec.sample(rng, KS_DRAWS), spec.frozen().cdf).pvalue)
    model = ModelSpec(PROPOSED, PeakConfig(1, 1))
    rec = run_emc(model, synthesize(default_truth()), build_ladder(4, 2.0, 3000.0), SamplerConfig(**REPLICA1))
    chain = rec.theta[:, 0]
    worst_chain = min(stats.kstest(chain[:, j], s.frozen().cdf).pvalue
                      for j, s in enumerate(model.component_specs()))
    ok = worst > KS_ALPHA and worst_chain > KS_ALPHA
    report(6, ok, f"min KS p over sample_prior ({KS_DRAWS} draws/component) = {worst:.3g}; "
                  f"replica-1 chain ({rec.M} thinned samples) min p = {worst_chain:.3g}; alpha {KS_ALPHA}")
    assert ok


def test_criterion_7_exactness():
    checks = {}
    p = make_params((0, 543.1, 1, 0, 0, 3), above=[(2.0, 5.0, 3.0)])
    half = evaluate_peaks(p, np.array([546.6, 549.6]))
    checks["fwhm"] = np.all(np.abs(half / 1.0 - 1.0) <= 1e-12)
    from xanes_emc.model import Dataset
    checks["E_N hand"] = error_function(make_params((0, 543.1, 1, 0, 0, 3)), Dataset([1, 2], [1, 2])) == 1.25
    checks["exchange"] = (exchange_probability(0.1, 0.2, 1, 2, 5) == 1.0
                          and exchange_probability(0.3, 0.1, 2, 2, 5) == 1.0
                          and abs(exchange_probability(1.0, 0.5, 1.0, 1.2, 10) - math.exp(-1)) <= 1e-15)
    lad = build_ladder(*PROPOSED_LADDER)
    checks["ladder"] = lad.b[0] == 0.0 and lad.b[lad.L - 3] == 3000.0
    checks["F(0, 2pi, 2)"] = free_energy(0.0, 2 * math.pi, 2) == 0.0
    rng = np.random.default_rng(77)
    sums, identity = [], True
    for _ in range(200):
        n, L = rng.integers(1, 10), rng.integers(2, 8)
        b = np.r_[0.0, np.sort(rng.uniform(0.01, 10, L - 1))]
        lz = np.c_[np.zeros(n), rng.normal(0, 5, size=(n, L - 1))]
        t = EvidenceTable([(i, 0) for i in range(n)], b, 7, lz)
        post = peak_count_posterior(t)
        sums.append(abs(post.prob.sum() - 1.0))
        key, l = select_model(t)
        i, j = np.unravel_index(np.argmax(post.joint), post.joint.shape)
        identity &= (t.keys[i], j + 1) == (key, l)
    checks["probabilities sum"] = max(sums) <= 1e-12
    checks["argmin F = argmax p"] = identity
    ok = all(checks.values())
    report(7, ok, "; ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items())
           + f" (max |sum p - 1| = {max(sums):.1e}, tol 1e-12)")
    assert ok


def test_criterion_8_determinism(tmp_path):
    data = synthesize(default_truth())
    model = ModelSpec(PROPOSED, PeakConfig(5, 5))
    lad = build_ladder(*DET_LADDER)
    blobs = []
    for w in DET_WORKERS:
        rec = run_emc(model, data, lad, SamplerConfig(n_workers=w, **DET_SCHEDULE))
        io.write_samples(tmp_path / f"s{w}.csv", rec)
        table = EvidenceTable.from_entries([model_evidence(rec)])
        io.write_evidence(tmp_path / f"e{w}.csv", table)
        io.write_selection(tmp_path / f"r{w}.json", summarize(table, lambda k: model))
        blobs.append(b"".join((tmp_path / f"{n}{w}.{x}").read_bytes()
                              for n, x in (("s", "csv"), ("s", "meta.json"), ("e", "csv"), ("r", "json"))))
        blobs[-1] += rec.theta.tobytes() + rec.trace.tobytes() + rec.metropolis_accepted.tobytes()
    ok = all(b == blobs[0] for b in blobs[1:])
    report(8, ok, f"sample records, evidence and selection reports byte-identical for n_workers={DET_WORKERS}")
    assert ok
    json.loads((tmp_path / "r1.json").read_text())
