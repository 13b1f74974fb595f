"""Exchange Monte Carlo (parallel tempering over the noise precision).

Each replica ``l`` targets ``p(theta | D, b_l) ~ exp(-N b_l E_N(theta)) p(theta)``
where ``E_N`` is :func:`xanes_emc.model.error_function`. Replica ``b_1 = 0``
samples the prior. A Monte Carlo step (MCS) is ``sweeps_per_mcs``
Metropolis sweeps on every replica followed by one exchange pass over
adjacent pairs, alternating even and odd pairs between steps.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernel
from .errors import ConfigError, DegenerateInputError, InvalidInputError
from .model import N_STEP, Dataset, SpectralParams, error_function
from .priors import ModelSpec, kernel_tables, log_prior, sample_prior_vector

logger = logging.getLogger(__name__)

# (L, xi, anchor) used for the two regimes in the O-K edge study
PROPOSED_LADDER = (92, 1.18, 3000.0)
CONVENTIONAL_LADDER = (120, 1.132, 3000.0)


@dataclass(frozen=True)
class ReplicaLadder:
    L: int
    xi: float
    b_anchor: float
    b: np.ndarray

    @property
    def anchor_index(self):
        """0-based index of the rung holding ``b_anchor``."""
        return self.L - 3

    def __len__(self):
        return self.L


def build_ladder(L, xi, b_anchor) -> ReplicaLadder:
    """Geometric ladder with ``b[0] = 0`` and ``b_anchor`` at 1-based rung ``L-2``."""
    if int(L) != L or L < 3:
        raise ConfigError(f"ladder needs L >= 3, got {L}")
    if not xi > 1:
        raise ConfigError(f"ladder needs xi > 1, got {xi}")
    if not b_anchor > 0:
        raise ConfigError(f"ladder needs b_anchor > 0, got {b_anchor}")
    L = int(L)
    b = np.zeros(L)
    for l in range(2, L + 1):
        b[l - 1] = b_anchor * float(xi) ** (l - L + 2)
    return ReplicaLadder(L, float(xi), float(b_anchor), b)


def ladder_from_b(b) -> ReplicaLadder:
    """Wrap an explicit inverse-temperature list (``b[0]`` must be 0)."""
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.size < 2 or b[0] != 0 or np.any(np.diff(b) <= 0):
        raise ConfigError("explicit ladder must start at 0 and increase strictly")
    xi = float(b[-1] / b[-2]) if b.size > 2 else math.nan
    anchor = float(b[-3]) if b.size >= 3 else float(b[-1])
    return ReplicaLadder(int(b.size), xi, anchor, b)


@dataclass
class SamplerConfig:
    """Run schedule and proposal settings.

    ``step_sizes`` optionally gives absolute initial proposal widths for the
    flat parameter vector; a zero width freezes that parameter. Otherwise
    widths start at ``step_fraction`` of each prior's scale. With ``tune``,
    widths are adapted per replica and parameter during burn-in only.
    """

    total: int = 60000
    burn_in: int = 30000
    sweeps_per_mcs: int = 50
    thin: int = 1
    seed: int = 0
    step_fraction: float = 0.05
    step_sizes: Optional[np.ndarray] = None
    tune: bool = True
    tune_interval: Optional[int] = None
    n_workers: int = 1
    initial: Optional[np.ndarray] = None
    progress: bool = False

    def validate(self):
        if self.total < 1 or self.burn_in < 0:
            raise ConfigError("total must be >= 1 and burn_in >= 0")
        if not self.burn_in < self.total:
            raise ConfigError(f"burn_in ({self.burn_in}) must be < total ({self.total})")
        if self.sweeps_per_mcs < 1:
            raise ConfigError("sweeps_per_mcs must be >= 1")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.n_workers < 1:
            raise ConfigError("n_workers must be >= 1")
        if not self.step_fraction > 0:
            raise ConfigError("step_fraction must be > 0")

    def interval(self):
        if self.tune_interval:
            return int(self.tune_interval)
        return max(1, math.ceil(100 / self.sweeps_per_mcs))


def uniform_spacing(E, rtol=1e-9):
    """Grid spacing if ``E`` is uniformly spaced, else 0."""
    if E.size < 3:
        return 0.0
    d = np.diff(E)
    h = (E[-1] - E[0]) / (E.size - 1)
    if h > 0 and np.max(np.abs(d - h)) <= rtol * h:
        return float(h)
    return 0.0


class ChainState:
    """Current state of every replica with cached curves and misfits.

    The data are stored sorted by energy; the misfit is order independent.
    """

    def __init__(self, model: ModelSpec, data: Dataset, ladder: ReplicaLadder, thetas):
        thetas = np.array(thetas, dtype=float)
        L, P = thetas.shape
        if L != ladder.L or P != model.n_params:
            raise InvalidInputError(f"initial states have shape {thetas.shape}")
        order = np.argsort(data.energy, kind="stable")
        self.model = model
        self.ladder = ladder
        self.b = ladder.b.copy()
        self.N = data.N
        self.E = np.ascontiguousarray(data.energy[order])
        self.I = np.ascontiguousarray(data.intensity[order])
        self.h = uniform_spacing(self.E)
        self.relative = not model.conventional
        self.tables = kernel_tables(model)
        C = 2 + model.peaks.K
        self.theta = thetas
        self.resid = np.zeros((L, self.N))
        self.comp = np.zeros((L, C, self.N))
        self.unit = np.zeros((L, self.N))
        self.lo = np.zeros((L, C), dtype=np.int64)
        self.hi = np.zeros((L, C), dtype=np.int64)
        self.sse = np.zeros(L)
        self.logp = np.zeros(L)
        self.slot = np.arange(L, dtype=np.int64)
        for s in range(L):
            self.refresh_slot(s)

    @property
    def L(self):
        return self.theta.shape[0]

    def refresh_slot(self, s):
        self.sse[s] = _kernel.refresh(self.E, self.I, self.h, self.theta[s], self.resid[s],
                                      self.comp[s], self.unit[s], self.lo[s], self.hi[s],
                                      self.relative)
        self.logp[s] = _kernel.log_prior_vec(self.theta[s], *self.tables)

    def vector(self, l):
        return self.theta[self.slot[l]].copy()

    def params(self, l) -> SpectralParams:
        return self.model.from_vector(self.theta[self.slot[l]])

    def error(self, l=None):
        """Cached ``E_N`` of temperature ``l`` (all temperatures if None)."""
        if l is None:
            return self.sse[self.slot] / (2.0 * self.N)
        return self.sse[self.slot[l]] / (2.0 * self.N)

    def log_prior(self, l=None):
        if l is None:
            return self.logp[self.slot].copy()
        return self.logp[self.slot[l]]

    def audit(self, data: Dataset):
        """Largest relative gap between cached and freshly computed values."""
        worst = 0.0
        for l in range(self.L):
            p = self.params(l)
            fresh_e = error_function(p, data)
            fresh_p = log_prior(self.model, p)
            worst = max(worst, abs(fresh_e - self.error(l)) / max(abs(fresh_e), 1e-300))
            if math.isfinite(fresh_p):
                worst = max(worst, abs(fresh_p - self.log_prior(l)) / max(abs(fresh_p), 1.0))
        return worst


def initial_step_sizes(model: ModelSpec, L, fraction=0.05, step_sizes=None):
    if step_sizes is not None:
        base = np.asarray(step_sizes, dtype=float)
        if base.shape != (model.n_params,):
            raise ConfigError(f"step_sizes must have length {model.n_params}")
    else:
        base = np.array([s.scale for s in model.component_specs()]) * fraction
    return np.tile(base, (L, 1))


def replica_rngs(seed, L):
    """Per-replica generators plus one for exchanges, all from one seed."""
    children = np.random.SeedSequence(seed).spawn(L + 1)
    return [np.random.default_rng(c) for c in children[:L]], np.random.default_rng(children[L])


def init_state(model, data, ladder, rngs, initial=None) -> ChainState:
    """Start every replica from a prior draw (or from ``initial``)."""
    if initial is not None:
        init = np.asarray(initial, dtype=float)
        thetas = np.tile(init, (ladder.L, 1)) if init.ndim == 1 else init.copy()
    else:
        thetas = np.array([sample_prior_vector(model, r) for r in rngs])
    return ChainState(model, data, ladder, thetas)


def _draws(rngs, sweeps, P):
    z = np.empty((len(rngs), sweeps, P))
    logu = np.empty((len(rngs), sweeps, P))
    for l, r in enumerate(rngs):
        z[l] = r.standard_normal((sweeps, P))
        logu[l] = np.log(r.random((sweeps, P)))
    return z, logu


def _chunks(L, n):
    edges = np.linspace(0, L, min(n, L) + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run_sweeps(state, step, z, logu, n_acc, n_prop, pool=None, n_workers=1):
    args = (state.E, state.I, state.h, state.b, state.relative, *state.tables,
            state.theta, state.resid, state.comp, state.unit, state.lo, state.hi,
            state.sse, state.logp, state.slot, step, z, logu, n_acc, n_prop)
    if pool is None or n_workers == 1:
        _kernel.sweep_block(*args, 0, state.L)
        return
    futures = [pool.submit(_kernel.sweep_block, *args, a, b)
               for a, b in _chunks(state.L, n_workers)]
    for f in futures:
        f.result()


def metropolis_sweep(state: ChainState, model=None, data=None, ladder=None, rng=None,
                     step=None, n_sweeps=1):
    """One (or ``n_sweeps``) single-site Metropolis sweeps on every replica.

    ``rng`` is either a list of per-replica generators or one generator used
    for every replica in order. ``step`` defaults to 5% of each prior scale.
    Returns ``(state, accepted, proposed)`` counters of shape ``(L, P)``.
    """
    L, P = state.theta.shape
    if step is None:
        step = initial_step_sizes(state.model, L)
    rngs = rng if isinstance(rng, (list, tuple)) else [rng] * L
    z, logu = _draws(rngs, n_sweeps, P)
    n_acc = np.zeros((L, P), dtype=np.int64)
    n_prop = np.zeros((L, P), dtype=np.int64)
    _run_sweeps(state, np.ascontiguousarray(step, dtype=float), z, logu, n_acc, n_prop)
    return state, n_acc, n_prop


def exchange_probability(E_low, E_high, b_low, b_high, N):
    """Swap acceptance for adjacent replicas; ``E_high`` belongs to ``b_high``."""
    x = N * (b_high - b_low) * (E_high - E_low)
    return 1.0 if x >= 0 else math.exp(x)


def exchange_step(state: ChainState, ladder=None, parity=0, N=None, rng=None,
                  n_acc=None, n_prop=None):
    """Attempt swaps on all adjacent pairs ``(l, l+1)`` with ``l % 2 == parity``."""
    if parity not in (0, 1, "even", "odd"):
        raise ConfigError(f"parity must be even/odd, got {parity!r}")
    parity = {"even": 0, "odd": 1}.get(parity, parity)
    L = state.L
    logu = np.log(rng.random(L - 1)) if L > 1 else np.zeros(0)
    if n_acc is None:
        n_acc = np.zeros(L - 1, dtype=np.int64)
        n_prop = np.zeros(L - 1, dtype=np.int64)
    _kernel.exchange_pass(state.b, float(state.N if N is None else N), state.sse,
                          state.slot, parity, logu, n_acc, n_prop)
    return state


def _tune(step, n_acc, n_prop, scale_cap):
    rate = np.divide(n_acc, n_prop, out=np.full(step.shape, np.nan), where=n_prop > 0)
    factor = np.ones_like(step)
    factor[rate < 0.25] = 0.9
    factor[rate < 0.05] = 0.5
    factor[rate < 0.001] = 0.1
    factor[rate > 0.5] = 1.1
    factor[rate > 0.75] = 2.0
    factor[rate > 0.95] = 10.0
    moving = step > 0
    step[moving] = np.clip(step[moving] * factor[moving],
                           1e-9 * scale_cap[moving], scale_cap[moving])


def sort_peaks(vec, model: ModelSpec):
    """Order each peak population by position (undoes label switching)."""
    out = np.array(vec, dtype=float)
    K1, K = model.peaks.K1, model.peaks.K
    for a, b in ((0, K1), (K1, K)):
        if b - a > 1:
            block = out[..., N_STEP + 3 * a: N_STEP + 3 * b].reshape(out.shape[:-1] + (b - a, 3))
            order = np.argsort(block[..., 1], axis=-1, kind="stable")
            block = np.take_along_axis(block, order[..., None], axis=-2)
            out[..., N_STEP + 3 * a: N_STEP + 3 * b] = block.reshape(out.shape[:-1] + (3 * (b - a),))
    return out


@dataclass
class SampleRecord:
    """Retained samples of every replica after burn-in.

    ``theta`` has shape ``(M, L, P)`` with peaks sorted by position within
    each population; ``error`` and ``log_prior`` have shape ``(M, L)``.
    ``trace`` holds ``E_N`` of every replica at every MCS, burn-in included.
    """

    model: ModelSpec
    b: np.ndarray
    N: int
    mcs: np.ndarray
    theta: np.ndarray
    error: np.ndarray
    log_prior: np.ndarray
    trace: Optional[np.ndarray] = None
    exchange_accepted: np.ndarray = field(default=None)
    exchange_attempted: np.ndarray = field(default=None)
    metropolis_accepted: np.ndarray = field(default=None)
    metropolis_attempted: np.ndarray = field(default=None)
    step_sizes: Optional[np.ndarray] = None

    @property
    def M(self):
        return self.theta.shape[0]

    @property
    def L(self):
        return self.b.size

    def exchange_rate(self):
        return np.divide(self.exchange_accepted, np.maximum(self.exchange_attempted, 1))

    def metropolis_rate(self):
        return np.divide(self.metropolis_accepted, np.maximum(self.metropolis_attempted, 1))

    def params(self, m, l) -> SpectralParams:
        return self.model.from_vector(self.theta[m, l])


def run_emc(model: ModelSpec, data: Dataset, ladder: ReplicaLadder, config: SamplerConfig,
            state: ChainState = None) -> SampleRecord:
    """Run the full schedule and return the retained samples.

    Deterministic for a fixed ``config.seed`` regardless of ``n_workers``.
    """
    config.validate()
    if data.N < 1:
        raise InvalidInputError("dataset is empty")
    L, P = ladder.L, model.n_params
    rngs, ex_rng = replica_rngs(config.seed, L)
    if state is None:
        state = init_state(model, data, ladder, rngs, config.initial)
    step = initial_step_sizes(model, L, config.step_fraction, config.step_sizes)
    scale_cap = np.tile([10.0 * s.scale for s in model.component_specs()], (L, 1))

    n_keep = len(range(config.burn_in, config.total, config.thin))
    mcs = np.empty(n_keep, dtype=np.int64)
    theta = np.empty((n_keep, L, P))
    err = np.empty((n_keep, L))
    logp = np.empty((n_keep, L))
    trace = np.empty((config.total, L))

    acc = np.zeros((L, P), dtype=np.int64)
    prop = np.zeros((L, P), dtype=np.int64)
    win_acc = np.zeros((L, P), dtype=np.int64)
    win_prop = np.zeros((L, P), dtype=np.int64)
    ex_acc = np.zeros(L - 1, dtype=np.int64)
    ex_prop = np.zeros(L - 1, dtype=np.int64)
    interval = config.interval()
    pool = ThreadPoolExecutor(config.n_workers) if config.n_workers > 1 else None
    k = 0
    try:
        for m in range(config.total):
            z, logu = _draws(rngs, config.sweeps_per_mcs, P)
            tuning = config.tune and m < config.burn_in
            if tuning:
                _run_sweeps(state, step, z, logu, win_acc, win_prop, pool, config.n_workers)
                if (m + 1) % interval == 0:
                    _tune(step, win_acc, win_prop, scale_cap)
                    win_acc[:] = 0
                    win_prop[:] = 0
            else:
                _run_sweeps(state, step, z, logu, acc, prop, pool, config.n_workers)
            exchange_step(state, parity=m % 2, rng=ex_rng, n_acc=ex_acc, n_prop=ex_prop)
            trace[m] = state.error()
            if m >= config.burn_in and (m - config.burn_in) % config.thin == 0:
                mcs[k] = m
                theta[k] = sort_peaks(state.theta[state.slot], model)
                err[k] = trace[m]
                logp[k] = state.log_prior()
                k += 1
            if config.progress and (m + 1) % max(1, config.total // 20) == 0:
                logger.info("MCS %d/%d  E_N(anchor)=%.6g", m + 1, config.total,
                            trace[m, min(ladder.L - 1, max(0, ladder.L - 3))])
    finally:
        if pool is not None:
            pool.shutdown()
    return SampleRecord(
        model=model, b=ladder.b.copy(), N=data.N, mcs=mcs, theta=theta, error=err,
        log_prior=logp, trace=trace, exchange_accepted=ex_acc, exchange_attempted=ex_prop,
        metropolis_accepted=acc, metropolis_attempted=prop, step_sizes=step,
    )


def autocorrelation(series, max_lag):
    """Normalized autocorrelation ``rho(t)`` for ``t = 0..max_lag``.

    Each lag's autocovariance is averaged over its ``n - t`` available pairs
    and divided by the lag-0 variance.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if not (1 <= max_lag < n):
        raise InvalidInputError(f"need 1 <= max_lag < len(series), got {max_lag} and {n}")
    x = x - x.mean()
    var = np.dot(x, x) / n
    if not var > 0:
        raise DegenerateInputError("series has zero variance")
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]
    acov /= n - np.arange(max_lag + 1)
    return acov / var
