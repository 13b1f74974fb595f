"""Free energies from replica samples, model/noise selection and MAP fits.

The importance-sampling chain along the ladder gives

    log Zt(b_l) = sum_{l' < l} log < exp(-N (b_{l'+1} - b_{l'}) E_N) >_{b_{l'}}

and the Bayes free energy ``F(b) = -(N/2) log(b / 2 pi) - log Zt(b)``.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DegenerateInputError, DomainError, InsufficientSamplesError
from .model import PeakConfig, SpectralParams
from .priors import ModelSpec


def estimate_log_ztilde(record, b=None, N=None):
    """``log Zt`` at every rung from post-burn-in misfits.

    ``record`` is a :class:`~xanes_emc.sampler.SampleRecord` or an array of
    ``E_N`` with shape ``(M, L)`` (then ``b`` and ``N`` are required).
    """
    if hasattr(record, "error"):
        err, b, N = record.error, record.b if b is None else b, record.N if N is None else N
    else:
        err = record
    err = np.asarray(err, dtype=float)
    b = np.asarray(b, dtype=float)
    if err.ndim != 2 or err.shape[1] != b.size:
        raise InsufficientSamplesError(f"misfit array shape {err.shape} does not match {b.size} rungs")
    if err.shape[0] == 0:
        raise InsufficientSamplesError("no retained samples")
    M = err.shape[0]
    db = np.diff(b)
    # log-mean-exp per rung, shifted by the max for stability
    steps = logsumexp(-N * db[None, :] * err[:, :-1], axis=0) - math.log(M)
    return np.concatenate([[0.0], np.cumsum(steps)])


def free_energy(log_ztilde, b_l, N):
    """Bayes free energy at precision ``b_l > 0``."""
    if not b_l > 0:
        raise DomainError("free energy is only defined for b > 0")
    return -0.5 * N * math.log(b_l / (2.0 * math.pi)) - log_ztilde


def free_energy_profile(log_ztilde, b, N):
    """Vectorised :func:`free_energy`; NaN where ``b == 0``."""
    b = np.asarray(b, dtype=float)
    out = np.full(b.shape, np.nan)
    pos = b > 0
    out[pos] = -0.5 * N * np.log(b[pos] / (2.0 * np.pi)) - np.asarray(log_ztilde)[pos]
    return out


def map_estimate(record, model: Optional[ModelSpec] = None, l=None):
    """Recorded sample at rung ``l`` maximising ``-N b_l E_N + log p(theta)``.

    Returns ``(vector, score, m)`` with the index ``m`` of the winning sample.
    """
    if l is None:
        raise ConfigError("rung index required")
    if record.M == 0:
        raise InsufficientSamplesError("no retained samples")
    score = -record.N * record.b[l] * record.error[:, l] + record.log_prior[:, l]
    score = np.where(np.isnan(score), -np.inf, score)
    m = int(np.argmax(score))
    return record.theta[m, l].copy(), float(score[m]), m


@dataclass
class ModelEvidence:
    """Evidence summary of one peak configuration."""

    key: Tuple[int, int]
    b: np.ndarray
    N: int
    log_ztilde: np.ndarray
    n_samples: int
    # best recorded sample and its score at every rung, for MAP reporting
    best_theta: Optional[np.ndarray] = None
    best_score: Optional[np.ndarray] = None

    @property
    def free_energy(self):
        return free_energy_profile(self.log_ztilde, self.b, self.N)


def model_evidence(record, key=None) -> ModelEvidence:
    if key is None:
        key = (record.model.peaks.K1, record.model.peaks.K2)
    score = -record.N * record.b[None, :] * record.error + record.log_prior
    score = np.where(np.isnan(score), -np.inf, score)
    best = np.argmax(score, axis=0)
    idx = np.arange(record.L)
    return ModelEvidence(
        key=tuple(int(k) for k in key), b=record.b.copy(), N=record.N,
        log_ztilde=estimate_log_ztilde(record), n_samples=record.M,
        best_theta=record.theta[best, idx].copy(), best_score=score[best, idx],
    )


@dataclass
class EvidenceTable:
    """Free energies on a grid of peak configurations sharing one ladder.

    ``keys[i]`` is ``(K1, K2)``; the conventional regime uses ``(K, 0)``.
    """

    keys: List[Tuple[int, int]]
    b: np.ndarray
    N: int
    log_ztilde: np.ndarray
    regime: str = "proposed"
    n_samples: Optional[np.ndarray] = None
    entries: Optional[List[ModelEvidence]] = field(default=None, repr=False)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        self.log_ztilde = np.atleast_2d(np.asarray(self.log_ztilde, dtype=float))
        self.keys = [tuple(int(v) for v in k) for k in self.keys]
        if self.log_ztilde.shape != (len(self.keys), self.b.size):
            raise ConfigError(f"log_ztilde shape {self.log_ztilde.shape} does not match "
                              f"{len(self.keys)} models x {self.b.size} rungs")

    @classmethod
    def from_entries(cls, entries: Sequence[ModelEvidence], regime="proposed"):
        if not entries:
            raise ConfigError("empty model grid")
        b = entries[0].b
        for e in entries:
            if e.b.shape != b.shape or not np.allclose(e.b, b, rtol=0, atol=0):
                raise ConfigError("all models must share one ladder")
        return cls(
            keys=[e.key for e in entries], b=b, N=entries[0].N,
            log_ztilde=np.array([e.log_ztilde for e in entries]), regime=regime,
            n_samples=np.array([e.n_samples for e in entries]), entries=list(entries),
        )

    @property
    def free_energy(self):
        return np.array([free_energy_profile(lz, self.b, self.N) for lz in self.log_ztilde])

    def index(self, key):
        return self.keys.index(tuple(key))


def select_model(table: EvidenceTable):
    """``(key, l)`` minimising the free energy over models and rungs ``l >= 1``.

    Exact ties go to the smaller total peak count, then the smaller rung.
    """
    if not table.keys or table.b.size < 2:
        raise ConfigError("need at least one model and one rung with b > 0")
    F = table.free_energy
    best = None
    for i, key in enumerate(table.keys):
        for l in range(1, table.b.size):
            f = F[i, l]
            if np.isnan(f):
                continue
            cand = (f, sum(key), l, key)
            if best is None or cand[:3] < best[:3]:
                best = cand
    if best is None:
        raise DegenerateInputError("no finite free energies")
    return best[3], best[2]


def trapezoid_weights(b):
    """Quadrature weights for a function sampled at the points ``b``."""
    b = np.asarray(b, dtype=float)
    if b.size == 1:
        return np.ones(1)
    w = np.zeros(b.size)
    d = np.diff(b)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


@dataclass
class PeakPosterior:
    """Posterior over peak configurations.

    ``joint`` is the density ``p(K, b_l | D)`` on rungs ``l >= 1`` (shape
    ``(n_models, L - 1)``); ``prob`` is ``p(K | D)`` after integrating over b.
    """

    keys: List[Tuple[int, int]]
    b: np.ndarray
    joint: np.ndarray
    prob: np.ndarray

    def as_dict(self):
        return {k: float(p) for k, p in zip(self.keys, self.prob)}


def peak_count_posterior(table: EvidenceTable, model_prior=None, b_prior=None) -> PeakPosterior:
    """Hierarchical posterior ``p(K, b | D) ~ exp(-F(K, b)) p(K) p(b)``.

    Priors default to uniform. The b-integral is a trapezoid sum over the
    rungs with ``b > 0``.
    """
    F = table.free_energy[:, 1:]
    b = table.b[1:]
    if F.size == 0 or not np.any(np.isfinite(F)):
        raise DegenerateInputError("no finite free energies")
    logw = -F
    if model_prior is not None:
        with np.errstate(divide="ignore"):
            logw = logw + np.log(np.asarray(model_prior, dtype=float))[:, None]
    if b_prior is not None:
        with np.errstate(divide="ignore"):
            logw = logw + np.log(np.asarray(b_prior, dtype=float))[None, :]
    logw = np.where(np.isfinite(logw), logw, -np.inf)
    w = trapezoid_weights(b)
    with np.errstate(divide="ignore"):
        log_mass = logw + np.log(w)[None, :]
    log_norm = logsumexp(log_mass)
    joint = np.exp(logw - log_norm)
    prob = np.exp(logsumexp(log_mass, axis=1) - log_norm)
    prob = prob / prob.sum()
    return PeakPosterior(list(table.keys), b.copy(), joint, prob)


def marginals(joint):
    """Marginals of ``p(K1, K2 | D)``.

    ``joint`` is either a mapping ``{(K1, K2): p}`` or a 2-D array indexed by
    the counts. Returns ``(p_K1, p_K2, p_K)`` in the same flavour (dicts keyed
    by count, or arrays indexed by count).
    """
    if isinstance(joint, dict):
        p1, p2, pk = {}, {}, {}
        for (k1, k2), p in joint.items():
            p1[k1] = p1.get(k1, 0.0) + p
            p2[k2] = p2.get(k2, 0.0) + p
            pk[k1 + k2] = pk.get(k1 + k2, 0.0) + p
        return (dict(sorted(p1.items())), dict(sorted(p2.items())), dict(sorted(pk.items())))
    joint = np.asarray(joint, dtype=float)
    n1, n2 = joint.shape
    pk = np.zeros(n1 + n2 - 1)
    for k1 in range(n1):
        for k2 in range(n2):
            pk[k1 + k2] += joint[k1, k2]
    return joint.sum(axis=1), joint.sum(axis=0), pk


@dataclass
class SelectionResult:
    regime: str
    key: Tuple[int, int]
    l: int
    b: float
    map_params: Optional[SpectralParams]
    map_score: float
    posterior: PeakPosterior
    p_k1: Dict[int, float]
    p_k2: Dict[int, float]
    p_k: Dict[int, float]

    @property
    def peaks(self):
        return PeakConfig(*self.key)


def summarize(table: EvidenceTable, model_for_key=None, model_prior=None, b_prior=None) -> SelectionResult:
    """Empirical-Bayes choice, MAP at the chosen rung and peak-count posteriors.

    ``model_for_key(key) -> ModelSpec`` turns the stored best vector into
    parameters; without it (or without stored samples) the MAP is omitted.
    """
    key, l = select_model(table)
    post = peak_count_posterior(table, model_prior, b_prior)
    p1, p2, pk = marginals(post.as_dict())
    map_params, score = None, math.nan
    if table.entries is not None and model_for_key is not None:
        entry = table.entries[table.index(key)]
        if entry.best_theta is not None:
            map_params = model_for_key(key).from_vector(entry.best_theta[l])
            score = float(entry.best_score[l])
    return SelectionResult(table.regime, key, l, float(table.b[l]), map_params, score,
                           post, p1, p2, pk)
