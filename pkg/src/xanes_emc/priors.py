"""Prior families, default hyperparameters and prior evaluation/sampling.

Two regimes share the step/white-line block:

* ``proposed``: below-edge and above-edge peaks have separate priors, and
  peak positions are offsets from ``E0`` with one-sided uniform supports.
* ``conventional``: one undifferentiated peak population whose absolute
  positions are uniform on the energy window, independent of ``E0``.
"""

import math
from dataclasses import dataclass, replace
from typing import Dict, Tuple

import numpy as np
from scipy import special, stats

from .errors import ConfigError, InvalidInputError
from .model import N_STEP, STEP_FIELDS, PeakConfig, SpectralParams

UNIFORM, NORMAL, GAMMA = "uniform", "normal", "gamma"
KIND_CODES = {UNIFORM: 0, NORMAL: 1, GAMMA: 2}

PROPOSED, CONVENTIONAL = "proposed", "conventional"
REGIMES = (PROPOSED, CONVENTIONAL)


@dataclass(frozen=True)
class DistributionSpec:
    """One-dimensional prior.

    ``(a, b)`` is ``(alpha, beta)`` for uniform, ``(mu, sigma)`` for normal and
    ``(kappa, theta)`` (shape, scale) for gamma.
    """

    kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ConfigError(f"unknown distribution kind {self.kind!r}")
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ConfigError(f"non-finite hyperparameters in {self}")
        if self.kind == UNIFORM and not self.a < self.b:
            raise ConfigError(f"uniform needs alpha < beta, got {self}")
        if self.kind in (NORMAL, GAMMA) and not (self.b > 0 and (self.kind == NORMAL or self.a > 0)):
            raise ConfigError(f"invalid {self.kind} hyperparameters {self}")

    @classmethod
    def uniform(cls, alpha, beta):
        return cls(UNIFORM, float(alpha), float(beta))

    @classmethod
    def normal(cls, mu, sigma):
        return cls(NORMAL, float(mu), float(sigma))

    @classmethod
    def gamma(cls, kappa, theta):
        return cls(GAMMA, float(kappa), float(theta))

    @property
    def support(self) -> Tuple[float, float]:
        if self.kind == UNIFORM:
            return (self.a, self.b)
        if self.kind == GAMMA:
            return (0.0, math.inf)
        return (-math.inf, math.inf)

    @property
    def scale(self):
        """Characteristic width, used to size random-walk proposals."""
        if self.kind == UNIFORM:
            return self.b - self.a
        if self.kind == NORMAL:
            return self.b
        return self.b * math.sqrt(self.a)

    @property
    def mean(self):
        if self.kind == UNIFORM:
            return 0.5 * (self.a + self.b)
        if self.kind == NORMAL:
            return self.a
        return self.a * self.b

    def frozen(self):
        """Equivalent frozen ``scipy.stats`` distribution (used for CDFs)."""
        if self.kind == UNIFORM:
            return stats.uniform(loc=self.a, scale=self.b - self.a)
        if self.kind == NORMAL:
            return stats.norm(loc=self.a, scale=self.b)
        return stats.gamma(self.a, scale=self.b)

    def sample(self, rng, size=None):
        if self.kind == UNIFORM:
            return rng.uniform(self.a, self.b, size)
        if self.kind == NORMAL:
            return rng.normal(self.a, self.b, size)
        return rng.gamma(self.a, self.b, size)

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, d):
        return cls(str(d["kind"]), float(d["a"]), float(d["b"]))


def log_density(spec: DistributionSpec, x):
    """Natural-log density; ``-inf`` outside the support. Accepts arrays."""
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise InvalidInputError("NaN passed to log_density")
    if spec.kind == UNIFORM:
        inside = (x >= spec.a) & (x <= spec.b)
        out = np.where(inside, -math.log(spec.b - spec.a), -np.inf)
    elif spec.kind == NORMAL:
        mu, sigma = spec.a, spec.b
        out = -0.5 * math.log(2.0 * math.pi * sigma * sigma) - 0.5 * ((x - mu) / sigma) ** 2
    else:
        kappa, theta = spec.a, spec.b
        with np.errstate(divide="ignore", invalid="ignore"):
            val = ((kappa - 1.0) * np.log(x) - x / theta
                   - special.gammaln(kappa) - kappa * math.log(theta))
        out = np.where(x > 0, val, -np.inf)
    return float(out) if out.ndim == 0 else out


def offset_bounds(e_min, e_max, mu_e0, sigma_e0):
    """Supports of the below/above-edge offset priors for a data window."""
    return (e_min - mu_e0 - sigma_e0, 0.0), (0.0, e_max - mu_e0 + sigma_e0)


@dataclass(frozen=True)
class PriorSet:
    """Priors for the step block and for each peak role.

    ``below`` and ``above`` map ``"F"``, ``"pos"``, ``"W"`` to specs. In the
    conventional regime both names refer to the same mapping and ``pos`` is
    the absolute peak position.
    """

    step: Dict[str, DistributionSpec]
    below: Dict[str, DistributionSpec]
    above: Dict[str, DistributionSpec]

    def __post_init__(self):
        missing = set(STEP_FIELDS) - set(self.step)
        if missing:
            raise ConfigError(f"step priors missing {sorted(missing)}")
        for role in (self.below, self.above):
            if set(role) != {"F", "pos", "W"}:
                raise ConfigError(f"peak role needs exactly F, pos, W; got {sorted(role)}")

    def with_overrides(self, overrides):
        """Return a copy with entries replaced, keys like ``"step.H"`` or ``"above.W"``."""
        step, below, above = dict(self.step), dict(self.below), dict(self.above)
        tables = {"step": step, "below": below, "above": above, "peak": None}
        for key, spec in overrides.items():
            group, _, name = key.partition(".")
            if group not in tables:
                raise ConfigError(f"unknown prior group in {key!r}")
            valid = STEP_FIELDS if group == "step" else ("F", "pos", "W")
            if name not in valid:
                raise ConfigError(f"unknown parameter in {key!r}; expected one of {list(valid)}")
            if not isinstance(spec, DistributionSpec):
                spec = DistributionSpec.from_dict(spec)
            if group == "peak":
                below[name] = spec
                above[name] = spec
            else:
                tables[group][name] = spec
        return PriorSet(step, below, above)

    def to_dict(self):
        return {
            group: {k: v.to_dict() for k, v in getattr(self, group).items()}
            for group in ("step", "below", "above")
        }


TABLE_STEP = {
    "H": DistributionSpec.uniform(0.8, 0.9),
    "E0": DistributionSpec.normal(543.1, 2.0),
    "Gamma": DistributionSpec.uniform(0.5, 1.4),
    "A": DistributionSpec.gamma(2.6, 0.6),
    "DeltaE": DistributionSpec.normal(0.0, 2.0),
    "omega": DistributionSpec.uniform(2.0, 4.0),
}
TABLE_CONVENTIONAL_PEAK = {
    "F": DistributionSpec.uniform(0.0, 1.4),
    "pos": DistributionSpec.uniform(530.0, 590.0),
    "W": DistributionSpec.uniform(0.5, 15.0),
}
TABLE_PROPOSED_BELOW = {
    "F": DistributionSpec.gamma(2.6, 0.6),
    "pos": DistributionSpec.uniform(-15.1, 0.0),
    "W": DistributionSpec.gamma(3.0, 1.0),
}
TABLE_PROPOSED_ABOVE = {
    "F": DistributionSpec.gamma(4.0, 0.1),
    "pos": DistributionSpec.uniform(0.0, 48.9),
    "W": DistributionSpec.gamma(11.0, 0.8),
}
DEFAULT_WINDOW = (530.0, 590.0)


def default_hyperparams(regime) -> PriorSet:
    """Reference hyperparameters for the O-K edge synthetic problem."""
    if regime == PROPOSED:
        return PriorSet(dict(TABLE_STEP), dict(TABLE_PROPOSED_BELOW), dict(TABLE_PROPOSED_ABOVE))
    if regime == CONVENTIONAL:
        peak = dict(TABLE_CONVENTIONAL_PEAK)
        return PriorSet(dict(TABLE_STEP), peak, peak)
    raise ConfigError(f"unknown regime {regime!r}")


@dataclass(frozen=True)
class ModelSpec:
    regime: str
    peaks: PeakConfig
    priors: PriorSet = None
    window: Tuple[float, float] = DEFAULT_WINDOW

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.priors is None:
            object.__setattr__(self, "priors", default_hyperparams(self.regime))
        if self.regime == CONVENTIONAL and self.peaks.K2 != 0:
            # single population: normalize to (K, 0)
            object.__setattr__(self, "peaks", PeakConfig.conventional(self.peaks.K))
        if not self.window[0] < self.window[1]:
            raise ConfigError(f"empty energy window {self.window}")

    @property
    def conventional(self):
        return self.regime == CONVENTIONAL

    @property
    def n_params(self):
        return N_STEP + 3 * self.peaks.K

    def with_peaks(self, peaks: PeakConfig):
        return replace(self, peaks=peaks)

    def component_specs(self):
        """Prior of every slot of the flat parameter vector, in order."""
        specs = [self.priors.step[n] for n in STEP_FIELDS]
        for k in range(self.peaks.K):
            role = self.priors.below if k < self.peaks.K1 else self.priors.above
            specs += [role["F"], role["pos"], role["W"]]
        return specs

    def to_vector(self, params: SpectralParams):
        if params.config != self.peaks:
            raise InvalidInputError(f"parameters have {params.config}, model expects {self.peaks}")
        return params.to_vector(absolute_positions=self.conventional)

    def from_vector(self, vec):
        return SpectralParams.from_vector(vec, self.peaks, absolute_positions=self.conventional)


def log_prior_vector(model: ModelSpec, vec):
    vec = np.asarray(vec, dtype=float)
    specs = model.component_specs()
    if vec.shape != (len(specs),):
        raise InvalidInputError(f"expected {len(specs)} parameters, got shape {vec.shape}")
    total = 0.0
    for spec, x in zip(specs, vec):
        total += log_density(spec, x)
        if total == -math.inf:
            break
    return total


def log_prior(model: ModelSpec, params: SpectralParams):
    """Sum of per-parameter log densities (``-inf`` off support)."""
    return log_prior_vector(model, model.to_vector(params))


def sample_prior_vector(model: ModelSpec, rng):
    return np.array([spec.sample(rng) for spec in model.component_specs()])


def sample_prior(model: ModelSpec, rng) -> SpectralParams:
    """Independent draw of every component from its prior."""
    return model.from_vector(sample_prior_vector(model, rng))


def kernel_tables(model: ModelSpec):
    """``(kind, a, b, lognorm)`` arrays for the compiled sampler."""
    specs = model.component_specs()
    kind = np.array([KIND_CODES[s.kind] for s in specs], dtype=np.int64)
    a = np.array([s.a for s in specs])
    b = np.array([s.b for s in specs])
    lognorm = np.empty(len(specs))
    for i, s in enumerate(specs):
        if s.kind == UNIFORM:
            lognorm[i] = -math.log(s.b - s.a)
        elif s.kind == NORMAL:
            lognorm[i] = -0.5 * math.log(2.0 * math.pi * s.b * s.b)
        else:
            lognorm[i] = -math.lgamma(s.a) - s.a * math.log(s.b)
    return kind, a, b, lognorm

