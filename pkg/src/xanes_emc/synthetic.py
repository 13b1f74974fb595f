"""Ground truth and noisy synthetic spectra for the O-K edge test problem."""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvalidInputError
from .model import Dataset, Peak, SpectralParams, StepParams, evaluate_model
from .priors import TABLE_PROPOSED_ABOVE, TABLE_PROPOSED_BELOW

TRUTH_SEED = 20200
NOISE_SEED = 0
MIN_SEPARATION = 1.5


@dataclass(frozen=True)
class TruthSpec:
    params: SpectralParams
    b_true: float = 3000.0
    e_min: float = 530.0
    e_max: float = 590.0
    n_points: int = 703
    seed: int = NOISE_SEED

    def __post_init__(self):
        if not self.b_true > 0:
            raise InvalidInputError("b_true must be positive")
        if self.n_points < 1:
            raise InvalidInputError("need at least one grid point")
        if not self.e_min < self.e_max:
            raise InvalidInputError("empty energy window")

    def energies(self):
        return np.linspace(self.e_min, self.e_max, self.n_points)

    def with_seed(self, seed):
        return TruthSpec(self.params, self.b_true, self.e_min, self.e_max, self.n_points, seed)


def _draw_population(rng, roles, count, lo, hi):
    return [
        Peak(float(roles["F"].sample(rng)), float(rng.uniform(lo, hi)), float(roles["W"].sample(rng)))
        for _ in range(count)
    ]


def draw_truth(seed=TRUTH_SEED, K1=5, K2=5, e_min=530.0, e_max=590.0, e0=543.1,
               step=(0.85, 543.1, 1.0, 1.2, 0.5, 3.0), min_separation=MIN_SEPARATION,
               max_tries=10000) -> SpectralParams:
    """Draw peak heights, widths and offsets from the proposed-regime priors.

    Offsets are confined to the data window on the correct side of the edge.
    Draws are repeated until all peak centres and the white-line centre are
    at least ``min_separation`` apart.
    """
    rng = np.random.default_rng(seed)
    step = StepParams(step[0], e0, *step[2:])
    below_lo = max(TABLE_PROPOSED_BELOW["pos"].a, e_min - e0)
    above_hi = min(TABLE_PROPOSED_ABOVE["pos"].b, e_max - e0)
    for _ in range(max_tries):
        below = _draw_population(rng, TABLE_PROPOSED_BELOW, K1, below_lo, 0.0)
        above = _draw_population(rng, TABLE_PROPOSED_ABOVE, K2, 0.0, above_hi)
        centers = [step.DeltaE] + [p.dE for p in below + above]
        if all(abs(a - b) >= min_separation for a, b in itertools.combinations(centers, 2)):
            return SpectralParams(step, below, above).sorted_peaks()
    raise ConfigError("could not place peaks with the requested separation")


def default_truth() -> TruthSpec:
    """(K1, K2) = (5, 5), b = 3000, N = 703 on [530, 590] eV, E0 = 543.1 eV."""
    return TruthSpec(draw_truth())


def synthesize(spec: TruthSpec, noise=True) -> Dataset:
    """``I_i = f(E_i) + eps_i`` with ``eps_i ~ N(0, 1/b_true)``."""
    E = spec.energies()
    clean = evaluate_model(spec.params, E)
    if not noise:
        return Dataset(E, clean)
    rng = np.random.default_rng(spec.seed)
    return Dataset(E, clean + rng.normal(0.0, 1.0 / math.sqrt(spec.b_true), E.size))
