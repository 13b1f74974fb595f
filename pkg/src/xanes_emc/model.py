"""Spectral regression function: arctan edge, white line and Gaussian peaks.

Peak positions are held as offsets ``dE`` from the edge position ``E0``.
Heights are in intensity units, positions and widths in the energy units of
the data (eV in every shipped configuration; no conversion is performed).
Widths ``W`` and ``omega`` are full widths at half maximum.
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .errors import InvalidInputError

FOUR_LN2 = 4.0 * np.log(2.0)

STEP_FIELDS = ("H", "E0", "Gamma", "A", "DeltaE", "omega")
PEAK_FIELDS = ("F", "dE", "W")
N_STEP = len(STEP_FIELDS)


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise InvalidInputError(f"non-finite input: {v!r}")


@dataclass(frozen=True)
class StepParams:
    H: float
    E0: float
    Gamma: float
    A: float
    DeltaE: float
    omega: float

    def __post_init__(self):
        _check_finite(*self.as_tuple())

    def as_tuple(self):
        return (self.H, self.E0, self.Gamma, self.A, self.DeltaE, self.omega)

    def is_valid(self):
        return self.Gamma > 0 and self.omega > 0 and self.H >= 0 and self.A >= 0


@dataclass(frozen=True)
class Peak:
    F: float
    dE: float
    W: float

    def __post_init__(self):
        _check_finite(self.F, self.dE, self.W)

    def as_tuple(self):
        return (self.F, self.dE, self.W)


@dataclass(frozen=True)
class PeakConfig:
    """Peak counts below (K1) and above (K2) the edge.

    The conventional regime only looks at ``K``; by convention its peaks are
    all stored in the ``below`` list, i.e. ``PeakConfig(K, 0)``.
    """

    K1: int
    K2: int

    def __post_init__(self):
        if int(self.K1) != self.K1 or int(self.K2) != self.K2 or self.K1 < 0 or self.K2 < 0:
            raise InvalidInputError(f"peak counts must be non-negative integers, got {self}")

    @property
    def K(self):
        return self.K1 + self.K2

    @classmethod
    def conventional(cls, K):
        return cls(int(K), 0)


@dataclass(frozen=True)
class SpectralParams:
    step: StepParams
    below: List[Peak] = field(default_factory=list)
    above: List[Peak] = field(default_factory=list)

    @property
    def peaks(self):
        return list(self.below) + list(self.above)

    @property
    def config(self):
        return PeakConfig(len(self.below), len(self.above))

    def to_vector(self, absolute_positions=False):
        """Flatten to ``[H, E0, Gamma, A, DeltaE, omega, F_1, pos_1, W_1, ...]``.

        With ``absolute_positions`` the peak position slot holds ``E0 + dE``
        (the conventional regime's sampling coordinate).
        """
        out = list(self.step.as_tuple())
        for p in self.peaks:
            pos = self.step.E0 + p.dE if absolute_positions else p.dE
            out.extend((p.F, pos, p.W))
        return np.array(out, dtype=float)

    @classmethod
    def from_vector(cls, vec, config, absolute_positions=False):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (N_STEP + 3 * config.K,):
            raise InvalidInputError(
                f"vector of length {vec.size} does not match {config} "
                f"(expected {N_STEP + 3 * config.K})"
            )
        step = StepParams(*(float(v) for v in vec[:N_STEP]))
        peaks = []
        for k in range(config.K):
            F, pos, W = vec[N_STEP + 3 * k: N_STEP + 3 * k + 3]
            dE = pos - step.E0 if absolute_positions else pos
            peaks.append(Peak(float(F), float(dE), float(W)))
        return cls(step, peaks[:config.K1], peaks[config.K1:])

    def sorted_peaks(self):
        """Copy with each population ordered by position (label-switching fix)."""
        return SpectralParams(
            self.step,
            sorted(self.below, key=lambda p: p.dE),
            sorted(self.above, key=lambda p: p.dE),
        )


@dataclass(frozen=True)
class Dataset:
    energy: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        e = np.ascontiguousarray(self.energy, dtype=float).ravel()
        i = np.ascontiguousarray(self.intensity, dtype=float).ravel()
        if e.size == 0:
            raise InvalidInputError("dataset is empty")
        if e.shape != i.shape:
            raise InvalidInputError("energy and intensity lengths differ")
        _check_finite(e, i)
        object.__setattr__(self, "energy", e)
        object.__setattr__(self, "intensity", i)

    @property
    def N(self):
        return self.energy.size

    def __len__(self):
        return self.N


def gaussian(E, height, center, fwhm):
    """Gaussian with the given full width at half maximum."""
    x = (np.asarray(E, dtype=float) - center) / fwhm
    return height * np.exp(-FOUR_LN2 * x * x)


def evaluate_step(p: StepParams, E):
    """Arctan absorption edge plus white-line Gaussian."""
    _check_finite(E)
    E = np.asarray(E, dtype=float)
    edge = p.H * (0.5 + np.arctan((E - p.E0) / (0.5 * p.Gamma)) / np.pi)
    return edge + gaussian(E, p.A, p.E0 + p.DeltaE, p.omega)


def evaluate_peaks(params: SpectralParams, E):
    _check_finite(E)
    E = np.asarray(E, dtype=float)
    total = np.zeros_like(E)
    for p in params.peaks:
        total = total + gaussian(E, p.F, params.step.E0 + p.dE, p.W)
    return total


def evaluate_model(params: SpectralParams, E):
    return evaluate_step(params.step, E) + evaluate_peaks(params, E)


def components(params: SpectralParams, E):
    """Per-component curves keyed by name, for plotting overlays."""
    E = np.asarray(E, dtype=float)
    s = params.step
    out = {
        "edge": s.H * (0.5 + np.arctan((E - s.E0) / (0.5 * s.Gamma)) / np.pi),
        "white_line": gaussian(E, s.A, s.E0 + s.DeltaE, s.omega),
    }
    for k, p in enumerate(params.below):
        out[f"below.{k}"] = gaussian(E, p.F, s.E0 + p.dE, p.W)
    for k, p in enumerate(params.above):
        out[f"above.{k}"] = gaussian(E, p.F, s.E0 + p.dE, p.W)
    return out


def error_function(params: SpectralParams, data: Dataset):
    """Mean-square misfit ``sum((I - f(E))**2) / (2N)``."""
    if data.N < 1:
        raise InvalidInputError("dataset is empty")
    r = data.intensity - evaluate_model(params, data.energy)
    return float(np.dot(r, r) / (2.0 * data.N))


def parameter_names(config: PeakConfig, conventional=False) -> List[str]:
    """Column names matching :meth:`SpectralParams.to_vector` order."""
    names = [f"step.{n}" for n in STEP_FIELDS]
    if conventional:
        for k in range(config.K):
            names += [f"peak.{k}.F", f"peak.{k}.E", f"peak.{k}.W"]
        return names
    for pop, count in (("below", config.K1), ("above", config.K2)):
        for k in range(count):
            names += [f"{pop}.{k}.{n}" for n in PEAK_FIELDS]
    return names


def make_params(step: Sequence[float], below=(), above=()) -> SpectralParams:
    """Convenience constructor from plain tuples."""
    return SpectralParams(
        StepParams(*step),
        [Peak(*p) for p in below],
        [Peak(*p) for p in above],
    )
