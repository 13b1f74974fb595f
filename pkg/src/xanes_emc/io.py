"""Readers and writers for datasets, sample records and selection reports.

Every file is written to a temporary sibling first and moved into place.
"""

import csv
import json
import math
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ParseError
from .evidence import EvidenceTable, SelectionResult
from .model import Dataset, PeakConfig, SpectralParams, components, evaluate_model, parameter_names
from .priors import DistributionSpec, ModelSpec, PriorSet
from .sampler import SampleRecord
from .synthetic import TruthSpec


@contextmanager
def atomic_write(path, mode="w"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    return repr(float(x))


# --- datasets ---------------------------------------------------------------

def write_dataset(path, data: Dataset):
    with atomic_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["energy", "intensity"])
        for e, i in zip(data.energy, data.intensity):
            w.writerow([_fmt(e), _fmt(i)])


def parse_dataset(path) -> Dataset:
    """Read an ``energy,intensity`` CSV, keeping row order."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"no such file: {path}")
    energy, intensity = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InvalidInputError(f"{path} is empty")
        if [h.strip().lower() for h in header] != ["energy", "intensity"]:
            raise ParseError(f"expected header 'energy,intensity', got {','.join(header)!r}", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
            try:
                e, i = float(row[0]), float(row[1])
            except ValueError:
                raise ParseError(f"cannot parse {','.join(row)!r} as numbers", lineno) from None
            if not (math.isfinite(e) and math.isfinite(i)):
                raise ParseError("non-finite value", lineno)
            energy.append(e)
            intensity.append(i)
    if not energy:
        raise InvalidInputError(f"{path} has no data rows")
    return Dataset(np.array(energy), np.array(intensity))


# --- parameters and models --------------------------------------------------

def params_to_dict(p: SpectralParams):
    return {
        "step": dict(zip(("H", "E0", "Gamma", "A", "DeltaE", "omega"), p.step.as_tuple())),
        "below": [dict(zip(("F", "dE", "W"), q.as_tuple())) for q in p.below],
        "above": [dict(zip(("F", "dE", "W"), q.as_tuple())) for q in p.above],
    }


def params_from_dict(d) -> SpectralParams:
    from .model import Peak, StepParams
    s = d["step"]
    return SpectralParams(
        StepParams(s["H"], s["E0"], s["Gamma"], s["A"], s["DeltaE"], s["omega"]),
        [Peak(q["F"], q["dE"], q["W"]) for q in d.get("below", [])],
        [Peak(q["F"], q["dE"], q["W"]) for q in d.get("above", [])],
    )


def model_to_dict(model: ModelSpec):
    return {
        "regime": model.regime,
        "K1": model.peaks.K1,
        "K2": model.peaks.K2,
        "window": list(model.window),
        "priors": model.priors.to_dict(),
    }


def model_from_dict(d) -> ModelSpec:
    pri = d.get("priors")
    priors = None
    if pri is not None:
        priors = PriorSet(
            *({k: DistributionSpec.from_dict(v) for k, v in pri[g].items()}
              for g in ("step", "below", "above"))
        )
    return ModelSpec(d["regime"], PeakConfig(int(d["K1"]), int(d["K2"])), priors,
                     tuple(d.get("window", (530.0, 590.0))))


def write_json(path, obj):
    with atomic_write(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_truth(path, spec: TruthSpec):
    write_json(path, {
        "params": params_to_dict(spec.params),
        "b_true": spec.b_true,
        "e_min": spec.e_min,
        "e_max": spec.e_max,
        "n_points": spec.n_points,
        "seed": spec.seed,
    })


def read_truth(path) -> TruthSpec:
    d = read_json(path)
    return TruthSpec(params_from_dict(d["params"]), d["b_true"], d["e_min"], d["e_max"],
                     d["n_points"], d["seed"])


# --- sample records ---------------------------------------------------------

def _sidecar(path):
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_samples(path, record: SampleRecord):
    """Long-form CSV (``mcs, replica, E_N, <theta columns>``) plus a JSON sidecar.

    Replicas are numbered from 1. The conventional regime writes absolute
    peak positions (``peak.k.E``).
    """
    model = record.model
    names = parameter_names(model.peaks, conventional=model.conventional)
    with atomic_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["mcs", "replica", "E_N"] + names)
        for k in range(record.M):
            for l in range(record.L):
                w.writerow([int(record.mcs[k]), l + 1, _fmt(record.error[k, l])]
                           + [_fmt(v) for v in record.theta[k, l]])
    write_json(_sidecar(path), {
        "model": model_to_dict(model),
        "b": record.b.tolist(),
        "N": record.N,
        "exchange_accepted": record.exchange_accepted,
        "exchange_attempted": record.exchange_attempted,
        "metropolis_accepted": record.metropolis_accepted,
        "metropolis_attempted": record.metropolis_attempted,
    })


def read_samples(path) -> SampleRecord:
    from .priors import log_prior_vector
    meta = read_json(_sidecar(path))
    model = model_from_dict(meta["model"])
    b = np.array(meta["b"], dtype=float)
    L = b.size
    expected = ["mcs", "replica", "E_N"] + parameter_names(model.peaks, model.conventional)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise ParseError("sample file header does not match its metadata", 1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ParseError("non-numeric field", lineno) from None
    arr = np.array(rows).reshape(-1, L, len(expected)) if rows else np.zeros((0, L, len(expected)))
    theta = arr[:, :, 3:].copy()
    logp = np.array([[log_prior_vector(model, v) for v in row] for row in theta]).reshape(arr.shape[:2])

    def _arr(key, dtype=np.int64):
        v = meta.get(key)
        return None if v is None else np.array(v, dtype=dtype)

    return SampleRecord(
        model=model, b=b, N=int(meta["N"]), mcs=arr[:, 0, 0].astype(np.int64),
        theta=theta, error=arr[:, :, 2].copy(), log_prior=logp,
        exchange_accepted=_arr("exchange_accepted"), exchange_attempted=_arr("exchange_attempted"),
        metropolis_accepted=_arr("metropolis_accepted"), metropolis_attempted=_arr("metropolis_attempted"),
    )


# --- evidence and selection -------------------------------------------------

def write_evidence(path, table: EvidenceTable):
    F = table.free_energy
    with atomic_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["K1", "K2", "l", "b", "logZtilde", "F"])
        for i, (k1, k2) in enumerate(table.keys):
            for l in range(table.b.size):
                w.writerow([k1, k2, l + 1, _fmt(table.b[l]), _fmt(table.log_ztilde[i, l]), _fmt(F[i, l])])


def read_evidence(path, N, regime="proposed") -> EvidenceTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["K1", "K2", "l", "b", "logZtilde", "F"]:
            raise ParseError("unexpected evidence header", 1)
        rows = {}
        bvals = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                k1, k2, l = int(row[0]), int(row[1]), int(row[2])
                b, lz = float(row[3]), float(row[4])
            except (ValueError, IndexError):
                raise ParseError("malformed evidence row", lineno) from None
            rows.setdefault((k1, k2), {})[l] = lz
            bvals[l] = b
    keys = list(rows)
    L = max(bvals)
    b = np.array([bvals[l] for l in range(1, L + 1)])
    lz = np.array([[rows[k][l] for l in range(1, L + 1)] for k in keys])
    return EvidenceTable(keys, b, N, lz, regime)


def selection_to_dict(result: SelectionResult):
    conventional = result.regime == "conventional"
    chosen = {"K": result.key[0]} if conventional else {"K1": result.key[0], "K2": result.key[1]}
    post = result.posterior
    out = {
        "regime": result.regime,
        "chosen": chosen,
        "rung": result.l + 1,
        "b": result.b,
        "map_score": None if not math.isfinite(result.map_score) else result.map_score,
        "map_params": None if result.map_params is None else params_to_dict(result.map_params),
        "p_model": [
            dict(({"K": k[0]} if conventional else {"K1": k[0], "K2": k[1]}), p=float(p))
            for k, p in zip(post.keys, post.prob)
        ],
        "p_K": {str(k): v for k, v in result.p_k.items()},
    }
    if not conventional:
        out["p_K1"] = {str(k): v for k, v in result.p_k1.items()}
        out["p_K2"] = {str(k): v for k, v in result.p_k2.items()}
    return out


def write_selection(path, result: SelectionResult):
    write_json(path, selection_to_dict(result))


def write_posterior_table(path, result: SelectionResult):
    """Joint ``p(K, b_l | D)`` density in long form (for heat-map plots)."""
    post = result.posterior
    with atomic_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["K1", "K2", "l", "b", "density"])
        for i, (k1, k2) in enumerate(post.keys):
            for j, b in enumerate(post.b):
                w.writerow([k1, k2, j + 2, _fmt(b), _fmt(post.joint[i, j])])


# --- plot data ----------------------------------------------------------------

def write_fit_curve(path, params: SpectralParams, data: Dataset):
    comps = components(params, data.energy)
    names = list(comps)
    with atomic_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["energy", "intensity", "model"] + names)
        model = evaluate_model(params, data.energy)
        for i in range(data.N):
            w.writerow([_fmt(data.energy[i]), _fmt(data.intensity[i]), _fmt(model[i])]
                       + [_fmt(comps[n][i]) for n in names])


def write_trace(path, trace, mcs=None):
    """``E_N`` per MCS for every replica: columns ``mcs, E_N.1 .. E_N.L``."""
    trace = np.asarray(trace)
    mcs = np.arange(trace.shape[0]) if mcs is None else mcs
    with atomic_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["mcs"] + [f"E_N.{l + 1}" for l in range(trace.shape[1])])
        for m, row in zip(mcs, trace):
            w.writerow([int(m)] + [_fmt(v) for v in row])


def read_table(path):
    """Generic numeric CSV reader: returns ``(header, array)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return header, np.array(rows)


def write_autocorrelation(path, lags, columns):
    """``columns`` maps a column name to the autocorrelation values per lag."""
    names = list(columns)
    with atomic_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["lag"] + names)
        for i, t in enumerate(lags):
            w.writerow([int(t)] + [_fmt(columns[n][i]) for n in names])
