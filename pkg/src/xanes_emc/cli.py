"""Batch command-line front end: ``generate``, ``fit``, ``select``, ``diag``.

Settings come from a JSON run file (``--config``) and flags; flags win.
Run-file keys::

    {
      "model": "proposed" | "conventional",
      "k1": 5, "k2": 5, "k": 10,                 # fit / diag
      "grid": {"k1": [0, 8], "k2": [0, 8]},      # select (inclusive ranges)
      "grid": {"k": [1, 16]},
      "ladder": {"L": 92, "xi": 1.18, "anchor": 3000},
      "sampler": {"total": 60000, "burn_in": 30000, "sweeps_per_mcs": 50,
                  "thin": 1, "n_workers": 1, "step_fraction": 0.05, "tune": true},
      "priors": {"step.H": {"kind": "uniform", "a": 0.8, "b": 0.9}, ...},
      "window": [530, 590],
      "data": "data.csv",
      "samples": "samples.csv",                  # diag input (optional)
      "out_dir": "run",
      "seed": 0,
      "truth": {"seed": 20200, "b_true": 3000, "n_points": 703}
    }
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import io
from .errors import ConfigError, XanesEmcError
from .evidence import EvidenceTable, map_estimate, model_evidence, summarize
from .model import PeakConfig
from .priors import CONVENTIONAL, PROPOSED, ModelSpec, default_hyperparams
from .sampler import (CONVENTIONAL_LADDER, PROPOSED_LADDER, SamplerConfig, autocorrelation,
                      build_ladder, run_emc)
from .synthetic import TRUTH_SEED, TruthSpec, draw_truth, synthesize

logger = logging.getLogger("xanes_emc")

DEFAULT_GRID = {PROPOSED: {"k1": [0, 8], "k2": [0, 8]}, CONVENTIONAL: {"k": [1, 16]}}
SAMPLER_KEYS = ("total", "burn_in", "sweeps_per_mcs", "thin", "n_workers", "step_fraction",
                "tune", "tune_interval")


@dataclass
class RunConfig:
    regime: str
    peaks: PeakConfig
    grid: List[Tuple[int, int]]
    ladder: Tuple[int, float, float]
    sampler: SamplerConfig
    priors: dict = field(default_factory=dict)
    window: Tuple[float, float] = (530.0, 590.0)
    data: Optional[Path] = None
    samples: Optional[Path] = None
    out_dir: Path = Path(".")
    seed: int = 0
    truth: dict = field(default_factory=dict)

    def model(self, peaks=None):
        priors = default_hyperparams(self.regime)
        if self.priors:
            priors = priors.with_overrides(self.priors)
        return ModelSpec(self.regime, peaks or self.peaks, priors, tuple(self.window))

    def build_ladder(self):
        return build_ladder(*self.ladder)


def _parse_range(v):
    if isinstance(v, (list, tuple)):
        lo, hi = int(v[0]), int(v[-1])
    elif isinstance(v, str) and ":" in v:
        lo, hi = (int(x) for x in v.split(":"))
    else:
        lo = hi = int(v)
    if lo < 0 or hi < lo:
        raise ConfigError(f"bad peak-count range {v!r}")
    return list(range(lo, hi + 1))


def _parse_ladder(v):
    if isinstance(v, dict):
        return int(v["L"]), float(v["xi"]), float(v.get("anchor", 3000.0))
    parts = [p for p in str(v).split(",") if p]
    if len(parts) != 3:
        raise ConfigError(f"--ladder expects L,xi,anchor; got {v!r}")
    return int(parts[0]), float(parts[1]), float(parts[2])


def load_config(args) -> RunConfig:
    raw = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
    regime = args.model or raw.get("model", PROPOSED)
    if regime not in (PROPOSED, CONVENTIONAL):
        raise ConfigError(f"unknown model {regime!r}")

    flag_grid = {}
    for name in ("k1", "k2", "k"):
        v = getattr(args, name)
        if v is not None:
            flag_grid[name] = v
    grid_raw = dict(raw.get("grid", DEFAULT_GRID[regime]))
    grid_raw.update({k: v for k, v in flag_grid.items()})
    if regime == PROPOSED:
        grid = [(a, b) for a in _parse_range(grid_raw.get("k1", [0, 8]))
                for b in _parse_range(grid_raw.get("k2", [0, 8]))]
        k1 = flag_grid.get("k1", raw.get("k1", 5))
        k2 = flag_grid.get("k2", raw.get("k2", 5))
        peaks = PeakConfig(_parse_range(k1)[0], _parse_range(k2)[0])
    else:
        grid = [(k, 0) for k in _parse_range(grid_raw.get("k", [1, 16]))]
        peaks = PeakConfig.conventional(_parse_range(flag_grid.get("k", raw.get("k", 10)))[0])
    if not grid:
        raise ConfigError("empty model grid")

    default_ladder = PROPOSED_LADDER if regime == PROPOSED else CONVENTIONAL_LADDER
    ladder = _parse_ladder(args.ladder if args.ladder else raw.get("ladder", ",".join(map(str, default_ladder))))
    build_ladder(*ladder)

    s = dict(raw.get("sampler", {}))
    unknown = set(s) - set(SAMPLER_KEYS)
    if unknown:
        raise ConfigError(f"unknown sampler keys {sorted(unknown)}")
    if args.mcs is not None:
        s["total"] = args.mcs
    if args.burnin is not None:
        s["burn_in"] = args.burnin
    for name in ("sweeps_per_mcs", "thin", "n_workers"):
        v = getattr(args, name, None)
        if v is not None:
            s[name] = v
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    sampler = SamplerConfig(seed=seed, **s)
    sampler.validate()

    def _path(key, flag):
        v = flag if flag is not None else raw.get(key)
        return Path(v) if v is not None else None

    cfg = RunConfig(
        regime=regime, peaks=peaks, grid=grid, ladder=ladder, sampler=sampler,
        priors=dict(raw.get("priors", {})), window=tuple(raw.get("window", (530.0, 590.0))),
        data=_path("data", args.data), samples=_path("samples", getattr(args, "samples", None)),
        out_dir=Path(args.out_dir or raw.get("out_dir", ".")), seed=seed,
        truth=dict(raw.get("truth", {})),
    )
    cfg.model()  # validates prior overrides and window
    if cfg.data is not None and not cfg.data.exists() and args.command != "generate":
        raise ConfigError(f"data file not found: {cfg.data}")
    if cfg.samples is not None and not cfg.samples.exists():
        raise ConfigError(f"samples file not found: {cfg.samples}")
    return cfg


def _load_data(cfg: RunConfig):
    path = cfg.data or cfg.out_dir / "data.csv"
    if not path.exists():
        raise ConfigError(f"no dataset: pass --data or run 'generate' into {cfg.out_dir}")
    return io.parse_dataset(path)


def cmd_generate(cfg: RunConfig):
    t = cfg.truth
    params = draw_truth(int(t.get("seed", TRUTH_SEED)), int(t.get("K1", 5)), int(t.get("K2", 5)))
    spec = TruthSpec(params, float(t.get("b_true", 3000.0)), float(t.get("e_min", 530.0)),
                     float(t.get("e_max", 590.0)), int(t.get("n_points", 703)), cfg.seed)
    data = synthesize(spec, noise=not t.get("noiseless", False))
    out = cfg.data or cfg.out_dir / "data.csv"
    io.write_dataset(out, data)
    io.write_truth(cfg.out_dir / "truth.json", spec)
    return {"data": str(out), "truth": str(cfg.out_dir / "truth.json")}


def _fit(cfg: RunConfig, data):
    model = cfg.model()
    ladder = cfg.build_ladder()
    record = run_emc(model, data, ladder, cfg.sampler)
    return model, ladder, record


def cmd_fit(cfg: RunConfig):
    data = _load_data(cfg)
    model, ladder, record = _fit(cfg, data)
    out = cfg.out_dir
    io.write_samples(out / "samples.csv", record)
    entry = model_evidence(record)
    table = EvidenceTable.from_entries([entry], cfg.regime)
    io.write_evidence(out / "evidence.csv", table)
    result = summarize(table, lambda key: model)
    vec, score, m = map_estimate(record, model, result.l)
    params = model.from_vector(vec)
    io.write_json(out / "map.json", {
        "model": io.model_to_dict(model),
        "rung": result.l + 1,
        "b": float(ladder.b[result.l]),
        "mcs": int(record.mcs[m]),
        "score": score,
        "error_function": float(record.error[m, result.l]),
        "params": io.params_to_dict(params),
    })
    io.write_fit_curve(out / "fit_curve.csv", params, data)
    io.write_trace(out / "trace.csv", record.trace)
    return {"samples": str(out / "samples.csv"), "map": str(out / "map.json"),
            "rung": result.l + 1, "b": float(ladder.b[result.l])}


def cmd_select(cfg: RunConfig):
    data = _load_data(cfg)
    ladder = cfg.build_ladder()
    entries = []
    for i, key in enumerate(cfg.grid):
        model = cfg.model(PeakConfig(*key))
        logger.info("model %d/%d: %s", i + 1, len(cfg.grid), key)
        record = run_emc(model, data, ladder, cfg.sampler)
        entries.append(model_evidence(record, key))
    table = EvidenceTable.from_entries(entries, cfg.regime)
    result = summarize(table, lambda key: cfg.model(PeakConfig(*key)))
    out = cfg.out_dir
    io.write_evidence(out / "evidence.csv", table)
    io.write_selection(out / "selection.json", result)
    io.write_posterior_table(out / "posterior.csv", result)
    if result.map_params is not None:
        io.write_fit_curve(out / "fit_curve.csv", result.map_params, data)
    return io.selection_to_dict(result)["chosen"]


def cmd_diag(cfg: RunConfig, max_lag=None, replicas=None):
    if cfg.samples is not None:
        record = io.read_samples(cfg.samples)
        trace, mcs = record.error, record.mcs
    else:
        data = _load_data(cfg)
        _, _, record = _fit(cfg, data)
        trace, mcs = record.trace, None
    L = record.L
    replicas = replicas or [max(0, L - 3)]
    post = record.error
    max_lag = max_lag or min(1000, post.shape[0] - 1)
    if max_lag < 1:
        raise ConfigError("not enough retained samples for an autocorrelation")
    cols = {f"rho.{l + 1}": autocorrelation(post[:, l], max_lag) for l in replicas}
    io.write_trace(cfg.out_dir / "trace.csv", trace, mcs)
    io.write_autocorrelation(cfg.out_dir / "autocorrelation.csv", np.arange(max_lag + 1), cols)
    return {"trace": str(cfg.out_dir / "trace.csv"),
            "autocorrelation": str(cfg.out_dir / "autocorrelation.csv")}


def build_parser():
    p = argparse.ArgumentParser(prog="xanes-emc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("generate", "write a synthetic dataset and its truth"),
                           ("fit", "sample one peak configuration"),
                           ("select", "free energies over a peak-count grid"),
                           ("diag", "misfit trace and autocorrelation")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out-dir", dest="out_dir")
        sp.add_argument("--model", choices=[CONVENTIONAL, PROPOSED])
        sp.add_argument("--k1", help="count, or lo:hi range for select")
        sp.add_argument("--k2", help="count, or lo:hi range for select")
        sp.add_argument("--k", help="conventional peak count or lo:hi range")
        sp.add_argument("--ladder", help="L,xi,anchor")
        sp.add_argument("--mcs", type=int)
        sp.add_argument("--burnin", type=int)
        sp.add_argument("--sweeps", dest="sweeps_per_mcs", type=int)
        sp.add_argument("--thin", type=int)
        sp.add_argument("--workers", dest="n_workers", type=int)
        sp.add_argument("--data")
        sp.add_argument("--error-json", dest="error_json", action="store_true",
                        help="print errors as JSON on stdout")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "diag":
            sp.add_argument("--samples")
            sp.add_argument("--max-lag", dest="max_lag", type=int)
            sp.add_argument("--replica", type=int, action="append",
                            help="1-based replica index (repeatable)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        cfg = load_config(args)
        if args.verbose:
            cfg.sampler.progress = True
        if args.command == "generate":
            out = cmd_generate(cfg)
        elif args.command == "fit":
            out = cmd_fit(cfg)
        elif args.command == "select":
            out = cmd_select(cfg)
        else:
            reps = [r - 1 for r in args.replica] if args.replica else None
            out = cmd_diag(cfg, args.max_lag, reps)
    except (XanesEmcError, OSError) as e:
        if args.error_json:
            print(json.dumps({"error": type(e).__name__, "message": str(e)}))
        else:
            print(f"error: {e}", file=sys.stderr)
        return 2
    print(json.dumps(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
