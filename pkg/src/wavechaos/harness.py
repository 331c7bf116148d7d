"""Experiment configs, seeded runs, CSV/JSON emission and slope fitting."""

from __future__ import annotations

import copy
import csv
import json
import math
import os
import platform
import tempfile
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats

from . import __version__, moments, ntree, pairing
from .euler.theorem2 import ExperimentAbort
from .quasisolution import BudgetError, calibrate_psi_constant, get_model

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET, EXIT_ACCEPTANCE = 0, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class AcceptanceFailure(AssertionError):
    pass


# ---------------------------------------------------------------------------
# Slope fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    half_width: float
    intercept: float
    used: int
    excluded: int


def fit_slope(L_values: Sequence[float], values: Sequence[float], confidence: float = 0.95) -> SlopeFit:
    """Least-squares slope of ln(value) against ln(L) with a t-based half-width."""
    pairs = [(float(L), float(v)) for L, v in zip(L_values, values)]
    good = [(L, v) for L, v in pairs if v > 0 and L > 0 and math.isfinite(v)]
    excluded = len(pairs) - len(good)
    if excluded:
        warnings.warn(f"{excluded} nonpositive value(s) excluded from the slope fit", RuntimeWarning, stacklevel=2)
    if len(good) < 3:
        raise ValueError(f"slope fit needs at least 3 positive values, got {len(good)}")
    x = np.log([p[0] for p in good])
    y = np.log([p[1] for p in good])
    fit = stats.linregress(x, y)
    half = float(stats.t.ppf(0.5 + confidence / 2, len(good) - 2) * fit.stderr)
    return SlopeFit(float(fit.slope), float(fit.stderr), half, float(fit.intercept), len(good), excluded)


def fit_slope_csv(path: str | os.PathLike, x_col: str = "L", y_col: str | None = None) -> SlopeFit:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    if not rows:
        raise ValueError("empty CSV")
    if y_col is None:
        y_col = [c for c in rows[0] if c != x_col][0]
    for col in (x_col, y_col):
        if col not in rows[0]:
            raise KeyError(f"no column {col!r} in {path}")
    return fit_slope([float(r[x_col]) for r in rows], [float(r[y_col]) for r in rows])


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence], comment: str | None = None) -> None:
    import io

    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    atomic_write_text(path, buf.getvalue())


def write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ---------------------------------------------------------------------------
# Configs
# ---------------------------------------------------------------------------

DEFAULTS: dict[str, dict[str, Any]] = {
    "trees": {"N": 2, "n": 3, "cap": ntree.DEFAULT_TREE_CAP},
    "pairings": {"N": 2, "orders": [1, 1], "frequencies": None, "cap": pairing.DEFAULT_PAIRING_CAP},
    "moments": {
        "model": "toy-1d", "L": 4, "orders": [1, 1], "components": [0, 0], "ks": [[1], [-1]],
        "t": 0.5, "samples": 0, "antithetic": False,
    },
    "slope": {
        "model": "toy-1d", "L_values": [4, 8, 16, 32], "orders": [1, 0, 0], "components": [0, 0, 0],
        "xis": [[0.5], [-0.25], [-0.25]], "t": 0.5, "expected_slope": -0.5, "tolerance": 0.15,
    },
    "euler-wp": {
        "L": 4, "M": 5, "eps": 0.02, "rho0": 1.0, "beta": 0.5, "theta": 1.0, "probes": 12, "profile": "tangential-2d",
    },
    "tails": {
        "profile": "unit-1d", "L": 16, "eps": 0.3, "rho0": 1.0,
        "R_values": [1.0, 1.06, 1.12, 1.18, 1.24, 1.3, 1.36, 1.42, 1.48, 1.54, 1.6, 1.66],
        "samples": 10_000,
    },
    "typical-size": {"d": 1, "delta": 0.3, "L_values": [64, 256, 1024], "samples": 1000},
    "theorem2": {
        "profile": "tangential-2d", "eps0": 0.1, "L_values": [4, 8], "xi": [0.5, 0.25], "eta": [0.25, 0.5],
        "components": [0, 0], "t": 0.5, "samples": 100_000, "chunk": 100, "rho0": 1.0, "beta": 0.5,
        "theta": 1.0, "M_fixed": None, "ratio_cap": 1.0,
    },
}

EXPERIMENTS = tuple(DEFAULTS)


def _type_ok(default, value) -> bool:
    if default is None or value is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list)
    return True


def build_config(experiment: str, overrides: dict | None = None, seed: int = 0) -> dict:
    """Defaults merged with ``overrides``; unknown keys and type mismatches are rejected."""
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}", "experiment")
    cfg = copy.deepcopy(DEFAULTS[experiment])
    for key, value in (overrides or {}).items():
        if key not in cfg:
            raise ConfigError(f"unknown config key {experiment}.{key}", f"{experiment}.{key}")
        if not _type_ok(cfg[key], value):
            raise ConfigError(f"bad type for {experiment}.{key}: {value!r}", f"{experiment}.{key}")
        cfg[key] = float(value) if isinstance(cfg[key], float) and isinstance(value, int) else value
    if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer", "seed")
    return cfg


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value", text)
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


# ---------------------------------------------------------------------------
# Runners: each returns (artifacts, constants, budgets) and may raise
# AcceptanceFailure
# ---------------------------------------------------------------------------

def _run_trees(cfg, seed, out: Path):
    N, n = cfg["N"], cfg["n"]
    trees = ntree.enumerate_trees(N, n, cap=cfg["cap"])
    count = ntree.count_trees(N, n)
    rows = []
    for i, A in enumerate(trees):
        code = ntree.encode_polish(A)
        rows.append([i, ntree.code_to_str(code), ntree.nodes(A), ntree.leaves(A)])
    write_csv(out / "trees.csv", ["index", "polish_code", "nodes", "leaves"], rows)
    bound = ntree.cardinal_bound(N, n) if n >= 1 else 1.0
    if len(trees) != count or count > bound:
        raise AcceptanceFailure("tree count or bound check failed")
    return {"count": count, "bound": bound}, {"trees": count}


def _run_pairings(cfg, seed, out: Path):
    S = pairing.BlockIndexSet.from_orders(cfg["orders"], cfg["N"])
    sigmas = pairing.enumerate_pairings(S, cap=cfg["cap"])
    freqs = cfg["frequencies"]
    rows = []
    for i, sigma in enumerate(sigmas):
        orbits = pairing.orbit_partition(sigma, S)
        row = [i, json.dumps(sigma.to_json(S)), json.dumps([list(o) for o in orbits])]
        if freqs is not None:
            g = pairing.sigma_dimension(sigma, S, freqs)
            row += [g.status, g.s_sigma, g.rank_witness]
        rows.append(row)
    header = ["index", "pairs", "orbits"] + (["status", "s_sigma", "rank"] if freqs is not None else [])
    write_csv(out / "pairings.csv", header, rows)
    return {"count": len(sigmas), "index_set_size": len(S)}, {"pairings": len(sigmas)}


def _toy_or_model_ensemble(model_name: str, L: int):
    model = get_model(model_name)
    if model.name.startswith("toy"):
        return model, moments.toy_ensemble(L)
    from .euler.ensemble import EulerEnsembleSpec

    return model, EulerEnsembleSpec(eps_fixed=0.1).ensemble(L)


def _run_moments(cfg, seed, out: Path):
    model, ens = _toy_or_model_ensemble(cfg["model"], cfg["L"])
    q = moments.MomentQuery(tuple(cfg["orders"]), tuple(cfg["components"]), tuple(map(tuple, cfg["ks"])), cfg["t"])
    report = moments.theorem1_residual(q, model, ens)
    if cfg["samples"]:
        report.mc = moments.mc_moment(q, model, ens, cfg["samples"], seed, cfg["antithetic"])
    data = report.to_json()
    data["seed"] = seed
    write_json(out / "moments.json", data)
    consts = {"C_psi_declared": model.psi_constant, "C_psi_probe": calibrate_psi_constant(model, seed=seed)}
    return consts, {"lattice_points": moments.lattice_budget(q, model, ens)}


def _run_slope(cfg, seed, out: Path):
    model = get_model(cfg["model"])
    rows, Ls, res = [], [], []
    for L in cfg["L_values"]:
        ens = moments.toy_ensemble(L)
        ks = tuple(moments.physical_to_lattice(x, L) for x in cfg["xis"])
        q = moments.MomentQuery(tuple(cfg["orders"]), tuple(cfg["components"]), ks, cfg["t"])
        r = moments.theorem1_residual(q, model, ens, with_oracle=False)
        rows.append([L, r.residual, r.bound, r.structural.real, r.structural.imag])
        Ls.append(L)
        res.append(r.residual)
    write_csv(out / "slope.csv", ["L", "residual", "bound", "moment_re", "moment_im"], rows, comment=f"seed={seed}")
    fit = fit_slope(Ls, res)
    consts = {"slope": fit.slope, "slope_stderr": fit.stderr, "slope_half_width": fit.half_width,
              "C_psi": model.psi_constant}
    if cfg["expected_slope"] is not None and abs(fit.slope - cfg["expected_slope"]) > cfg["tolerance"]:
        raise AcceptanceFailure(f"slope {fit.slope:.4f} outside {cfg['expected_slope']} ± {cfg['tolerance']}")
    return consts, {"L_values": len(Ls)}


def _run_euler_wp(cfg, seed, out: Path):
    from .euler.analytic import AnalyticNormConfig
    from .euler.ensemble import EulerEnsembleSpec, sample_initial_datum
    from .euler.picard import calibrate_bilinear_constant, picard_iterate_euler

    spec = EulerEnsembleSpec(profile=cfg["profile"], eps_fixed=cfg["eps"])
    L = cfg["L"]
    ncfg = AnalyticNormConfig(rho0=cfg["rho0"], beta=cfg["beta"], theta=cfg["theta"])
    cal = calibrate_bilinear_constant(ncfg, L, spec.band(L), probes=cfg["probes"], seed=seed, d=spec.d)
    u0 = sample_initial_datum(spec, L, seed)
    rep = picard_iterate_euler(u0, cfg["M"], L, ncfg, cal.C_picard, d=spec.d)
    rows = [[n, m, e, (rep.m_norms[n] / rep.m_norms[n - 1]) if n and rep.m_norms[n - 1] else ""]
            for n, (m, e) in enumerate(zip(rep.m_norms, rep.envelope))]
    write_csv(out / "picard.csv", ["n", "m_norm", "envelope", "ratio"], rows, comment=f"seed={seed}")
    consts = {"C_bilinear_measured": cal.measured, "C_picard": cal.C_picard, "A_theta": rep.threshold,
              "u0_norm_rho0": rep.u0_norm, "u0_m_norm": rep.u0_m_norm}
    if not rep.envelope_holds:
        raise AcceptanceFailure("Picard terms exceed the geometric envelope")
    return consts, {"orders": cfg["M"]}


def _run_tails(cfg, seed, out: Path):
    from .euler.ensemble import EulerEnsembleSpec, norm_tail_mc

    spec = EulerEnsembleSpec(profile=cfg["profile"], eps_fixed=cfg["eps"])
    curve = norm_tail_mc(spec, cfg["L"], cfg["rho0"], cfg["R_values"], cfg["samples"], seed)
    write_csv(out / "tails.csv", ["R", "probability", "exceedances"], curve.rows(), comment=f"seed={seed}")
    consts = {"c": curve.c, "c_lower": curve.c_lower, "c_upper": curve.c_upper, "median": curve.median}
    if not curve.stable:
        raise AcceptanceFailure("tail rate not positive and stable within 30%")
    return consts, {"samples": cfg["samples"]}


def _run_typical(cfg, seed, out: Path):
    from .euler.ensemble import typical_size_experiment

    rows = typical_size_experiment(cfg["d"], cfg["delta"], cfg["L_values"], cfg["samples"], seed)
    keys = ["L", "level", "probability", "se", "exact", "asymptotic_condition"]
    write_csv(out / "typical_size.csv", keys, [[r[k] for k in keys] for r in rows], comment=f"seed={seed}")
    if rows[-1]["probability"] < 0.5:
        raise AcceptanceFailure("grid-point probability below 1/2 at the largest L")
    return {"largest_L_probability": rows[-1]["probability"]}, {"samples": cfg["samples"]}


def _run_theorem2(cfg, seed, out: Path):
    from .euler.analytic import AnalyticNormConfig
    from .euler.ensemble import EulerEnsembleSpec
    from .euler.theorem2 import Theorem2Config, theorem2_experiment

    spec = EulerEnsembleSpec(profile=cfg["profile"], eps0=cfg["eps0"])
    tcfg = Theorem2Config(
        xi=tuple(cfg["xi"]), eta=tuple(cfg["eta"]), components=tuple(cfg["components"]), t=cfg["t"],
        L_values=tuple(cfg["L_values"]), samples=cfg["samples"], seed=seed, chunk=cfg["chunk"],
        M_fixed=cfg["M_fixed"], norm=AnalyticNormConfig(rho0=cfg["rho0"], beta=cfg["beta"], theta=cfg["theta"]),
    )
    rows = theorem2_experiment(spec, tcfg)
    keys = list(rows[0])
    write_csv(out / "theorem2.csv", keys, [[r[k] for k in keys] for r in rows], comment=f"seed={seed}")
    consts = {f"C_picard_L{r['L']}": r["C_picard"] for r in rows}
    bad = [r["L"] for r in rows if r["ratio_upper"] > cfg["ratio_cap"] or r["truncation_diff"] >= r["se"]]
    if bad:
        raise AcceptanceFailure(f"ratio or truncation check failed at L={bad}")
    return consts, {"samples_per_L": cfg["samples"]}


RUNNERS: dict[str, Callable] = {
    "trees": _run_trees,
    "pairings": _run_pairings,
    "moments": _run_moments,
    "slope": _run_slope,
    "euler-wp": _run_euler_wp,
    "tails": _run_tails,
    "typical-size": _run_typical,
    "theorem2": _run_theorem2,
}


def _manifest(experiment, cfg, seed, workers, status, **extra) -> dict:
    return {
        "experiment": experiment,
        "config": cfg,
        "seed": seed,
        "workers": workers,
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "status": status,
        **extra,
    }


def run(experiment: str, cfg: dict, seed: int, out: str | os.PathLike, workers: int = 1) -> int:
    """Run one experiment into ``out``; returns the process exit code."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    mpath = out / "manifest.json"
    write_json(mpath, _manifest(experiment, cfg, seed, workers, "running"))
    start = time.perf_counter()
    status, code, message = "ok", EXIT_OK, None
    constants, budgets = {}, {}
    try:
        constants, budgets = RUNNERS[experiment](cfg, seed, out)
    except AcceptanceFailure as exc:
        status, code, message = "acceptance-failure", EXIT_ACCEPTANCE, str(exc)
    except ExperimentAbort as exc:
        status, code, message = "aborted", EXIT_ACCEPTANCE, str(exc)
        constants = {"diagnostics": exc.diagnostics}
    except (BudgetError, ntree.TreeBudgetError, pairing.PairingBudgetError) as exc:
        status, code, message = "budget-exceeded", EXIT_BUDGET, str(exc)
    except (ValueError, KeyError) as exc:
        status, code, message = "invalid", EXIT_VALIDATION, str(exc)
    wall = time.perf_counter() - start
    write_json(mpath, _manifest(
        experiment, cfg, seed, workers, status, message=message, constants=constants, budgets=budgets,
        wall_time_s=wall,
    ))
    return code
