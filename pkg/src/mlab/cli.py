"""Command-line driver: ``mlab <experiment> --config path [--jobs N] [--out dir]``.

Every experiment reads one JSON config (defaults shown by ``--print-config``),
evaluates a per-degree quantity over an n-range, writes a CSV with a header row
and a schema-versioned JSON report, and prints a one-line summary. Exit status
is 0 on success, 2 when a configured band is violated and 1 on any error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .construct import (
    EpsilonSequence,
    build_domain,
    build_profile,
    check_secant_property,
    log_cusp_domain,
    synthetic_sequence,
)
from .domain import GraphDomain, index_of_convexity, modulus_of_continuity, solve_epsilon_n, \
    validate_regular_cusp
from .errors import ConfigurationError, MlabError
from .jacobi import JacobiParams, darboux_eval, envelope_bound, jacobi_eval, mehler_heine_gap
from .markov import (
    alpha_selector,
    best_markov_p2,
    extremal_ratio,
    fit_exponent,
    lemma31_epsilon,
    lemma31_ratio,
    lower_bound_markov_p,
)
from .quad import GradedMesh
from .selftest import run_selftest

EXPERIMENTS = ("jacobi-check", "domain-info", "markov-sweep", "eigen-sweep", "lemma31", "construct", "logcusp")
SCHEMA = 1

EXIT_OK, EXIT_ERROR, EXIT_BAND = 0, 1, 2

_BASE = {
    "domain": {"profile": {"kind": "power", "parameters": {"k": 2.0}}, "symmetry": "upper"},
    "p": 2.0,
    "n_range": {"start": 8, "stop": 64, "geometric": True},
    "alpha": None,
    "beta": 0.0,
    "alpha_margin": 0.5,
    "mesh": {"ratio": 0.5, "depth": 40},
    "seed": 0,
    "band": None,
    "outputs": {"csv": "sweep.csv", "json": "report.json"},
}

_EXPERIMENT_DEFAULTS = {
    "jacobi-check": {
        "n_range": {"start": 50, "stop": 400, "geometric": True},
        "alpha": 0.0,
        "z": 1.0,
        "theta_margin": 0.6,
        "theta_points": 2001,
        "band": [-10.0, -1.3],
    },
    "domain-info": {
        "domain": {"profile": {"kind": "log", "parameters": {"iota": 1.0}}, "symmetry": "upper"},
        "n_range": {"start": 1, "stop": 64, "geometric": True},
        "omega_levels": [1e-8, 1e-6, 1e-4, 1e-2, 1e-1],
    },
    "markov-sweep": {"fit_model": "pure", "iota": None, "band": [3.6, 4.4]},
    "eigen-sweep": {
        "domain": {"profile": {"kind": "box", "parameters": {"value": 1.0}}, "symmetry": "upper"},
        "n_range": {"values": [2, 3, 4, 5, 6, 7, 8, 9, 10]},
        "direction": "max",
        "threshold": 1e-12,
        "allow_large": False,
        "restarts": 8,
        "band": [1.8, 2.2],
    },
    "lemma31": {
        "n_range": {"values": [16, 24, 32, 48, 64]},
        "alpha": 7.5,
        "upsilon": 0.5,
        "band": [1.0, 3.0],
    },
    "construct": {
        "domain": None,
        "sequence": {"synthetic": {"s": 2.0, "N": 64}},
        "n_max": 64,
        "n_range": {"start": 4, "stop": 32, "geometric": False, "step": 1},
        "secant_samples": 10000,
        "band": [0.9, 1.1],
        "profile_json": "profile.json",
    },
    "logcusp": {
        "domain": None,
        "iota": 1.0,
        "alpha_margin": 1.0,
        "i_conv": 1.0,
        "band": [1.7, 2.3],
    },
}


def default_config(experiment: str) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    cfg = copy.deepcopy(_BASE)
    cfg.update(copy.deepcopy(_EXPERIMENT_DEFAULTS[experiment]))
    cfg["experiment"] = experiment
    return cfg


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key not in ("profile", "n_range", "sequence"):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(experiment: str, path: str | None) -> dict:
    cfg = default_config(experiment)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigurationError("config must be a JSON object")
        if user.get("experiment", experiment) != experiment:
            raise ConfigurationError(
                f"config is for {user['experiment']!r} but {experiment!r} was requested"
            )
        cfg = _merge(cfg, user)
    validate_config(cfg)
    return cfg


def n_values(n_range: dict) -> list[int]:
    """Degrees from {"values": [...]} or {"start", "stop", "geometric", "step"}."""
    if "values" in n_range:
        ns = [int(v) for v in n_range["values"]]
    else:
        start, stop = int(n_range["start"]), int(n_range["stop"])
        if start < 0 or stop < start:
            raise ConfigurationError(f"bad n_range {n_range}")
        if n_range.get("geometric", False):
            factor = int(n_range.get("factor", 2))
            if start < 1 or factor < 2:
                raise ConfigurationError("geometric n_range needs start >= 1 and factor >= 2")
            ns, n = [], start
            while n <= stop:
                ns.append(n)
                n *= factor
        else:
            step = int(n_range.get("step", 1))
            if step < 1:
                raise ConfigurationError("n_range step must be >= 1")
            ns = list(range(start, stop + 1, step))
    if not ns:
        raise ConfigurationError("n_range is empty")
    if len(set(ns)) != len(ns) or any(n < 0 for n in ns):
        raise ConfigurationError("n_range values must be distinct and nonnegative")
    return sorted(ns)


def validate_config(cfg: dict) -> None:
    n_values(cfg["n_range"])
    if float(cfg["p"]) < 1.0:
        raise ConfigurationError("p must be >= 1")
    band = cfg.get("band")
    if band is not None and (len(band) != 2 or float(band[0]) > float(band[1])):
        raise ConfigurationError(f"band must be [lo, hi] with lo <= hi, got {band}")
    mesh = cfg["mesh"]
    GradedMesh(float(mesh["ratio"]), int(mesh["depth"]))


# --- per-degree workers (top level so they pickle for the process pool) ------------

def _mesh(cfg):
    return GradedMesh(float(cfg["mesh"]["ratio"]), int(cfg["mesh"]["depth"]))


def _domain(cfg) -> GraphDomain:
    if cfg["experiment"] == "logcusp":
        return log_cusp_domain(float(cfg["iota"]))
    if cfg["experiment"] == "construct":
        return build_domain(build_profile(_sequence(cfg), int(cfg["n_max"])))
    return GraphDomain.from_json(cfg["domain"])


def _sequence(cfg) -> EpsilonSequence:
    seq = cfg["sequence"]
    if "synthetic" in seq:
        return synthetic_sequence(float(seq["synthetic"]["s"]), int(seq["synthetic"]["N"]))
    return EpsilonSequence.from_json(seq)


def _epsilon(domain, n):
    if not domain.profile.cuspidal or n < 1:
        return math.nan
    return solve_epsilon_n(domain, n).epsilon_n


def _law_columns(n, factor, eps):
    law = n * n / eps if eps == eps and eps > 0 else math.nan
    return {"n": n, "factor": factor, "epsilon_n": eps, "n2_over_eps": law, "ratio_to_law": factor / law}


def _row_jacobi(cfg, n):
    par = JacobiParams(float(cfg["alpha"]), float(cfg["beta"]))
    m = float(cfg["theta_margin"])
    theta = np.linspace(m, math.pi - m, int(cfg["theta_points"]))
    exact = np.asarray(jacobi_eval(par, n, np.cos(theta)))
    err = float(np.max(np.abs(exact - np.asarray(darboux_eval(par, n, theta)))))
    env_ratio = float(np.max(np.abs(exact) / np.asarray(envelope_bound(par, n, theta))))
    return {
        "n": n,
        "mehler_heine_gap": mehler_heine_gap(par, float(cfg["z"]), n),
        "darboux_error": err,
        "envelope_ratio": env_ratio,
    }


def _row_domain(cfg, n):
    dom = _domain(cfg)
    cs = solve_epsilon_n(dom, n)
    return {"n": n, "epsilon_n": cs.epsilon_n, "x_n": cs.x_n, "u_n": cs.u_n, "residual": cs.residual}


def _alpha(cfg, dom) -> float:
    if cfg.get("alpha") is not None:
        return float(cfg["alpha"])
    i_conv = cfg.get("i_conv")
    if i_conv is None:
        i_conv = index_of_convexity(dom.profile)
    return alpha_selector(float(cfg["p"]), float(i_conv), float(cfg["alpha_margin"]))


def _row_extremal(cfg, n):
    dom = _domain(cfg)
    par = JacobiParams(_alpha(cfg, dom), float(cfg["beta"]))
    factor = extremal_ratio(dom, par, n, float(cfg["p"]), _mesh(cfg))
    row = _law_columns(n, factor, _epsilon(dom, n))
    if cfg["experiment"] == "logcusp":
        iota = float(cfg["iota"])
        law = n ** (2.0 * iota) * (1.0 + iota * math.log(2.0 * n * n))
        row["n2_over_eps"] = law
        row["ratio_to_law"] = factor / law
    return row


def _row_eigen(cfg, n):
    dom = _domain(cfg)
    p = float(cfg["p"])
    if p == 2.0:
        factor = best_markov_p2(dom, n, cfg["direction"], _mesh(cfg), float(cfg["threshold"]),
                                allow_large=bool(cfg["allow_large"]))
    else:
        factor = lower_bound_markov_p(dom, n, p, cfg["direction"], int(cfg["restarts"]),
                                      int(cfg["seed"]), _mesh(cfg), threshold=float(cfg["threshold"]))
    return _law_columns(n, factor, _epsilon(dom, n))


def _row_lemma31(cfg, n):
    dom = _domain(cfg)
    par = JacobiParams(float(cfg["alpha"]), float(cfg["beta"]))
    ratio = lemma31_ratio(dom.profile, par, n, float(cfg["p"]), float(cfg["upsilon"]), _mesh(cfg),
                          i_conv=cfg.get("i_conv"))
    return {"n": n, "ratio": ratio, "epsilon_n": lemma31_epsilon(dom.profile, n, float(cfg["upsilon"]))}


def _row_construct(cfg, n):
    dom = _domain(cfg)
    seq = _sequence(cfg)
    if n > seq.N:
        raise ConfigurationError(f"n={n} exceeds the sequence length {seq.N}")
    eps = seq.values[n - 1]
    eps_hat = solve_epsilon_n(dom, n).epsilon_n
    level = eps / (n * n)
    omega = modulus_of_continuity(dom, level)
    return {
        "n": n,
        "epsilon_n": eps,
        "epsilon_hat": eps_hat,
        "recovery_ratio": eps_hat / eps,
        "omega_residual": abs(omega - math.hypot(0.5 / (n * n), level)),
    }


_ROW = {
    "jacobi-check": _row_jacobi,
    "domain-info": _row_domain,
    "markov-sweep": _row_extremal,
    "logcusp": _row_extremal,
    "eigen-sweep": _row_eigen,
    "lemma31": _row_lemma31,
    "construct": _row_construct,
}


def _call_row(args):
    cfg, n = args
    return _ROW[cfg["experiment"]](cfg, n)


def sweep(cfg: dict, jobs: int = 1) -> list[dict]:
    """Rows for every n, merged in increasing n regardless of ``jobs``."""
    ns = n_values(cfg["n_range"])
    tasks = [(cfg, n) for n in ns]
    if jobs <= 1 or len(ns) == 1:
        rows = [_call_row(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_call_row, tasks))
    return sorted(rows, key=lambda r: r["n"])


# --- summaries ----------------------------------------------------------------------

def _in_band(value, band):
    return band is None or (float(band[0]) <= value <= float(band[1]))


def _fit_summary(cfg, rows, key="factor"):
    entries = [(r["n"], r[key]) for r in rows if r["n"] > 0]
    report = {}
    if len(entries) >= 4:
        pure = fit_exponent(entries, "pure")
        report["pure"] = pure.to_json()
        headline = pure
        if cfg.get("fit_model") == "log" or cfg["experiment"] == "logcusp":
            iota = float(cfg.get("iota") or 1.0)
            log = fit_exponent(entries, "log", iota)
            report["log"] = log.to_json()
            headline = log
        value = headline.fitted_exponent
        line = f"exponent={value:.6g} residual={headline.residual:.3g} model={headline.model}"
    else:
        value, line = math.nan, "too few points to fit"
    return report, value, line


def summarize(cfg: dict, rows: list[dict]) -> tuple[dict, bool, str]:
    exp = cfg["experiment"]
    band = cfg.get("band")
    report = {"schema": SCHEMA, "experiment": exp, "config": cfg, "rows": rows}
    if exp == "jacobi-check":
        fit = fit_exponent([(r["n"], r["darboux_error"]) for r in rows]) if len(rows) >= 4 else None
        value = fit.fitted_exponent if fit else math.nan
        report["darboux_decay"] = fit.to_json() if fit else None
        ok = _in_band(value, band) if fit else True
        line = f"darboux error exponent={value:.6g}"
    elif exp == "domain-info":
        dom = _domain(cfg)
        reg = validate_regular_cusp(dom)
        report.update(reg.to_json())
        levels = [t for t in cfg["omega_levels"] if 0 < t <= dom.profile.height]
        report["omega"] = [[t, modulus_of_continuity(dom, t)] for t in levels]
        value = reg.i_conv
        ok = reg.regular and _in_band(value, band)
        line = f"i_conv={value:.6g} regular={reg.regular}"
    elif exp == "lemma31":
        vals = [r["ratio"] for r in rows]
        value = max(vals) / min(vals)
        report["max_over_min"] = value
        ok = _in_band(value, band)
        line = f"max/min={value:.6g}"
    elif exp == "construct":
        seq = _sequence(cfg)
        res = build_profile(seq, int(cfg["n_max"]))
        sec = check_secant_property(res.profile, int(cfg["secant_samples"]), int(cfg["seed"]))
        report["validation"] = res.report.to_json()
        report["secant"] = sec.to_json()
        report["kink_at_cap"] = res.profile.kink_at_cap()
        ratios = [r["recovery_ratio"] for r in rows]
        value = min(ratios)
        ok = res.report.ok and sec.ok and all(_in_band(v, band) for v in ratios)
        report["recovery_range"] = [min(ratios), max(ratios)]
        line = (f"recovery in [{min(ratios):.6g}, {max(ratios):.6g}] "
                f"violations={len(res.report.violations)} secant_violations={sec.violations}")
        report["profile"] = res.profile.to_json()
    else:
        fits, value, line = _fit_summary(cfg, rows)
        report["fits"] = fits
        ok = _in_band(value, band)
    report["band"] = band
    report["pass"] = bool(ok)
    verdict = "PASS" if ok else "FAIL"
    return report, bool(ok), f"{exp}: {line} band={band} {verdict}"


# --- serialization ----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.writer(buf, lineterminator="\n")
    cols = list(rows[0].keys())
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run(cfg: dict, jobs: int = 1, out_dir: str = ".") -> int:
    rows = sweep(cfg, jobs)
    report, ok, line = summarize(cfg, rows)
    os.makedirs(out_dir, exist_ok=True)
    outs = cfg["outputs"]
    if cfg["experiment"] == "construct":
        _write(os.path.join(out_dir, cfg["profile_json"]), dump_json({"schema": SCHEMA, **report.pop("profile")}))
    _write(os.path.join(out_dir, outs["csv"]), rows_to_csv(rows))
    _write(os.path.join(out_dir, outs["json"]), dump_json(report))
    print(line)
    return EXIT_OK if ok else EXIT_BAND


# --- entry point --------------------------------------------------------------------

def _provenance(exc: BaseException) -> str:
    """Name of the innermost mlab module on the traceback."""
    where = "cli"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        mod = frame.f_globals.get("__name__", "")
        if mod.startswith("mlab."):
            where = mod.split(".", 1)[1]
    return where


def _selftest(fault: str | None) -> int:
    results, elapsed = run_selftest(fault)
    failed = [r for r in results if not r.ok]
    for r in failed:
        print(f"FAIL {r.module}:{r.name} {r.detail}")
    print(f"selftest: {len(results) - len(failed)}/{len(results)} passed in {elapsed:.2f}s")
    if failed:
        print("failing modules: " + ", ".join(sorted({r.module for r in failed})))
    return EXIT_OK if not failed else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mlab", description="Markov-factor laboratory on cuspidal graph domains")
    ap.add_argument("experiment", choices=EXPERIMENTS + ("selftest",))
    ap.add_argument("--config", help="JSON config file (defaults apply to missing keys)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for the n sweep")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    ap.add_argument("--inject-fault", choices=("quad",), help="selftest negative control")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.experiment == "selftest":
            return _selftest(args.inject_fault)
        if args.jobs < 1:
            raise ConfigurationError("--jobs must be >= 1")
        cfg = load_config(args.experiment, args.config)
        if args.print_config:
            sys.stdout.write(dump_json(cfg))
            return EXIT_OK
        if args.config is None:
            raise ConfigurationError("--config is required (use --print-config for a template)")
        return run(cfg, args.jobs, args.out)
    except (MlabError, OSError, KeyError, TypeError, ValueError) as exc:
        print(f"mlab: error in {_provenance(exc)}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
