"""Command-line front end: deterministic orchestration and CSV/JSON reports.

Exit codes: 0 success, 1 inequality violation or counterexample candidate,
2 usage/config error, 3 numerical failure.  Every command writes a run
manifest next to its outputs; data files themselves carry no timestamps, so
reruns with the same config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import glob
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .bounds import (
    display_clamp,
    dobrushin_constant,
    hoeffding_bound,
    hoeffding_bound_dependent,
    tail_bound_dependent,
    tail_bound_independent,
    tropp_bound,
)
from .conjectures import catalog_entry, counterexample_search, save_search_result
from .coupling import (
    RademacherSumObservable,
    TableObservable,
    derive_hamming_bounds,
    exhaustive_tail,
    mc_tail_estimate,
)
from .dobrushin import (
    DiscreteModel,
    b_matrix,
    b_power_column,
    dobrushin_matrix,
    load_model,
    matrix_norms,
    model_from_obj,
    norm_recursion_check,
)
from .hermitian import ENSEMBLE_KINDS, EnsembleSpec, matrix_from_obj, sample_ensemble
from .traceineq import INEQUALITY_IDS, fuzz_grid, save_fuzz_summary

TOL_PROFILES = {"default": 1e-8, "strict": 1e-10, "loose": 1e-6}

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _parse_range(text: str) -> list[int]:
    """Parse "1..8" or a comma list into an integer list."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(tok) for tok in text.split(",") if tok]


def _parse_grid(text: str) -> list[float]:
    """Parse "start:stop:step" or a comma list into a float grid."""
    if ":" in text:
        start, stop, step = (float(tok) for tok in text.split(":"))
        n = int(round((stop - start) / step))
        return [start + k * step for k in range(n + 1)]
    return [float(tok) for tok in text.split(",") if tok]


def _write_manifest(out_path: str, command: str, config: dict, seed, threads):
    digest = hashlib.sha256(
        json.dumps(config, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]
    manifest = {
        "command": command,
        "config_digest": digest,
        "seed": seed,
        "threads": threads,
        "version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    with open(out_path + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_csv(path: str, header: list[str], rows: list[list[str]]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _model_from_spec(spec, enum_cap=None):
    """Model from a file reference, inline object, or shorthand."""
    kwargs = {} if enum_cap is None else {"enum_cap": enum_cap}
    if isinstance(spec, str):
        return load_model(spec, **kwargs)
    if "file" in spec:
        return load_model(spec["file"], **kwargs)
    if "rademacher_sites" in spec:
        n = int(spec["rademacher_sites"])
        return DiscreteModel.from_product([(-1.0, 1.0)] * n, [[0.5, 0.5]] * n,
                                          enum_cap=enum_cap or max(2 ** n, 10 ** 6))
    return model_from_obj(spec, **kwargs)


# ---------------------------------------------------------------------------
# Subcommands

def cmd_verify_traces(args, config) -> int:
    trials = int(config.get("trials", args.trials))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    dims = _parse_range(config.get("dims", args.dims))
    kinds = config.get("kinds", args.kinds.split(",") if args.kinds else list(ENSEMBLE_KINDS))
    ineqs = config.get("inequalities", args.ineqs.split(",") if args.ineqs else list(INEQUALITY_IDS))
    tol = TOL_PROFILES[args.tol_profile]
    scale = float(config.get("scale", args.scale))
    out_dir = args.out or "verify-traces-out"
    os.makedirs(out_dir, exist_ok=True)
    witness_dir = os.path.join(out_dir, "witnesses")

    total_violations = 0
    for ineq in ineqs:
        summary = fuzz_grid(ineq, kinds, dims, trials, scale, args.seed, tol, witness_dir)
        save_fuzz_summary(os.path.join(out_dir, f"fuzz-{ineq}.json"), summary)
        total_violations += summary.violations
        print(f"{ineq}: trials={summary.trials} min_gap={summary.min_gap:.3e} "
              f"violations={summary.violations}")
    _write_manifest(os.path.join(out_dir, "run"), "verify-traces",
                    {"trials": trials, "dims": dims, "kinds": kinds,
                     "inequalities": ineqs, "tol": tol, "scale": scale},
                    args.seed, args.threads)
    return EXIT_VIOLATION if total_violations else EXIT_OK


def cmd_bound(args, config) -> int:
    d = int(config.get("d", args.d))
    sigma_sq = float(config.get("sigma_sq", args.sigma_sq))
    t_grid = config.get("t_grid") or _parse_grid(args.t)
    c = config.get("c", args.c)

    if args.model or "model" in config:
        model = _model_from_spec(config.get("model", args.model))
        D = dobrushin_matrix(model)
        n1, ninf = matrix_norms(D)
        c = dobrushin_constant(n1, ninf)   # raises on norms >= 1
    elif args.norm1 is not None or args.norm_inf is not None:
        if args.norm1 is None or args.norm_inf is None:
            raise ConfigError("provide both --norm1 and --norm-inf")
        c = dobrushin_constant(args.norm1, args.norm_inf)
    clamp = display_clamp if args.clamp else (lambda x: x)

    rows = []
    for t in t_grid:
        dep = "" if c is None else _fmt(clamp(tail_bound_dependent(d, sigma_sq, float(c), t)))
        rows.append([
            _fmt(t),
            _fmt(clamp(tail_bound_independent(d, sigma_sq, t))),
            dep,
            _fmt(clamp(hoeffding_bound(d, sigma_sq, t))),
            _fmt(clamp(tropp_bound(d, sigma_sq, t))),
        ])
    out = args.out or "bounds.csv"
    _write_csv(out, ["t", "bound_independent", "bound_dependent", "hoeffding", "tropp"], rows)
    _write_manifest(out, "bound",
                    {"d": d, "sigma_sq": sigma_sq, "c": c, "t_grid": list(t_grid),
                     "clamp": bool(args.clamp)},
                    args.seed, args.threads)
    print(f"wrote {out} ({len(rows)} rows)")
    return EXIT_OK


def _observable_from_config(obs_cfg):
    kind = obs_cfg.get("kind", "rademacher-sum")
    if kind == "table":
        mapping = {tuple(e["values"]): matrix_from_obj(e["matrix"]).mat
                   for e in obs_cfg["entries"]}
        return TableObservable(mapping, int(obs_cfg["dim"]))
    if kind != "rademacher-sum":
        raise ConfigError(f"unsupported observable kind {kind!r}")
    if "matrices" in obs_cfg:
        mats = [matrix_from_obj(o) for o in obs_cfg["matrices"]]
    elif "generate" in obs_cfg:
        g = obs_cfg["generate"]
        mats = []
        for k in range(int(g["count"])):
            spec = EnsembleSpec(g.get("kind", "gaussian-hermitian"), int(g["dim"]),
                                float(g.get("scale", 1.0)), int(g["seed"]) + k)
            out = sample_ensemble(spec)
            mats.append(out[0] if isinstance(out, tuple) else out)
    else:
        raise ConfigError("observable needs 'matrices' or 'generate'")
    return RademacherSumObservable(mats)


def cmd_mc_tail(args, config) -> int:
    if not config:
        raise ConfigError("mc-tail requires --config")
    model = _model_from_spec(config["model"], enum_cap=config.get("enum_cap"))
    observable = _observable_from_config(config["observable"])
    samples = int(config.get("samples", 10000))
    seed = int(config.get("seed", args.seed))
    mode = config.get("mode", "mc")
    if mode not in ("mc", "exhaustive"):
        raise ConfigError("mode must be 'mc' or 'exhaustive'")
    if isinstance(observable, RademacherSumObservable):
        bound_set = observable.hamming_bounds(model)
    else:
        bound_set = derive_hamming_bounds(observable, model)
    sigma_sq = bound_set.sigma_sq / 4.0  # centered-summand variance |sum A_k^2|
    d = observable.dim

    t_cfg = config.get("t_grid", {"sigma_multiples": [0.25 * k for k in range(13)]})
    if isinstance(t_cfg, dict) and "sigma_multiples" in t_cfg:
        sigma = sigma_sq ** 0.5
        t_grid = [m * sigma for m in t_cfg["sigma_multiples"]]
    else:
        t_grid = [float(t) for t in t_cfg]

    if mode == "exhaustive":
        est = exhaustive_tail(model, observable, t_grid)
    else:
        est = mc_tail_estimate(model, observable, t_grid, samples, seed)
    c = config.get("c")
    rows = []
    for t, e, lo, hi in zip(est.t_grid, est.empirical, est.ci_low, est.ci_high):
        dep = "" if c is None else _fmt(hoeffding_bound_dependent(d, sigma_sq, float(c), t))
        rows.append([
            _fmt(t),
            _fmt(tail_bound_independent(d, sigma_sq, t)),
            dep,
            _fmt(hoeffding_bound(d, sigma_sq, t)),
            _fmt(tropp_bound(d, sigma_sq, t)),
            _fmt(e),
            _fmt(lo),
            _fmt(hi),
        ])
    out = args.out or "mc-tail.csv"
    _write_csv(out, ["t", "bound_independent", "bound_dependent", "hoeffding", "tropp",
                     "empirical_tail", "ci_low", "ci_high"], rows)
    _write_manifest(out, "mc-tail", config, seed, args.threads)
    print(f"wrote {out} ({len(rows)} rows, mean source: {est.mean_source})")
    return EXIT_OK


def cmd_dobrushin(args, config) -> int:
    model_spec = config.get("model", args.model)
    if model_spec is None:
        raise ConfigError("dobrushin requires --model or a config with one")
    model = _model_from_spec(model_spec)
    D = dobrushin_matrix(model)
    n1, ninf = matrix_norms(D)
    report = {
        "n": model.n,
        "entries": [[float(x) for x in row] for row in D.entries],
        "norm1": n1,
        "norm_inf": ninf,
    }
    if max(n1, ninf) < 1.0:
        report["c"] = dobrushin_constant(n1, ninf)
        B = b_matrix(D, model.n)
        report["b_matrix"] = [[float(x) for x in row] for row in B.entries]
        kmax = int(config.get("kmax", args.kmax))
        cols = {}
        for j in range(model.n):
            col = b_power_column(B, kmax, j)
            cols[str(j)] = {"vector": [float(x) for x in col.vector],
                            "norm1": col.norm1, "norm1_bound": col.norm1_bound}
        report["b_power_columns"] = {"k": kmax, "columns": cols}
        rec = norm_recursion_check(D, model.n, kmax)
        report["norm_recursion"] = {
            "partial_sum": rec.partial_sum, "limit": rec.limit,
            "tail_bound_1": rec.tail_bound_1, "tail_bound_inf": rec.tail_bound_inf,
        }
    else:
        report["c"] = None
        report["note"] = "interdependence norms >= 1; weak-dependence bound inapplicable"
    out = args.out or "dobrushin.json"
    with open(out, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_manifest(out, "dobrushin", {"model": str(model_spec), "kmax": args.kmax},
                    args.seed, args.threads)
    print(f"wrote {out} (norm1={n1:.6f}, norm_inf={ninf:.6f}, c={report['c']})")
    return EXIT_OK


def cmd_conjecture(args, config) -> int:
    ineq = config.get("ineq", args.ineq)
    if ineq not in ("expconj", "fconj"):
        raise ConfigError("--ineq must be expconj or fconj")
    entry = None
    if ineq == "fconj":
        entry_name = config.get("entry", args.entry)
        if not entry_name:
            raise ConfigError("fconj requires --entry")
        entry = catalog_entry(entry_name)
    dims = _parse_range(config.get("dims", args.dims))
    budget = int(config.get("budget", args.budget))
    result = counterexample_search(ineq, dims, budget, args.seed,
                                   scale=float(config.get("scale", 1.0)), entry=entry)
    out = args.out or "conjecture-result.json"
    save_search_result(out, result)
    _write_manifest(out, "conjecture",
                    {"ineq": ineq, "entry": getattr(entry, "name", None),
                     "dims": dims, "budget": budget},
                    args.seed, args.threads)
    print(f"{result.inequality_id}: verdict={result.verdict} "
          f"best_gap={result.best_gap:.6e} certified_error={result.certified_error:.3e}")
    return EXIT_VIOLATION if result.verdict == "counterexample-candidate" else EXIT_OK


def cmd_report(args, config) -> int:
    in_dir = args.inputs or "."
    findings = []
    bad = 0
    for path in sorted(glob.glob(os.path.join(in_dir, "**", "*.json"), recursive=True)):
        if path.endswith(".manifest.json"):
            continue
        try:
            with open(path) as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError):
            continue
        if "violations" in obj and "inequality_id" in obj:
            line = (f"fuzz {obj['inequality_id']}: trials={obj['trials']} "
                    f"violations={obj['violations']} min_gap={obj['min_gap']:.3e}")
            bad += int(obj["violations"] > 0)
            findings.append(line)
        elif "verdict" in obj and "inequality_id" in obj:
            line = (f"search {obj['inequality_id']}: verdict={obj['verdict']} "
                    f"best_gap={obj['best_gap']:.3e}")
            bad += int(obj["verdict"] == "counterexample-candidate")
            findings.append(line)
        elif "norm1" in obj and "entries" in obj:
            findings.append(f"dobrushin report: n={obj['n']} norm1={obj['norm1']:.6f} "
                            f"c={obj.get('c')}")
    for line in findings:
        print(line)
    if not findings:
        print("no recognized artifacts found")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"findings": findings, "flagged": bad}, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return EXIT_VIOLATION if bad else EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--out", type=str, default=None)
    shared.add_argument("--config", type=str, default=None)
    shared.add_argument("--threads", type=int,
                        default=int(os.environ.get("MATCONC_THREADS", "0")))
    shared.add_argument("--tol-profile", choices=sorted(TOL_PROFILES), default="default")

    parser = argparse.ArgumentParser(prog="matconc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-traces", parents=[shared],
                       help="fuzz every proven trace inequality")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--dims", type=str, default="1..8")
    p.add_argument("--kinds", type=str, default=None)
    p.add_argument("--ineqs", type=str, default=None)
    p.add_argument("--scale", type=float, default=1.0)
    p.set_defaults(func=cmd_verify_traces)

    p = sub.add_parser("bound", parents=[shared], help="tabulate closed-form tail bounds")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--sigma-sq", dest="sigma_sq", type=float, default=1.0)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--norm1", type=float, default=None)
    p.add_argument("--norm-inf", dest="norm_inf", type=float, default=None)
    p.add_argument("--model", type=str, default=None)
    p.add_argument("--t", type=str, default="0:3:0.25")
    p.add_argument("--clamp", action="store_true",
                   help="clamp bounds to 1 for probability display")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("mc-tail", parents=[shared],
                       help="empirical tail versus bounds (config-driven)")
    p.set_defaults(func=cmd_mc_tail)

    p = sub.add_parser("dobrushin", parents=[shared],
                       help="interdependence matrix, norms, and contraction report")
    p.add_argument("--model", type=str, default=None)
    p.add_argument("--kmax", type=int, default=20)
    p.set_defaults(func=cmd_dobrushin)

    p = sub.add_parser("conjecture", parents=[shared], help="counterexample search")
    p.add_argument("--ineq", type=str, default="expconj")
    p.add_argument("--entry", type=str, default=None)
    p.add_argument("--dims", type=str, default="2..6")
    p.add_argument("--budget", type=int, default=10000)
    p.set_defaults(func=cmd_conjecture)

    p = sub.add_parser("report", parents=[shared], help="summarize emitted artifacts")
    p.add_argument("--inputs", type=str, default=".")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
