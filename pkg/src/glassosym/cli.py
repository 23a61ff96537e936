"""Command-line entry point: ``glassosym <subcommand> ...``.

Exit codes: 0 success, 2 usage or input error, 3 non-convergence,
4 repair failure, 5 demo assertion failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .diagnose import (
    edge_sets,
    full_report,
    symmetry_sup,
    tolerance_gap_demo,
    divergence_bound,
)
from .errors import (
    CliqueTimeout,
    CliqueTooLarge,
    GlassoError,
    NoConvergence,
    NotPositiveDefinite,
)
from .glasso import GlassoConfig, GlassoFit, fit as glasso_fit
from .linalg import condition_number, read_csv, write_csv
from .models import ar1_model, example1_model, sample, sample_covariance, two_by_two_fixture
from .repair import (
    raw_estimate,
    repair_inversion,
    repair_ipf,
    repair_modified_output,
    verify_properties,
)

EXIT_OK, EXIT_USAGE, EXIT_NOCONV, EXIT_REPAIR, EXIT_DEMO = 0, 2, 3, 4, 5

BOUND_DEMO_P, BOUND_DEMO_N, BOUND_DEMO_SEED = 10, 5, 0
BOUND_DEMO_LAMBDAS = (1e-2, 1e-3, 1e-4)


class UsageError(Exception):
    pass


class DemoFailure(Exception):
    pass


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _manifest(path, args, argv, inputs, outputs, seed=None):
    params = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    _write_json(path, {
        "subcommand": args.command,
        "parameters": params,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": seed,
        "version": __version__,
        "argv": list(argv),
    })


def _read_matrix(path, what):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} file not found: {p}")
    try:
        return read_csv(p)
    except ValueError as exc:
        raise UsageError(f"cannot parse {what} file {p}: {exc}") from None


def _out_dir(path):
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _covariance_from_args(args):
    if args.data is not None:
        rows = _read_matrix(args.data, "data")
        return sample_covariance(rows, divisor=args.divisor), Path(args.data)
    S = _read_matrix(args.S, "S")
    if S.shape[0] != S.shape[1]:
        raise UsageError(f"--S must be square, got {S.shape[0]}x{S.shape[1]}")
    return S, Path(args.S)


def _config(args, lam):
    return GlassoConfig(lam=lam, outer_tol=args.outer_tol, max_sweeps=args.max_sweeps,
                        inner_tol=args.inner_tol)


def _load_fit(fit_dir):
    d = Path(fit_dir)
    meta_path = d / "fit.json"
    if not meta_path.is_file():
        raise UsageError(f"fit.json not found in {d}")
    meta = json.loads(meta_path.read_text())
    sigma = _read_matrix(d / "sigma_hat.csv", "sigma_hat")
    omega = _read_matrix(d / "omega_raw.csv", "omega_raw")
    return GlassoFit(sigma, omega, float(meta["lambda"]), int(meta["sweeps"]), bool(meta["converged"])), meta


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args, argv):
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    if args.model == "ar1":
        if args.p is None or args.p < 2:
            raise UsageError("--p must be at least 2 for --model ar1")
        if not abs(args.phi) < 1.0:
            raise UsageError(f"--phi must satisfy |phi| < 1, got {args.phi}")
        model = ar1_model(args.p, args.phi)
    else:
        model = example1_model()
    out = _out_dir(args.out)
    data = sample(model, args.n, args.seed)
    write_csv(out / "data.csv", data.rows)
    write_csv(out / "true_omega.csv", model.omega)
    _manifest(out / "gen.manifest.json", args, argv, [],
              [out / "data.csv", out / "true_omega.csv"], seed=args.seed)
    return EXIT_OK


def cmd_fit(args, argv):
    S, src = _covariance_from_args(args)
    out = _out_dir(args.out)
    code = EXIT_OK
    try:
        res = glasso_fit(S, _config(args, args.lam))
    except NoConvergence as exc:
        res = exc.partial
        code = EXIT_NOCONV
        print(f"error: {exc}", file=sys.stderr)
    write_csv(out / "S.csv", S)
    write_csv(out / "sigma_hat.csv", res.sigma_hat)
    write_csv(out / "omega_raw.csv", res.omega_raw)
    _write_json(out / "fit.json", {
        "lambda": res.lam, "sweeps": res.sweeps, "converged": res.converged,
        "outer_tol": args.outer_tol, "inner_failures": res.inner_failures,
    })
    outputs = [out / n for n in ("S.csv", "sigma_hat.csv", "omega_raw.csv", "fit.json")]
    _manifest(out / "fit.manifest.json", args, argv, [src], outputs)
    return code


def cmd_diagnose(args, argv):
    fit, _ = _load_fit(args.fit_dir)
    s_path = Path(args.S) if args.S else Path(args.fit_dir) / "S.csv"
    S = _read_matrix(s_path, "S")
    report = full_report(fit, S)
    out = Path(args.out) if args.out else Path(args.fit_dir) / "report.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, report.to_dict())
    _manifest(out.with_name(out.stem + ".manifest.json"), args, argv, [args.fit_dir, s_path], [out])
    return EXIT_OK


def cmd_repair(args, argv):
    fit, meta = _load_fit(args.fit_dir)
    s_path = Path(args.S) if args.S else Path(args.fit_dir) / "S.csv"
    S = _read_matrix(s_path, "S")
    out = _out_dir(args.out)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if args.method == "inversion":
                est = repair_inversion(fit, args.threshold)
            elif args.method == "modified":
                est = repair_modified_output(fit)
            elif args.method == "raw":
                est = raw_estimate(fit)
            else:
                est = repair_ipf(fit, S, tol=args.tol, engine=args.engine)
    except (NotPositiveDefinite, CliqueTooLarge, CliqueTimeout, NoConvergence) as exc:
        print(f"error: repair failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_REPAIR
    outer_tol = float(meta.get("outer_tol", 1e-4))
    outputs = [out / "omega_repaired.csv"]
    write_csv(out / "omega_repaired.csv", est.omega)
    if est.sigma is not None:
        write_csv(out / "sigma_repaired.csv", est.sigma)
        outputs.append(out / "sigma_repaired.csv")
    sidecar = est.sidecar()
    sidecar["claimed_properties"] = sidecar.pop("properties")
    sidecar["properties"] = verify_properties(est, fit, S, outer_tol)
    if est.method == "ipf":
        sidecar["moment_conditions_ok"] = bool(
            sidecar["moment_sigma_gap"] <= max(args.tol, 1e-7) and sidecar["moment_omega_offgraph"] == 0.0
        )
    _write_json(out / "repair.json", sidecar)
    outputs.append(out / "repair.json")
    _manifest(out / "repair.manifest.json", args, argv, [args.fit_dir, s_path], outputs)
    return EXIT_OK


def _grid(args):
    if args.lambdas:
        try:
            lams = [float(x) for x in args.lambdas.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"--lambdas must be comma separated numbers, got {args.lambdas!r}") from None
    else:
        if None in (args.lambda_min, args.lambda_max, args.lambda_step):
            raise UsageError("give --lambdas or all of --lambda-min, --lambda-max, --lambda-step")
        if args.lambda_step <= 0 or args.lambda_max < args.lambda_min:
            raise UsageError("need --lambda-step > 0 and --lambda-max >= --lambda-min")
        count = int(np.floor((args.lambda_max - args.lambda_min) / args.lambda_step + 1e-9)) + 1
        lams = [round(args.lambda_min + k * args.lambda_step, 12) for k in range(count)]
    if not lams:
        raise UsageError("lambda grid is empty")
    if any(lam < 0 for lam in lams):
        raise UsageError("lambda values must be nonnegative")
    return sorted(set(lams))


SWEEP_COLUMNS = ("lambda", "sym_diff_count", "nonzero_offdiag_count", "zero_fraction",
                 "symmetry_sup", "condition_number", "sweeps", "converged", "error")


def sweep_rows(S, lams, cfg_kwargs, warm=True):
    """One summary row per lambda, increasing order, optionally warm started."""
    p = S.shape[0]
    iu = np.triu_indices(p, 1)
    off = ~np.eye(p, dtype=bool)
    rows, prev = [], None
    for lam in lams:
        row = dict.fromkeys(SWEEP_COLUMNS, "")
        row["lambda"] = lam
        try:
            kw = {} if prev is None or not warm else {"w_init": prev.sigma_hat, "beta_init": prev.betas}
            res = glasso_fit(S, GlassoConfig(lam=lam, **cfg_kwargs), **kw)
        except (GlassoError, ValueError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            continue
        raw = res.omega_raw
        row.update(
            sym_diff_count=edge_sets(raw).sym_diff_count,
            nonzero_offdiag_count=int(np.count_nonzero(raw[off])),
            zero_fraction=float(np.mean(raw[iu] == 0.0)) if p > 1 else 0.0,
            symmetry_sup=symmetry_sup(raw),
            sweeps=res.sweeps,
            converged=res.converged,
        )
        try:
            row["condition_number"] = condition_number(res.sigma_hat)
        except GlassoError as exc:
            row["error"] = f"condition_number: {exc}"
        rows.append(row)
        prev = res
    return rows


def cmd_sweep(args, argv):
    lams = _grid(args)
    S, src = _covariance_from_args(args)
    cfg = dict(outer_tol=args.outer_tol, max_sweeps=args.max_sweeps, inner_tol=args.inner_tol)
    rows = sweep_rows(S, lams, cfg, warm=not args.no_warm_start)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    _manifest(out.with_name(out.stem + ".manifest.json"), args, argv, [src], [out])
    return EXIT_OK


def _check(cond, what):
    if not cond:
        raise DemoFailure(what)


def demo_two_by_two():
    fx = two_by_two_fixture()
    res = glasso_fit(fx.S, GlassoConfig(lam=fx.lam))
    print("S =", fx.S.tolist(), " lambda =", fx.lam)
    print("sigma_hat =", res.sigma_hat.tolist())
    print("omega_hat =", res.omega_raw.tolist())
    err = float(np.max(np.abs(res.sigma_hat - fx.sigma_hat)))
    _check(err <= 1e-12, f"sigma_hat off by {err:.3e} (limit 1e-12)")
    d = np.diag(res.omega_raw)
    rel = float(np.max(np.abs(d - np.diag(fx.omega_hat)) / np.diag(fx.omega_hat)))
    _check(rel <= 1e-6, f"omega_hat diagonal relative error {rel:.3e} (limit 1e-6)")
    _check(res.omega_raw[0, 1] == 0.0 and res.omega_raw[1, 0] == 0.0, "omega_hat not diagonal")
    print(f"divergence bound = {divergence_bound(res.sigma_hat):.6g}")


def rank_deficient_covariance():
    """Rank-deficient S: AR(1) with p = 10 observed n = 5 times."""
    return sample_covariance(sample(ar1_model(BOUND_DEMO_P, 0.75), BOUND_DEMO_N, BOUND_DEMO_SEED))


def demo_divergence_bound():
    S = rank_deficient_covariance()
    print(f"S from AR(1) p={BOUND_DEMO_P}, n={BOUND_DEMO_N}, seed={BOUND_DEMO_SEED} (rank deficient)")
    print(f"{'lambda':>10} {'bound':>14} {'max|omega|':>14}")
    prev = -np.inf
    for lam in BOUND_DEMO_LAMBDAS:
        res = glasso_fit(S, GlassoConfig(lam=lam))
        bound = divergence_bound(res.sigma_hat)
        top = float(np.max(np.abs(res.omega_raw)))
        print(f"{lam:>10.0e} {bound:>14.6g} {top:>14.6g}")
        _check(bound > prev, f"bound not increasing at lambda={lam}: {bound} <= {prev}")
        _check(top >= bound - 1e-6, f"max|omega| = {top} below bound {bound} at lambda={lam}")
        prev = bound


def demo_tolerance_gap(t):
    dual, primal = tolerance_gap_demo(t)
    print(f"t = {t}: dual sup error = {dual:.6e}, primal sup error = {primal:.6e}")
    want_d, want_p = 1e-6 / t, 1e6 / (t + 1.0)
    _check(abs(dual - want_d) <= 1e-9 * want_d, f"dual error {dual} != {want_d}")
    _check(abs(primal - want_p) <= 1e-9 * want_p, f"primal error {primal} != {want_p}")


def cmd_demo(args, argv):
    if args.which == "tolerance_gap" and not args.t > 0:
        raise UsageError("--t must be positive")
    try:
        if args.which == "two_by_two":
            demo_two_by_two()
        elif args.which == "lemma":
            demo_divergence_bound()
        else:
            demo_tolerance_gap(args.t)
    except DemoFailure as exc:
        print(f"demo assertion failed: {exc}", file=sys.stderr)
        return EXIT_DEMO
    print("all checks passed")
    if args.out:
        out = _out_dir(args.out)
        _manifest(out / "demo.manifest.json", args, argv, [], [])
    return EXIT_OK


def cmd_replay(args, argv):
    path = Path(args.manifest)
    if not path.is_file():
        raise UsageError(f"manifest not found: {path}")
    return main(json.loads(path.read_text())["argv"])


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_fit_flags(sp):
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV of observations, one row per sample")
    src.add_argument("--S", help="CSV of a precomputed covariance matrix")
    sp.add_argument("--divisor", choices=("n", "n_minus_1"), default="n")
    sp.add_argument("--outer-tol", type=float, default=1e-4)
    sp.add_argument("--inner-tol", type=float, default=1e-7)
    sp.add_argument("--max-sweeps", type=int, default=1000)


def build_parser():
    ap = argparse.ArgumentParser(prog="glassosym", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen", help="sample a dataset from a known model")
    sp.add_argument("--model", choices=("example1", "ar1"), required=True)
    sp.add_argument("--p", type=int)
    sp.add_argument("--phi", type=float, default=0.75)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("fit", help="run the graphical lasso")
    _add_fit_flags(sp)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("diagnose", help="write report.json for a fit directory")
    sp.add_argument("--fit-dir", required=True)
    sp.add_argument("--S", help="covariance CSV (default: S.csv in the fit directory)")
    sp.add_argument("--out", help="report path (default: <fit-dir>/report.json)")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("repair", help="build a symmetric estimate from a fit")
    sp.add_argument("--fit-dir", required=True)
    sp.add_argument("--method", choices=("inversion", "modified", "ipf", "raw"), required=True)
    sp.add_argument("--threshold", type=float, help="hard threshold for inversion (default 1e-3*lambda)")
    sp.add_argument("--engine", choices=("regression", "cliques"), default="regression",
                    help="how ipf computes the constrained MLE")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--S", help="covariance CSV (default: S.csv in the fit directory)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_repair)

    sp = sub.add_parser("sweep", help="fit over a lambda grid and summarize each fit")
    _add_fit_flags(sp)
    sp.add_argument("--lambda-min", type=float)
    sp.add_argument("--lambda-max", type=float)
    sp.add_argument("--lambda-step", type=float)
    sp.add_argument("--lambdas", help="explicit comma separated grid")
    sp.add_argument("--no-warm-start", action="store_true")
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("demo", help="reproduce the counterexample numbers")
    sp.add_argument("which", choices=("two_by_two", "lemma", "tolerance_gap"))
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--out", help="directory for the run manifest")
    sp.set_defaults(func=cmd_demo)

    sp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    sp.add_argument("manifest")
    sp.set_defaults(func=cmd_replay)
    return ap


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (GlassoError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
