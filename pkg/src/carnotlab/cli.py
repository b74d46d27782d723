"""Command-line entry point.

Subcommands: lambda, trace-check, kernel, simulate, rp-check, pp-check,
iso-check, identities.  Every run echoes its fully resolved configuration
(including the active compute backend) into the output, floats are printed
at 17 significant digits, and reruns with identical flags and seed produce
byte-identical files.  Exit codes: 0 all checks passed, 2 passed with soft
warnings, 1 failures or errors.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ._fastpath import BACKEND
from .calculus import (gamma_identity_residual, polynomial_corpus,
                       sample_points, verify_ad_lemma, verify_commutation,
                       verify_scaling)
from .errors import CarnotLabError
from .groups import resolve_group
from .heat import KernelEvaluator
from .mc import SCHEMES, MCConfig, bias_diagnostic, resolve_scheme, sample_endpoint
from .serialize import csv_text, dumps_json, write_csv, write_json
from .spectral import (GridConfig, bound_check, compute_M_mc,
                       compute_M_quadrature, sharpness_probe,
                       trace_identity_check)
from . import inequalities as ineq

__all__ = ["main"]

PASS, FAIL, WARN = 0, 1, 2


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _mc_config(args):
    return MCConfig(seed=args.seed, n_samples=args.samples,
                    substeps=args.substeps, scheme=args.scheme)


def _echo(args, command, spec, **extra):
    out = {"command": command, "group": spec.name, "backend": BACKEND}
    for key in ("method", "t", "seed", "samples", "substeps", "scheme", "emit"):
        if hasattr(args, key):
            out[key] = getattr(args, key)
    out.update(extra)
    return out


def _emit(args, document):
    text = dumps_json(document)
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text)
        print(f"wrote {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _resolve_constant(spec, args):
    """Lambda for the certificates: computed when a kernel exists, else Q/2."""
    choice = args.constant
    if choice == "auto":
        choice = "computed" if KernelEvaluator.supports(spec) else "bound"
    if choice == "bound":
        return ineq.default_lambda(spec)
    report = compute_M_mc(spec, _mc_config(args))
    return report.lam, ineq.LAMBDA_COMPUTED


def _case_outputs(args, command, cases, config):
    """Per-case JSON certificates plus a summary CSV, per the output contract."""
    header = ["case", "lhs", "rhs", "slack", "pass"]
    rows = [[cid, c.lhs, c.rhs, c.slack, c.passed] for cid, c in cases]
    if args.output_dir:
        os.makedirs(args.output_dir, exist_ok=True)
        for cid, cert in cases:
            write_json(os.path.join(args.output_dir, f"{cid}.json"),
                       {"config": config, "certificate": cert.to_dict()})
        path = os.path.join(args.output_dir, "summary.csv")
        write_csv(path, header, rows, preamble=config)
        print(f"wrote {len(cases)} certificates and {path}", file=sys.stderr)
    else:
        document = {"config": config,
                    "certificates": [c.to_dict() for _, c in cases]}
        sys.stdout.write(dumps_json(document))
    npass = sum(c.passed for _, c in cases)
    print(f"{npass}/{len(cases)} certificates pass", file=sys.stderr)
    return PASS if npass == len(cases) else FAIL


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------

def _cmd_lambda(args):
    spec = resolve_group(args.group)
    if not KernelEvaluator.supports(spec):
        document = {
            "config": _echo(args, "lambda", spec),
            "error": (f"UnsupportedGroup: no closed heat kernel for {spec.name}; "
                      "only the rigorous bracket is available"),
            "bracket": {"lower": spec.Q / (2.0 * spec.d), "upper": spec.Q / 2.0},
        }
        _emit(args, document)
        return FAIL
    if args.method == "mc":
        report = compute_M_mc(spec, _mc_config(args))
    else:
        report = compute_M_quadrature(spec, GridConfig())
    checks = bound_check(report)
    document = {"config": _echo(args, "lambda", spec), "report": report.to_dict()}
    code = PASS if checks["pass"] else FAIL
    if args.probe:
        probe = sharpness_probe(spec, report, _mc_config(args))
        document["sharpness_probe"] = probe
        if code == PASS and not probe["pass"]:
            code = WARN
    if args.emit == "csv":
        rows = [["lambda", report.lam], ["trace", report.trace],
                ["trace_target", 0.5 * report.Q],
                ["Q", report.Q], ["d", report.d],
                ["bounds_pass", checks["pass"]]]
        for i in range(report.M.shape[0]):
            for j in range(report.M.shape[1]):
                rows.append([f"M_{i + 1}_{j + 1}", report.M[i, j]])
        text = csv_text(["key", "value"], rows, preamble=document["config"])
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(text)
            print(f"wrote {args.output}", file=sys.stderr)
        else:
            sys.stdout.write(text)
    else:
        _emit(args, document)
    return code


def _cmd_trace_check(args):
    spec = resolve_group(args.group)
    detail = trace_identity_check(spec, args.t, _mc_config(args),
                                  method=args.method, detail=True)
    _emit(args, {"config": _echo(args, "trace-check", spec), "check": detail})
    return PASS if detail["pass"] else FAIL


def _cmd_kernel(args):
    spec = resolve_group(args.group)
    ev = KernelEvaluator(spec)
    pts = [np.asarray(p, dtype=float) for p in (args.point or [])]
    for p in pts:
        if p.size != spec.dim:
            raise CarnotLabError(
                f"--point needs {spec.dim} coordinates for {spec.name}, got {p.size}")
    if args.grid or not pts:
        base = sample_points(spec, 8, seed=4711, radius=1.0)
        pts.extend([np.zeros(spec.dim), *base])
    pts = np.asarray(pts)
    p, grads, _ = ev.kernel_and_log_gradient_batch(args.t, pts, hat=True)
    res, _ = ev.kernel_pde_residual_batch(args.t, pts)
    names = list(spec.names)
    header = (["t"] + names + ["p_t"]
              + [f"Vhat{i + 1}_ln_p" for i in range(spec.d)] + ["pde_residual"])
    rows = [[args.t, *pts[k].tolist(), p[k], *grads[k].tolist(), res[k]]
            for k in range(pts.shape[0])]
    config = _echo(args, "kernel", spec, points=len(rows))
    if args.emit == "json":
        _emit(args, {"config": config, "header": header, "rows": rows})
    else:
        text = csv_text(header, rows, preamble=config)
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(text)
            print(f"wrote {args.output}", file=sys.stderr)
        else:
            sys.stdout.write(text)
    return PASS


def _cmd_simulate(args):
    spec = resolve_group(args.group)
    config = _echo(args, "simulate", spec,
                   scheme=resolve_scheme(spec, args.scheme))
    if args.bias_check:
        report = bias_diagnostic(spec, args.t, _mc_config(args))
        _emit(args, {"config": config, "bias_diagnostic": report})
        return PASS
    batch = sample_endpoint(spec, args.t, _mc_config(args))
    header = ["sample"] + list(spec.names)
    rows = [[k, *batch.points[k].tolist()] for k in range(len(batch))]
    text = csv_text(header, rows, preamble=config)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
        print(f"wrote {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return PASS


def _cmd_identities(args):
    spec = resolve_group(args.group)
    corpus = polynomial_corpus(spec, count=args.count)
    pts = sample_points(spec, 5, seed=911)
    sym_tol, pde_tol = 1e-9, 1e-6
    worst = {"scaling": 0.0, "commutation": 0.0, "ad_lemma": 0.0, "gamma": 0.0}
    for f in corpus:
        worst["scaling"] = max(worst["scaling"],
                               verify_scaling(spec, 0.7, 2.0, f).max_abs_coeff())
        worst["commutation"] = max(worst["commutation"],
                                   verify_commutation(spec, 0.7, f).max_abs_coeff())
        worst["gamma"] = max(worst["gamma"],
                             gamma_identity_residual(spec, f).max_abs_coeff())
        for g in pts:
            worst["ad_lemma"] = max(worst["ad_lemma"],
                                    abs(verify_ad_lemma(spec, 1.0, g, f)))
    ok = all(v < sym_tol for v in worst.values())
    document = {"config": _echo(args, "identities", spec,
                                corpus=len(corpus), tolerance=sym_tol),
                "residuals": worst}
    if KernelEvaluator.supports(spec):
        ev = KernelEvaluator(spec)
        grid = sample_points(spec, 25, seed=2718, radius=1.2)
        pde_max = 0.0
        for t in (0.25, 1.0, 4.0):
            res, _ = ev.kernel_pde_residual_batch(t, grid)
            pde_max = max(pde_max, float(np.abs(res).max()))
        document["pde_residual"] = {"max": pde_max, "tolerance": pde_tol,
                                    "points": int(grid.shape[0]), "t": [0.25, 1.0, 4.0]}
        ok = ok and pde_max < pde_tol
    else:
        document["pde_residual"] = {"skipped": f"no kernel evaluator for {spec.name}"}
    document["pass"] = ok
    _emit(args, document)
    return PASS if ok else FAIL


def _cmd_rp_check(args):
    spec = resolve_group(args.group)
    lam, provenance = _resolve_constant(spec, args)
    corpus = polynomial_corpus(spec, count=args.count)
    pts = sample_points(spec, args.npoints)
    config = _echo(args, "rp-check", spec, constant=lam,
                   constant_provenance=provenance, count=args.count,
                   npoints=args.npoints)
    cases = []
    for t in args.t:
        batch = None
        if args.method == "mc":
            batch = sample_endpoint(spec, t, _mc_config(args))
        for fi, f in enumerate(corpus):
            for gi, g in enumerate(pts):
                if args.method == "mc":
                    cert = ineq.reverse_poincare_mc(
                        spec, t, g, f, lam, _mc_config(args),
                        provenance=provenance, batch=batch)
                else:
                    cert = ineq.reverse_poincare_exact(
                        spec, t, g, f, lam, provenance=provenance)
                cases.append((f"rp-t{t:g}-f{fi}-g{gi}", cert))
    return _case_outputs(args, "rp-check", cases, config)


def _cmd_pp_check(args):
    spec = resolve_group(args.group)
    lam, provenance = _resolve_constant(spec, args)
    config = _echo(args, "pp-check", spec, constant=lam,
                   constant_provenance=provenance)
    cases = []
    for t in args.t:
        cert = ineq.pseudo_poincare_check(spec, t, lam, _mc_config(args),
                                          provenance=provenance)
        cases.append((f"pp-t{t:g}", cert))
    return _case_outputs(args, "pp-check", cases, config)


def _cmd_iso_check(args):
    spec = resolve_group(args.group)
    lam, provenance = _resolve_constant(spec, args)
    config = _echo(args, "iso-check", spec, constant=lam,
                   constant_provenance=provenance, sizes=args.sizes)
    cases = []
    for a in args.sizes:
        box = ineq.BoxSet([a] * spec.dim)
        cert = ineq.isoperimetric_check(spec, box, lam, provenance=provenance)
        cases.append((f"iso-cube{a:g}", cert))
    return _case_outputs(args, "iso-check", cases, config)


# ---------------------------------------------------------------------------
# Parser.
# ---------------------------------------------------------------------------

def _build_parser():
    top = argparse.ArgumentParser(
        prog="carnotlab",
        description="Numerical laboratory for heat semigroups on Carnot groups.")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, method=None, t=None, multi_t=None):
        p.add_argument("--group", required=True,
                       help="preset name (abelian-3, heisenberg-1, heisenberg-2, "
                            "htype-2-1, engel) or a group spec JSON file")
        p.add_argument("--seed", type=int, default=7)
        p.add_argument("--samples", type=int, default=20000)
        p.add_argument("--substeps", type=int, default=256)
        p.add_argument("--scheme", choices=("auto",) + SCHEMES, default="auto")
        if method:
            p.add_argument("--method", choices=method, default=method[0])
        if t is not None:
            p.add_argument("--t", type=float, default=t)
        if multi_t is not None:
            p.add_argument("--t", type=_floats, default=multi_t,
                           help="comma-separated list of times")

    p = sub.add_parser("lambda", help="sharp constant from the spectral matrix M")
    common(p, method=("mc", "quad"))
    p.add_argument("--probe", action="store_true",
                   help="also run the soft sharpness probe (warn exit 2 on miss)")
    p.add_argument("--emit", choices=("json", "csv"), default="json")
    p.add_argument("--output")
    p.set_defaults(run=_cmd_lambda)

    p = sub.add_parser("trace-check", help="trace identity against Q/2t")
    common(p, method=("mc", "quad"), t=1.0)
    p.add_argument("--output")
    p.set_defaults(run=_cmd_trace_check)

    p = sub.add_parser("kernel", help="heat kernel values, log-gradients, PDE residual")
    common(p, t=1.0)
    p.add_argument("--point", action="append", type=_floats,
                   help="explicit evaluation point (repeatable)")
    p.add_argument("--grid", action="store_true",
                   help="use the built-in point grid even when --point is given")
    p.add_argument("--emit", choices=("csv", "json"), default="csv")
    p.add_argument("--output")
    p.set_defaults(run=_cmd_kernel)

    p = sub.add_parser("simulate", help="diffusion endpoints as CSV")
    common(p, t=1.0)
    p.add_argument("--bias-check", action="store_true",
                   help="emit the Richardson bias diagnostic instead of endpoints")
    p.add_argument("--output")
    p.set_defaults(run=_cmd_simulate)

    p = sub.add_parser("identities", help="symbolic lemma suite and kernel PDE grid")
    common(p)
    p.add_argument("--count", type=int, default=12, help="corpus size")
    p.add_argument("--output")
    p.set_defaults(run=_cmd_identities)

    for name, runner, extra in (
            ("rp-check", _cmd_rp_check, "reverse Poincare certificates"),
            ("pp-check", _cmd_pp_check, "pseudo-Poincare certificate"),
            ("iso-check", _cmd_iso_check, "isoperimetric certificates")):
        p = sub.add_parser(name, help=extra)
        if name == "rp-check":
            common(p, method=("exact", "mc"), multi_t=[0.25, 1.0, 4.0])
            p.add_argument("--count", type=int, default=8, help="corpus size")
            p.add_argument("--npoints", type=int, default=3,
                           help="sample base points per (f, t)")
        elif name == "pp-check":
            common(p, multi_t=[0.5])
        else:
            common(p)
            p.add_argument("--sizes", type=_floats, default=[0.5, 1.0, 2.0],
                           help="comma-separated cube half-widths")
        p.add_argument("--constant", choices=("auto", "computed", "bound"),
                       default="auto",
                       help="Lambda source: spectral estimate or the Q/2 bound")
        p.add_argument("--output-dir",
                       help="write per-case JSON and summary.csv here")
        p.set_defaults(run=runner)

    return top


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.run(args)
    except CarnotLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return FAIL


if __name__ == "__main__":
    sys.exit(main())
