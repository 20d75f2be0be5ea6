"""Command-line front end for the experiment pipeline.

Subcommands: ``solve`` (one mesh), ``converge`` (refinement ladder),
``sweep-pml`` (PML-strength robustness), ``export-mode`` (field and
decay-profile grids), ``diagnose-pml`` (layer truncation diagnostics).
Every run reads one JSON config; outputs are CSV files plus a
``meta.json`` echo of the configuration.
"""

from __future__ import annotations

import argparse
import math
import os
from dataclasses import replace

import numpy as np

from .experiments import (
    evanescence_ratios,
    export_profile,
    load_config,
    mesh_for_hmax,
    pml_robustness_sweep,
    run_experiment,
    solve_level,
)
from .eigensolver import mode_field
from .pml import ModeExponents, dtn_coth_deviation, hz_lower_bound_check, sigma_integral
from .reporting import (
    write_eigenvalue_csv,
    write_field_csv,
    write_meta,
    write_profile_csv,
    write_report_csv,
    write_sweep_csv,
)


def _common_flags(p):
    p.add_argument("--config", required=True, help="experiment JSON document")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the solver's starting-vector seed")
    p.add_argument("--threads", type=int, default=None,
                   help="number of shift solves run in parallel")
    p.add_argument("--shifts", default=None,
                   help="comma-separated shift list overriding the config")


def _load(args):
    cfg = load_config(args.config)
    solver = cfg.solver
    if args.seed is not None:
        solver = replace(solver, seed=args.seed)
    if args.threads is not None:
        solver = replace(solver, threads=args.threads)
    if args.shifts is not None:
        shifts = tuple(float(s) for s in args.shifts.split(","))
        solver = replace(solver, shifts=shifts)
    return replace(cfg, solver=solver)


def _outdir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_solve(args):
    cfg = _load(args)
    hmax = args.hmax if args.hmax is not None else cfg.ladder[0]
    out = _outdir(args)
    level = solve_level(cfg, hmax)
    write_eigenvalue_csv(level.pairs, level.filtered,
                         os.path.join(out, "eigenvalues.csv"))
    write_meta(cfg, os.path.join(out, "meta.json"), timings=[level.seconds],
               extra={"hmax": hmax, "n_dofs": int(level.dofs.n_dofs)})
    for pv in level.filtered:
        print(f"alpha = {pv.alpha.real:+.6f} {pv.alpha.imag:+.3e}i   "
              f"residual = {pv.residual:.2e}")
    return 0


def cmd_converge(args):
    cfg = _load(args)
    if args.ladder is not None:
        cfg = replace(cfg, ladder=tuple(float(h) for h in args.ladder.split(",")))
    out = _outdir(args)
    report = run_experiment(cfg)
    write_report_csv(report, os.path.join(out, "report.csv"))
    write_meta(cfg, os.path.join(out, "meta.json"), timings=report.timings,
               extra={"config_hash": report.config_hash})
    for track in report.modes:
        print(f"{track.label}: alphas "
              + " ".join(f"{a.real:.4f}{a.imag:+.1e}i" for a in track.alphas))
        if track.alpha_orders:
            print("  orders " + " ".join(f"{o:.2f}" for o in track.alpha_orders))
    return 0


def cmd_sweep_pml(args):
    cfg = _load(args)
    out = _outdir(args)
    multipliers = [float(t) for t in args.multipliers.split(",")]
    hmax = args.hmax if args.hmax is not None else 0.03125
    rows = pml_robustness_sweep(cfg, multipliers, hmax=hmax)
    write_sweep_csv(rows, os.path.join(out, "sweep.csv"))
    write_meta(cfg, os.path.join(out, "meta.json"),
               extra={"multipliers": multipliers, "hmax": hmax})
    for r in rows:
        mark = " [flagged]" if r["flagged"] else ""
        deltas = " ".join(f"{d:.3e}" for d in r["deltas"])
        print(f"t={r['multiplier']:<6g} strength={r['strength']:<8g} "
              f"deltas: {deltas}{mark}")
    return 0


def cmd_export_mode(args):
    cfg = _load(args)
    hmax = args.hmax if args.hmax is not None else cfg.ladder[-1]
    out = _outdir(args)
    os.makedirs(os.path.join(out, "modes"), exist_ok=True)
    level = solve_level(cfg, hmax)
    n1, n2 = cfg.field_grid
    for i, pv in enumerate(level.filtered):
        name = f"mode{i}_re{pv.alpha.real:.4f}"
        x1, x2, U = mode_field(pv, level.mesh, level.dofs, (n1, n2))
        write_field_csv(x1, x2, U, os.path.join(out, "modes", f"{name}.csv"))
        px2, prof = export_profile(pv, level.mesh, level.dofs,
                                   cfg.profile_samples)
        write_profile_csv(px2, prof, os.path.join(out, f"profile_{name}.csv"))
        ev = evanescence_ratios(pv, level.mesh, level.dofs,
                                cfg.domain.medium_half_height)
        print(f"{name}: decay at h0+0.3 = {ev['ratio_to_max']:.3f} of profile max")
    write_meta(cfg, os.path.join(out, "meta.json"),
               extra={"hmax": hmax, "n_modes": len(level.filtered)})
    return 0


def cmd_diagnose_pml(args):
    cfg = _load(args)
    out = _outdir(args)
    sigma = sigma_integral(cfg.pml, "plus")
    rows = []
    for n in range(-args.n_orders, args.n_orders + 1):
        exps = ModeExponents(k=cfg.k, alpha=args.alpha, n=n,
                             period=cfg.domain.period)
        beta = exps.beta_n
        if abs(beta) < 1e-12:
            continue
        for t in (0.25, 0.5, 1.0, 2.0):
            dev = dtn_coth_deviation(exps, t * sigma)
            rows.append((n, beta, t, dev))
    path = os.path.join(out, "dtn_deviation.csv")
    with open(path, "w") as fh:
        fh.write("n,re_beta,im_beta,sigma_multiplier,deviation\n")
        for n, beta, t, dev in rows:
            fh.write(f"{n},{beta.real!r},{beta.imag!r},{t!r},{dev!r}\n")

    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    M = 4.0
    delta_pml = args.delta_pml
    k = cfg.k
    n_ok = 0
    samples = []
    for _ in range(args.samples):
        if rng.random() < 0.5:
            a = rng.uniform(0, max(k - (M - 1) * delta_pml - 1e-9, 0))
        else:
            a = rng.uniform(k + (M - 1) * delta_pml + 1e-9, 4 * k)
        z = complex(a * (1 if rng.random() < 0.5 else -1),
                    rng.uniform(-delta_pml, delta_pml) * 0.999)
        mag = rng.uniform(1.0, 10.0)
        res = hz_lower_bound_check(k, z, mag * complex(math.cos(math.pi / 4),
                                                       math.sin(math.pi / 4)),
                                   delta_pml, M)
        samples.append((z, mag, res))
        n_ok += res["ok"]
    path = os.path.join(out, "hz_check.csv")
    with open(path, "w") as fh:
        fh.write("re_z,im_z,abs_sigma,log_lhs,log_rhs,ok\n")
        for z, mag, res in samples:
            fh.write(f"{z.real!r},{z.imag!r},{mag!r},"
                     f"{res['log_lhs']!r},{res['log_rhs']!r},{int(res['ok'])}\n")
    print(f"hz lower bound held on {n_ok}/{args.samples} samples")
    write_meta(cfg, os.path.join(out, "meta.json"),
               extra={"hz_ok": n_ok, "hz_samples": args.samples})
    return 0 if n_ok == args.samples else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pwmodes",
        description="Propagating modes of open periodic waveguides",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one mesh and list eigenvalues")
    _common_flags(p)
    p.add_argument("--hmax", type=float, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("converge", help="run the refinement ladder")
    _common_flags(p)
    p.add_argument("--ladder", default=None,
                   help="comma-separated hmax ladder overriding the config")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("sweep-pml", help="PML strength robustness sweep")
    _common_flags(p)
    p.add_argument("--multipliers", default="0.25,0.5,1")
    p.add_argument("--hmax", type=float, default=None)
    p.set_defaults(func=cmd_sweep_pml)

    p = sub.add_parser("export-mode", help="export mode fields and profiles")
    _common_flags(p)
    p.add_argument("--hmax", type=float, default=None)
    p.set_defaults(func=cmd_export_mode)

    p = sub.add_parser("diagnose-pml", help="layer truncation diagnostics")
    _common_flags(p)
    p.add_argument("--alpha", type=float, default=0.25,
                   help="quasimomentum at which orders are evaluated")
    p.add_argument("--n-orders", type=int, default=6)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--delta-pml", type=float, default=0.05)
    p.set_defaults(func=cmd_diagnose_pml)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
