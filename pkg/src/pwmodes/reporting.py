"""Deterministic CSV and metadata writers for experiment outputs.

Floats are written with ``repr`` (shortest round-trip form) so that a
fixed config and seed reproduce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
from dataclasses import asdict

import numpy as np
import scipy

from . import __version__


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x))


def write_report_csv(report, path) -> None:
    """Table 1..4 style schema: one row per (mode, level)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "hmax", "re_alpha", "im_alpha",
                    "alpha_error", "alpha_order", "l2_error", "l2_order"])
        for track in report.modes:
            err_seen = 0
            for lvl, hmax in enumerate(report.hmax_values):
                a = track.alphas[lvl]
                err = track.alpha_errors[lvl]
                l2 = track.l2_errors[lvl]
                a_ord = l_ord = None
                if err is not None:
                    if err_seen > 0:
                        a_ord = track.alpha_orders[err_seen - 1]
                        l_ord = track.l2_orders[err_seen - 1]
                    err_seen += 1
                w.writerow([
                    track.label, _fmt(hmax), _fmt(a.real), _fmt(a.imag),
                    _fmt(err), _fmt(a_ord), _fmt(l2), _fmt(l_ord),
                ])


def write_eigenvalue_csv(pairs, filtered, path) -> None:
    """All certified eigenvalues with residual, origin shift, filter verdict."""
    filtered_alphas = {pv.alpha for pv in filtered}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_alpha", "im_alpha", "residual",
                    "shift_re", "shift_im", "filtered"])
        for p in pairs:
            w.writerow([
                _fmt(p.alpha.real), _fmt(p.alpha.imag), _fmt(p.residual),
                _fmt(p.shift.real), _fmt(p.shift.imag),
                int(p.alpha in filtered_alphas),
            ])


def write_field_csv(x1, x2, U, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "re_u", "im_u", "abs_u"])
        for j, y in enumerate(x2):
            for i, x in enumerate(x1):
                u = U[j, i]
                w.writerow([_fmt(x), _fmt(y), _fmt(u.real), _fmt(u.imag),
                            _fmt(abs(u))])


def write_profile_csv(x2, prof, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x2", "max_abs_u"])
        for y, v in zip(x2, prof):
            w.writerow([_fmt(y), _fmt(v)])


def write_sweep_csv(rows, path) -> None:
    n_tracks = max((len(r["alphas"]) for r in rows), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["multiplier", "strength", "flagged"]
        for i in range(n_tracks):
            header += [f"re_alpha_{i}", f"im_alpha_{i}", f"delta_{i}"]
        w.writerow(header)
        for r in rows:
            row = [_fmt(r["multiplier"]), _fmt(r["strength"]), int(r["flagged"])]
            for i in range(n_tracks):
                if i < len(r["alphas"]):
                    a = r["alphas"][i]
                    row += [_fmt(a.real), _fmt(a.imag), _fmt(r["deltas"][i])]
                else:
                    row += ["", "", ""]
            w.writerow(row)


def write_meta(cfg, path, timings=None, extra=None) -> None:
    """Config echo plus versions and timings (timings are not deterministic)."""
    doc = {
        "config": asdict(cfg),
        "versions": {
            "python": sys.version.split()[0],
            "platform": platform.platform(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pwmodes": __version__,
        },
        "timings_seconds": timings or [],
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
