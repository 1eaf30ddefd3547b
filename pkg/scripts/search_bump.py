#!/usr/bin/env python3
"""Search the power-bump family for a profile with Y < Y_inf by a margin.

Goal: find (a, b) for f(r) = r (1 + a r^2 exp(-b r^2)), n = 3, such that
the estimated Yamabe constant sits at least `--margin` (default 5%)
below the estimated Yamabe constant at infinity, the exhaustion verdict
is converges-positive, and the critical solve's residual is tiny.  A hit
is written to configs/bump.json and the script exits 0; otherwise it
exits 1 LOUDLY, printing the best margin found.

Strategy
--------
1. Coarse screen: over a log-spaced (a, b) grid (both signs of a,
   respecting the positivity constraint a > -b e), compute
   - the first eigenvalue of the conformal Laplacian on a ball
     (a negative value would certify Y < 0 < Y_inf immediately), and
   - the single-ball continuation estimate of Y on B_8.
2. Full evaluation of the most promising candidates (lowest Y screen):
   three-ball exhaustion for Y_est, cylinder-gauge exterior quotient for
   Y_inf_est, concentration verdict, critical residual.

Caveat recorded in the repository notes: every profile in this radial
class (round-sphere cross-section) is globally conformal to a domain of
flat space, which forces the true Y and Y_inf to coincide at the best
Sobolev constant; the search is expected to fail and exists to
demonstrate that honestly.  Run with --help for knobs.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from pathlib import Path

from yamabe_lab import exhaustion, functional, manifold, radial, subcritical
from yamabe_lab.errors import ConvergenceError, MonotonicityError, \
    ProfileError, StabilizationError


def screen(n, a, b, r_max, j=8.0, nodes=1024):
    """Cheap per-candidate numbers: lambda_1 on B_10 and Y on B_8."""
    profile = manifold.power_bump(n, a=a, b=b, r_max=r_max)
    grid = radial.RadialGrid(j=10.0, N=1280)
    lam1, _ = subcritical.first_eigenpair(profile, grid)
    result = subcritical.continue_to_critical(
        profile, radial.RadialGrid(j=j, N=nodes))
    return lam1, result.y_best, result.concentration


def evaluate(n, a, b, r_max, radii, nodes_per_unit, r_in):
    """Full pipeline numbers for one candidate."""
    profile = manifold.power_bump(n, a=a, b=b, r_max=r_max)
    trace = exhaustion.run_exhaustion(profile, radii,
                                      nodes_per_unit=nodes_per_unit)
    exterior = functional.exterior_quotient(profile, r_in)
    verdict = exhaustion.concentration_verdict(trace, R=min(radii) / 2.0)
    rec = trace.largest
    y_est, y_inf = rec.y, exterior.value
    margin = (y_inf - y_est) / abs(y_inf)
    return {
        "a": a, "b": b, "y_est": y_est, "y_inf_est": y_inf,
        "margin": margin, "verdict": verdict.kind,
        "critical_residual": rec.critical_residual,
        "concentration": rec.concentration,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--margin", type=float, default=0.05)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--r-max", type=float, default=1e8)
    ap.add_argument("--top", type=int, default=6,
                    help="candidates promoted to full evaluation")
    ap.add_argument("--out", default="configs/bump.json")
    ap.add_argument("--report", default="configs/bump_search_report.json")
    args = ap.parse_args()

    amps = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
    widths = [0.1, 0.25, 0.5, 1.0, 2.0]
    candidates = []
    for mag, sign, b in itertools.product(amps, (1.0, -1.0), widths):
        a = sign * mag
        if a <= -b * math.e:
            continue  # f would touch zero
        candidates.append((a, b))

    screened = []
    for a, b in candidates:
        try:
            lam1, y_ball, conc = screen(args.n, a, b, args.r_max)
        except (ConvergenceError, ProfileError) as exc:
            print(f"  screen a={a:+.2f} b={b:.2f}: failed ({exc})")
            continue
        print(f"  screen a={a:+.2f} b={b:.2f}: lambda1={lam1:+.4f} "
              f"Y(B_8)={y_ball:.4f} conc={conc}")
        screened.append((y_ball, lam1, a, b))

    screened.sort(key=lambda t: t[0])
    results = []
    for y_ball, lam1, a, b in screened[:args.top]:
        try:
            res = evaluate(args.n, a, b, args.r_max,
                           radii=(2.0, 4.0, 8.0), nodes_per_unit=128,
                           r_in=2.0)
        except (ConvergenceError, MonotonicityError,
                StabilizationError) as exc:
            print(f"  full   a={a:+.2f} b={b:.2f}: failed "
                  f"({type(exc).__name__}: {exc})")
            continue
        print(f"  full   a={a:+.2f} b={b:.2f}: Y={res['y_est']:.4f} "
              f"Y_inf={res['y_inf_est']:.4f} margin={res['margin']:+.4f} "
              f"verdict={res['verdict']}")
        results.append(res)

    Path(args.report).parent.mkdir(parents=True, exist_ok=True)
    Path(args.report).write_text(json.dumps(
        {"margin_required": args.margin, "results": results},
        sort_keys=True, indent=2) + "\n")

    hits = [r for r in results
            if r["margin"] >= args.margin
            and r["verdict"] == "converges-positive"
            and r["critical_residual"] is not None
            and r["critical_residual"] <= 1e-6]
    if hits:
        best = max(hits, key=lambda r: r["margin"])
        config = {
            "profile": {"name": "power_bump", "n": args.n,
                        "r_max": args.r_max,
                        "params": {"a": best["a"], "b": best["b"]}},
            "grid": {"nodes_per_unit": 128},
            "pipeline": {"radii": [2.0, 4.0, 8.0], "r_in": [1.0, 2.0],
                         "compact_radius": 1.0},
        }
        Path(args.out).write_text(json.dumps(config, sort_keys=True,
                                             indent=2) + "\n")
        print(f"FOUND: a={best['a']} b={best['b']} margin={best['margin']:.4f}"
              f" -> wrote {args.out}")
        return 0

    best = max(results, key=lambda r: r["margin"]) if results else None
    print("=" * 72)
    print("SEARCH FAILED: no power-bump profile reached the margin "
          f"Y < Y_inf - {args.margin:.0%}.")
    if best is not None:
        print(f"best margin found: {best['margin']:+.4f} at "
              f"a={best['a']} b={best['b']} "
              f"(Y={best['y_est']:.4f}, Y_inf={best['y_inf_est']:.4f})")
    print("This is the expected outcome: every profile in this radial "
          "class is conformally flat, so Y and Y_inf coincide at the "
          "best Sobolev constant (see notes/decisions.md).")
    print("=" * 72)
    return 1


if __name__ == "__main__":
    sys.exit(main())
