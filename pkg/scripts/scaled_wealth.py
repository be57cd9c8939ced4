#!/usr/bin/env python3
"""Compound-growth experiment: re-scale the trade caps and V window by
window in proportion to realized profit and record how the cumulative
scale factor (a proxy for working capital) evolves for several values of
the reinvestment fraction beta.

Writes a tidy CSV (one row per window per beta) for external plotting.
"""

import argparse
import csv
import sys
from fractions import Fraction

from lyaptrade import (BudgetMode, CostFunction, MarketSpec,
                       PriceDistribution, StockSpec, TraderParams,
                       scaled_windows_run)


def benchmark_market(p_lo, p_hi):
    spec = MarketSpec((StockSpec(0, 1, p_hi, CostFunction(), CostFunction()),),
                      BudgetMode())
    dist = PriceDistribution(((p_lo,), (p_hi,)),
                             (Fraction(1, 2), Fraction(1, 2)))
    return spec, dist


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--betas", type=float, nargs="+",
                    default=[0.0, 0.05, 0.1, 0.2])
    ap.add_argument("--v", type=int, default=50)
    ap.add_argument("--frame", type=int, default=4)
    ap.add_argument("--frames-per-window", type=int, default=250)
    ap.add_argument("--windows", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    args = ap.parse_args(argv)

    spec, dist = benchmark_market(100, 200)
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(out)
    w.writerow(["beta", "window", "profit_per_slot", "scale"])
    for beta in args.betas:
        rows = scaled_windows_run(spec, TraderParams(V=args.v),
                                  Fraction(beta).limit_denominator(1000),
                                  args.frame, args.frames_per_window,
                                  args.windows, dist, seed=args.seed)
        for i, (rate, scale) in enumerate(rows):
            w.writerow([beta, i, f"{float(rate):.6f}", f"{float(scale):.6f}"])
    if out is not sys.stdout:
        out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
