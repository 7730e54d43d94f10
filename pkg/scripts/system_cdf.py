#!/usr/bin/env python3
"""Downlink rate CDFs for conventional and hybrid cells, with and without interference."""
import argparse
import csv
from pathlib import Path

import numpy as np

from hybridbf.syssim import VARIANTS, Deployment, PropagationModel, run_system_eval


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--drops", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-quantize", action="store_true")
    p.add_argument("--out", help="directory for cdf_<variant>.csv files")
    args = p.parse_args()

    res = run_system_eval(Deployment(), PropagationModel(), args.drops, args.seed,
                          workers=args.workers, quantize=not args.no_quantize)
    for v in VARIANTS:
        r = res.rates[v] / 1e6
        print(f"{v:<20} mean {r.mean():7.2f} Mbps  p5 {np.percentile(r, 5):7.2f}  "
              f"p50 {np.median(r):7.2f}  p95 {np.percentile(r, 95):7.2f}")
    gain = res.rates["hybrid"].mean() / res.rates["conventional"].mean() - 1
    print(f"hybrid mean-rate gain with interference: {gain:+.1%}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for v in VARIANTS:
            x, f = res.cdf(v)
            with open(out / f"cdf_{v}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(("rate_bps", "cdf"))
                w.writerows(zip(x, f))


if __name__ == "__main__":
    main()
