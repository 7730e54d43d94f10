#!/usr/bin/env python3
"""Hybrid vs directive-element SNR gain over an ensemble of rich-scattering seeds."""
import argparse

import numpy as np

from hybridbf.linksim import LatencyModel, directive_scenario, run_ab_comparison


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--subframes", type=int, default=400)
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--prototype-latency", action="store_true",
                   help="15 ms update period instead of one update per subframe")
    args = p.parse_args()

    latency = LatencyModel() if args.prototype_latency else LatencyModel.ideal()
    sc = directive_scenario(snr_db=args.snr_db)
    gains, oracle = [], []
    for seed in range(args.seeds):
        r = run_ab_comparison(sc, seed, args.subframes, latency)
        gains.append(r.gain_db)
        oracle.append(r.oracle_gain_db)
        print(f"seed {seed:3d}: gain {r.gain_db:6.2f} dB  oracle {r.oracle_gain_db:6.2f} dB")
    gains, oracle = np.array(gains), np.array(oracle)
    print(f"mean gain {gains.mean():.2f} dB, oracle {oracle.mean():.2f} dB, "
          f"positive {np.mean(gains > 0):.0%}, "
          f"gain range {gains.min():.2f} .. {gains.max():.2f} dB")


if __name__ == "__main__":
    main()
