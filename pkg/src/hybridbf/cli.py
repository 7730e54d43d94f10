"""Command-line entry point: ``link``, ``system`` and ``selftest``.

Exit codes: 0 success, 1 runtime failure (or a failed self-test), 2 invalid
configuration.  Every CSV starts with two ``#`` metadata lines; the second
one carries the wall-clock timestamp and is the only line that differs
between identical reruns.
"""
import argparse
import csv
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
import json
import math
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .errors import ConfigurationError
from .linksim import (TRACE_HEADER, audit_causality, run_ab_comparison, run_link_trial,
                      run_trajectory_test)
from .phy.iq import IqWriter
from .seeding import TRIAL, derive_seed
from .syssim import VARIANTS, run_system_eval

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _metadata(cfg, command):
    first = (f"# hybridbf {__version__} command={command} mode={cfg.run.mode} "
             f"seed={cfg.run.seed} config_sha256={cfg.config_hash()}")
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return [first, f"# timestamp={stamp}"]


def write_csv(path, header, rows, meta):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in meta:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def read_csv_body(path):
    """Lines of a CSV written by this tool, without the timestamp line."""
    with open(path, encoding="utf-8") as fh:
        return [ln for ln in fh if not ln.startswith("# timestamp=")]


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload, cfg, command):
    meta = {"version": __version__, "command": command, "seed": cfg.run.seed,
            "config_sha256": cfg.config_hash(),
            "timestamp": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_safe({"metadata": meta, **payload}), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _workers(cfg):
    return cfg.run.workers or os.cpu_count() or 1


def _ab_job(args):
    scenario, seed, subframes, latency, window, numerology = args
    r = run_ab_comparison(scenario, seed, subframes, latency, window, numerology=numerology)
    return (seed, r.hybrid_snr_db, r.baseline_snr_db, r.gain_db, r.oracle_gain_db, r.checksums_match)


def cmd_link(cfg, out):
    scenario = cfg.link_scenario()
    latency = cfg.latency
    seed = cfg.run.seed
    meta = _metadata(cfg, "link")
    if cfg.run.mode == "ab":
        jobs = [(scenario, derive_seed(seed, TRIAL, i), cfg.run.subframes, latency, cfg.link.window,
                 cfg.numerology) for i in range(cfg.run.trials)]
        workers = min(_workers(cfg), len(jobs))
        if workers > 1:
            with ProcessPoolExecutor(workers) as ex:
                rows = list(ex.map(_ab_job, jobs))
        else:
            rows = [_ab_job(j) for j in jobs]
        write_csv(out / "ab.csv", ("seed", "hybrid_snr_db", "baseline_snr_db", "gain_db",
                                   "oracle_gain_db", "checksums_match"), rows, meta)
        gains = np.array([r[3] for r in rows])
        oracle = np.array([r[4] for r in rows])
        write_json(out / "summary.json", {
            "mode": "ab", "trials": len(rows), "window_fraction": cfg.link.window,
            "mean_gain_db": float(np.mean(gains)), "mean_oracle_gain_db": float(np.mean(oracle)),
            "fraction_positive": float(np.mean(gains > 0)),
            "checksums_match": all(r[5] for r in rows)}, cfg, "link")
        return EXIT_OK

    iq = None
    if cfg.run.iq_dump:
        iq = IqWriter(out / "rx.iq", cfg.numerology.sample_rate, seed=seed,
                      config_sha256=cfg.config_hash())
    try:
        sink = None if iq is None else iq.write
        if cfg.run.mode == "trajectory":
            summary = run_trajectory_test(scenario, seed, cfg.run.subframes, latency,
                                          numerology=cfg.numerology, iq_sink=sink)
            rec = summary.record
            extra = {"fraction_tracked": summary.fraction_tracked,
                     "reconvergence_subframes": summary.reconvergence_subframes,
                     "tracking_threshold_db": scenario.tracking_threshold_db}
        else:
            rec = run_link_trial(scenario, latency, cfg.run.subframes, seed,
                                 numerology=cfg.numerology, iq_sink=sink)
            extra = {}
    finally:
        if iq is not None:
            iq.close()
    write_csv(out / "trace.csv", TRACE_HEADER, rec.rows(), meta)
    final = rec.gap_db[-max(1, rec.subframe.size // 10):]
    write_json(out / "summary.json", {
        "mode": cfg.run.mode, "subframes": int(rec.subframe.size),
        "mean_snr_db": rec.mean_snr_db(cfg.link.window), "window_fraction": cfg.link.window,
        "final_gap_db": float(np.median(final)), "valid_fraction": float(rec.valid.mean()),
        "timing_offset": rec.timing_offset, "weights_applied": len(rec.weights),
        "causality_violations": len(audit_causality(rec, latency, cfg.numerology)),
        "checksums": rec.checksums, **extra}, cfg, "link")
    return EXIT_OK


def cmd_system(cfg, out):
    res = run_system_eval(cfg.build_deployment(), cfg.propagation, cfg.run.drops, cfg.run.seed,
                          workers=_workers(cfg), quantize=cfg.deployment.quantize)
    meta = _metadata(cfg, "system")
    for v in VARIANTS:
        x, f = res.cdf(v)
        write_csv(out / f"cdf_{v}.csv", ("rate_bps", "cdf"), zip(x.tolist(), f.tolist()), meta)
    write_json(out / "summary.json", {
        "drops": cfg.run.drops, "samples": {v: int(res.rates[v].size) for v in VARIANTS},
        "mean_rate_bps": res.means, "percentiles_bps": res.percentiles,
        "propagation": vars(cfg.propagation)}, cfg, "system")
    return EXIT_OK


# self-test ----------------------------------------------------------------

def _check_zc(fault):
    from .phy.ofdm import circular_autocorrelation, zadoff_chu
    x = zadoff_chu(25)
    if fault == "zc-sign":
        x = x.copy()
        x[7] = -x[7]
    r = np.abs(circular_autocorrelation(x))
    ok = abs(r[0] - 63) < 1e-9 and r[1:].max() < 1e-9
    return ok, f"|R(0)|={r[0]:.3f} max|R(t!=0)|={r[1:].max():.2e}"


def _check_lpf(fault):
    from .phy.filters import FilterSpec, design_lpf
    spec = FilterSpec()
    d = design_lpf(spec)
    ok = d.ripple_db <= spec.passband_ripple_db and d.stopband_db >= spec.stopband_attenuation_db
    return ok, f"{len(d.taps)} taps ripple={d.ripple_db:.3f} dB stop={d.stopband_db:.1f} dB"


def _check_eigen(fault):
    from .beamtrack import eigen_oracle
    rng = np.random.default_rng(1)
    worst = 0.0
    for n in (6, 12):
        for _ in range(50):
            g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            R = g @ g.conj().T
            a, lam, _ = eigen_oracle(R)
            ref = np.linalg.eigvalsh(R)[-1]
            worst = max(worst, abs(lam - ref) / ref, np.linalg.norm(R @ a - lam * a) / lam)
    return worst < 1e-8, f"worst relative error {worst:.1e}"


def _check_quantizer(fault):
    from .array_rf import RfHardwareModel, quantize_weight
    hw = RfHardwareModel()
    rng = np.random.default_rng(2)
    worst_p, worst_a = 0.0, 0.0
    for _ in range(500):
        w = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        w /= np.linalg.norm(w)
        q = quantize_weight(w, hw)
        dp = np.degrees(np.abs(np.angle(q * np.conj(w))))
        att_w = 20 * np.log10(np.abs(w).max() / np.abs(w))
        att_q = 20 * np.log10(np.abs(q).max() / np.abs(q))
        inside = att_w <= hw.amplitude_range_db
        worst_p = max(worst_p, dp.max())
        if inside.any():
            worst_a = max(worst_a, np.abs(att_w - att_q)[inside].max())
    ok = worst_p <= hw.max_phase_error_deg + 1e-9 and worst_a <= hw.max_amplitude_error_db + 1e-9
    return ok, f"phase err {worst_p:.2f} deg, amplitude err {worst_a:.3f} dB"


def _check_loopback(fault):
    from .phy import ofdm, receiver
    from .phy.numerology import DEFAULT_NUMEROLOGY as num
    rng = np.random.default_rng(3)
    errors, worst = 0, -np.inf
    for t in range(5):
        bits = ofdm.random_bits(rng, num, t, "64qam")
        x, grid = ofdm.build_subframe(bits, "64qam", t, num)
        y = ofdm.ofdm_demodulate(x, num.symbols_per_subframe, num)
        eq = receiver.equalize_zf(y, receiver.estimate_channel(y, num), grid.roles, "64qam")
        errors += int(np.count_nonzero(eq.bits != bits))
        worst = max(worst, eq.evm_db)
    return errors == 0 and worst < -40, f"bit errors {errors}, EVM {worst:.1f} dB"


SELFTESTS = (
    ("zadoff-chu autocorrelation", _check_zc),
    ("LPF mask", _check_lpf),
    ("eigen oracle", _check_eigen),
    ("quantizer bounds", _check_quantizer),
    ("OFDM loopback", _check_loopback),
)


def cmd_selftest(fault=None, stream=sys.stdout):
    failed = 0
    t0 = time.perf_counter()
    for name, fn in SELFTESTS:
        try:
            ok, detail = fn(fault)
        except Exception as exc:  # a crashing check counts as a failure
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<28} {detail}", file=stream)
    print(f"{len(SELFTESTS) - failed}/{len(SELFTESTS)} passed in {time.perf_counter() - t0:.1f} s",
          file=stream)
    return EXIT_OK if failed == 0 else EXIT_FAIL


# entry point --------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="hybridbf", description="Hybrid beamforming link/system simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("link", "system"):
        s = sub.add_parser(name)
        s.add_argument("--scenario", required=True, help="scenario config file")
        s.add_argument("--seed", type=lambda v: int(v, 0), help="master seed (overrides [run] seed)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--workers", type=int, help="worker processes (0: all cores)")
        if name == "link":
            s.add_argument("--subframes", type=int)
        else:
            s.add_argument("--drops", type=int)
    st = sub.add_parser("selftest")
    st.add_argument("--inject-fault", choices=("zc-sign",), help=argparse.SUPPRESS)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest(args.inject_fault)
    try:
        cfg = ScenarioConfig.from_string(Path(args.scenario).read_text(encoding="utf-8"),
                                         source=args.scenario, require=False)
        over = {"seed": args.seed, "out": args.out, "workers": args.workers,
                "subframes": getattr(args, "subframes", None), "drops": getattr(args, "drops", None)}
        cfg = cfg.with_overrides(**over).check_required()
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.run.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "scenario.cfg").write_text(cfg.to_string(), encoding="utf-8")
        if args.command == "link":
            return cmd_link(cfg, out)
        return cmd_system(cfg, out)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
