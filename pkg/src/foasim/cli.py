"""Command line entry point: ``foasim {pattern,run,sweep,feednet,validate}``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import PRESETS, ConfigError, load_config
from .feednet import FeedNetSpec, narrowband_check, size_feednet, write_report
from .pattern import export_grid, grating_lobe_report
from .scenario import (SWEEP_PARAMETERS, build_model, format_diff, monte_carlo_boresight, pattern_grid,
                       run_scenario, sweep, write_sweep)

log = logging.getLogger("foasim")


def _default_out() -> Path:
    return Path("runs") / time.strftime("%Y%m%d-%H%M%S")


def _load(args):
    cfg = load_config(args.config)
    over = {}
    if getattr(args, "resolution", None):
        over["grid.resolution"] = args.resolution
    if getattr(args, "seed", None) is not None:
        over["monte_carlo.seed"] = args.seed
    if getattr(args, "phi_bar", None) is not None:
        over["monte_carlo.phi_bar_deg"] = args.phi_bar
    if getattr(args, "replications", None):
        over["monte_carlo.replications"] = args.replications
    return cfg.replace(**over) if over else cfg


def cmd_pattern(args) -> int:
    cfg = _load(args)
    model = build_model(cfg)
    grid = pattern_grid(model)
    out = Path(args.out or _default_out()) / cfg.scenario
    out.mkdir(parents=True, exist_ok=True)
    extra = {"config_hash": cfg.digest(), "beam_radius_km": model.R_km}
    if cfg.monte_carlo.phi_bar_deg > 0:
        extra["monte_carlo"] = monte_carlo_boresight(model)
    csv_path, _ = export_grid(grid, out / "pattern.csv", extra)
    lobe = grating_lobe_report(grid, 1.5 * math.degrees(model.lam / max(model.foa.array.extent, model.lam)))
    print(f"{cfg.scenario}: boresight {grid.boresight_dbi:.2f} dBi, peak {grid.peak_dbi:.2f} dBi, "
          f"beam radius {model.R_km:.3f} km, strongest lobe {lobe.level_db:.2f} dB "
          f"at ({lobe.phi_deg:.3f}, {lobe.theta_deg:.3f}) deg")
    print(f"wrote {csv_path}")
    return 0


def _print_case(name, case, entry):
    r = entry["result"]
    if r is None:
        print(f"{name} {case}: infeasible ({entry['error']})")
        return
    print(f"{name} {case}: K={r.active_beams_K} eta={r.eta:.2f} beam={r.beam_throughput_mbps:.1f} Mbps "
          f"aggregate={r.aggregate_throughput_mbps / 1e3:.2f} Gbps area={r.coverage_area_km2:,.0f} km2 "
          f"rho={r.area_throughput_rho:.3e} Mbps/km2")
    if entry["verdicts"]:
        print(format_diff(name, case, entry["verdicts"]))


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out or _default_out())
    res = run_scenario(cfg, out, cases=args.case or None)
    for case, entry in res.items():
        _print_case(cfg.scenario, case, entry)
    print(f"outputs in {out / cfg.scenario}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    values = [float(v) if args.parameter in ("Delta_over_L", "phi_bar") else int(v) for v in args.values]
    rows = sweep(cfg, args.parameter, values, args.case)
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    path = write_sweep(rows, out / f"{cfg.scenario}_sweep_{args.parameter}.csv", cfg.digest())
    for r in rows:
        rho = "infeasible" if r["rho"] is None else f"{r['rho']:.4e}"
        print(f"{args.parameter}={r['value']}: rho={rho}")
    print(f"wrote {path}")
    return 0


def cmd_feednet(args) -> int:
    reports = {}
    for name in args.config:
        cfg = load_config(name)
        B = cfg.frequency.B_hz
        if args.beams is not None:
            K, M = args.beams, 1
        else:
            # Size for the case that loads the feeder link most, K * B / M.
            res = run_scenario(cfg, cases=[args.case] if args.case else None)
            done = [(e["result"].active_beams_K * B / _reuse(cfg, c), e["result"].active_beams_K, _reuse(cfg, c))
                    for c, e in res.items() if e["result"] is not None]
            if not done:
                print(f"{cfg.scenario}: every case is infeasible", file=sys.stderr)
                return 1
            _, K, M = max(done)
        n_elem = cfg.foa.N + 4 * cfg.foa.winglet_rows * math.isqrt(cfg.foa.N)
        spec = FeedNetSpec(beams_K=K, colors_C=M, elements_N=n_elem, satellites_S=cfg.foa.S,
                           bandwidth_per_beam=B / M, element_bandwidth=B,
                           wdm_channel_capacity=args.wdm_capacity, mode=args.mode)
        rep = size_feednet(spec)
        reports[cfg.scenario] = rep
        model = build_model(cfg)
        D_over_lambda = float(np.ptp(model.foa.element_positions()[:, 1])) / model.lam
        nb = narrowband_check(B, cfg.frequency.f0_hz, D_over_lambda, model.cone.theta_bar_deg)
        print(f"{cfg.scenario} (K={K}): ISL {rep.single_isl_throughput_rounded_gbps} Gbps, "
              f"WDM/ISL {rep.wdm_per_isl}, aggregate ISL {rep.aggregate_isl_bandwidth_ghz:,.0f} GHz, "
              f"feeder {rep.feeder_link_total_bandwidth_ghz:.2f} GHz, gateways {rep.gateways}, "
              f"{nb.label} (B/f0 {nb.fractional_bandwidth:.4f} vs bound {nb.bound:.4f})")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        print(f"wrote {write_report(reports, Path(args.out) / 'feednet.json')}")
    return 0


def _reuse(cfg, case: str) -> int:
    return cfg.frequency.M_T1 if case.startswith("T1") else cfg.frequency.M_T2


def cmd_validate(args) -> int:
    failures = 0
    out = Path(args.out) if args.out else None
    for name in args.config or PRESETS:
        cfg = load_config(name)
        res = run_scenario(cfg, out, write_pattern=out is not None)
        for case, entry in res.items():
            _print_case(cfg.scenario, case, entry)
            if entry["result"] is None:
                failures += 1
            failures += sum(not v["ok"] for v in entry["verdicts"])
    print(f"{failures} row(s) outside tolerance")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="foasim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_nargs=None):
        sp.add_argument("config", nargs=config_nargs, help=f"YAML file or preset name ({', '.join(PRESETS)})")
        sp.add_argument("-o", "--out", help="output directory (default runs/<timestamp>)")

    sp = sub.add_parser("pattern", help="export the radiation pattern grid")
    common(sp)
    sp.add_argument("--resolution", type=int, help="grid points per axis")
    sp.add_argument("--seed", type=int, help="phase-error seed")
    sp.add_argument("--phi-bar", type=float, help="phase-error bound in degrees")
    sp.add_argument("--replications", type=int, help="Monte Carlo replications for the boresight loss")
    sp.set_defaults(func=cmd_pattern)

    sp = sub.add_parser("run", help="run the throughput procedure and write all artifacts")
    common(sp)
    sp.add_argument("--case", action="append", help="T1-C1, T1-C2, T2-C1 or T2-C2 (repeatable)")
    sp.add_argument("--resolution", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--phi-bar", type=float)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="area throughput over one parameter")
    common(sp)
    sp.add_argument("parameter", choices=sorted(SWEEP_PARAMETERS))
    sp.add_argument("values", nargs="*")
    sp.add_argument("--case", help="case to sweep (default: first case of the config)")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("feednet", help="size ISLs, WDM channels and gateways")
    common(sp, "+")
    sp.add_argument("--beams", type=int, help="active beams K (default: largest K of the scenario cases)")
    sp.add_argument("--case", help="case whose K is used")
    sp.add_argument("--wdm-capacity", type=float, default=100.0, help="GHz per WDM channel")
    sp.add_argument("--mode", choices=("centralized", "distributed"), default="centralized")
    sp.set_defaults(func=cmd_feednet)

    sp = sub.add_parser("validate", help="compare presets with the reference rows; exit 1 on any miss")
    common(sp, "*")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
