"""Build models from a :class:`ScenarioConfig`, run cases, write artifacts."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, load_reference
from .coverage import CoverageCone, build_beam_lattice, coverage_cone, export_beam_plan, slant_range_km
from .geometry import (FoAGeometry, build_foa_grid, build_foa_quincunx, build_winglet_array,
                       wavelength)
from .linkbudget import (InfeasibleError, LinkBudgetError, LossChain, PhyTable, PowerChain,
                         ProcedureInputs, ScenarioResult, free_space_loss_db, rf_power_per_satellite,
                         run_throughput_procedure)
from .pattern import (aperture_extent, beam_radius, boresight_gain, evaluate_grid, export_grid, 
                      pattern, sample_phase_errors)

log = logging.getLogger(__name__)

SWEEP_PARAMETERS = {
    "S": "foa.S",
    "Delta_over_L": "foa.Delta_over_L",
    "phi_bar": "monte_carlo.phi_bar_deg",
    "winglet_rows": "foa.winglet_rows",
}


@dataclass(frozen=True, eq=False)
class Model:
    """Geometry and derived quantities shared by every case of a scenario."""

    cfg: ScenarioConfig
    foa: FoAGeometry
    lam: float
    cone: CoverageCone
    R_km: float
    fspl_db: float


def build_foa(cfg: ScenarioConfig) -> tuple[FoAGeometry, float]:
    f = cfg.foa
    lam = wavelength(cfg.frequency.f0_hz)
    d = f.d_over_lambda * lam
    arr = build_winglet_array(f.N, d, f.winglet_rows, 10 ** (f.Gamma_dbi / 10), panel_area=f.panel_area_m2,
                              winglet_row_area=f.winglet_row_area_m2)
    # Panels with winglets keep the panel-to-panel gap of the bare panels.
    L = arr.side_length
    Delta = arr.extent + (f.Delta_over_L - 1.0) * L
    if f.layout_kind == "square-grid":
        foa = build_foa_grid(f.S, Delta, arr)
    else:
        foa = build_foa_quincunx(Delta, arr, diagonal=f.layout_kind == "quincunx-diagonal")
    return foa, lam


def build_model(cfg: ScenarioConfig) -> Model:
    foa, lam = build_foa(cfg)
    cone = coverage_cone(cfg.orbit.h_sat_km, cfg.orbit.epsilon_deg)
    R = beam_radius(foa, cfg.orbit.h_sat_km, lam)
    fspl = cfg.losses.fspl_db
    if fspl is None:
        fspl = free_space_loss_db(slant_range_km(cfg.orbit.h_sat_km, cfg.orbit.epsilon_deg), cfg.frequency.f0_hz)
    return Model(cfg, foa, lam, cone, R, fspl)


def power_chain(cfg: ScenarioConfig) -> PowerChain:
    p = cfg.power
    return PowerChain(p.solar_dc_per_m2, p.array_surface_m2, p.tx_platform_dc_ratio, p.dc_to_rf_efficiency,
                      p.output_backoff_db, p.antenna_losses_db)


def loss_chain(cfg: ScenarioConfig, channel: str, fspl_db: float) -> LossChain:
    ls = cfg.losses
    return LossChain.for_channel(
        channel, fspl_db, shadowing_db=ls.shadowing_db, atmospheric_db=ls.atmospheric_db, body_db=ls.body_db,
        fading_margin_db=ls.fading_margin_db, demod_loss_db=ls.demod_loss_db, G_over_T_dbK=ls.G_over_T_dbK,
        misc_loss_db=ls.misc_loss_db,
    )


def procedure_inputs(cfg: ScenarioConfig, traffic: str, channel: str, fspl_db: float) -> ProcedureInputs:
    chain = power_chain(cfg)
    rf = cfg.power.satellite_rf_w
    if rf is None:
        rf = rf_power_per_satellite(chain)
    M = cfg.frequency.M_T1 if traffic == "T1" else cfg.frequency.M_T2
    lk = cfg.link
    return ProcedureInputs(
        B_hz=cfg.frequency.B_hz, M=M, satellite_rf_w=rf, power=chain,
        losses=loss_chain(cfg, channel, fspl_db), phy=PhyTable(cfg.phy.required_sinr_db, cfg.phy.eta),
        bw_efficiency_factor=lk.bw_efficiency_factor, target_beam_throughput_mbps=lk.target_beam_throughput_mbps,
        noise_bandwidth_hz=lk.noise_bandwidth_hz, user_position=lk.user_position,
        seed=cfg.monte_carlo.seed, max_iterations=lk.max_iterations,
    )


def run_case(model: Model, case: str):
    traffic, channel = case.split("-")
    cfg = model.cfg
    M = cfg.frequency.M_T1 if traffic == "T1" else cfg.frequency.M_T2
    plan = build_beam_lattice(model.cone, model.R_km, traffic, M=M)
    inputs = procedure_inputs(cfg, traffic, channel, model.fspl_db)
    result = run_throughput_procedure(model.foa, plan, model.lam, inputs, channel)
    return result, plan.keep_innermost(result.active_beams_K)


def monte_carlo_boresight(model: Model) -> dict:
    """Boresight gain loss (dB) over seeded phase-error replications."""
    mc = model.cfg.monte_carlo
    ideal = boresight_gain(model.foa)
    losses = []
    for r in range(mc.replications):
        errs = sample_phase_errors(math.radians(mc.phi_bar_deg), model.foa.satellite_count_S, mc.seed + r)
        g = float(pattern(model.foa, 0.0, 0.0, model.lam, errs))
        losses.append(10 * math.log10(ideal / g))
    arr = np.array(losses)
    return {"phi_bar_deg": mc.phi_bar_deg, "replications": mc.replications, "seed": mc.seed,
            "boresight_loss_db_mean": float(arr.mean()), "boresight_loss_db_max": float(arr.max()),
            "boresight_loss_db_p95": float(np.percentile(arr, 95))}


def pattern_grid(model: Model):
    cfg = model.cfg
    mc = cfg.monte_carlo
    errs = None
    if mc.phi_bar_deg > 0:
        errs = sample_phase_errors(math.radians(mc.phi_bar_deg), model.foa.satellite_count_S, mc.seed)
    half = cfg.grid.half_width_deg or model.cone.theta_bar_deg
    return evaluate_grid(model.foa, model.lam, half, cfg.grid.resolution, errs)


def compare_to_reference(scenario: str, case: str, result: ScenarioResult, reference: dict | None = None) -> list[dict]:
    """Per-row verdicts against the embedded reference values (empty if none exist)."""
    ref = reference or load_reference()
    rows = ref["rows"].get(scenario, {}).get(case)
    if not rows:
        return []
    tol = dict(ref["tolerances"])
    tol.update(ref.get("tolerance_overrides", {}).get(scenario, {}))
    out = []
    for key, want in rows.items():
        got = getattr(result, key)
        t = tol.get(key, {"rel": 0.0})
        if t.get("exact"):
            ok = round(got, 2) == round(want, 2)
            allowed = 0.0
        elif "rel" in t:
            allowed = t["rel"] * abs(want)
            ok = abs(got - want) <= allowed + 1e-12
        else:
            allowed = t["abs"]
            ok = abs(got - want) <= allowed + 1e-12
        out.append({"row": key, "computed": got, "reference": want, "allowed": allowed, "ok": bool(ok)})
    return out


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")


TABLE_COLUMNS = (
    "rf_power_per_satellite_w", "foa_total_rf_dbw", "eirp_per_beam_dbw", "los_snr_db", "sir_db",
    "total_sinr_db", "eta", "required_sinr_db", "beam_radius_km", "beam_throughput_mbps", "active_beams_K",
    "aggregate_throughput_mbps", "coverage_area_km2", "area_throughput_rho",
)


def write_case(out: Path, model: Model, case: str, result: ScenarioResult, plan, grid, verdicts, mc) -> Path:
    cfg = model.cfg
    h = cfg.digest()
    d = out / cfg.scenario / case
    d.mkdir(parents=True, exist_ok=True)
    doc = {"config_hash": h, "scenario": cfg.scenario, "case": case, "result": result.to_dict(),
           "geometry_hash": model.foa.digest(), "reference_check": verdicts}
    if mc is not None:
        doc["monte_carlo"] = mc
    _write_json(d / "result.json", doc)
    with (d / "table_row.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config_hash", "scenario", "case", *TABLE_COLUMNS])
        w.writerow([h, cfg.scenario, case, *(repr(getattr(result, c)) for c in TABLE_COLUMNS)])
    if grid is not None:
        export_grid(grid, d / "pattern.csv", {"config_hash": h, "scenario": cfg.scenario, "case": case})
    export_beam_plan(plan, d / "beams.csv")
    _stamp_csv(d / "beams.csv", h)
    return d


def _stamp_csv(path: Path, config_hash: str) -> None:
    text = path.read_text()
    path.write_text(f"# config_hash={config_hash}\n" + text)


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None, cases=None,
                 write_pattern: bool = True) -> dict:
    """Run every case of ``cfg``; returns ``{case: {"result", "verdicts", "path"}}``.

    Infeasible cases are recorded with ``result=None`` and the error text.
    """
    model = build_model(cfg)
    mc = monte_carlo_boresight(model) if cfg.monte_carlo.phi_bar_deg > 0 else None
    grid = pattern_grid(model) if (out_dir is not None and write_pattern) else None
    ref = load_reference()
    out = {}
    for case in cases or cfg.cases:
        try:
            result, plan = run_case(model, case)
        except LinkBudgetError as exc:
            log.warning("%s %s: %s", cfg.scenario, case, exc)
            out[case] = {"result": None, "error": str(exc), "verdicts": [], "path": None}
            continue
        verdicts = compare_to_reference(cfg.scenario, case, result, ref)
        path = None
        if out_dir is not None:
            path = write_case(Path(out_dir), model, case, result, plan, grid, verdicts, mc)
        out[case] = {"result": result, "verdicts": verdicts, "path": path}
    return out


def format_diff(scenario: str, case: str, verdicts: list[dict]) -> str:
    lines = [f"{scenario} {case}"]
    for v in verdicts:
        mark = "ok  " if v["ok"] else "FAIL"
        lines.append(f"  {mark} {v['row']:<28} computed {v['computed']:>14.6g}  reference {v['reference']:>14.6g}"
                     f"  (+-{v['allowed']:.3g})")
    return "\n".join(lines)


def sweep(cfg: ScenarioConfig, parameter: str, values, case: str | None = None) -> list[dict]:
    """One scenario run per value; infeasible points give ``rho=None``.

    Besides ``rho`` each row carries the pattern metrics that the parameter
    influences: beam radius, peak grating-lobe level and the Monte Carlo
    boresight loss.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"parameter must be one of {sorted(SWEEP_PARAMETERS)}, got {parameter!r}")
    case = case or cfg.cases[0]
    rows = []
    for v in values:
        c = cfg.replace(**{SWEEP_PARAMETERS[parameter]: v})
        row = {"value": v, "rho": None, "active_beams": None, "eta": None}
        try:
            model = build_model(c)
        except ValueError as exc:
            row["error"] = str(exc)
            rows.append(row)
            continue
        row["beam_radius_km"] = model.R_km
        row["grating_lobe_db"] = _grating_lobe_db(model)
        if c.monte_carlo.phi_bar_deg > 0:
            row["boresight_loss_db"] = monte_carlo_boresight(model)["boresight_loss_db_p95"]
        try:
            result, _ = run_case(model, case)
            row.update(rho=result.area_throughput_rho, active_beams=result.active_beams_K, eta=result.eta)
        except (InfeasibleError, LinkBudgetError) as exc:
            row["error"] = str(exc)
        rows.append(row)
    return rows


def _grating_lobe_db(model: Model) -> float:
    """Highest lobe on the azimuth cut relative to boresight, main lobe excluded.

    The search stops at the first null of a single panel, which bounds the
    region where formation grating lobes carry significant power.
    """
    foa, lam = model.foa, model.lam
    n = math.isqrt(foa.array.base_N)
    panel_null = lam / (n * foa.array.pitch_d)
    main = 1.5 * lam / max(aperture_extent(foa), lam)
    if main >= panel_null:
        return -math.inf
    phi = np.linspace(main, panel_null, 4001)
    g = pattern(foa, phi, np.zeros_like(phi), lam)
    return float(10 * np.log10(g.max() / boresight_gain(foa)))


SWEEP_COLUMNS = ("value", "rho", "active_beams", "eta", "beam_radius_km", "grating_lobe_db",
                 "boresight_loss_db", "error")


def write_sweep(rows: list[dict], path: str | Path, config_hash: str = "") -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in SWEEP_COLUMNS})
    return path
