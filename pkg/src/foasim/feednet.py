"""Sizing of the centralized feeding and beamforming network.

A command satellite beamforms all beams and ships digitized element streams
to every array satellite over optical inter-satellite links (ISLs); ground
gateways deliver the beam signals over the feeder link.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

MODES = ("centralized", "distributed")


class FeedNetError(ValueError):
    pass


@dataclass(frozen=True)
class FeedNetSpec:
    beams_K: int
    colors_C: int
    elements_N: int
    satellites_S: int
    bandwidth_per_beam: float  # Hz, feeder-link share of one beam (B / M)
    adc_bits: int = 8
    samples_per_bandwidth: float = 2.5
    optical_spectral_eff: float = 2.0  # bits/symbol
    wdm_channel_capacity: float = 100.0  # GHz
    feeder_rf_bandwidth: float = 3.0  # GHz
    feeder_polarizations: int = 2
    mode: str = "centralized"
    element_bandwidth: float | None = None  # Hz sampled per element stream, defaults to bandwidth_per_beam

    def __post_init__(self):
        for name in ("beams_K", "colors_C", "elements_N", "satellites_S", "adc_bits",
                     "feeder_polarizations"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise FeedNetError(f"{name} must be a positive integer, got {v!r}")
        for name in ("bandwidth_per_beam", "samples_per_bandwidth", "optical_spectral_eff",
                     "wdm_channel_capacity", "feeder_rf_bandwidth"):
            if not getattr(self, name) > 0:
                raise FeedNetError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.element_bandwidth is not None and not self.element_bandwidth > 0:
            raise FeedNetError(f"element_bandwidth must be positive, got {self.element_bandwidth!r}")
        if self.mode not in MODES:
            raise FeedNetError(f"mode must be one of {MODES}, got {self.mode!r}")


def isl_throughput_per_satellite(spec: FeedNetSpec) -> float:
    """Bit rate of one ISL in Gbps.

    Centralized: the ``N`` element streams of the satellite, each sampled over
    the full bandwidth. Distributed: the ``K`` beam streams, which every
    satellite then beamforms locally.
    """
    if spec.mode == "centralized":
        streams, bw = spec.elements_N, spec.element_bandwidth or spec.bandwidth_per_beam
    else:
        streams, bw = spec.beams_K, spec.bandwidth_per_beam
    return streams * bw * spec.samples_per_bandwidth * spec.adc_bits / 1e9


def occupied_isl_bandwidth(throughput_gbps: float, spec: FeedNetSpec) -> float:
    """Optical bandwidth in GHz at the stated bits/symbol and one symbol per Hz."""
    return throughput_gbps / spec.optical_spectral_eff


def wdm_count(occupied_bandwidth_ghz: float, channel_capacity_ghz: float = 100.0) -> int:
    if not channel_capacity_ghz > 0:
        raise FeedNetError(f"WDM channel capacity must be positive, got {channel_capacity_ghz!r}")
    # Guard against 2651.0000000001 style float noise.
    return max(1, math.ceil(occupied_bandwidth_ghz / channel_capacity_ghz - 1e-9))


def feeder_total_bandwidth(spec: FeedNetSpec) -> float:
    """Feeder-link bandwidth in GHz carrying all ``K`` beams."""
    return spec.beams_K * spec.bandwidth_per_beam / 1e9


def gateway_count(spec: FeedNetSpec) -> int:
    per_gw = spec.feeder_rf_bandwidth * spec.feeder_polarizations
    return max(1, math.ceil(feeder_total_bandwidth(spec) / per_gw - 1e-9))


def aggregate_isl_bandwidth(spec: FeedNetSpec, per_isl_ghz: float | None = None) -> float:
    """``S`` times the per-ISL figure (by default the rounded raw rate, as tabulated)."""
    if per_isl_ghz is None:
        per_isl_ghz = round(isl_throughput_per_satellite(spec))
    return spec.satellites_S * per_isl_ghz


@dataclass(frozen=True)
class NarrowbandVerdict:
    narrowband: bool
    fractional_bandwidth: float
    bound: float  # includes the margin factor
    ratio: float  # fractional bandwidth / bound, narrowband iff <= 1
    raw_bound: float = math.inf  # 1 / (D/lambda sin theta_max), no margin

    @property
    def label(self) -> str:
        return "narrowband" if self.narrowband else "wideband"


def narrowband_check(B_hz: float, f0_hz: float, D_over_lambda: float, theta_max_deg: float,
                     margin_factor: float = 10.0) -> NarrowbandVerdict:
    """Phase-shift beamforming is adequate iff ``B/f0 <= (1/m) / (D/lambda sin theta_max)``.

    ``m`` (default 10) turns "much smaller than" into a number.
    """
    if not (B_hz > 0 and f0_hz > 0 and margin_factor > 0):
        raise FeedNetError("bandwidth, carrier and margin factor must be positive")
    if D_over_lambda < 0 or not 0.0 <= theta_max_deg < 90.0:
        raise FeedNetError("need D/lambda >= 0 and 0 <= theta_max < 90 degrees")
    frac = B_hz / f0_hz
    denom = D_over_lambda * math.sin(math.radians(theta_max_deg))
    raw = math.inf if denom == 0 else 1.0 / denom
    bound = raw / margin_factor
    ratio = frac / bound
    return NarrowbandVerdict(ratio <= 1.0, frac, bound, ratio, raw)


@dataclass(frozen=True)
class FeedNetReport:
    mode: str
    single_isl_throughput_gbps: float
    single_isl_throughput_rounded_gbps: int
    occupied_isl_bandwidth_ghz: float  # same number as the raw rate, as tabulated
    occupied_isl_bandwidth_spectral_ghz: float  # divided by the optical bits/symbol
    wdm_per_isl: int
    aggregate_isl_bandwidth_ghz: float
    feeder_link_total_bandwidth_ghz: float
    gateways: int
    notes: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d


def size_feednet(spec: FeedNetSpec) -> FeedNetReport:
    raw = isl_throughput_per_satellite(spec)
    rounded = round(raw)
    notes = []
    if spec.optical_spectral_eff != 1.0:
        notes.append(
            "occupied ISL bandwidth is reported numerically equal to the bit rate; "
            f"at {spec.optical_spectral_eff:g} bits/symbol it would be "
            f"{occupied_isl_bandwidth(raw, spec):.4g} GHz"
        )
    return FeedNetReport(
        mode=spec.mode,
        single_isl_throughput_gbps=raw,
        single_isl_throughput_rounded_gbps=int(rounded),
        occupied_isl_bandwidth_ghz=float(rounded),
        occupied_isl_bandwidth_spectral_ghz=occupied_isl_bandwidth(raw, spec),
        wdm_per_isl=wdm_count(rounded, spec.wdm_channel_capacity),
        aggregate_isl_bandwidth_ghz=aggregate_isl_bandwidth(spec, rounded),
        feeder_link_total_bandwidth_ghz=feeder_total_bandwidth(spec),
        gateways=gateway_count(spec),
        notes=tuple(notes),
    )


TABLE_ROWS = (
    ("Single ISL throughput BFN", "single_isl_throughput_rounded_gbps", "Gbps"),
    ("Occupied ISL bandwidth", "occupied_isl_bandwidth_ghz", "GHz"),
    ("Number of WDM required per ISL", "wdm_per_isl", ""),
    ("Aggregated ISL bandwidth", "aggregate_isl_bandwidth_ghz", "GHz"),
    ("Feeder link total bandwidth", "feeder_link_total_bandwidth_ghz", "GHz"),
    ("Number of gateways required", "gateways", ""),
)


def write_report(reports: dict[str, FeedNetReport], path: str | Path) -> Path:
    """JSON with one object per scenario plus the table rows keyed by row name."""
    path = Path(path)
    doc = {}
    for name, rep in reports.items():
        rows = {label: {"value": getattr(rep, attr), "unit": unit} for label, attr, unit in TABLE_ROWS}
        doc[name] = {"rows": rows, "detail": rep.to_dict()}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
