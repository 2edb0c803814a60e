"""Radiation pattern of a formation of arrays.

Angles are in radians unless a name says ``_deg``. Gains are linear power
ratios unless a name says ``_dbi``/``_db``.

The element pattern is the circularly symmetric ``g(theta) = sqrt(Gamma)
cos(theta)**q`` with ``q = (Gamma - 2) / 4``; it depends on elevation only.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .geometry import FoAGeometry, GeometryError, _isqrt_exact

# Per-chunk budget for (angles x radiators) complex temporaries.
_CHUNK = 1 << 21


class PatternError(ValueError):
    pass


def wave_vector(phi, theta, lam: float) -> np.ndarray:
    """Wave vector ``(2 pi / lam) [cos t cos p, cos t sin p, sin t]``, shape ``(..., 3)``."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    k = 2.0 * np.pi / lam
    return k * np.stack(
        [np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), np.sin(theta)], axis=-1
    )


def element_gain(theta, Gamma: float):
    """Element amplitude pattern; zero on and beyond the horizon ``|theta| >= 90 deg``."""
    theta = np.asarray(theta, dtype=float)
    q = (Gamma - 2.0) / 4.0
    c = np.cos(theta)
    out = np.where(np.abs(theta) < np.pi / 2, math.sqrt(Gamma) * np.abs(c) ** q, 0.0)
    return out[()] if out.ndim == 0 else out


def _direction_cosines(phi, theta):
    """``(Psi, Omega)`` = y and z direction cosines of ``(phi, theta)``."""
    return np.cos(theta) * np.sin(phi), np.sin(theta)


def phase_sum(yz: np.ndarray, psi, omega, lam: float, weights: np.ndarray | None = None):
    """``sum_i w_i exp(j 2 pi (psi y_i + omega z_i) / lam)`` for every angle sample.

    ``psi`` and ``omega`` broadcast together; the result has their shape.
    """
    psi, omega = np.broadcast_arrays(np.asarray(psi, float), np.asarray(omega, float))
    shape = psi.shape
    psi = psi.ravel()
    omega = omega.ravel()
    y = yz[:, 0]
    z = yz[:, 1]
    w = None if weights is None else np.asarray(weights)
    out = np.empty(psi.size, dtype=complex)
    step = max(1, _CHUNK // max(1, len(y)))
    scale = 2.0 * np.pi / lam
    for i in range(0, psi.size, step):
        ph = scale * (np.outer(psi[i:i + step], y) + np.outer(omega[i:i + step], z))
        e = np.exp(1j * ph)
        out[i:i + step] = e.sum(axis=1) if w is None else e @ w
    return out.reshape(shape)


def response_vector(foa: FoAGeometry, phi: float, theta: float, lam: float,
                    phase_errors: np.ndarray | None = None) -> np.ndarray:
    """Global response vector, satellite-major, length ``S * N'``.

    ``phase_errors`` (one per satellite) rotates each satellite's block.
    """
    k = wave_vector(phi, theta, lam)
    u = foa.element_positions()
    a = element_gain(theta, foa.array.element_peak_gain_Gamma) * np.exp(1j * (u @ k))
    if phase_errors is not None:
        n = foa.array.element_count_N_prime
        a = a * np.repeat(np.exp(1j * np.asarray(phase_errors, float)), n)
    return a


def _resolve_errors(foa: FoAGeometry, phase_errors):
    if phase_errors is None:
        errs = foa.phase_errors
    elif isinstance(phase_errors, PhaseErrorSet):
        errs = phase_errors.phi_s
    else:
        errs = np.asarray(phase_errors, dtype=float)
    # All-zero errors take the unperturbed path, so they reproduce it bit for bit.
    if errs is not None and not np.any(errs):
        return None
    return errs


def pattern_direct(foa: FoAGeometry, phi, theta, lam: float, phase_errors=None,
                   factorized: bool = True):
    """Normalized gain ``|a(0,0)^H a~(phi,theta)|^2 / (g(0)^2 N' S)`` by explicit summation.

    The sum is split into a satellite-center sum times a panel sum, which is
    exact because every satellite carries the same panel. ``factorized=False``
    sums over every element instead; it is slower and kept as a reference.
    """
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    errs = _resolve_errors(foa, phase_errors)
    psi, omega = _direction_cosines(phi, theta)
    n = foa.array.element_count_N_prime
    s = foa.satellite_count_S
    w_sat = None if errs is None else np.exp(1j * errs)
    if factorized:
        af = phase_sum(foa.array.element_offsets[:, 1:], psi, omega, lam)
        ff = phase_sum(foa.satellite_centers[:, 1:], psi, omega, lam, w_sat)
        total = af * ff
    else:
        w = None if w_sat is None else np.repeat(w_sat, n)
        total = phase_sum(foa.element_positions()[:, 1:], psi, omega, lam, w)
    g = element_gain(theta, foa.array.element_peak_gain_Gamma)
    return g * g * np.abs(total) ** 2 / (n * s)


def dirichlet(M: int, T):
    """``sin(pi M T) / sin(pi T)`` with its limit ``+-M`` at integer ``T``.

    ``T`` is reduced to its nearest integer ``n`` plus a remainder before the
    sines are taken, which keeps full relative accuracy next to grating-lobe
    peaks where ``T`` is large.
    """
    T = np.asarray(T, dtype=float)
    n = np.rint(T)
    eps = T - n
    sign = np.where((n * (M - 1)) % 2 == 0, 1.0, -1.0)
    den = np.sin(np.pi * eps)
    small = np.abs(den) < 1e-12
    safe = np.where(small, 1.0, den)
    val = np.where(small, float(M), np.sin(np.pi * M * eps) / safe)
    out = sign * val
    return out[()] if out.ndim == 0 else out


def geometric_series(M: int, T):
    """Phase-centered direct sum ``exp(-j pi (M-1) T) sum_m exp(j 2 pi (m-1) T)``."""
    T = np.asarray(T, dtype=float)
    m = np.arange(M)
    s = np.exp(2j * np.pi * np.multiply.outer(T, m)).sum(axis=-1)
    return np.exp(-1j * np.pi * (M - 1) * T) * s


def pattern_closed_form(N: int, S: int, d: float, Delta: float, Gamma: float, phi, theta,
                        lam: float):
    """Product-of-Dirichlet-kernels gain of a square formation of square panels."""
    n = _isqrt_exact(N, "N")
    s = _isqrt_exact(S, "S")
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    psi, omega = _direction_cosines(phi, theta)
    foa_factor = dirichlet(s, omega * Delta / lam) * dirichlet(s, psi * Delta / lam)
    arr_factor = dirichlet(n, omega * d / lam) * dirichlet(n, psi * d / lam)
    g = element_gain(theta, Gamma)
    return (g * foa_factor * arr_factor) ** 2 / (N * S)


def boresight_gain(foa: FoAGeometry) -> float:
    """``Gamma N' S``: the pattern value at ``(0, 0)`` without phase errors."""
    return foa.array.element_peak_gain_Gamma * foa.element_count


def _panel_factor(foa: FoAGeometry, dpsi, dom, lam: float):
    a = foa.array
    if a.is_plain_square:
        n = math.isqrt(a.base_N)
        return dirichlet(n, dom * a.pitch_d / lam) * dirichlet(n, dpsi * a.pitch_d / lam)
    return phase_sum(a.element_offsets[:, 1:], dpsi, dom, lam)


def _formation_factor(foa: FoAGeometry, dpsi, dom, lam: float, weights=None):
    if weights is None and foa.layout_kind == "square-grid":
        s = math.isqrt(foa.satellite_count_S)
        D = foa.spacing_Delta
        return dirichlet(s, dom * D / lam) * dirichlet(s, dpsi * D / lam)
    return phase_sum(foa.satellite_centers[:, 1:], dpsi, dom, lam, weights)


def pattern(foa: FoAGeometry, phi, theta, lam: float, phase_errors=None):
    """Fastest exact evaluation of the normalized gain.

    Each of the two factors (panel, formation) uses its Dirichlet closed form
    when its own layout is a square grid and an explicit sum otherwise.
    """
    errs = _resolve_errors(foa, phase_errors)
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    psi, omega = _direction_cosines(phi, theta)
    w = None if errs is None else np.exp(1j * errs)
    f = _panel_factor(foa, psi, omega, lam) * _formation_factor(foa, psi, omega, lam, w)
    g = element_gain(theta, foa.array.element_peak_gain_Gamma)
    return g * g * np.abs(f) ** 2 / foa.element_count


def steering_inner(foa: FoAGeometry, lam: float, phi_u, theta_u, phi_c, theta_c):
    """``a(phi_u, theta_u)^H a(phi_c, theta_c)`` for broadcastable angle arrays.

    This is the amplitude a receiver at ``u`` picks up from a beam steered to
    ``c`` before beamformer normalization.
    """
    psi_u, om_u = _direction_cosines(np.asarray(phi_u, float), np.asarray(theta_u, float))
    psi_c, om_c = _direction_cosines(np.asarray(phi_c, float), np.asarray(theta_c, float))
    dpsi = psi_c - psi_u
    dom = om_c - om_u
    gamma = foa.array.element_peak_gain_Gamma
    gg = element_gain(theta_u, gamma) * element_gain(theta_c, gamma)
    return gg * _panel_factor(foa, dpsi, dom, lam) * _formation_factor(foa, dpsi, dom, lam)


@dataclass(frozen=True, eq=False)
class PhaseErrorSet:
    phi_s: np.ndarray
    bound: float
    seed: int | None


def sample_phase_errors(phi_bar: float, S: int, seed: int | None = None) -> PhaseErrorSet:
    """I.i.d. uniform per-satellite phase errors on ``[-phi_bar, +phi_bar]`` (radians)."""
    if phi_bar < 0:
        raise PatternError(f"phase error bound must be non-negative, got {phi_bar!r}")
    if phi_bar == 0:
        return PhaseErrorSet(np.zeros(S), 0.0, seed)
    rng = np.random.default_rng(seed)
    return PhaseErrorSet(rng.uniform(-phi_bar, phi_bar, size=S), float(phi_bar), seed)


def aperture_extent(foa: FoAGeometry) -> float:
    pos = foa.element_positions()[:, 1:]
    return float(np.max(pos.max(axis=0) - pos.min(axis=0)))


def half_power_azimuth(foa: FoAGeometry, lam: float) -> float:
    """Azimuth (rad) of the first -3 dB crossing on the ``theta = 0`` cut."""
    peak = float(pattern(foa, 0.0, 0.0, lam))
    if not np.isfinite(peak) or peak <= 0:
        raise PatternError("boresight gain is not finite and positive")
    aperture = max(aperture_extent(foa), lam)
    step = lam / (100.0 * aperture)

    def excess(phi):
        return float(pattern(foa, phi, 0.0, lam)) / peak - 0.5

    lo = 0.0
    # Coarse scan in blocks until the mainlobe drops through half power.
    block = 256
    while lo < np.pi / 2:
        grid = lo + step * np.arange(1, block + 1)
        grid = grid[grid < np.pi / 2]
        if grid.size == 0:
            break
        vals = pattern(foa, grid, np.zeros_like(grid), lam) / peak - 0.5
        below = np.nonzero(vals < 0)[0]
        if below.size:
            hi = grid[below[0]]
            left = grid[below[0] - 1] if below[0] > 0 else lo
            return brentq(excess, left, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)
        lo = grid[-1]
        block *= 2
    raise PatternError("no half-power crossing found on the azimuth cut")


def beam_radius(foa: FoAGeometry, h_sat_km: float, lam: float) -> float:
    """On-ground beam radius at nadir, km."""
    if not h_sat_km > 0:
        raise PatternError(f"satellite height must be positive, got {h_sat_km!r}")
    return h_sat_km * math.tan(half_power_azimuth(foa, lam))


@dataclass(frozen=True, eq=False)
class PatternGrid:
    phi_deg: np.ndarray
    theta_deg: np.ndarray
    gain_dbi: np.ndarray  # shape (len(theta_deg), len(phi_deg))
    geometry_hash: str
    wavelength: float
    boresight_dbi: float

    @property
    def peak_dbi(self) -> float:
        return float(np.max(self.gain_dbi))


def to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def evaluate_grid(foa: FoAGeometry, lam: float, half_width_deg: float, resolution: int = 1001,
                  phase_errors=None) -> PatternGrid:
    """Sample the pattern on a square ``resolution x resolution`` grid of ``+-half_width``."""
    if resolution < 2:
        raise PatternError("grid resolution must be at least 2")
    axis = np.linspace(-half_width_deg, half_width_deg, resolution)
    P, T = np.meshgrid(np.radians(axis), np.radians(axis), indexing="xy")
    errs = _resolve_errors(foa, phase_errors)
    z = pattern(foa, P, T, lam, phase_errors=errs)
    return PatternGrid(
        phi_deg=axis,
        theta_deg=axis.copy(),
        gain_dbi=to_db(z),
        geometry_hash=foa.with_phase_errors(errs).digest(),
        wavelength=lam,
        boresight_dbi=float(to_db(boresight_gain(foa))),
    )


@dataclass(frozen=True)
class LobeReport:
    level_db: float  # peak outside the exclusion disk relative to boresight (<= 0 typically)
    phi_deg: float
    theta_deg: float


def grating_lobe_report(grid: PatternGrid, mainlobe_exclusion_deg: float) -> LobeReport:
    """Highest sample outside an angular disk around boresight."""
    P, T = np.meshgrid(grid.phi_deg, grid.theta_deg, indexing="xy")
    outside = np.hypot(P, T) > mainlobe_exclusion_deg
    if not outside.any():
        raise PatternError("mainlobe exclusion covers the whole grid")
    masked = np.where(outside, grid.gain_dbi, -np.inf)
    i, j = np.unravel_index(np.argmax(masked), masked.shape)
    return LobeReport(float(masked[i, j] - grid.boresight_dbi), float(P[i, j]), float(T[i, j]))


def export_grid(grid: PatternGrid, csv_path: str | Path, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``phi_deg, theta_deg, gain_dBi`` rows plus a JSON sidecar."""
    csv_path = Path(csv_path)
    P, T = np.meshgrid(grid.phi_deg, grid.theta_deg, indexing="xy")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phi_deg", "theta_deg", "gain_dBi"])
        for p, t, g in zip(P.ravel(), T.ravel(), grid.gain_dbi.ravel()):
            w.writerow([f"{p:.6f}", f"{t:.6f}", f"{g:.6f}"])
    meta = {
        "geometry_hash": grid.geometry_hash,
        "wavelength_m": grid.wavelength,
        "boresight_dBi": grid.boresight_dbi,
        "peak_dBi": grid.peak_dbi,
        "resolution": [len(grid.theta_deg), len(grid.phi_deg)],
    }
    if extra:
        meta.update(extra)
    side = csv_path.with_suffix(".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, side


__all__ = [
    "GeometryError",
    "PatternError",
    "PatternGrid",
    "PhaseErrorSet",
    "LobeReport",
    "wave_vector",
    "element_gain",
    "response_vector",
    "pattern_direct",
    "pattern_closed_form",
    "pattern",
    "dirichlet",
    "geometric_series",
    "boresight_gain",
    "steering_inner",
    "sample_phase_errors",
    "half_power_azimuth",
    "beam_radius",
    "evaluate_grid",
    "grating_lobe_report",
    "export_grid",
    "to_db",
]
