"""Coverage cone, hexagonal beam lattice and frequency-reuse coloring.

Beams are laid out on the ground tangent plane below the satellite (flat
earth at distance ``h_sat``), y to the east of nadir, z to the north, in km.
A ground point ``(y, z)`` is seen from the satellite at
``phi = atan(y / h)``, ``theta = atan(z cos(phi) / h)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EARTH_RADIUS_KM = 6371.0

HEX_AREA_FACTOR = 1.5 * math.sqrt(3.0)  # hexagon area / circumradius**2

# Axial neighbor offsets on the triangular lattice spanned by
# a1 = (p, 0) and a2 = (p / 2, p sqrt(3) / 2).
NEIGHBOR_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class CoverageCone:
    theta_bar_deg: float
    h_sat_km: float
    epsilon_deg: float

    @property
    def ground_radius_km(self) -> float:
        return self.h_sat_km * math.tan(math.radians(self.theta_bar_deg))

    @property
    def phi_bar_deg(self) -> float:
        # Symmetric formation: azimuth coverage equals elevation coverage.
        return self.theta_bar_deg


def coverage_angle(h_sat_km: float, epsilon_deg: float) -> float:
    """One-sided coverage angle in degrees for minimum user elevation ``epsilon``."""
    if not h_sat_km > 0:
        raise CoverageError(f"satellite height must be positive, got {h_sat_km!r}")
    if not 0.0 <= epsilon_deg <= 90.0:
        raise CoverageError(f"minimum elevation must be in [0, 90] degrees, got {epsilon_deg!r}")
    ratio = EARTH_RADIUS_KM / (EARTH_RADIUS_KM + h_sat_km)
    return math.degrees(math.asin(ratio * math.cos(math.radians(epsilon_deg))))


def coverage_cone(h_sat_km: float, epsilon_deg: float) -> CoverageCone:
    return CoverageCone(coverage_angle(h_sat_km, epsilon_deg), h_sat_km, epsilon_deg)


def slant_range_km(h_sat_km: float, epsilon_deg: float) -> float:
    re = EARTH_RADIUS_KM
    e = math.radians(epsilon_deg)
    return math.sqrt((re + h_sat_km) ** 2 - (re * math.cos(e)) ** 2) - re * math.sin(e)


def ground_to_angles(y_km, z_km, h_sat_km: float):
    """Satellite-frame ``(phi, theta)`` in radians of ground points."""
    y = np.asarray(y_km, dtype=float)
    z = np.asarray(z_km, dtype=float)
    phi = np.arctan2(y, h_sat_km)
    theta = np.arctan(z * np.cos(phi) / h_sat_km)
    return phi, theta


def angles_to_ground(phi, theta, h_sat_km: float):
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    y = h_sat_km * np.tan(phi)
    z = h_sat_km * np.tan(theta) / np.cos(phi)
    return y, z


@dataclass(frozen=True, eq=False)
class BeamPlan:
    """Hexagonal beam lattice, columnar.

    Rows are sorted innermost first (distance from nadir, then polar angle),
    and ``beam_id`` equals the row index.
    """

    yg_km: np.ndarray
    zg_km: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    color: np.ndarray
    active: np.ndarray
    cluster_id: np.ndarray
    axial: np.ndarray  # (n, 2) integer lattice coordinates
    beam_radius_R: float
    reuse_M: int
    traffic_model: str
    cluster_size_C: int
    cone: CoverageCone

    def __len__(self) -> int:
        return int(self.yg_km.size)

    @property
    def pitch_km(self) -> float:
        return math.sqrt(3.0) * self.beam_radius_R

    @property
    def radial_km(self) -> np.ndarray:
        return np.hypot(self.yg_km, self.zg_km)

    @property
    def active_ids(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.active))

    def with_active(self, active: np.ndarray) -> "BeamPlan":
        return BeamPlan(self.yg_km, self.zg_km, self.phi, self.theta, self.color,
                        np.asarray(active, bool), self.cluster_id, self.axial,
                        self.beam_radius_R, self.reuse_M, self.traffic_model,
                        self.cluster_size_C, self.cone)

    def keep_innermost(self, k: int) -> "BeamPlan":
        """Deactivate all but the ``k`` innermost active beams."""
        ids = self.active_ids
        if k < 0:
            raise CoverageError("cannot keep a negative number of beams")
        mask = np.zeros(len(self), bool)
        mask[ids[:k]] = True
        return self.with_active(mask)


def _lattice_sites(radius_km: float, pitch_km: float):
    n = int(math.ceil(radius_km / (pitch_km * math.sqrt(3.0) / 2.0))) + 2
    i, j = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
    i = i.ravel()
    j = j.ravel()
    y = pitch_km * (i + 0.5 * j)
    z = pitch_km * (math.sqrt(3.0) / 2.0) * j
    inside = np.hypot(y, z) <= radius_km * (1 + 1e-12)
    return i[inside], j[inside], y[inside], z[inside]


def _cluster_center_offsets(C: int) -> dict[int, tuple[int, int]]:
    if C != 7:
        raise CoverageError(f"only 7-beam clusters are supported, got C={C}")
    return {(a + 3 * b) % 7: (a, b) for a, b in [(0, 0), *NEIGHBOR_OFFSETS]}


def build_beam_lattice(cone: CoverageCone, R_km: float, model: str = "T1", M: int | None = None,
                       cluster_size: int = 7) -> BeamPlan:
    """Hexagonal lattice of beams (circumradius ``R``) filling the coverage disk.

    T1: every site active, ``M``-coloring (default 3) with no two neighbors
    sharing a color. T2: 7-beam clusters with only the central beam active,
    one color (default ``M = 1``).
    """
    if not R_km > 0:
        raise CoverageError(f"beam radius must be positive, got {R_km!r}")
    model = model.upper()
    if model not in ("T1", "T2"):
        raise CoverageError(f"unknown traffic model {model!r}")
    if M is None:
        M = 3 if model == "T1" else 1
    if M not in (1, 3):
        raise CoverageError(f"reuse factor must be 1 or 3, got {M}")

    pitch = math.sqrt(3.0) * R_km
    radius = cone.ground_radius_km
    if radius < R_km:
        i = j = np.zeros(1, int)
        y = z = np.zeros(1)
    else:
        i, j, y, z = _lattice_sites(radius, pitch)

    order = np.lexsort((j, i, np.round(np.arctan2(z, y), 12), np.round(np.hypot(y, z), 9)))
    i, j, y, z = i[order], j[order], y[order], z[order]

    if model == "T1":
        color = np.mod(i - j, 3) if M == 3 else np.zeros_like(i)
        active = np.ones(i.size, bool)
        cluster = np.arange(i.size)
        C = 1
    else:
        C = cluster_size
        offsets = _cluster_center_offsets(C)
        res = np.mod(i + 3 * j, C)
        active = res == 0
        ci = np.empty_like(i)
        cj = np.empty_like(j)
        for r, (da, db) in offsets.items():
            sel = res == r
            ci[sel] = i[sel] - da
            cj[sel] = j[sel] - db
        # Cluster ids follow the ordering of their centers; centers outside
        # the disk still get a stable id.
        keys = {}
        for a, b in zip(ci[active], cj[active]):
            keys[(int(a), int(b))] = len(keys)
        cluster = np.empty(i.size, int)
        extra = len(keys)
        for n, (a, b) in enumerate(zip(ci, cj)):
            key = (int(a), int(b))
            if key not in keys:
                keys[key] = extra
                extra += 1
            cluster[n] = keys[key]
        if M == 3:
            color = np.mod(i - j, 3)
        else:
            color = np.zeros_like(i)
        if not active.any():
            active[0] = True

    phi, theta = ground_to_angles(y, z, cone.h_sat_km)
    return BeamPlan(
        yg_km=y.astype(float), zg_km=z.astype(float), phi=phi, theta=theta,
        color=color.astype(int), active=active, cluster_id=cluster.astype(int),
        axial=np.column_stack([i, j]).astype(int), beam_radius_R=float(R_km),
        reuse_M=int(M), traffic_model=model, cluster_size_C=int(C), cone=cone,
    )


def neighbor_pairs(plan: BeamPlan) -> np.ndarray:
    """Index pairs ``(a, b)``, ``a < b``, of lattice-adjacent beams."""
    index = {(int(a), int(b)): n for n, (a, b) in enumerate(plan.axial)}
    pairs = []
    for n, (a, b) in enumerate(plan.axial):
        for da, db in NEIGHBOR_OFFSETS:
            m = index.get((int(a + da), int(b + db)))
            if m is not None and m > n:
                pairs.append((n, m))
    return np.array(pairs, dtype=int).reshape(-1, 2)


def coverage_area(active_beam_count: int, R_km: float) -> float:
    """Area of ``K`` hexagonal cells of circumradius ``R``, km^2."""
    if active_beam_count < 1:
        raise CoverageError("need at least one active beam")
    return active_beam_count * HEX_AREA_FACTOR * R_km * R_km


def in_hexagon(dy, dz, R_km: float):
    """Whether offsets from a cell center fall in its hexagon (flat sides facing the neighbors)."""
    dy = np.asarray(dy, float)
    dz = np.asarray(dz, float)
    half = math.sqrt(3.0) * R_km / 2.0
    ok = np.abs(dy) <= half
    for ang in (math.pi / 3, 2 * math.pi / 3):
        ok &= np.abs(dy * math.cos(ang) + dz * math.sin(ang)) <= half
    return ok


def sample_in_hexagon(R_km: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform ``(size, 2)`` offsets inside a cell hexagon, by rejection."""
    out = np.empty((0, 2))
    half = math.sqrt(3.0) * R_km / 2.0
    while out.shape[0] < size:
        n = int((size - out.shape[0]) * 1.4) + 8
        cand = np.column_stack([rng.uniform(-half, half, n), rng.uniform(-R_km, R_km, n)])
        keep = in_hexagon(cand[:, 0], cand[:, 1], R_km)
        out = np.vstack([out, cand[keep]])
    return out[:size]


def place_user(plan: BeamPlan, beam_id: int, rng_seed: int | None = None, size: int | None = None):
    """Uniform random user(s) in a beam's ground hexagon, returned as ``(phi, theta)``."""
    rng = np.random.default_rng(rng_seed)
    n = 1 if size is None else size
    off = sample_in_hexagon(plan.beam_radius_R, n, rng)
    y = plan.yg_km[beam_id] + off[:, 0]
    z = plan.zg_km[beam_id] + off[:, 1]
    phi, theta = ground_to_angles(y, z, plan.cone.h_sat_km)
    if size is None:
        return float(phi[0]), float(theta[0])
    return phi, theta


def export_beam_plan(plan: BeamPlan, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beam_id", "yg_km", "zg_km", "phi_deg", "theta_deg", "color", "active",
                    "cluster_id"])
        for n in range(len(plan)):
            w.writerow([n, f"{plan.yg_km[n]:.6f}", f"{plan.zg_km[n]:.6f}",
                        f"{math.degrees(plan.phi[n]):.8f}", f"{math.degrees(plan.theta[n]):.8f}",
                        int(plan.color[n]), int(plan.active[n]), int(plan.cluster_id[n])])
    return path
