"""Element-level geometry of single-satellite panels and of the formation.

All positions live in the ``x = 0`` plane (the yz-plane holds the aperture,
boresight points along +x). Offsets are stored as ``(n, 3)`` float arrays in
meters.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

LAYOUT_KINDS = ("square-grid", "quincunx", "quincunx-diagonal", "explicit")


class GeometryError(ValueError):
    """Raised for an invalid array or formation layout."""


def wavelength(frequency_hz: float) -> float:
    return SPEED_OF_LIGHT / frequency_hz


def _isqrt_exact(n: int, what: str) -> int:
    if int(n) != n or n < 1:
        raise GeometryError(f"{what} must be a positive integer, got {n!r}")
    root = math.isqrt(int(n))
    if root * root != n:
        raise GeometryError(f"{what}={n} is not a perfect square")
    return root


def _centered_line(count: int, pitch: float) -> np.ndarray:
    return pitch * (np.arange(count) - (count - 1) / 2.0)


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Radiating elements of one satellite panel, relative to its center."""

    element_offsets: np.ndarray
    pitch_d: float
    base_N: int
    winglet_rows: int
    panel_area: float
    element_peak_gain_Gamma: float

    @property
    def element_count_N_prime(self) -> int:
        return int(self.element_offsets.shape[0])

    @property
    def element_exponent_q(self) -> float:
        return (self.element_peak_gain_Gamma - 2.0) / 4.0

    @property
    def side_length(self) -> float:
        """Element-to-element extent of the base square, ``(sqrt(N) - 1) d``."""
        return (math.isqrt(self.base_N) - 1) * self.pitch_d

    @property
    def extent(self) -> float:
        """Side of the bounding box of all elements, winglets included."""
        if self.element_count_N_prime == 1:
            return 0.0
        yz = self.element_offsets[:, 1:]
        return float(np.max(yz.max(axis=0) - yz.min(axis=0)))

    @property
    def is_plain_square(self) -> bool:
        return self.winglet_rows == 0


def build_square_array(N: int, d: float, Gamma: float, panel_area: float | None = None) -> ArrayGeometry:
    """Square ``sqrt(N) x sqrt(N)`` grid at pitch ``d`` centered on the origin.

    Element ``n`` (zero based) sits at column ``n mod sqrt(N)`` and row
    ``n // sqrt(N)``, so the y coordinate runs fastest.
    """
    return build_winglet_array(N, d, 0, Gamma, panel_area=panel_area)


def build_winglet_array(
    N: int,
    d: float,
    rows: int,
    Gamma: float,
    panel_area: float | None = None,
    winglet_row_area: float | None = None,
) -> ArrayGeometry:
    """Square base grid plus four foldable winglets of ``rows x sqrt(N)`` elements.

    Each winglet is centered on one side of the base panel. Its first row
    sits one pitch beyond the outermost base row/column, so the pitch stays
    uniform along the cross arms.

    ``panel_area`` defaults to ``L**2`` for the base panel plus
    ``winglet_row_area`` (default ``sqrt(N) d**2``) per deployed winglet row.
    """
    m = _isqrt_exact(N, "N")
    if not d > 0:
        raise GeometryError(f"element pitch d must be positive, got {d!r}")
    if int(rows) != rows or rows < 0:
        raise GeometryError(f"winglet rows must be a non-negative integer, got {rows!r}")
    if rows > (m - 1) // 2:
        raise GeometryError(
            f"{rows} winglet rows cannot fold onto a {m}x{m} panel (max {(m - 1) // 2})"
        )
    if not Gamma > 2:
        raise GeometryError(f"element peak gain must exceed 2 (linear), got {Gamma!r}")

    line = _centered_line(m, d)
    yy, zz = np.meshgrid(line, line, indexing="xy")
    base = np.column_stack([np.zeros(N), yy.ravel(), zz.ravel()])

    parts = [base]
    half = (m - 1) * d / 2.0
    for r in range(1, rows + 1):
        out = half + r * d
        zeros = np.zeros(m)
        parts.append(np.column_stack([zeros, np.full(m, out), line]))
        parts.append(np.column_stack([zeros, np.full(m, -out), line]))
        parts.append(np.column_stack([zeros, line, np.full(m, out)]))
        parts.append(np.column_stack([zeros, line, np.full(m, -out)]))
    offsets = np.vstack(parts)

    if panel_area is None:
        row_area = m * d * d if winglet_row_area is None else winglet_row_area
        panel_area = ((m - 1) * d) ** 2 + 4 * rows * row_area

    return ArrayGeometry(
        element_offsets=offsets,
        pitch_d=float(d),
        base_N=int(N),
        winglet_rows=int(rows),
        panel_area=float(panel_area),
        element_peak_gain_Gamma=float(Gamma),
    )


@dataclass(frozen=True, eq=False)
class FoAGeometry:
    """Satellite centers sharing one panel design.

    ``phase_errors`` optionally carries one phase offset (radians) per
    satellite; pattern evaluation applies it when present.
    """

    satellite_centers: np.ndarray
    array: ArrayGeometry
    spacing_Delta: float
    layout_kind: str = "explicit"
    phase_errors: np.ndarray | None = field(default=None)

    @property
    def satellite_count_S(self) -> int:
        return int(self.satellite_centers.shape[0])

    @property
    def element_count(self) -> int:
        return self.satellite_count_S * self.array.element_count_N_prime

    def element_positions(self) -> np.ndarray:
        """Flattened ``(S * N', 3)`` positions, satellite-major order."""
        c = self.satellite_centers[:, None, :]
        o = self.array.element_offsets[None, :, :]
        return (c + o).reshape(-1, 3)

    def total_area(self) -> float:
        return self.satellite_count_S * self.array.panel_area

    def with_phase_errors(self, phases: np.ndarray | None) -> "FoAGeometry":
        if phases is not None:
            phases = np.asarray(phases, dtype=float)
            if phases.shape != (self.satellite_count_S,):
                raise GeometryError(
                    f"need {self.satellite_count_S} phase errors, got shape {phases.shape}"
                )
        return FoAGeometry(
            self.satellite_centers, self.array, self.spacing_Delta, self.layout_kind, phases
        )

    def digest(self) -> str:
        """Short content hash, stable across runs."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.satellite_centers, dtype=np.float64).tobytes())
        h.update(np.ascontiguousarray(self.array.element_offsets, dtype=np.float64).tobytes())
        h.update(repr((self.array.element_peak_gain_Gamma, self.layout_kind)).encode())
        if self.phase_errors is not None:
            h.update(np.ascontiguousarray(self.phase_errors, dtype=np.float64).tobytes())
        return h.hexdigest()[:16]


def _check_no_overlap(centers: np.ndarray, array: ArrayGeometry) -> None:
    if centers.shape[0] < 2:
        return
    side = array.extent
    yz = centers[:, 1:]
    diff = np.abs(yz[:, None, :] - yz[None, :, :])
    # Axis-aligned square panels overlap iff both separations are below the side.
    clash = (diff[:, :, 0] < side - 1e-9) & (diff[:, :, 1] < side - 1e-9)
    clash &= ~np.eye(len(centers), dtype=bool)
    if clash.any():
        i, j = np.argwhere(clash)[0]
        raise GeometryError(
            f"panels {i} and {j} overlap: panel side {side:.4g} m exceeds their separation"
        )


def build_foa_grid(S: int, Delta: float, array: ArrayGeometry) -> FoAGeometry:
    """``sqrt(S) x sqrt(S)`` formation at center pitch ``Delta``."""
    m = _isqrt_exact(S, "S")
    if S > 1 and not Delta > 0:
        raise GeometryError(f"spacing Delta must be positive, got {Delta!r}")
    if S > 1 and not Delta >= array.extent - 1e-9:
        raise GeometryError(
            f"spacing Delta={Delta!r} m is smaller than the panel side {array.extent:.4g} m; "
            "panels would overlap"
        )
    line = _centered_line(m, Delta)
    yy, zz = np.meshgrid(line, line, indexing="xy")
    centers = np.column_stack([np.zeros(S), yy.ravel(), zz.ravel()])
    return FoAGeometry(centers, array, float(Delta), "square-grid")


def build_foa_quincunx(Delta: float, array: ArrayGeometry, diagonal: bool = False) -> FoAGeometry:
    """Central satellite plus four neighbors at distance ``Delta`` along y and z.

    With ``diagonal=True`` the neighbors sit on the corners ``(+-Delta, +-Delta)``.
    """
    if not Delta > 0:
        raise GeometryError(f"spacing Delta must be positive, got {Delta!r}")
    if diagonal:
        pts = [(0, 0), (Delta, Delta), (-Delta, Delta), (-Delta, -Delta), (Delta, -Delta)]
    else:
        pts = [(0, 0), (Delta, 0), (-Delta, 0), (0, Delta), (0, -Delta)]
    centers = np.array([(0.0, y, z) for y, z in pts])
    _check_no_overlap(centers, array)
    kind = "quincunx-diagonal" if diagonal else "quincunx"
    return FoAGeometry(centers, array, float(Delta), kind)


def build_foa_explicit(
    centers: Iterable[Sequence[float]], array: ArrayGeometry, Delta: float = float("nan")
) -> FoAGeometry:
    """Formation from an arbitrary list of ``(y, z)`` or ``(x, y, z)`` centers."""
    pts = np.asarray(list(centers), dtype=float)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3) or pts.shape[0] == 0:
        raise GeometryError("centers must be a non-empty list of 2- or 3-vectors")
    if pts.shape[1] == 2:
        pts = np.column_stack([np.zeros(len(pts)), pts])
    if np.any(pts[:, 0] != 0.0):
        raise GeometryError("satellite centers must lie in the x = 0 plane")
    _check_no_overlap(pts, array)
    return FoAGeometry(pts, array, float(Delta), "explicit")


def max_element_spacing(theta_bar_deg: float) -> float:
    """Largest ``d / lambda`` keeping grating lobes out of a +-theta_bar field of view."""
    if not 0.0 < theta_bar_deg < 90.0:
        raise GeometryError(f"coverage angle must be in (0, 90) degrees, got {theta_bar_deg!r}")
    return 1.0 / (2.0 * math.sin(math.radians(theta_bar_deg)))


def export_geometry_csv(foa: FoAGeometry, path: str | Path) -> Path:
    path = Path(path)
    n = foa.array.element_count_N_prime
    pos = foa.element_positions()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["satellite_index", "element_index", "x_m", "y_m", "z_m"])
        for i, (x, y, z) in enumerate(pos):
            w.writerow([i // n, i % n, repr(float(x)), repr(float(y)), repr(float(z))])
    return path
