"""Downlink power chain, SINR and the iterative beam-count/PHY procedure.

Powers are in watts or dBW, gains in dB unless a name says ``_lin``.
Throughputs are in Mbps, areas in km^2.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .coverage import BeamPlan, coverage_area, ground_to_angles, place_user
from .geometry import FoAGeometry
from .pattern import element_gain, response_vector, steering_inner

BOLTZMANN_DBW = 228.6  # -10 log10(k_B), dB(W/K/Hz)

DEFAULT_PHY_SINR = (-7.0, -6.0, -5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
DEFAULT_PHY_ETA = (0.20, 0.23, 0.31, 0.38, 0.49, 0.59, 0.69, 0.82, 0.95, 1.11, 1.28)

# Ratio of reported beam throughput to eta * B / M in the reference tables.
DEFAULT_BW_EFFICIENCY = 0.9083

USER_POSITIONS = ("edge", "center", "random")


class LinkBudgetError(ValueError):
    pass


class OutageError(LinkBudgetError):
    """No PHY row is feasible at the given SINR."""


class InfeasibleError(LinkBudgetError):
    """The link cannot be closed even with a single active beam."""


class ConvergenceError(LinkBudgetError):
    pass


def db(x):
    return 10.0 * np.log10(x)


def undb(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def db_sum_inverse(*terms_db: float) -> float:
    """Combine ratios as ``1 / sum(1 / x_i)``, all in dB (e.g. SNR with SIR)."""
    return float(-db(sum(undb(-t) for t in terms_db)))


@dataclass(frozen=True)
class PowerChain:
    solar_dc_per_m2: float
    array_surface: float
    tx_platform_dc_ratio: float
    dc_to_rf_efficiency: float
    output_backoff_db: float = 2.0
    antenna_losses_db: float = 1.3

    def __post_init__(self):
        for name in ("tx_platform_dc_ratio", "dc_to_rf_efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise LinkBudgetError(f"{name} must be a fraction in [0, 1], got {v!r}")
        for name in ("solar_dc_per_m2", "array_surface", "output_backoff_db", "antenna_losses_db"):
            if getattr(self, name) < 0:
                raise LinkBudgetError(f"{name} must be non-negative")

    @property
    def max_rf_per_array(self) -> float:
        return (self.solar_dc_per_m2 * self.array_surface * self.tx_platform_dc_ratio
                * self.dc_to_rf_efficiency)


def rf_power_per_satellite(chain: PowerChain) -> float:
    """Maximum RF power of one panel in W; back-off is applied later, at the EIRP."""
    return chain.max_rf_per_array


@dataclass(frozen=True)
class LossChain:
    fspl_db: float
    atmospheric_db: float = 0.5
    body_db: float = 3.0
    fading_margin_db: float = 3.0
    shadowing_db: float = 4.0
    demod_loss_db: float = 1.0
    G_over_T_dbK: float = -31.6
    misc_loss_db: float = 0.0  # e.g. polarization or pointing, applied with the body loss

    def __post_init__(self):
        for name in ("fspl_db", "atmospheric_db", "body_db", "fading_margin_db", "shadowing_db",
                     "demod_loss_db", "misc_loss_db"):
            if getattr(self, name) < 0:
                raise LinkBudgetError(f"loss {name} must be non-negative, got {getattr(self, name)!r}")

    @classmethod
    def for_channel(cls, channel: str, fspl_db: float, shadowing_db: float = 4.0, **kw) -> "LossChain":
        """C1 keeps the tree-shadowing loss, C2 (clear path) drops it."""
        channel = channel.upper()
        if channel not in ("C1", "C2"):
            raise LinkBudgetError(f"unknown channel {channel!r}")
        return cls(fspl_db=fspl_db, shadowing_db=shadowing_db if channel == "C1" else 0.0, **kw)

    @property
    def phy_margin_db(self) -> float:
        return self.fading_margin_db + self.demod_loss_db


def free_space_loss_db(distance_km: float, frequency_hz: float) -> float:
    return float(db((4.0 * math.pi * distance_km * 1e3 * frequency_hz / 299_792_458.0) ** 2))


@dataclass(frozen=True)
class PhyTable:
    required_sinr_db: tuple = DEFAULT_PHY_SINR
    eta: tuple = DEFAULT_PHY_ETA

    def __post_init__(self):
        r = tuple(float(x) for x in self.required_sinr_db)
        e = tuple(float(x) for x in self.eta)
        object.__setattr__(self, "required_sinr_db", r)
        object.__setattr__(self, "eta", e)
        if len(r) != len(e) or not r:
            raise LinkBudgetError("PHY table needs matching, non-empty SINR and eta columns")
        if any(b <= a for a, b in zip(r, r[1:])) or any(b <= a for a, b in zip(e, e[1:])):
            raise LinkBudgetError("PHY table columns must be strictly increasing")

    def __len__(self):
        return len(self.eta)


def phy_select(effective_sinr_db: float, table: PhyTable = PhyTable()) -> tuple[float, float]:
    """Most efficient row whose required SINR does not exceed the effective SINR."""
    idx = phy_index(effective_sinr_db, table)
    return table.eta[idx], table.required_sinr_db[idx]


def phy_index(effective_sinr_db: float, table: PhyTable = PhyTable()) -> int:
    # Tolerate rounding of values printed to one decimal.
    idx = int(np.searchsorted(table.required_sinr_db, effective_sinr_db + 1e-9, side="right")) - 1
    if idx < 0:
        raise OutageError(
            f"effective SINR {effective_sinr_db:.2f} dB is below the lowest PHY threshold "
            f"{table.required_sinr_db[0]:.1f} dB"
        )
    return idx


def beam_throughput(eta: float, B_hz: float, M: int, bw_efficiency_factor: float = DEFAULT_BW_EFFICIENCY) -> float:
    if not 0.0 < bw_efficiency_factor <= 1.0:
        raise LinkBudgetError(f"bandwidth efficiency factor must be in (0, 1], got {bw_efficiency_factor!r}")
    return eta * B_hz / M * bw_efficiency_factor / 1e6


def eirp_per_beam(total_rf_dbw: float, directivity_dbi: float, antenna_losses_db: float,
                  backoff_db: float, K: int) -> float:
    if K < 1:
        raise LinkBudgetError("need at least one beam")
    return total_rf_dbw - backoff_db + directivity_dbi - antenna_losses_db - float(db(K))


def los_snr(eirp_dbw: float, losses: LossChain, bandwidth_hz: float) -> float:
    """Clear-sky SNR; shadowing, fading margin and demodulator loss are applied downstream."""
    return (eirp_dbw + losses.G_over_T_dbK + BOLTZMANN_DBW - float(db(bandwidth_hz))
            - losses.fspl_db - losses.atmospheric_db - losses.body_db - losses.misc_loss_db)


def area_throughput(aggregate_mbps: float, area_km2: float) -> float:
    if not area_km2 > 0:
        raise LinkBudgetError(f"coverage area must be positive, got {area_km2!r}")
    return aggregate_mbps / area_km2


# Explicit precoding matrix and SINR, for small problems and for checking the implicit path.

def beamforming_matrix(foa: FoAGeometry, plan: BeamPlan | None = None, lam: float | None = None,
                       phi=None, theta=None) -> np.ndarray:
    """Columns ``a(phi_k, theta_k) / sqrt(alpha)`` with ``alpha = tr(A^H A)``.

    Beam directions come from the active beams of ``plan`` or from explicit
    ``phi``/``theta`` arrays (radians).
    """
    if lam is None:
        raise LinkBudgetError("wavelength is required")
    if plan is not None:
        ids = plan.active_ids
        phi, theta = plan.phi[ids], plan.theta[ids]
    phi = np.atleast_1d(np.asarray(phi, float))
    theta = np.atleast_1d(np.asarray(theta, float))
    if phi.size < 1:
        raise LinkBudgetError("need at least one active beam")
    A = np.column_stack([response_vector(foa, p, t, lam) for p, t in zip(phi, theta)])
    alpha = float(np.real(np.vdot(A, A)))
    return A / math.sqrt(alpha)


def sinr(a_user: np.ndarray, V: np.ndarray, k: int, powers, beta, sigma2: float,
         co_channel=None) -> float:
    """SINR in dB of a user with response ``a_user`` served by column ``k``.

    ``co_channel`` (boolean per column) restricts the interferers; by default
    every other column interferes.
    """
    if not sigma2 > 0:
        raise LinkBudgetError(f"noise power must be positive, got {sigma2!r}")
    p = np.broadcast_to(np.asarray(powers, float), (V.shape[1],))
    g = np.abs(np.conj(a_user) @ V) ** 2 * p
    mask = np.ones(V.shape[1], bool) if co_channel is None else np.asarray(co_channel, bool).copy()
    mask[k] = False
    return float(db(g[k] / (sigma2 / beta + g[mask].sum())))


# Implicit evaluation for thousands of beams.

def hexagon_vertices(R_km: float) -> np.ndarray:
    """Vertex offsets ``(6, 2)`` of a cell (flat sides facing the lattice neighbors)."""
    ang = np.radians(90.0 + 60.0 * np.arange(6))
    return R_km * np.column_stack([np.cos(ang), np.sin(ang)])


@dataclass(frozen=True)
class LinkSample:
    """Link quantities of one user for a given set of active beams."""

    signal_lin: float  # |a_u^H a_c|^2 / alpha, i.e. EIRP toward the user per unit total power
    interference_lin: float
    snr_db: float  # with body, atmospheric and shadowing losses
    sir_db: float
    total_sinr_db: float
    beam_id: int
    user_phi: float
    user_theta: float


class LinkEvaluator:
    """Large-K SINR evaluation using closed-form steering inner products.

    ``p_k`` is set to the total radiated power: the trace normalization of
    ``V`` already divides it among the active beams.
    """

    def __init__(self, foa: FoAGeometry, plan: BeamPlan, lam: float, total_power_dbw: float,
                 losses: LossChain, noise_bandwidth_hz: float):
        self.foa = foa
        self.plan = plan
        self.lam = lam
        self.total_power_dbw = total_power_dbw
        self.losses = losses
        self.noise_bandwidth_hz = noise_bandwidth_hz
        self.order = plan.active_ids
        g = element_gain(plan.theta[self.order], foa.array.element_peak_gain_Gamma)
        self._g2_cum = np.cumsum(g * g)
        self._n = foa.element_count

    @property
    def K_max(self) -> int:
        return int(self.order.size)

    def alpha(self, K: int) -> float:
        return float(self._n * self._g2_cum[K - 1])

    def noise_floor_dbw(self) -> float:
        """Received-power-to-SNR offset: ``SNR = EIRP_toward_user + this``."""
        L = self.losses
        return (L.G_over_T_dbK + BOLTZMANN_DBW - float(db(self.noise_bandwidth_hz)) - L.fspl_db
                - L.atmospheric_db - L.body_db - L.misc_loss_db - L.shadowing_db)

    def sample(self, K: int, beam_id: int, phi_u: float, theta_u: float) -> LinkSample:
        plan = self.plan
        active = self.order[:K]
        co = active[(plan.color[active] == plan.color[beam_id]) & (active != beam_id)]
        s = steering_inner(self.foa, self.lam, phi_u, theta_u, plan.phi[beam_id], plan.theta[beam_id])
        sig = float(abs(s) ** 2) / self.alpha(K)
        if co.size:
            amp = steering_inner(self.foa, self.lam, phi_u, theta_u, plan.phi[co], plan.theta[co])
            intf = float(np.sum(np.abs(amp) ** 2)) / self.alpha(K)
        else:
            intf = 0.0
        snr = self.total_power_dbw + float(db(sig)) + self.noise_floor_dbw()
        sir = math.inf if intf == 0.0 else float(db(sig / intf))
        tot = snr if intf == 0.0 else db_sum_inverse(snr, sir)
        return LinkSample(sig, intf, snr, sir, tot, int(beam_id), float(phi_u), float(theta_u))

    def user_points(self, beam_id: int, position: str = "edge", seed: int | None = 0):
        plan = self.plan
        if position == "center":
            return [(plan.phi[beam_id], plan.theta[beam_id])]
        if position == "random":
            return [place_user(plan, beam_id, seed)]
        if position == "edge":
            v = hexagon_vertices(plan.beam_radius_R)
            phi, theta = ground_to_angles(plan.yg_km[beam_id] + v[:, 0], plan.zg_km[beam_id] + v[:, 1],
                                          plan.cone.h_sat_km)
            return list(zip(phi, theta))
        raise LinkBudgetError(f"unknown user position {position!r}; expected one of {USER_POSITIONS}")

    def worst_case(self, K: int, position: str = "edge", seed: int | None = 0) -> LinkSample:
        """Lowest-SINR sample at the chosen position(s) in the outermost active beam."""
        beam = int(self.order[K - 1])
        samples = [self.sample(K, beam, p, t) for p, t in self.user_points(beam, position, seed)]
        return min(samples, key=lambda s: s.total_sinr_db)


@dataclass(frozen=True)
class ProcedureInputs:
    """Everything the iterative procedure needs besides geometry and beam plan."""

    B_hz: float
    M: int
    satellite_rf_w: float
    power: PowerChain
    losses: LossChain
    phy: PhyTable = PhyTable()
    bw_efficiency_factor: float = DEFAULT_BW_EFFICIENCY
    target_beam_throughput_mbps: float = 0.0
    noise_bandwidth_hz: float | None = None  # defaults to B / M
    user_position: str = "edge"
    seed: int = 0
    max_iterations: int = 10_000


@dataclass(frozen=True)
class ScenarioResult:
    rf_power_per_satellite_w: float
    foa_total_rf_dbw: float
    eirp_per_beam_dbw: float
    los_snr_db: float
    sir_db: float
    total_sinr_db: float
    effective_sinr_db: float
    eta: float
    required_sinr_db: float
    beam_radius_km: float
    beam_throughput_mbps: float
    active_beams_K: int
    initial_beams_K: int
    aggregate_throughput_mbps: float
    coverage_area_km2: float
    area_throughput_rho: float
    directivity_dbi: float
    iterations: int
    traffic_model: str = ""
    channel: str = ""
    notes: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d


def run_throughput_procedure(foa: FoAGeometry, plan: BeamPlan, lam: float, inputs: ProcedureInputs,
                             channel: str = "") -> ScenarioResult:
    """Iterative PHY selection and outer-beam pruning.

    Start with every lattice site of the traffic model active and the lowest
    PHY row meeting the target beam throughput. While the worst-case user has
    a positive margin, move to the next PHY row. Once the margin is negative,
    drop the outermost beams in proportion to the linear margin until it is
    non-negative again; stop there unless the margin covers another row.
    """
    phy = inputs.phy
    B, M = inputs.B_hz, inputs.M
    total_rf_dbw = float(db(foa.satellite_count_S * inputs.satellite_rf_w))
    directivity = float(db(foa.array.element_peak_gain_Gamma * foa.element_count))
    # Radiated power that the normalized beamformer divides among the beams.
    radiated_dbw = total_rf_dbw - inputs.power.output_backoff_db - inputs.power.antenna_losses_db
    bw_noise = inputs.noise_bandwidth_hz or B / M
    ev = LinkEvaluator(foa, plan, lam, radiated_dbw, inputs.losses, bw_noise)
    if ev.K_max < 1:
        raise InfeasibleError("the beam plan has no active beams")

    j0 = next((j for j, e in enumerate(phy.eta)
               if beam_throughput(e, B, M, inputs.bw_efficiency_factor) >= inputs.target_beam_throughput_mbps - 1e-9),
              None)
    if j0 is None:
        raise InfeasibleError("no PHY row reaches the target beam throughput")

    K = ev.K_max
    j = j0
    pruned = False
    top = len(phy) - 1
    for it in range(1, inputs.max_iterations + 1):
        s = ev.worst_case(K, inputs.user_position, inputs.seed)
        eff = s.total_sinr_db - inputs.losses.phy_margin_db
        margin = eff - phy.required_sinr_db[j]
        if margin >= 0:
            if j == top:
                break
            if pruned and margin < phy.required_sinr_db[j + 1] - phy.required_sinr_db[j]:
                break
            j += 1
            pruned = False
            continue
        if K == 1:
            if j > j0:
                j -= 1
                pruned = True
                continue
            raise InfeasibleError(
                f"effective SINR {eff:.2f} dB with a single beam is below {phy.required_sinr_db[j]:.1f} dB"
            )
        K = max(1, min(K - 1, math.ceil(K * float(undb(margin)))))
        pruned = True
    else:
        raise ConvergenceError(f"no convergence after {inputs.max_iterations} iterations")

    eirp = eirp_per_beam(total_rf_dbw, directivity, inputs.power.antenna_losses_db,
                         inputs.power.output_backoff_db, K)
    tput = beam_throughput(phy.eta[j], B, M, inputs.bw_efficiency_factor)
    area = coverage_area(K, plan.beam_radius_R)
    agg = K * tput
    return ScenarioResult(
        rf_power_per_satellite_w=inputs.satellite_rf_w,
        foa_total_rf_dbw=total_rf_dbw,
        eirp_per_beam_dbw=eirp,
        los_snr_db=los_snr(eirp, inputs.losses, bw_noise),
        sir_db=s.sir_db,
        total_sinr_db=s.total_sinr_db,
        effective_sinr_db=eff,
        eta=phy.eta[j],
        required_sinr_db=phy.required_sinr_db[j],
        beam_radius_km=plan.beam_radius_R,
        beam_throughput_mbps=tput,
        active_beams_K=K,
        initial_beams_K=ev.K_max,
        aggregate_throughput_mbps=agg,
        coverage_area_km2=area,
        area_throughput_rho=area_throughput(agg, area),
        directivity_dbi=directivity,
        iterations=it,
        traffic_model=plan.traffic_model,
        channel=channel,
    )
