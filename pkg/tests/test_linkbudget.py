import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from foasim.coverage import build_beam_lattice, coverage_cone
from foasim.geometry import build_foa_grid, build_square_array, wavelength
from foasim.linkbudget import (InfeasibleError, LinkBudgetError, LinkEvaluator, LossChain, OutageError,
                               PhyTable, PowerChain, ProcedureInputs, area_throughput, beam_throughput,
                               beamforming_matrix, db, db_sum_inverse, eirp_per_beam, free_space_loss_db,
                               hexagon_vertices, los_snr, phy_select, rf_power_per_satellite,
                               run_throughput_procedure, sinr)
from foasim.pattern import response_vector

LAM = wavelength(2.2e9)


def small_setup(S=9, R=60.0, model="T1"):
    arr = build_square_array(9, 1.5 * LAM, 10 ** 1.3)
    foa = build_foa_grid(S, 1.25 * arr.side_length, arr)
    plan = build_beam_lattice(coverage_cone(550.0, 60.0), R, model)
    return foa, plan


def test_rf_power_per_satellite():
    assert rf_power_per_satellite(PowerChain(200, 13.56, 0.40, 0.35)) == pytest.approx(379.7, abs=0.1)
    assert rf_power_per_satellite(PowerChain(200, 14.16, 0.25, 0.35)) == pytest.approx(247.8, abs=0.1)
    assert rf_power_per_satellite(PowerChain(200, 14.16, 0.0, 0.35)) == 0.0
    with pytest.raises(LinkBudgetError):
        PowerChain(200, 14.16, 1.5, 0.35)


def test_free_space_loss_geo():
    # 60 deg elevation from GEO at 2.2 GHz
    assert free_space_loss_db(36_606.0, 2.2e9) == pytest.approx(190.6, abs=0.1)


def test_los_snr_published_example():
    # EIRP 83 dBW, 20 MHz, FSPL 190.8 dB, C1 losses plus 1 dB miscellaneous loss
    losses = LossChain.for_channel("C1", 190.8, misc_loss_db=1.0)
    assert los_snr(83.0, losses, 20e6) == pytest.approx(11.6, abs=0.5)


def test_los_snr_linear_in_db():
    losses = LossChain(190.0)
    base = los_snr(80.0, losses, 20e6)
    assert los_snr(83.0, losses, 20e6) == pytest.approx(base + 3.0, abs=1e-12)
    assert los_snr(80.0, losses, 40e6) == pytest.approx(base - 3.0103, abs=1e-4)


def test_channel_shadowing():
    assert LossChain.for_channel("C1", 190.0).shadowing_db == 4.0
    assert LossChain.for_channel("C2", 190.0).shadowing_db == 0.0
    with pytest.raises(LinkBudgetError):
        LossChain.for_channel("C3", 190.0)


@pytest.mark.parametrize("eff, eta, req", [(-2.0, 0.59, -2.0), (2.5, 1.11, 2.0), (-7.0, 0.20, -7.0),
                                           (10.0, 1.28, 3.0)])
def test_phy_select(eff, eta, req):
    assert phy_select(eff) == (eta, req)


def test_phy_outage():
    with pytest.raises(OutageError):
        phy_select(-7.01)


def test_phy_table_must_increase():
    with pytest.raises(LinkBudgetError):
        PhyTable((0.0, -1.0), (0.1, 0.2))


@given(a=st.floats(-20, 20), b=st.floats(-20, 20))
def test_phy_select_monotone(a, b):
    lo, hi = sorted((a, b))
    if lo < -7.0:
        return
    assert phy_select(lo)[0] <= phy_select(hi)[0]
    assert phy_select(lo)[1] <= lo + 1e-9


def test_beam_throughput():
    assert beam_throughput(0.59, 60e6, 3, 0.9083) == pytest.approx(10.7, abs=0.05)
    assert beam_throughput(0.82, 60e6, 1, 0.9083) == pytest.approx(44.7, abs=0.05)
    assert beam_throughput(1.0, 60e6, 1, 1.0) == pytest.approx(60.0)


def test_bw_efficiency_ratio_oracle():
    assert 44.7 / (60 * 0.82) == pytest.approx(0.9083, abs=5e-4)


def test_area_throughput():
    assert area_throughput(242_290, 2_848_341) == pytest.approx(8.51e-2, rel=5e-3)
    assert area_throughput(19_473, 44_351) == pytest.approx(4.39e-1, rel=5e-3)
    assert area_throughput(0, 10) == 0.0
    with pytest.raises(LinkBudgetError):
        area_throughput(1, 0)


def test_eirp_per_beam():
    base = eirp_per_beam(54.3, 70.33, 1.3, 2.0, 1)
    assert base == pytest.approx(54.3 + 70.33 - 1.3 - 2.0)
    assert eirp_per_beam(54.3, 70.33, 1.3, 2.0, 2) == pytest.approx(base - 3.0103, abs=1e-4)
    # Published W0 example with the stated 2 dB back-off lands 1 dB under the table value.
    assert eirp_per_beam(54.3, 70.33, 1.3, 2.0, 5417) == pytest.approx(83.99, abs=0.01)


def test_db_sum_inverse():
    assert db_sum_inverse(10.0, 10.0) == pytest.approx(10.0 - 3.0103, abs=1e-4)


def test_beamforming_matrix_trace_and_nadir():
    foa, plan = small_setup()
    V = beamforming_matrix(foa, plan, LAM)
    assert np.real(np.vdot(V, V)) == pytest.approx(1.0, abs=1e-12)
    V1 = beamforming_matrix(foa, lam=LAM, phi=[0.0], theta=[0.0])
    np.testing.assert_allclose(V1[:, 0], V1[0, 0])
    sub = beamforming_matrix(foa, plan.keep_innermost(3), LAM)
    assert np.real(np.vdot(sub, sub)) == pytest.approx(1.0, abs=1e-12)


def test_beamforming_symmetric_beams_conjugate():
    foa, _ = small_setup()
    V = beamforming_matrix(foa, lam=LAM, phi=[0.01, -0.01], theta=[0.0, 0.0])
    np.testing.assert_allclose(V[:, 0], np.conj(V[:, 1]), atol=1e-14)


def test_single_beam_sinr_is_snr():
    foa, _ = small_setup()
    V = beamforming_matrix(foa, lam=LAM, phi=[0.0], theta=[0.0])
    a = response_vector(foa, 0.001, 0.0, LAM)
    sig = abs(np.conj(a) @ V[:, 0]) ** 2
    assert sinr(a, V, 0, 2.0, 1e-3, 1e-2) == pytest.approx(float(db(sig * 2.0 * 1e-3 / 1e-2)))


def test_symmetric_interference_limit():
    foa, _ = small_setup()
    V = beamforming_matrix(foa, lam=LAM, phi=[0.01, -0.01], theta=[0.0, 0.0])
    a = response_vector(foa, 0.0, 0.0, LAM)
    assert sinr(a, V, 0, 1.0, 1.0, 1e-30) == pytest.approx(0.0, abs=1e-9)


@given(seed=st.integers(0, 10_000))
def test_removing_interferer_never_hurts(seed):
    rng = np.random.default_rng(seed)
    foa, _ = small_setup()
    phi = rng.uniform(-0.05, 0.05, 5)
    theta = rng.uniform(-0.05, 0.05, 5)
    V = beamforming_matrix(foa, lam=LAM, phi=phi, theta=theta)
    a = response_vector(foa, phi[0] + 0.001, theta[0], LAM)
    mask = np.ones(5, bool)
    full = sinr(a, V, 0, 1.0, 1.0, 1e-3, mask)
    mask[int(rng.integers(1, 5))] = False
    assert sinr(a, V, 0, 1.0, 1.0, 1e-3, mask) >= full - 1e-12


def test_implicit_evaluator_matches_explicit_matrix():
    foa, plan = small_setup(R=80.0)
    losses = LossChain(150.0)
    ev = LinkEvaluator(foa, plan, LAM, 20.0, losses, 20e6)
    K = ev.K_max
    V = beamforming_matrix(foa, plan, LAM)
    beam = int(ev.order[K - 1])
    phi_u, theta_u = ev.user_points(beam)[2]
    s = ev.sample(K, beam, phi_u, theta_u)
    a = response_vector(foa, phi_u, theta_u, LAM)
    g = np.abs(np.conj(a) @ V) ** 2
    col = list(plan.active_ids).index(beam)
    co = plan.color[plan.active_ids] == plan.color[beam]
    co[col] = False
    assert s.signal_lin == pytest.approx(g[col], rel=1e-9)
    assert s.interference_lin == pytest.approx(g[co].sum(), rel=1e-9)


def test_hexagon_vertices_radius():
    v = hexagon_vertices(3.0)
    np.testing.assert_allclose(np.hypot(v[:, 0], v[:, 1]), 3.0)


def inputs(**kw):
    base = dict(B_hz=60e6, M=3, satellite_rf_w=300.0, power=PowerChain(200, 13.56, 0.4, 0.35),
                losses=LossChain.for_channel("C2", 150.0), target_beam_throughput_mbps=0.0)
    base.update(kw)
    return ProcedureInputs(**base)


def test_procedure_runs_and_is_consistent():
    foa, plan = small_setup(R=80.0)
    r = run_throughput_procedure(foa, plan, LAM, inputs())
    assert 1 <= r.active_beams_K <= r.initial_beams_K
    assert r.eta in PhyTable().eta
    assert r.effective_sinr_db >= r.required_sinr_db - 1e-9
    assert r.aggregate_throughput_mbps == pytest.approx(r.active_beams_K * r.beam_throughput_mbps)
    assert r.area_throughput_rho == pytest.approx(r.aggregate_throughput_mbps / r.coverage_area_km2)


def test_procedure_outage_single_beam():
    foa, plan = small_setup(R=80.0)
    with pytest.raises(InfeasibleError):
        run_throughput_procedure(foa, plan, LAM, inputs(losses=LossChain.for_channel("C1", 260.0)))


def test_procedure_unreachable_target():
    foa, plan = small_setup(R=80.0)
    with pytest.raises(InfeasibleError):
        run_throughput_procedure(foa, plan, LAM, inputs(target_beam_throughput_mbps=1e4))


def test_procedure_is_deterministic():
    foa, plan = small_setup(R=80.0)
    a = run_throughput_procedure(foa, plan, LAM, inputs(user_position="random", seed=4))
    b = run_throughput_procedure(foa, plan, LAM, inputs(user_position="random", seed=4))
    assert a == b
