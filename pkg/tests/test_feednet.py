import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from foasim.feednet import (FeedNetError, FeedNetSpec, TABLE_ROWS, aggregate_isl_bandwidth,
                            feeder_total_bandwidth, gateway_count, isl_throughput_per_satellite,
                            narrowband_check, size_feednet, wdm_count, write_report)

GEO = FeedNetSpec(beams_K=5417, colors_C=1, elements_N=49, satellites_S=1089, bandwidth_per_beam=60e6)
LEO = FeedNetSpec(beams_K=1785, colors_C=1, elements_N=2209, satellites_S=5, bandwidth_per_beam=60e6)


def test_isl_throughput():
    assert isl_throughput_per_satellite(GEO) == pytest.approx(58.8)
    assert isl_throughput_per_satellite(LEO) == pytest.approx(2650.8)
    one = FeedNetSpec(1, 1, 1, 1, 1.0, adc_bits=1, samples_per_bandwidth=1.0)
    assert isl_throughput_per_satellite(one) * 1e9 == pytest.approx(1.0)


def test_distributed_mode_scales_with_beams():
    spec = FeedNetSpec(5417, 1, 49, 1089, 60e6, mode="distributed")
    assert isl_throughput_per_satellite(spec) == pytest.approx(5417 * 60e6 * 2.5 * 8 / 1e9)


def test_element_bandwidth_separate_from_beam_share():
    spec = FeedNetSpec(12479, 3, 49, 1089, 20e6, element_bandwidth=60e6)
    assert isl_throughput_per_satellite(spec) == pytest.approx(58.8)
    assert feeder_total_bandwidth(spec) == pytest.approx(12479 * 0.02)


def test_wdm_count():
    assert wdm_count(2651, 100) == 27
    assert wdm_count(59, 100) == 1
    assert wdm_count(100, 100) == 1
    with pytest.raises(FeedNetError):
        wdm_count(10, 0)


def test_gateways():
    assert feeder_total_bandwidth(GEO) == pytest.approx(325.02)
    assert gateway_count(GEO) == 55
    assert gateway_count(LEO) == 18
    assert gateway_count(FeedNetSpec(1, 1, 1, 1, 60e6)) == 1


def test_aggregate():
    assert aggregate_isl_bandwidth(GEO) == 64251
    assert aggregate_isl_bandwidth(LEO) == 13255
    single = FeedNetSpec(1, 1, 49, 1, 60e6)
    assert aggregate_isl_bandwidth(single) == 59


def test_size_feednet_rows(tmp_path):
    geo, leo = size_feednet(GEO), size_feednet(LEO)
    assert (geo.single_isl_throughput_rounded_gbps, geo.wdm_per_isl, geo.gateways) == (59, 1, 55)
    assert (leo.single_isl_throughput_rounded_gbps, leo.wdm_per_isl, leo.gateways) == (2651, 27, 18)
    doc = json.loads(write_report({"r-geo": geo, "leo": leo}, tmp_path / "f.json").read_text())
    assert set(doc["leo"]["rows"]) == {label for label, _, _ in TABLE_ROWS}


def test_narrowband():
    v = narrowband_check(60e6, 2.2e9, 1100, 4.3)
    assert v.fractional_bandwidth == pytest.approx(0.0273, abs=1e-4)
    assert v.raw_bound == pytest.approx(0.0121, abs=1e-4)
    assert not v.narrowband and v.label == "wideband"
    assert narrowband_check(60e6, 2.2e9, 0.0, 4.3).narrowband
    assert narrowband_check(60e6, 2.2e9, 1100, 0.0).narrowband


def test_spec_validation():
    with pytest.raises(FeedNetError):
        FeedNetSpec(0, 1, 1, 1, 1.0)
    with pytest.raises(FeedNetError):
        FeedNetSpec(1, 1, 1, 1, 1.0, mode="hybrid")


@given(K=st.integers(1, 100_000), N=st.integers(1, 5000), S=st.integers(1, 2000))
def test_sizing_monotone(K, N, S):
    a = size_feednet(FeedNetSpec(K, 1, N, S, 60e6))
    b = size_feednet(FeedNetSpec(K + 1, 1, N + 1, S, 60e6))
    assert b.gateways >= a.gateways
    assert b.wdm_per_isl >= a.wdm_per_isl
    assert a.wdm_per_isl * 100 >= a.occupied_isl_bandwidth_ghz - 1e-9
