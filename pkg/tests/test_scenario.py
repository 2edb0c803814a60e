import csv
import json

import pytest

from foasim.cli import main
from foasim.config import load_config
from foasim.scenario import (SWEEP_COLUMNS, build_model, monte_carlo_boresight, run_case, run_scenario, sweep,
                             write_sweep)


@pytest.fixture(scope="module")
def leo():
    return load_config("leo")


def test_t2_c1_row_against_reference():
    res = run_scenario(load_config("r-geo"), cases=["T2-C1"])["T2-C1"]
    r = res["result"]
    assert r.eta == 0.82 and r.required_sinr_db == 0.0
    assert r.beam_throughput_mbps == pytest.approx(44.7, abs=0.1)
    verdicts = {v["row"]: v for v in res["verdicts"]}
    assert verdicts["active_beams_K"]["ok"] and verdicts["area_throughput_rho"]["ok"]


def test_artifacts_and_byte_identical_json(tmp_path, leo):
    cfg = leo.replace(**{"grid.resolution": 21})
    run_scenario(cfg, tmp_path / "a", cases=["T2-C1"])
    run_scenario(cfg, tmp_path / "b", cases=["T2-C1"])
    a = tmp_path / "a" / "leo" / "T2-C1"
    b = tmp_path / "b" / "leo" / "T2-C1"
    for name in ("result.json", "table_row.csv", "pattern.csv", "pattern.json", "beams.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    doc = json.loads((a / "result.json").read_text())
    assert doc["config_hash"] == cfg.digest()
    assert (a / "beams.csv").read_text().startswith(f"# config_hash={cfg.digest()}")


def test_run_without_pattern(tmp_path, leo):
    out = run_scenario(leo, tmp_path, cases=["T2-C2"], write_pattern=False)
    assert not (out["T2-C2"]["path"] / "pattern.csv").exists()


def test_monte_carlo_summary(leo):
    cfg = load_config("r-geo").replace(**{"foa.S": 169, "monte_carlo.phi_bar_deg": 40.0,
                                          "monte_carlo.replications": 5})
    mc = monte_carlo_boresight(build_model(cfg))
    assert mc["replications"] == 5
    assert 0.0 < mc["boresight_loss_db_mean"] <= mc["boresight_loss_db_max"] < 3.0


def test_infeasible_case_recorded():
    cfg = load_config("r-geo").replace(**{"foa.S": 4})
    out = run_scenario(cfg, cases=["T1-C2"])
    assert out["T1-C2"]["result"] is None and "single beam" in out["T1-C2"]["error"]


def test_empty_sweep_writes_header(tmp_path, leo):
    assert sweep(leo, "S", []) == []
    path = write_sweep([], tmp_path / "s.csv", leo.digest())
    lines = path.read_text().splitlines()
    assert lines == [f"# config_hash={leo.digest()}", ",".join(SWEEP_COLUMNS)]


def test_delta_sweep_grating_lobes_increase():
    cfg = load_config("r-geo").replace(**{"foa.S": 169})
    rows = sweep(cfg, "Delta_over_L", [1.25, 2.5, 5.0], "T2-C1")
    levels = [r["grating_lobe_db"] for r in rows]
    assert levels[0] < levels[1] < levels[2]


def test_sweep_rejects_unknown_parameter(leo):
    with pytest.raises(ValueError):
        sweep(leo, "colour", [1])


def test_winglet_sweep_rows():
    cfg = load_config("r-geo").replace(**{"foa.S": 441, "cases": ["T2-C1"]})
    rows = sweep(cfg, "winglet_rows", [0, 1])
    assert all(r["rho"] is not None for r in rows)


def test_cli_verbs(tmp_path, capsys):
    assert main(["pattern", "leo", "-o", str(tmp_path), "--resolution", "21"]) == 0
    assert (tmp_path / "leo" / "pattern.csv").exists()
    assert main(["run", "leo", "-o", str(tmp_path), "--case", "T2-C1", "--resolution", "21"]) == 0
    assert (tmp_path / "leo" / "T2-C1" / "result.json").exists()
    assert main(["sweep", "r-geo", "S", "4", "9", "--case", "T1-C2", "-o", str(tmp_path)]) == 0
    with open(tmp_path / "r-geo_sweep_S.csv") as fh:
        rows = [r for r in csv.reader(fh)][2:]
    assert rows[0][1] == "" and float(rows[1][1]) > 0
    assert main(["feednet", "r-geo", "--beams", "5417", "-o", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "feednet.json").read_text())
    assert doc["r-geo"]["rows"]["Number of gateways required"]["value"] == 55
    out = capsys.readouterr().out
    assert "gateways 55" in out


def test_cli_validate_exit_code(capsys):
    # leo T2 rows sit inside tolerance except the overall RF power row
    assert main(["validate", "leo"]) == 1
    assert "row(s) outside tolerance" in capsys.readouterr().out


def test_cli_bad_config(capsys):
    assert main(["run", "missing.yaml"]) == 2
    assert "error:" in capsys.readouterr().err
