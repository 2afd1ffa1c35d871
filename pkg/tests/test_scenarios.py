import json

import pytest
from pydantic import ValidationError

from core.scenarios.batch import (
    STATUS_FAILED,
    STATUS_OK,
    resolve_workers,
    run_batch,
    run_scenario,
)
from core.scenarios.catalog import BASELINE, builtin_catalog, catalog_index, find_scenario
from core.scenarios.config import (
    DEFAULT_CONVENTIONAL_MW,
    DEFAULT_RENEWABLE_MW,
    ScenarioConfig,
    config_hash,
    dump_config,
    load_config,
    slugify,
    validate_config,
    with_overrides,
)
from core.scenarios.inputs import build_inputs

SUMMER = {"horizon.start_hour": 4080, "horizon.hours": 48}


def _baseline(**overrides):
    return with_overrides(find_scenario(BASELINE), {**SUMMER, **overrides})


def _write_profile(path, value, n):
    path.write_text("hour,value\n" + "".join(f"{i},{value}\n" for i in range(n)), encoding="utf-8")


def _profile_dir(tmp_path, n=48, res_n=None):
    _write_profile(tmp_path / "demand.csv", 0.5, n)
    _write_profile(tmp_path / "pv_cf.csv", 0.3, n)
    _write_profile(tmp_path / "system_demand.csv", 40000.0, n)
    for tech in DEFAULT_RENEWABLE_MW:
        _write_profile(tmp_path / f"res_{tech}.csv", 0.2, res_n or n)
    return tmp_path


def test_builtin_catalog():
    catalog = builtin_catalog()
    names = [c.name for c in catalog]
    assert len(catalog) == 16
    assert len(set(names)) == 16
    assert names[0] == BASELINE
    index = catalog_index()
    assert index["Retail_30 FIT_0"].tariff.feed_in == "prohibited"
    assert index["Retail_30 FIT_8 Cap"].tariff.feed_in_cap_fraction == 0.5
    assert index["Retail_15 FIT_8"].tariff.other_charge == pytest.approx(0.10)
    assert index["Retail_15 FIT_8"].tariff.fixed_charge == pytest.approx(750.0)
    assert index["Retail_RTP FIT_RTP+3"].tariff.feed_in_rate == pytest.approx(0.03)


def test_fixed_part_keeps_the_pure_consumer_bill():
    for cfg in builtin_catalog():
        t = cfg.tariff
        if t.energy_rtp:
            continue
        assert 5000.0 * (t.energy_charge + t.other_charge) + t.fixed_charge == pytest.approx(1500.0), cfg.name


def test_find_scenario_by_name_or_slug():
    assert slugify("Retail_30 FIT_8") == "retail_30_fit_8"
    assert find_scenario("retail_30_fit_8").name == BASELINE
    assert find_scenario("RETAIL_30 FIT_8").name == BASELINE
    assert find_scenario("Retail_99 FIT_1") is None


def test_config_file_round_trip(tmp_path):
    cfg = _baseline()
    path = dump_config(cfg, tmp_path / "baseline.yaml")
    assert validate_config(path) == []
    loaded = load_config(path)
    assert loaded == cfg
    assert config_hash(loaded) == config_hash(cfg)


def test_negative_charge_is_diagnosed():
    diagnostics = validate_config({"name": "bad", "tariff.other_charge": -0.1})
    assert [d.field for d in diagnostics] == ["tariff.other_charge"]


def test_unknown_key_is_diagnosed():
    diagnostics = validate_config({"name": "bad", "tariff.bonus": 1})
    assert diagnostics and diagnostics[0].field == "tariff.bonus"


def test_unreadable_or_malformed_files_are_diagnosed(tmp_path):
    assert validate_config(tmp_path / "missing.yaml")[0].field == "<file>"
    bad = tmp_path / "list.yaml"
    bad.write_text("- 1\n- 2\n", encoding="utf-8")
    assert validate_config(bad)[0].field == "<file>"


def test_horizon_mismatch_between_input_files(tmp_path):
    data = _profile_dir(tmp_path, n=48, res_n=24)
    diagnostics = validate_config({"name": "files", "data.directory": str(data), "horizon.hours": 24})
    mismatch = [d for d in diagnostics if d.field == "data"]
    assert mismatch and "horizon mismatch" in mismatch[0].message


def test_missing_input_file_is_diagnosed(tmp_path):
    data = _profile_dir(tmp_path)
    (data / "pv_cf.csv").unlink()
    diagnostics = validate_config({"name": "files", "data.directory": str(data), "horizon.hours": 48})
    assert [d.field for d in diagnostics] == ["data.pv_cf"]


def test_subsample_must_divide_the_window():
    diagnostics = validate_config({"name": "coarse", "horizon.hours": 10, "resolution.subsample": 4})
    assert [d.field for d in diagnostics] == ["resolution.subsample"]
    assert validate_config({"name": "coarse", "horizon.hours": 10, "resolution.subsample": 4, "resolution.truncate": True}) == []


def test_window_must_end_inside_the_year():
    with pytest.raises(ValidationError):
        ScenarioConfig(name="late", horizon={"start_hour": 8000, "hours": 1000})


def test_overrides_are_revalidated():
    with pytest.raises(ValidationError):
        with_overrides(find_scenario(BASELINE), {"tariff.other_charge": -1.0})


def test_synthetic_inputs_for_a_summer_window():
    p_hh, p_disp, tariff = build_inputs(_baseline(**{"resolution.subsample": 2}))
    assert p_hh.horizon == 24
    assert p_hh.step_hours == 2.0
    assert p_hh.demand.start_index == 4080
    assert p_hh.cost_scale == pytest.approx(48 / 8760)
    assert p_disp.horizon == 24
    assert {t.name for t in p_disp.conventional} == set(DEFAULT_CONVENTIONAL_MW)
    assert [s.name for s in p_disp.storage] == ["pumped_hydro"]
    assert tariff.feed_in_rate == pytest.approx(0.08)


def test_file_inputs(tmp_path):
    data = _profile_dir(tmp_path)
    cfg = with_overrides(find_scenario(BASELINE), {"data.directory": str(data), "horizon.hours": 48})
    p_hh, p_disp, _ = build_inputs(cfg)
    assert p_hh.horizon == 48
    assert p_hh.demand.values[0] == pytest.approx(0.5)
    assert p_disp.demand.values[0] == pytest.approx(40000.0)
    assert all(r.cf.values[0] == pytest.approx(0.2) for r in p_disp.renewables)


def test_run_scenario_reports_calibration():
    run = run_scenario(_baseline(**{"tariff.calibrate_energy_charge": True}))
    assert run.status == STATUS_OK
    assert run.calibrated_energy_charge > 0.0
    assert run.result.tariff.energy_charge == pytest.approx(run.calibrated_energy_charge)
    assert run.joint_kkt.ok


def test_wholesale_feed_in_converges_for_the_full_household_population():
    cfg = with_overrides(find_scenario("Retail_30 FIT_RTP"), SUMMER)
    assert cfg.prosumage.n_households == 1_000_000
    run = run_scenario(cfg)
    assert run.converged
    assert run.status == STATUS_OK
    assert run.joint_kkt.ok
    assert run.joint_kkt.coupling_residual <= cfg.equilibrium.price_tolerance
    assert run.result.iterations <= cfg.equilibrium.max_iterations


def test_batch_writes_results(tmp_path):
    batch = run_batch([_baseline()], tmp_path / "out", workers=1, dump_lp=True)
    assert batch.exit_code == 0
    [run] = batch.runs
    assert run.status == STATUS_OK
    out = tmp_path / "out"
    for stem in ("household", "capacities", "dispatch", "prices", "convergence", "rldc"):
        assert (out / f"{stem}_retail_30_fit_8.csv").is_file(), stem
    assert (out / "household_retail_30_fit_8.lp").read_text(encoding="utf-8").startswith("\\ household")
    header = (out / "metrics.csv").read_text(encoding="utf-8").splitlines()[0].split(",")
    assert header[:2] == ["scenario", "status"]
    assert "autarky_rate" in header and "bill_net_total" in header
    manifest = json.loads(batch.manifest_path.read_text(encoding="utf-8"))
    assert manifest["exit_code"] == 0
    [entry] = manifest["scenarios"]
    assert entry["status"] == STATUS_OK
    assert entry["config_hash"] == config_hash(run.config)
    assert "prices_retail_30_fit_8.csv" in entry["files"]
    prices = (out / "prices_retail_30_fit_8.csv").read_text(encoding="utf-8").splitlines()
    assert prices[0] == "hour,price_eur_mwh"
    assert prices[1].startswith("4080,")
    assert len(prices) == 49


def test_batch_results_are_deterministic(tmp_path):
    cfg = _baseline()
    run_batch([cfg], tmp_path / "a", workers=1)
    run_batch([cfg], tmp_path / "b", workers=1)
    for name in ("metrics.csv", "manifest.json", "prices_retail_30_fit_8.csv", "household_retail_30_fit_8.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_infeasible_scenario_fails_without_stopping_the_batch(tmp_path):
    overrides = {f"dispatch.conventional_mw.{k}": 0.0 for k in DEFAULT_CONVENTIONAL_MW}
    overrides.update({f"dispatch.renewable_mw.{k}": 0.0 for k in DEFAULT_RENEWABLE_MW})
    overrides.update({"dispatch.pumped_hydro_power_mw": 0.0, "dispatch.voll": None, "name": "blackout"})
    broken = _baseline(**overrides)
    batch = run_batch([broken, _baseline()], tmp_path, workers=2)
    by_name = {r.name: r for r in batch.runs}
    assert by_name["blackout"].status == STATUS_FAILED
    assert "infeasible" in by_name["blackout"].error
    assert by_name[BASELINE].status == STATUS_OK
    assert batch.exit_code == 1
    manifest = json.loads(batch.manifest_path.read_text(encoding="utf-8"))
    assert manifest["exit_code"] == 1
    failed = [e for e in manifest["scenarios"] if e["name"] == "blackout"][0]
    assert "infeasible" in failed["error"]


def test_empty_batch(tmp_path):
    batch = run_batch([], tmp_path)
    assert batch.exit_code == 0
    assert (tmp_path / "metrics.csv").read_text(encoding="utf-8") == "scenario,status\n"
    assert json.loads(batch.manifest_path.read_text(encoding="utf-8")) == {"exit_code": 0, "scenarios": []}


def test_duplicate_scenario_names_rejected(tmp_path):
    with pytest.raises(ValueError):
        run_batch([_baseline(), _baseline()], tmp_path)


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("PROSUMAGE_WORKERS", "3")
    assert resolve_workers() == 3
    assert resolve_workers(2) == 2
    monkeypatch.setenv("PROSUMAGE_WORKERS", "many")
    with pytest.raises(ValueError):
        resolve_workers()
    with pytest.raises(ValueError):
        resolve_workers(0)
