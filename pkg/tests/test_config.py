import json
import logging
import math

import pytest

from solar_planner.config import RunConfig, config_hash, default_config_path, load_config, parse_config
from solar_planner.errors import ParseError, ValidationError
from solar_planner.household import CostParameters, IncomeModel


def test_default_file_is_the_calibration():
    cfg = load_config(default_config_path())
    assert cfg.costs == CostParameters()
    inc = cfg.income_model
    ref = IncomeModel()
    for name in ("lambda_low", "lambda_high", "mu_low", "mu_high", "sigma", "x0"):
        assert getattr(inc, name) == pytest.approx(getattr(ref, name), rel=1e-12), name
    assert inc.x0 == pytest.approx(14_016.0)
    assert cfg.distribution.alpha == 70_000.0 and cfg.distribution.beta == pytest.approx(2.5)
    assert (cfg.targets.Lambda, cfg.targets.T) == (0.5, 10.0)
    assert math.isinf(cfg.targets.interval.r_ub)
    assert cfg.grid.prec == 0.05
    assert cfg.simulation.dt == pytest.approx(cfg.costs.t_b)


def test_empty_document_falls_back_to_defaults():
    cfg = parse_config({})
    assert cfg.costs == CostParameters()
    assert cfg.simulation.dt == pytest.approx(CostParameters().t_b / 30)
    assert cfg.general_model == {"dynamics": "gbm", "costs": "main"}
    assert isinstance(cfg, RunConfig)


def test_hash_is_stable_and_sensitive():
    a = parse_config({"grid": {"prec": 0.1}})
    b = parse_config({"grid": {"prec": 0.1}})
    c = parse_config({"grid": {"prec": 0.05}})
    assert config_hash(a) == config_hash(b) != config_hash(c)
    assert len(config_hash(a)) == 64


def test_alternate_units_convert_and_log(caplog):
    with caplog.at_level(logging.INFO, logger="solar_planner.config"):
        cfg = parse_config({
            "costs": {"t_b_months": 3},
            "income_model": {"x0_kw": 2.0},
            "distribution": {"gini": 0.5},
            "simulation": {"dt_per_cycle": 4},
        })
    assert cfg.costs.t_b == pytest.approx(0.25)
    assert cfg.income_model.x0 == pytest.approx(2.0 * 8760)
    assert cfg.distribution.beta == pytest.approx(2.0)
    assert cfg.simulation.dt == pytest.approx(0.0625)
    assert sum("converted" in rec.getMessage() for rec in caplog.records) == 4


@pytest.mark.parametrize("raw,field", [
    ({"costs": {"t_b": 0.1, "t_b_months": 1}}, "costs.t_b"),
    ({"distribution": {"beta": 2.0, "gini": 0.5}}, "distribution.beta"),
    ({"distribution": {"gini": 1.5}}, "distribution.gini"),
    ({"simulation": {"dt": 0.01, "dt_per_cycle": 2}}, "simulation.dt"),
])
def test_conflicting_units_rejected(raw, field):
    with pytest.raises(ValidationError) as err:
        parse_config(raw)
    assert err.value.field == field


@pytest.mark.parametrize("raw,field", [
    ({"income_model": {"lambda_low": 0.01, "lambda_high": 0.02}}, "income_model"),
    ({"distribution": {"beta": 1.0}}, "distribution.beta"),
    ({"distribution": {"beta": 0.5}}, "distribution.beta"),
    ({"targets": {"Lambda": 1.2}}, "targets.Lambda"),
    ({"grid": {"prec": 0.0}}, "grid.prec"),
    ({"simulation": {"n_paths": 10.5}}, "simulation.n_paths"),
    ({"simulation": {"dt": 1.0}}, "simulation.dt"),
    ({"simulation": {"bridge_correction": 1}}, "simulation.bridge_correction"),
    ({"costs": {"K": "ten"}}, "costs.K"),
    ({"costs": {"K": True}}, "costs.K"),
    ({"output_dir": ""}, "output_dir"),
    ({"general_model": {"dynamics": 3}}, "general_model.dynamics"),
])
def test_invalid_values_name_the_field(raw, field):
    with pytest.raises(ValidationError) as err:
        parse_config(raw)
    assert err.value.field.startswith(field)


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError):
        parse_config({"costz": {}})
    with pytest.raises(ValidationError) as err:
        parse_config({"costs": {"K": 1.0, "kk": 2}})
    assert err.value.field == "costs"


def test_file_errors(tmp_path):
    with pytest.raises(ParseError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text(json.dumps([1, 2]))
    with pytest.raises(ParseError):
        load_config(arr)


def test_schema_lists_every_section():
    schema = json.loads((default_config_path().parent / "config_schema.json").read_text())
    assert set(schema["properties"]) == {"costs", "income_model", "distribution", "targets", "grid",
                                         "simulation", "output_dir", "general_model"}
    assert schema["additionalProperties"] is False
