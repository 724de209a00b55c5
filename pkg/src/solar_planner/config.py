"""Run configuration: JSON loading, unit conversion and validation.

A config is one JSON object with the keys ``costs``, ``income_model``,
``distribution``, ``targets``, ``grid``, ``simulation``, ``output_dir`` and
optionally ``general_model``.  Every section is optional and falls back to the
calibrated defaults; unknown keys anywhere are rejected.  Units are listed in
``data/config_schema.json``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .distribution import IncomeInterval, LogLogisticIncome
from .errors import ParseError, ValidationError
from .household import HOURS_PER_YEAR, CostParameters, IncomeModel
from .montecarlo import SimulationSpec
from .planner import GridSpec, PlannerTargets

__all__ = ["RunConfig", "load_config", "parse_config", "default_config_path", "config_hash"]

log = logging.getLogger(__name__)

_TOP_KEYS = {"costs", "income_model", "distribution", "targets", "grid", "simulation",
             "output_dir", "general_model"}
_COST_KEYS = {"p_b", "p_sub", "K", "k", "c", "t_b", "t_b_months", "eta", "p_s", "epsilon"}
_INCOME_KEYS = {"lambda_low", "lambda_high", "mu_low", "mu_high", "sigma", "x0", "x0_kw"}
_DIST_KEYS = {"alpha", "beta", "gini"}
_TARGET_KEYS = {"Lambda", "T", "r_lb", "r_ub"}
_GRID_KEYS = {"prec"}
_SIM_KEYS = {"n_paths", "dt", "dt_per_cycle", "horizon", "seed", "bridge_correction"}
_GENERAL_KEYS = {"dynamics", "costs"}


@dataclass(frozen=True)
class RunConfig:
    costs: CostParameters = field(default_factory=CostParameters)
    income_model: IncomeModel = field(default_factory=IncomeModel)
    distribution: LogLogisticIncome = field(default_factory=lambda: LogLogisticIncome(70_000.0, 2.5))
    targets: PlannerTargets = field(default_factory=lambda: PlannerTargets(0.5, 10.0))
    grid: GridSpec = field(default_factory=GridSpec)
    simulation: SimulationSpec = field(default_factory=SimulationSpec)
    output_dir: str = "out"
    general_model: dict = field(default_factory=lambda: {"dynamics": "gbm", "costs": "main"})

    def canonical(self) -> dict:
        """Plain-JSON view in canonical units (used for hashing and metadata)."""
        inc = self.income_model
        return {
            "costs": dataclasses.asdict(self.costs),
            "income_model": {k: getattr(inc, k) for k in
                             ("lambda_low", "lambda_high", "mu_low", "mu_high", "sigma", "x0")},
            "distribution": {"alpha": self.distribution.alpha, "beta": self.distribution.beta},
            "targets": {"Lambda": self.targets.Lambda, "T": self.targets.T,
                        "r_lb": self.targets.interval.r_lb,
                        "r_ub": None if math.isinf(self.targets.interval.r_ub) else self.targets.interval.r_ub},
            "grid": {"prec": self.grid.prec},
            "simulation": dataclasses.asdict(self.simulation),
            "output_dir": self.output_dir,
            "general_model": dict(self.general_model),
        }


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.canonical(), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def default_config_path() -> Path:
    return Path(str(resources.files("solar_planner") / "data" / "default_config.json"))


def _section(raw: dict, key: str, allowed: set) -> dict:
    sec = raw.get(key, {})
    if not isinstance(sec, dict):
        raise ValidationError("must be a JSON object", key)
    unknown = sorted(set(sec) - allowed)
    if unknown:
        raise ValidationError(f"unknown key(s) {unknown}", key)
    for name, v in sec.items():
        if isinstance(v, bool) and name != "bridge_correction":
            raise ValidationError("must be a number", f"{key}.{name}")
    return sec


def _number(sec: dict, name: str, where: str) -> float:
    v = sec[name]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ValidationError("must be a number", f"{where}.{name}")
    return float(v)


def _alternate(sec: dict, where: str, canonical: str, alt: str, factor: float, unit: str) -> dict:
    """Replace an alternate-unit key by its canonical counterpart."""
    if alt not in sec:
        return sec
    if canonical in sec:
        raise ValidationError(f"give either {canonical} or {alt}, not both", f"{where}.{canonical}")
    out = dict(sec)
    value = _number(out, alt, where) * factor
    del out[alt]
    out[canonical] = value
    log.info("converted %s.%s=%s to %s=%r %s", where, alt, sec[alt], canonical, value, unit)
    return out


def _build(cls, sec: dict, where: str):
    kwargs = {}
    for name, v in sec.items():
        kwargs[name] = v if isinstance(v, bool) else _number(sec, name, where)
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        raise ValidationError(str(exc).split(": ", 1)[-1], f"{where}.{exc.field}" if exc.field else where) from None


def parse_config(raw: Any) -> RunConfig:
    """Validate a decoded JSON document and build a :class:`RunConfig`."""
    if not isinstance(raw, dict):
        raise ParseError("configuration must be a JSON object")
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ValidationError(f"unknown top-level key(s) {unknown}", "config")

    cost_sec = _alternate(_section(raw, "costs", _COST_KEYS), "costs", "t_b", "t_b_months",
                          1.0 / 12.0, "yr")
    costs = _build(CostParameters, cost_sec, "costs")

    dist_sec = _section(raw, "distribution", _DIST_KEYS)
    if "gini" in dist_sec:
        if "beta" in dist_sec:
            raise ValidationError("give either beta or gini, not both", "distribution.beta")
        gini = _number(dist_sec, "gini", "distribution")
        if not 0 < gini < 1:
            raise ValidationError("Gini coefficient must lie in (0, 1)", "distribution.gini")
        dist_sec = {**{k: v for k, v in dist_sec.items() if k != "gini"}, "beta": 1.0 / gini}
        log.info("converted distribution.gini=%r to beta=%r", gini, dist_sec["beta"])
    dist = _build(LogLogisticIncome, {"alpha": 70_000.0, "beta": 2.5, **dist_sec}, "distribution")

    inc_sec = _alternate(_section(raw, "income_model", _INCOME_KEYS), "income_model", "x0", "x0_kw",
                         HOURS_PER_YEAR, "kWh/yr")
    inc_kwargs = {k: _number(inc_sec, k, "income_model") for k in inc_sec}
    try:
        income = IncomeModel(**inc_kwargs, distribution=dist)
    except ValidationError as exc:
        raise ValidationError(str(exc).split(": ", 1)[-1], f"income_model.{exc.field}") from None

    tgt_sec = _section(raw, "targets", _TARGET_KEYS)
    r_ub = tgt_sec.get("r_ub")
    try:
        interval = IncomeInterval(
            float(tgt_sec.get("r_lb", 0.0)), math.inf if r_ub is None else float(r_ub)
        )
    except ValidationError as exc:
        raise ValidationError(str(exc).split(": ", 1)[-1], "targets.r_lb") from None
    try:
        targets = PlannerTargets(float(tgt_sec.get("Lambda", 0.5)), float(tgt_sec.get("T", 10.0)), interval)
    except ValidationError as exc:
        raise ValidationError(str(exc).split(": ", 1)[-1], f"targets.{exc.field}") from None

    grid = _build(GridSpec, _section(raw, "grid", _GRID_KEYS), "grid")

    sim_sec = dict(_section(raw, "simulation", _SIM_KEYS))
    if "dt_per_cycle" in sim_sec:
        if "dt" in sim_sec:
            raise ValidationError("give either dt or dt_per_cycle, not both", "simulation.dt")
        per = _number(sim_sec, "dt_per_cycle", "simulation")
        if per <= 0:
            raise ValidationError("must be positive", "simulation.dt_per_cycle")
        sim_sec["dt"] = costs.t_b / per
        del sim_sec["dt_per_cycle"]
        log.info("converted simulation.dt_per_cycle=%r to dt=%r yr", per, sim_sec["dt"])
    sim_sec.setdefault("dt", costs.t_b / 30.0)
    for key in ("n_paths", "seed"):
        if key in sim_sec:
            v = sim_sec[key]
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValidationError("must be an integer", f"simulation.{key}")
    if "bridge_correction" in sim_sec and not isinstance(sim_sec["bridge_correction"], bool):
        raise ValidationError("must be true or false", "simulation.bridge_correction")
    try:
        simulation = SimulationSpec(**sim_sec)
        simulation.check_step(costs.t_b)
    except ValidationError as exc:
        raise ValidationError(str(exc).split(": ", 1)[-1], f"simulation.{exc.field}") from None

    out_dir = raw.get("output_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ValidationError("must be a non-empty string", "output_dir")

    gen_sec = _section(raw, "general_model", _GENERAL_KEYS) if "general_model" in raw else {}
    general = {"dynamics": "gbm", "costs": "main", **gen_sec}
    for key, v in general.items():
        if not isinstance(v, str):
            raise ValidationError("must be a string naming a built-in", f"general_model.{key}")

    return RunConfig(costs, income, dist, targets, grid, simulation, out_dir, general)


def load_config(path) -> RunConfig:
    """Read, parse and validate a JSON config file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"config file not found: {p}") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read config {p}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {p}: {exc}") from None
    return parse_config(raw)
