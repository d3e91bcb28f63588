"""JSON experiment configuration: parsing, strict validation, round-trip.

Configs are UTF-8 JSON with a top-level seed, a mechanism tag and exactly the
matching mechanism section. Validation is strict: unknown keys anywhere are
rejected, every offending field is named in the error, and probability
vectors that are off by more than 1e-9 are rejected rather than renormalized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import controllers, sip
from .evo import SensingMarket, SspPopulation, VspRegion
from .qoe import EdgeSeller, QoeParams, VrUser
from .rng import MAX_SEED

MECHANISMS = ("evo", "dda", "sip")


class ConfigError(ValueError):
    """A config document that parsed but failed validation."""


class ConfigParseError(ConfigError):
    """A config document that is not valid JSON."""


def _as_object(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
    return value


def _as_array(value, path: str) -> list:
    if not isinstance(value, list):
        raise ConfigError(f"{path}: expected an array, got {type(value).__name__}")
    return value


def _reject_unknown(obj: dict, path: str, allowed: set[str]) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")


def _require(obj: dict, path: str, key: str):
    if key not in obj:
        raise ConfigError(f"{path}: missing required key {key!r}")
    return obj[key]


def _number(value, path: str, *, minimum=None, maximum=None,
            exclusive_minimum=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    x = float(value)
    if minimum is not None and x < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    if exclusive_minimum is not None and x <= exclusive_minimum:
        raise ConfigError(f"{path}: must be > {exclusive_minimum}, got {value}")
    if maximum is not None and x > maximum:
        raise ConfigError(f"{path}: must be <= {maximum}, got {value}")
    return x


def _integer(value, path: str, *, minimum=None, maximum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{path}: must be <= {maximum}, got {value}")
    return value


def _string(value, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{path}: expected a non-empty string, got {value!r}")
    return value


def _wrap(path: str, fn, *args, **kwargs):
    """Run a domain constructor, prefixing its error with the config path."""
    try:
        return fn(*args, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _range(obj, path: str, *, minimum=None) -> tuple[float, float]:
    obj = _as_object(obj, path)
    _reject_unknown(obj, path, {"low", "high"})
    low = _number(_require(obj, path, "low"), f"{path}.low", minimum=minimum)
    high = _number(_require(obj, path, "high"), f"{path}.high", minimum=minimum)
    if low > high:
        raise ConfigError(f"{path}: low must be <= high")
    return low, high


def _unique_ids(items, path: str) -> None:
    ids = [item.id for item in items]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ConfigError(f"{path}: duplicate ids {dupes}")


# --- evo section ---------------------------------------------------------

@dataclass(frozen=True)
class EvoCfg:
    market: SensingMarket
    init_shares: tuple[tuple[float, ...], ...] | None
    step: float
    tol: float
    max_steps: int
    record_every: int
    sweep_region: str | None
    sweep_rewards: tuple[float, ...] | None


def _parse_evo(obj, path: str) -> EvoCfg:
    obj = _as_object(obj, path)
    _reject_unknown(obj, path, {
        "regions", "populations", "init_shares", "step", "tol", "max_steps",
        "record_every", "sweep",
    })
    regions = []
    for i, raw in enumerate(_as_array(_require(obj, path, "regions"), f"{path}.regions")):
        rpath = f"{path}.regions[{i}]"
        raw = _as_object(raw, rpath)
        _reject_unknown(raw, rpath, {"id", "reward_pool", "sync_coeff"})
        regions.append(_wrap(
            rpath, VspRegion,
            _string(_require(raw, rpath, "id"), f"{rpath}.id"),
            _number(_require(raw, rpath, "reward_pool"), f"{rpath}.reward_pool"),
            _number(_require(raw, rpath, "sync_coeff"), f"{rpath}.sync_coeff"),
        ))
    populations = []
    for i, raw in enumerate(_as_array(_require(obj, path, "populations"),
                                      f"{path}.populations")):
        ppath = f"{path}.populations[{i}]"
        raw = _as_object(raw, ppath)
        _reject_unknown(raw, ppath, {"id", "size", "capability", "learning_rate", "cost"})
        cost = tuple(
            _number(c, f"{ppath}.cost[{j}]", minimum=0.0)
            for j, c in enumerate(_as_array(_require(raw, ppath, "cost"), f"{ppath}.cost"))
        )
        populations.append(_wrap(
            ppath, SspPopulation,
            _string(_require(raw, ppath, "id"), f"{ppath}.id"),
            _integer(_require(raw, ppath, "size"), f"{ppath}.size", minimum=1),
            _number(_require(raw, ppath, "capability"), f"{ppath}.capability"),
            _number(_require(raw, ppath, "learning_rate"), f"{ppath}.learning_rate"),
            cost,
        ))
    _unique_ids(regions, f"{path}.regions")
    _unique_ids(populations, f"{path}.populations")
    market = _wrap(path, SensingMarket, tuple(regions), tuple(populations))

    init_shares = None
    if "init_shares" in obj:
        raw = _as_object(obj["init_shares"], f"{path}.init_shares")
        pop_ids = [p.id for p in populations]
        _reject_unknown(raw, f"{path}.init_shares", set(pop_ids))
        rows = []
        for pid in pop_ids:
            spath = f"{path}.init_shares.{pid}"
            row = tuple(
                _number(v, f"{spath}[{j}]", minimum=0.0, maximum=1.0)
                for j, v in enumerate(_as_array(_require(raw, f"{path}.init_shares", pid), spath))
            )
            if len(row) != len(regions):
                raise ConfigError(f"{spath}: expected {len(regions)} shares")
            total = sum(row)
            if abs(total - 1.0) > 1e-9:
                raise ConfigError(f"{spath}: probabilities sum to {total:.10g}")
            rows.append(row)
        init_shares = tuple(rows)

    sweep_region = sweep_rewards = None
    if "sweep" in obj:
        raw = _as_object(obj["sweep"], f"{path}.sweep")
        _reject_unknown(raw, f"{path}.sweep", {"region", "rewards"})
        sweep_region = _string(_require(raw, f"{path}.sweep", "region"),
                               f"{path}.sweep.region")
        _wrap(f"{path}.sweep.region", market.region_index, sweep_region)
        sweep_rewards = tuple(
            _number(v, f"{path}.sweep.rewards[{j}]", minimum=0.0)
            for j, v in enumerate(_as_array(_require(raw, f"{path}.sweep", "rewards"),
                                            f"{path}.sweep.rewards"))
        )

    return EvoCfg(
        market=market,
        init_shares=init_shares,
        step=_number(obj.get("step", 0.01), f"{path}.step", exclusive_minimum=0.0),
        tol=_number(obj.get("tol", 1e-6), f"{path}.tol", minimum=0.0),
        max_steps=_integer(obj.get("max_steps", 10**6), f"{path}.max_steps", minimum=1),
        record_every=_integer(obj.get("record_every", 1), f"{path}.record_every", minimum=1),
        sweep_region=sweep_region,
        sweep_rewards=sweep_rewards,
    )


# --- dda section ---------------------------------------------------------

@dataclass(frozen=True)
class FixedControllerCfg:
    name: str
    step: float


@dataclass(frozen=True)
class OUControllerCfg:
    name: str
    theta: float
    mu: float
    sigma: float
    step_min: float
    step_max: float
    rng_label: str


@dataclass(frozen=True)
class LearnedControllerCfg:
    name: str
    table: str | None
    train: controllers.TrainConfig | None


ControllerCfg = FixedControllerCfg | OUControllerCfg | LearnedControllerCfg


@dataclass(frozen=True)
class InstanceFamilyCfg:
    count_per_bitrate: int
    n_buyers: int
    n_sellers: int
    bitrates: tuple[float, ...]
    head_speed: tuple[float, float]
    energy_price: tuple[float, float]
    base_cost: tuple[float, float]


@dataclass(frozen=True)
class DdaCfg:
    qoe: QoeParams
    bitrate: float | None
    buyers: tuple[VrUser, ...]
    sellers: tuple[EdgeSeller, ...]
    price_bounds: tuple[float, float] | None
    controller: ControllerCfg | None
    controllers: tuple[ControllerCfg, ...]
    instances: InstanceFamilyCfg | None
    train: controllers.TrainConfig | None


def _parse_qoe(obj, path: str) -> QoeParams:
    obj = _as_object(obj, path)
    _reject_unknown(obj, path, {"alpha", "gamma", "beta", "w_vmaf", "w_ssim", "lambda"})
    defaults = QoeParams()
    return _wrap(
        path, QoeParams,
        alpha=_number(obj.get("alpha", defaults.alpha), f"{path}.alpha"),
        gamma=_number(obj.get("gamma", defaults.gamma), f"{path}.gamma"),
        beta=_number(obj.get("beta", defaults.beta), f"{path}.beta"),
        w_vmaf=_number(obj.get("w_vmaf", defaults.w_vmaf), f"{path}.w_vmaf"),
        w_ssim=_number(obj.get("w_ssim", defaults.w_ssim), f"{path}.w_ssim"),
        lam=_number(obj.get("lambda", defaults.lam), f"{path}.lambda"),
    )


def _parse_train(obj, path: str) -> controllers.TrainConfig:
    obj = _as_object(obj, path)
    _reject_unknown(obj, path, {
        "episodes", "eta", "learning_rate", "discount", "epsilon_start",
        "epsilon_end", "base_step", "step_min", "step_max", "multipliers",
    })
    kwargs = {"episodes": _integer(_require(obj, path, "episodes"), f"{path}.episodes")}
    for key in ("eta", "learning_rate", "discount", "epsilon_start",
                "epsilon_end", "base_step", "step_min", "step_max"):
        if key in obj:
            kwargs[key] = _number(obj[key], f"{path}.{key}")
    if "multipliers" in obj:
        kwargs["multipliers"] = tuple(
            _number(m, f"{path}.multipliers[{j}]", exclusive_minimum=0.0)
            for j, m in enumerate(_as_array(obj["multipliers"], f"{path}.multipliers"))
        )
    return _wrap(path, controllers.TrainConfig, **kwargs)


def _parse_controller(obj, path: str) -> ControllerCfg:
    obj = _as_object(obj, path)
    kind = _string(_require(obj, path, "kind"), f"{path}.kind")
    if kind == "fixed":
        _reject_unknown(obj, path, {"kind", "name", "step"})
        step = _number(_require(obj, path, "step"), f"{path}.step",
                       exclusive_minimum=0.0)
        return FixedControllerCfg(obj.get("name", f"fixed-{step:g}"), step)
    if kind == "ou":
        _reject_unknown(obj, path, {
            "kind", "name", "theta", "mu", "sigma", "step_min", "step_max", "rng_label",
        })
        theta = _number(_require(obj, path, "theta"), f"{path}.theta",
                        exclusive_minimum=0.0, maximum=1.0)
        mu = _number(_require(obj, path, "mu"), f"{path}.mu", exclusive_minimum=0.0)
        sigma = _number(_require(obj, path, "sigma"), f"{path}.sigma", minimum=0.0)
        step_min = _number(_require(obj, path, "step_min"), f"{path}.step_min",
                           exclusive_minimum=0.0)
        step_max = _number(_require(obj, path, "step_max"), f"{path}.step_max",
                           exclusive_minimum=0.0)
        if not step_min <= mu <= step_max:
            raise ConfigError(f"{path}: need step_min <= mu <= step_max")
        name = obj.get("name", "ou")
        return OUControllerCfg(name, theta, mu, sigma, step_min, step_max,
                               obj.get("rng_label", f"ou/{name}"))
    if kind == "learned":
        _reject_unknown(obj, path, {"kind", "name", "table", "train"})
        table = obj.get("table")
        if table is not None:
            table = _string(table, f"{path}.table")
        train = _parse_train(obj["train"], f"{path}.train") if "train" in obj else None
        if table is None and train is None:
            raise ConfigError(f"{path}: learned controller needs 'table' or 'train'")
        return LearnedControllerCfg(obj.get("name", "learned"), table, train)
    raise ConfigError(f"{path}.kind: expected fixed | ou | learned, got {kind!r}")


def _parse_dda(obj, path: str) -> DdaCfg:
    obj = _as_object(obj, path)
    _reject_unknown(obj, path, {
        "qoe", "bitrate", "buyers", "sellers", "price_bounds", "controller",
        "controllers", "instances", "train",
    })
    qoe = _parse_qoe(obj.get("qoe", {}), f"{path}.qoe")

    bitrate = None
    if "bitrate" in obj:
        bitrate = _number(obj["bitrate"], f"{path}.bitrate", minimum=0.0)

    buyers = []
    for i, raw in enumerate(_as_array(obj.get("buyers", []), f"{path}.buyers")):
        bpath = f"{path}.buyers[{i}]"
        raw = _as_object(raw, bpath)
        _reject_unknown(raw, bpath, {"id", "head_speed", "bitrate"})
        rate = raw.get("bitrate", bitrate)
        if rate is None:
            raise ConfigError(f"{bpath}: no bitrate given and no {path}.bitrate default")
        buyers.append(_wrap(
            bpath, VrUser.from_qoe,
            _string(_require(raw, bpath, "id"), f"{bpath}.id"),
            _number(_require(raw, bpath, "head_speed"), f"{bpath}.head_speed", minimum=0.0),
            _number(rate, f"{bpath}.bitrate", minimum=0.0),
            qoe,
        ))
    sellers = []
    for i, raw in enumerate(_as_array(obj.get("sellers", []), f"{path}.sellers")):
        spath = f"{path}.sellers[{i}]"
        raw = _as_object(raw, spath)
        _reject_unknown(raw, spath, {"id", "energy_price", "base_cost"})
        if bitrate is None:
            raise ConfigError(f"{spath}: sellers need {path}.bitrate to derive costs")
        sellers.append(_wrap(
            spath, EdgeSeller.for_bitrate,
            _string(_require(raw, spath, "id"), f"{spath}.id"),
            _number(_require(raw, spath, "energy_price"), f"{spath}.energy_price", minimum=0.0),
            _number(_require(raw, spath, "base_cost"), f"{spath}.base_cost", minimum=0.0),
            bitrate,
        ))

    _unique_ids(buyers, f"{path}.buyers")
    _unique_ids(sellers, f"{path}.sellers")

    price_bounds = None
    if "price_bounds" in obj:
        raw = _as_object(obj["price_bounds"], f"{path}.price_bounds")
        _reject_unknown(raw, f"{path}.price_bounds", {"low", "high"})
        low = _number(_require(raw, f"{path}.price_bounds", "low"),
                      f"{path}.price_bounds.low")
        high = _number(_require(raw, f"{path}.price_bounds", "high"),
                       f"{path}.price_bounds.high")
        if not low < high:
            raise ConfigError(f"{path}.price_bounds: low must be < high")
        price_bounds = (low, high)

    controller = None
    if "controller" in obj:
        controller = _parse_controller(obj["controller"], f"{path}.controller")
    ctrls = []
    for i, raw in enumerate(_as_array(obj.get("controllers", []), f"{path}.controllers")):
        ctrls.append(_parse_controller(raw, f"{path}.controllers[{i}]"))
    names = [c.name for c in ctrls]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}.controllers: duplicate controller names {names}")

    instances = None
    if "instances" in obj:
        raw = _as_object(obj["instances"], f"{path}.instances")
        ipath = f"{path}.instances"
        _reject_unknown(raw, ipath, {
            "count_per_bitrate", "buyers", "sellers", "bitrates", "head_speed",
            "energy_price", "base_cost",
        })
        instances = InstanceFamilyCfg(
            count_per_bitrate=_integer(_require(raw, ipath, "count_per_bitrate"),
                                       f"{ipath}.count_per_bitrate", minimum=1),
            n_buyers=_integer(_require(raw, ipath, "buyers"), f"{ipath}.buyers", minimum=1),
            n_sellers=_integer(_require(raw, ipath, "sellers"), f"{ipath}.sellers", minimum=1),
            bitrates=tuple(
                _number(b, f"{ipath}.bitrates[{j}]", minimum=0.0)
                for j, b in enumerate(_as_array(_require(raw, ipath, "bitrates"),
                                                f"{ipath}.bitrates"))
            ),
            head_speed=_range(_require(raw, ipath, "head_speed"),
                              f"{ipath}.head_speed", minimum=0.0),
            energy_price=_range(_require(raw, ipath, "energy_price"),
                                f"{ipath}.energy_price", minimum=0.0),
            base_cost=_range(_require(raw, ipath, "base_cost"),
                             f"{ipath}.base_cost", minimum=0.0),
        )
        if not instances.bitrates:
            raise ConfigError(f"{ipath}.bitrates: must not be empty")

    train = _parse_train(obj["train"], f"{path}.train") if "train" in obj else None
    return DdaCfg(qoe, bitrate, tuple(buyers), tuple(sellers), price_bounds,
                  controller, tuple(ctrls), instances, train)


# --- sip section ---------------------------------------------------------

@dataclass(frozen=True)
class DistributionCfg:
    kind: str
    count: int
    low: tuple[int, ...] | None = None
    high: tuple[int, ...] | None = None
    mean: tuple[float, ...] | None = None
    std: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SipInstanceCfg:
    name: str
    resources: tuple[sip.ResourceType, ...]
    scenarios: sip.DemandModel | None
    distribution: DistributionCfg | None
    trace: tuple[tuple[int, ...], ...] | None
    budget: float | None


@dataclass(frozen=True)
class SipGeneratorCfg:
    count: int
    n_resources: int
    scenario_count: int
    demand_low: int
    demand_high: int
    price_reserved: tuple[float, float]
    price_on_demand: tuple[float, float]
    trace_length: int


@dataclass(frozen=True)
class SipCfg:
    instances: tuple[SipInstanceCfg, ...]
    generator: SipGeneratorCfg | None


def _parse_int_vector(raw, path: str, width: int) -> tuple[int, ...]:
    values = tuple(
        _integer(v, f"{path}[{j}]", minimum=0)
        for j, v in enumerate(_as_array(raw, path))
    )
    if len(values) != width:
        raise ConfigError(f"{path}: expected {width} entries, got {len(values)}")
    return values


def _parse_sip_instance(obj, path: str, index: int) -> SipInstanceCfg:
    obj = _as_object(obj, path)
    _reject_unknown(obj, path, {"name", "resources", "scenarios", "distribution",
                                "trace", "budget"})
    name = obj.get("name", f"instance-{index}")
    resources = []
    for i, raw in enumerate(_as_array(_require(obj, path, "resources"),
                                      f"{path}.resources")):
        rpath = f"{path}.resources[{i}]"
        raw = _as_object(raw, rpath)
        _reject_unknown(raw, rpath, {"id", "price_reserved", "price_on_demand"})
        resources.append(_wrap(
            rpath, sip.ResourceType,
            _string(_require(raw, rpath, "id"), f"{rpath}.id"),
            _number(_require(raw, rpath, "price_reserved"), f"{rpath}.price_reserved"),
            _number(_require(raw, rpath, "price_on_demand"), f"{rpath}.price_on_demand"),
        ))
    if not resources:
        raise ConfigError(f"{path}.resources: must not be empty")
    _unique_ids(resources, f"{path}.resources")
    width = len(resources)

    trace = None
    if "trace" in obj:
        trace = tuple(
            _parse_int_vector(row, f"{path}.trace[{i}]", width)
            for i, row in enumerate(_as_array(obj["trace"], f"{path}.trace"))
        )

    if ("scenarios" in obj) == ("distribution" in obj):
        raise ConfigError(f"{path}: give exactly one of 'scenarios' or 'distribution'")

    scenarios = None
    distribution = None
    if "scenarios" in obj:
        rows = []
        for i, raw in enumerate(_as_array(obj["scenarios"], f"{path}.scenarios")):
            spath = f"{path}.scenarios[{i}]"
            raw = _as_object(raw, spath)
            _reject_unknown(raw, spath, {"demand", "probability"})
            rows.append(sip.Scenario(
                _parse_int_vector(_require(raw, spath, "demand"), f"{spath}.demand", width),
                _number(_require(raw, spath, "probability"), f"{spath}.probability",
                        exclusive_minimum=0.0),
            ))
        scenarios = _wrap(f"{path}.scenarios", sip.DemandModel, tuple(rows), trace)
    else:
        dpath = f"{path}.distribution"
        raw = _as_object(obj["distribution"], dpath)
        kind = _string(_require(raw, dpath, "kind"), f"{dpath}.kind")
        count = _integer(_require(raw, dpath, "count"), f"{dpath}.count", minimum=1)
        if kind == "uniform_integer":
            _reject_unknown(raw, dpath, {"kind", "count", "low", "high"})
            low = _parse_int_vector(_require(raw, dpath, "low"), f"{dpath}.low", width)
            high = _parse_int_vector(_require(raw, dpath, "high"), f"{dpath}.high", width)
            _wrap(dpath, sip.UniformIntegerDemand, low, high)
            distribution = DistributionCfg("uniform_integer", count, low=low, high=high)
        elif kind == "discretized_normal":
            _reject_unknown(raw, dpath, {"kind", "count", "mean", "std"})
            mean = tuple(
                _number(v, f"{dpath}.mean[{j}]", minimum=0.0)
                for j, v in enumerate(_as_array(_require(raw, dpath, "mean"), f"{dpath}.mean"))
            )
            std = tuple(
                _number(v, f"{dpath}.std[{j}]", minimum=0.0)
                for j, v in enumerate(_as_array(_require(raw, dpath, "std"), f"{dpath}.std"))
            )
            if len(mean) != width or len(std) != width:
                raise ConfigError(f"{dpath}: mean/std must have {width} entries")
            distribution = DistributionCfg("discretized_normal", count, mean=mean, std=std)
        elif kind == "empirical":
            _reject_unknown(raw, dpath, {"kind", "count"})
            if trace is None:
                raise ConfigError(f"{dpath}: empirical sampling needs {path}.trace")
            distribution = DistributionCfg("empirical", count)
        else:
            raise ConfigError(
                f"{dpath}.kind: expected uniform_integer | discretized_normal | "
                f"empirical, got {kind!r}"
            )

    budget = None
    if obj.get("budget") is not None:
        budget = _number(obj["budget"], f"{path}.budget", minimum=0.0)
        for i, res in enumerate(resources):
            if abs(res.price_reserved - round(res.price_reserved)) > 1e-12:
                raise ConfigError(
                    f"{path}.resources[{i}].price_reserved: must be an integer "
                    f"when a budget is set, got {res.price_reserved}"
                )
    return SipInstanceCfg(name, tuple(resources), scenarios, distribution, trace, budget)


def _parse_sip(obj, path: str) -> SipCfg:
    obj = _as_object(obj, path)
    _reject_unknown(obj, path, {"instances", "generator"})
    instances = tuple(
        _parse_sip_instance(raw, f"{path}.instances[{i}]", i)
        for i, raw in enumerate(_as_array(obj.get("instances", []), f"{path}.instances"))
    )
    names = [inst.name for inst in instances]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}.instances: duplicate instance names {names}")
    generator = None
    if "generator" in obj:
        gpath = f"{path}.generator"
        raw = _as_object(obj["generator"], gpath)
        _reject_unknown(raw, gpath, {
            "count", "resources", "scenario_count", "demand_low", "demand_high",
            "price_reserved", "price_on_demand", "trace_length",
        })
        demand_low = _integer(_require(raw, gpath, "demand_low"),
                              f"{gpath}.demand_low", minimum=0)
        demand_high = _integer(_require(raw, gpath, "demand_high"),
                               f"{gpath}.demand_high", minimum=demand_low)
        generator = SipGeneratorCfg(
            count=_integer(_require(raw, gpath, "count"), f"{gpath}.count", minimum=1),
            n_resources=_integer(_require(raw, gpath, "resources"),
                                 f"{gpath}.resources", minimum=1),
            scenario_count=_integer(_require(raw, gpath, "scenario_count"),
                                    f"{gpath}.scenario_count", minimum=1),
            demand_low=demand_low,
            demand_high=demand_high,
            price_reserved=_range(_require(raw, gpath, "price_reserved"),
                                  f"{gpath}.price_reserved", minimum=0.0),
            price_on_demand=_range(_require(raw, gpath, "price_on_demand"),
                                   f"{gpath}.price_on_demand", minimum=0.0),
            trace_length=_integer(raw.get("trace_length", 8),
                                  f"{gpath}.trace_length", minimum=1),
        )
    if not instances and generator is None:
        raise ConfigError(f"{path}: needs 'instances' or 'generator'")
    return SipCfg(instances, generator)


# --- top level -----------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    seed: int
    mechanism: str
    out: str | None
    evo: EvoCfg | None = None
    dda: DdaCfg | None = None
    sip_cfg: SipCfg | None = None

    def to_json_dict(self) -> dict:
        doc: dict = {"seed": self.seed, "mechanism": self.mechanism}
        if self.out is not None:
            doc["out"] = self.out
        if self.evo is not None:
            doc["evo"] = _evo_to_dict(self.evo)
        if self.dda is not None:
            doc["dda"] = _dda_to_dict(self.dda)
        if self.sip_cfg is not None:
            doc["sip"] = _sip_to_dict(self.sip_cfg)
        return doc


def validate_config(raw) -> SimConfig:
    """Parse and validate a config document (JSON text or decoded object)."""
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"config is not valid JSON: {exc}") from exc
    obj = _as_object(raw, "config")
    _reject_unknown(obj, "config", {"seed", "mechanism", "out", "evo", "dda", "sip"})
    seed = _integer(_require(obj, "config", "seed"), "config.seed",
                    minimum=0, maximum=MAX_SEED)
    mechanism = _string(_require(obj, "config", "mechanism"), "config.mechanism")
    if mechanism not in MECHANISMS:
        raise ConfigError(
            f"config.mechanism: expected one of {'|'.join(MECHANISMS)}, got {mechanism!r}"
        )
    out = _string(obj["out"], "config.out") if "out" in obj else None
    for section in MECHANISMS:
        if section in obj and section != mechanism:
            raise ConfigError(
                f"config.{section}: section does not match mechanism {mechanism!r}"
            )
    section = _require(obj, "config", mechanism)
    if mechanism == "evo":
        return SimConfig(seed, mechanism, out, evo=_parse_evo(section, "evo"))
    if mechanism == "dda":
        return SimConfig(seed, mechanism, out, dda=_parse_dda(section, "dda"))
    return SimConfig(seed, mechanism, out, sip_cfg=_parse_sip(section, "sip"))


def load_config(path: str | Path) -> SimConfig:
    return validate_config(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: SimConfig) -> str:
    return json.dumps(cfg.to_json_dict(), indent=2, sort_keys=True) + "\n"


# --- serialization back to JSON ------------------------------------------

def _evo_to_dict(cfg: EvoCfg) -> dict:
    doc: dict = {
        "regions": [
            {"id": r.id, "reward_pool": r.reward_pool, "sync_coeff": r.sync_coeff}
            for r in cfg.market.regions
        ],
        "populations": [
            {"id": p.id, "size": p.size, "capability": p.capability,
             "learning_rate": p.learning_rate, "cost": list(p.cost)}
            for p in cfg.market.populations
        ],
        "step": cfg.step, "tol": cfg.tol, "max_steps": cfg.max_steps,
        "record_every": cfg.record_every,
    }
    if cfg.init_shares is not None:
        doc["init_shares"] = {
            p.id: list(row)
            for p, row in zip(cfg.market.populations, cfg.init_shares)
        }
    if cfg.sweep_region is not None:
        doc["sweep"] = {"region": cfg.sweep_region, "rewards": list(cfg.sweep_rewards)}
    return doc


def _qoe_to_dict(q: QoeParams) -> dict:
    return {"alpha": q.alpha, "gamma": q.gamma, "beta": q.beta,
            "w_vmaf": q.w_vmaf, "w_ssim": q.w_ssim, "lambda": q.lam}


def _train_to_dict(t: controllers.TrainConfig) -> dict:
    return {
        "episodes": t.episodes, "eta": t.eta, "learning_rate": t.learning_rate,
        "discount": t.discount, "epsilon_start": t.epsilon_start,
        "epsilon_end": t.epsilon_end, "base_step": t.base_step,
        "step_min": t.step_min, "step_max": t.step_max,
        "multipliers": list(t.multipliers),
    }


def _controller_to_dict(c: ControllerCfg) -> dict:
    if isinstance(c, FixedControllerCfg):
        return {"kind": "fixed", "name": c.name, "step": c.step}
    if isinstance(c, OUControllerCfg):
        return {"kind": "ou", "name": c.name, "theta": c.theta, "mu": c.mu,
                "sigma": c.sigma, "step_min": c.step_min, "step_max": c.step_max,
                "rng_label": c.rng_label}
    doc: dict = {"kind": "learned", "name": c.name}
    if c.table is not None:
        doc["table"] = c.table
    if c.train is not None:
        doc["train"] = _train_to_dict(c.train)
    return doc


def _dda_to_dict(cfg: DdaCfg) -> dict:
    doc: dict = {"qoe": _qoe_to_dict(cfg.qoe)}
    if cfg.bitrate is not None:
        doc["bitrate"] = cfg.bitrate
    if cfg.buyers:
        doc["buyers"] = [
            {"id": b.id, "head_speed": b.head_speed, "bitrate": b.bitrate}
            for b in cfg.buyers
        ]
    if cfg.sellers:
        doc["sellers"] = [
            {"id": s.id, "energy_price": s.energy_price, "base_cost": s.base_cost}
            for s in cfg.sellers
        ]
    if cfg.price_bounds is not None:
        doc["price_bounds"] = {"low": cfg.price_bounds[0], "high": cfg.price_bounds[1]}
    if cfg.controller is not None:
        doc["controller"] = _controller_to_dict(cfg.controller)
    if cfg.controllers:
        doc["controllers"] = [_controller_to_dict(c) for c in cfg.controllers]
    if cfg.instances is not None:
        fam = cfg.instances
        doc["instances"] = {
            "count_per_bitrate": fam.count_per_bitrate, "buyers": fam.n_buyers,
            "sellers": fam.n_sellers, "bitrates": list(fam.bitrates),
            "head_speed": {"low": fam.head_speed[0], "high": fam.head_speed[1]},
            "energy_price": {"low": fam.energy_price[0], "high": fam.energy_price[1]},
            "base_cost": {"low": fam.base_cost[0], "high": fam.base_cost[1]},
        }
    if cfg.train is not None:
        doc["train"] = _train_to_dict(cfg.train)
    return doc


def _sip_to_dict(cfg: SipCfg) -> dict:
    doc: dict = {"instances": []}
    for inst in cfg.instances:
        idoc: dict = {
            "name": inst.name,
            "resources": [
                {"id": r.id, "price_reserved": r.price_reserved,
                 "price_on_demand": r.price_on_demand}
                for r in inst.resources
            ],
        }
        if inst.scenarios is not None:
            idoc["scenarios"] = [
                {"demand": list(s.demand), "probability": s.probability}
                for s in inst.scenarios.scenarios
            ]
        if inst.distribution is not None:
            d = inst.distribution
            ddoc: dict = {"kind": d.kind, "count": d.count}
            if d.low is not None:
                ddoc["low"] = list(d.low)
                ddoc["high"] = list(d.high)
            if d.mean is not None:
                ddoc["mean"] = list(d.mean)
                ddoc["std"] = list(d.std)
            idoc["distribution"] = ddoc
        if inst.trace is not None:
            idoc["trace"] = [list(row) for row in inst.trace]
        if inst.budget is not None:
            idoc["budget"] = inst.budget
        doc["instances"].append(idoc)
    if cfg.generator is not None:
        g = cfg.generator
        doc["generator"] = {
            "count": g.count, "resources": g.n_resources,
            "scenario_count": g.scenario_count, "demand_low": g.demand_low,
            "demand_high": g.demand_high,
            "price_reserved": {"low": g.price_reserved[0], "high": g.price_reserved[1]},
            "price_on_demand": {"low": g.price_on_demand[0], "high": g.price_on_demand[1]},
            "trace_length": g.trace_length,
        }
    if not doc["instances"]:
        del doc["instances"]
    return doc
