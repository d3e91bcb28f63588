"""Command-line experiment runner.

Subcommands: evo run | evo sweep | dda run | dda compare | dda train |
sip solve | sip compare. Each takes --config/--seed/--out/--svg, writes CSV
tables (and optional SVG charts) into the output directory and prints a short
summary whose numbers all come from the emitted tables. Exit codes: 0 ok,
2 config error, 3 I/O error, 64 usage error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evo, instances, sip
from .auction import oracle_max_welfare, run_dda
from .config import (
    ConfigError,
    DdaCfg,
    FixedControllerCfg,
    InstanceFamilyCfg,
    LearnedControllerCfg,
    OUControllerCfg,
    SimConfig,
    SipInstanceCfg,
    load_config,
)
from .controllers import (
    FixedStep,
    QStepPolicy,
    load_qtable,
    make_ou_controller,
    save_qtable,
    train_q_controller,
)
from .qoe import QoeParams
from .report import ChartSpec, Table, emit_dual_panel_svg, emit_svg, format_cell, write_csv, write_svg
from .rng import rng_stream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


@dataclass(frozen=True)
class ExperimentSpec:
    mechanism: str
    action: str
    config_path: str
    seed: int | None
    out: str | None
    svg: bool


@dataclass
class RunArtifacts:
    files: list[Path] = field(default_factory=list)
    summary: list[str] = field(default_factory=list)


def build_parser() -> _Parser:
    parser = _Parser(prog="memsim", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to a JSON config")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed (unsigned 64-bit)")
    common.add_argument("--out", default=None,
                        help="output directory (default: config 'out' or '.')")
    common.add_argument("--svg", action="store_true",
                        help="also write one SVG chart per comparison table")

    mechanisms = parser.add_subparsers(dest="mechanism", required=True,
                                       parser_class=_Parser)
    for mech, actions in (("evo", ["run", "sweep"]),
                          ("dda", ["run", "compare", "train"]),
                          ("sip", ["solve", "compare"])):
        sub = mechanisms.add_parser(mech)
        acts = sub.add_subparsers(dest="action", required=True, parser_class=_Parser)
        for action in actions:
            acts.add_parser(action, parents=[common])
    return parser


def parse_cli(argv: list[str]) -> ExperimentSpec:
    args = build_parser().parse_args(argv)
    return ExperimentSpec(
        mechanism=args.mechanism,
        action=args.action,
        config_path=args.config,
        seed=args.seed,
        out=args.out,
        svg=args.svg,
    )


def _need(cfg_value, what: str):
    if cfg_value is None or (isinstance(cfg_value, tuple) and not cfg_value):
        raise ConfigError(f"this subcommand needs {what} in the config")
    return cfg_value


# --- evo -----------------------------------------------------------------

def _trajectory_table(market: evo.SensingMarket, traj: evo.Trajectory) -> Table:
    rows = []
    for t, state in zip(traj.times, traj.states):
        u = evo.payoffs(market, state)
        for p, pop in enumerate(market.populations):
            for v, region in enumerate(market.regions):
                rows.append((t, pop.id, region.id, float(state[p, v]), float(u[p, v])))
    return Table("evo_trajectory",
                 ("time", "pop_id", "region_id", "share", "payoff"), tuple(rows))


def _run_evo(cfg: SimConfig, spec: ExperimentSpec, out: Path) -> RunArtifacts:
    ecfg = cfg.evo
    market = ecfg.market
    init = np.array(ecfg.init_shares, dtype=float) if ecfg.init_shares else None
    art = RunArtifacts()
    if spec.action == "run":
        traj = evo.evolve(market, init=init, step=ecfg.step, tol=ecfg.tol,
                          max_steps=ecfg.max_steps, record_every=ecfg.record_every)
        table = _trajectory_table(market, traj)
        art.files.append(write_csv(table, out / "evo_trajectory.csv"))
        if spec.svg:
            chart_rows = tuple(
                (row[0], f"{row[1]}/{row[2]}", row[3]) for row in table.rows
            )
            chart = Table("evo_shares", ("time", "population_region", "share"), chart_rows)
            svg = emit_svg(chart, ChartSpec("line", "time", "share",
                                            "population_region", "strategy shares"))
            art.files.append(write_svg(svg, out / "evo_trajectory.svg"))
        final = traj.final_state
        art.summary.append(f"converged={format_cell(traj.converged)}")
        for p, pop in enumerate(market.populations):
            for v, region in enumerate(market.regions):
                art.summary.append(
                    f"{pop.id}/{region.id} share={format_cell(float(final[p, v]))} "
                    f"payoff={format_cell(float(traj.final_payoffs[p, v]))}"
                )
        return art

    region = _need(ecfg.sweep_region, "an evo.sweep section")
    points = evo.reward_sweep(market, region, list(ecfg.sweep_rewards), init=init,
                              step=ecfg.step, tol=ecfg.tol, max_steps=ecfg.max_steps)
    rows = tuple(
        (pt.reward, market.regions[v].id, float(pt.masses[v]), float(pt.frequencies[v]))
        for pt in points for v in range(len(market.regions))
    )
    table = Table("evo_sweep", ("reward", "region_id", "mass", "sync_frequency"), rows)
    art.files.append(write_csv(table, out / "evo_sweep.csv"))
    if spec.svg:
        svg = emit_dual_panel_svg(table, "reward",
                                  [("mass", "mass"), ("sync_frequency", "sync_frequency")],
                                  "region_id", "reward sweep")
        art.files.append(write_svg(svg, out / "evo_sweep.svg"))
    v_swept = market.region_index(region)
    for pt in points:
        art.summary.append(
            f"reward={format_cell(pt.reward)} mass={format_cell(float(pt.masses[v_swept]))} "
            f"sync_frequency={format_cell(float(pt.frequencies[v_swept]))}"
        )
    return art


# --- dda -----------------------------------------------------------------

def _family_instance(fam: InstanceFamilyCfg, qoe: QoeParams, seed: int,
                     bounds, label: str, index: int) -> instances.AuctionInstance:
    bitrate = fam.bitrates[index % len(fam.bitrates)]
    return instances.sample_instance(
        f"{label}-{index}", bitrate, fam.n_buyers, fam.n_sellers, qoe,
        fam.head_speed, fam.energy_price, fam.base_cost,
        rng_stream(seed, f"dda/{label}/{index}"), bounds,
    )


def _controller_factory(ctrl, seed: int, config_dir: Path, dcfg: DdaCfg):
    """Build a (name, per-instance factory) pair from a controller config."""
    if isinstance(ctrl, FixedControllerCfg):
        return ctrl.name, lambda inst: FixedStep(ctrl.step)
    if isinstance(ctrl, OUControllerCfg):
        def make(inst):
            return make_ou_controller(
                ctrl.theta, ctrl.mu, ctrl.sigma, ctrl.step_min, ctrl.step_max,
                rng_stream(seed, f"{ctrl.rng_label}/{inst.name}"),
            )
        return ctrl.name, make
    if isinstance(ctrl, LearnedControllerCfg):
        policy = _learned_policy(ctrl, seed, config_dir, dcfg)
        return ctrl.name, lambda inst: policy
    raise ConfigError(f"unsupported controller config: {ctrl!r}")


def _learned_policy(ctrl: LearnedControllerCfg, seed: int, config_dir: Path,
                    dcfg: DdaCfg) -> QStepPolicy:
    if ctrl.table is not None:
        return load_qtable(config_dir / ctrl.table)
    fam = _need(dcfg.instances, "a dda.instances section (for inline training)")

    def factory(episode: int) -> instances.AuctionInstance:
        return _family_instance(fam, dcfg.qoe, seed, dcfg.price_bounds,
                                "train", episode)

    result = train_q_controller(factory, ctrl.train, rng_stream(seed, "dda/train"))
    return result.policy


def _run_dda(cfg: SimConfig, spec: ExperimentSpec, out: Path,
             config_dir: Path) -> RunArtifacts:
    dcfg = cfg.dda
    seed = cfg.seed if spec.seed is None else spec.seed
    art = RunArtifacts()

    if spec.action == "run":
        buyers = _need(dcfg.buyers, "dda.buyers")
        sellers = _need(dcfg.sellers, "dda.sellers")
        ctrl_cfg = _need(dcfg.controller, "a dda.controller")
        bounds = dcfg.price_bounds or instances.derived_price_bounds(buyers)
        name, factory = _controller_factory(ctrl_cfg, seed, config_dir, dcfg)
        inst = instances.AuctionInstance("config", dcfg.bitrate or 0.0,
                                         buyers, sellers, bounds[0], bounds[1])
        outcome = run_dda(buyers, sellers, factory(inst), *bounds)
        oracle = oracle_max_welfare(buyers, sellers)
        results = Table(
            "dda_results",
            ("controller", "instance", "welfare", "oracle_welfare", "rounds", "messages"),
            ((name, inst.name, outcome.welfare, oracle, outcome.rounds,
              outcome.messages),),
        )
        matches = Table(
            "dda_matches", ("instance", "buyer_id", "seller_id", "price"),
            tuple((inst.name, m.buyer_id, m.seller_id, m.price)
                  for m in outcome.matches),
        )
        art.files.append(write_csv(results, out / "dda_run.csv"))
        art.files.append(write_csv(matches, out / "dda_matches.csv"))
        art.summary.append(
            f"{name} welfare={format_cell(outcome.welfare)} "
            f"oracle={format_cell(oracle)} rounds={format_cell(outcome.rounds)} "
            f"messages={format_cell(outcome.messages)}"
        )
        return art

    if spec.action == "train":
        train_cfg = _need(dcfg.train, "a dda.train section")
        fam = _need(dcfg.instances, "a dda.instances section")

        def factory(episode: int) -> instances.AuctionInstance:
            return _family_instance(fam, dcfg.qoe, seed, dcfg.price_bounds,
                                    "train", episode)

        result = train_q_controller(factory, train_cfg, rng_stream(seed, "dda/train"))
        table_path = out / "dda_qtable.json"
        save_qtable(result.policy, table_path)
        art.files.append(table_path)
        log = Table(
            "dda_train", ("episode", "epsilon", "welfare", "rounds", "reward"),
            tuple((e.episode, e.epsilon, e.welfare, e.rounds, e.reward)
                  for e in result.episodes),
        )
        art.files.append(write_csv(log, out / "dda_train.csv"))
        last = result.episodes[-1]
        art.summary.append(
            f"episode={format_cell(last.episode)} "
            f"welfare={format_cell(last.welfare)} reward={format_cell(last.reward)}"
        )
        return art

    # compare
    fam = _need(dcfg.instances, "a dda.instances section")
    ctrl_cfgs = _need(dcfg.controllers, "a dda.controllers list")
    family = instances.instance_family(
        list(fam.bitrates), fam.count_per_bitrate, fam.n_buyers, fam.n_sellers,
        dcfg.qoe, fam.head_speed, fam.energy_price, fam.base_cost,
        rng_stream(seed, "dda/instances"), dcfg.price_bounds,
    )
    named = [_controller_factory(c, seed, config_dir, dcfg) for c in ctrl_cfgs]
    results, summaries = instances.compare_controllers(family, named)
    results_table = Table(
        "dda_results",
        ("controller", "instance", "welfare", "oracle_welfare", "rounds", "messages"),
        tuple((r.controller, r.instance, r.welfare, r.oracle_welfare,
               r.rounds, r.messages) for r in results),
    )
    summary_table = Table(
        "dda_summary",
        ("controller", "mean_welfare", "mean_welfare_ratio", "mean_rounds",
         "mean_messages"),
        tuple((s.controller, s.mean_welfare, s.mean_welfare_ratio,
               s.mean_rounds, s.mean_messages) for s in summaries),
    )
    by_bitrate = instances.summarize_by_bitrate(results, [n for n, _ in named])
    bitrate_table = Table(
        "dda_by_bitrate",
        ("controller", "bitrate", "mean_welfare", "mean_welfare_ratio",
         "mean_rounds", "mean_messages"),
        tuple((name, bitrate, s.mean_welfare, s.mean_welfare_ratio,
               s.mean_rounds, s.mean_messages) for name, bitrate, s in by_bitrate),
    )
    art.files.append(write_csv(results_table, out / "dda_results.csv"))
    art.files.append(write_csv(summary_table, out / "dda_summary.csv"))
    art.files.append(write_csv(bitrate_table, out / "dda_by_bitrate.csv"))
    if spec.svg:
        svg = emit_dual_panel_svg(
            bitrate_table, "bitrate",
            [("mean_welfare_ratio", "welfare / oracle"),
             ("mean_messages", "messages")],
            "controller", "controller comparison",
        )
        art.files.append(write_svg(svg, out / "dda_compare.svg"))
    for s in summaries:
        art.summary.append(
            f"{s.controller} mean_welfare={format_cell(s.mean_welfare)} "
            f"mean_ratio={format_cell(s.mean_welfare_ratio)} "
            f"mean_rounds={format_cell(s.mean_rounds)} "
            f"mean_messages={format_cell(s.mean_messages)}"
        )
    return art


# --- sip -----------------------------------------------------------------

def _materialize_sip(icfg: SipInstanceCfg, seed: int) -> sip.SipInstance:
    if icfg.scenarios is not None:
        demand = icfg.scenarios
    else:
        d = icfg.distribution
        if d.kind == "uniform_integer":
            dist = sip.UniformIntegerDemand(d.low, d.high)
        elif d.kind == "discretized_normal":
            dist = sip.DiscretizedNormalDemand(d.mean, d.std)
        else:
            dist = sip.EmpiricalDemand(icfg.trace)
        model = sip.sample_scenarios(dist, d.count,
                                     rng_stream(seed, f"sip/sample/{icfg.name}"))
        demand = sip.DemandModel(model.scenarios, icfg.trace)
    return sip.SipInstance(icfg.name, icfg.resources, demand, icfg.budget)


def _generated_sip(gen, seed: int) -> list[sip.SipInstance]:
    out = []
    for k in range(gen.count):
        rng = rng_stream(seed, f"sip/generated/{k}")
        resources = tuple(
            sip.ResourceType(
                f"r{j}",
                float(round(rng.uniform(*gen.price_reserved), 4)),
                float(round(rng.uniform(*gen.price_on_demand), 4)),
            )
            for j in range(gen.n_resources)
        )
        dist = sip.UniformIntegerDemand(
            (gen.demand_low,) * gen.n_resources, (gen.demand_high,) * gen.n_resources,
        )
        model = sip.sample_scenarios(dist, gen.scenario_count, rng.substream("scen"))
        trace_model = sip.sample_scenarios(dist, gen.trace_length, rng.substream("trace"))
        trace = tuple(s.demand for s in trace_model.scenarios)
        out.append(sip.SipInstance(
            f"gen-{k}", resources, sip.DemandModel(model.scenarios, trace), None,
        ))
    return out


def _run_sip(cfg: SimConfig, spec: ExperimentSpec, out: Path) -> RunArtifacts:
    scfg = cfg.sip_cfg
    seed = cfg.seed if spec.seed is None else spec.seed
    art = RunArtifacts()

    if spec.action == "solve":
        if not scfg.instances:
            raise ConfigError("sip solve needs at least one configured instance")
        inst = _materialize_sip(scfg.instances[0], seed)
        plan, rep = sip.solve_sip(inst.demand, inst.resources, inst.budget)
        plan_table = Table(
            "sip_plan", ("instance", "resource", "units", "spend"),
            tuple((inst.name, r.id, x, r.price_reserved * x)
                  for r, x in zip(inst.resources, plan.units)),
        )
        cost_table = Table(
            "sip_solve", ("instance", "scheme", "first_stage", "on_demand", "total"),
            ((inst.name, "sip", rep.first_stage_cost, rep.expected_on_demand_cost,
              rep.expected_total),),
        )
        recourse_rows = []
        for w, (scen, rec) in enumerate(zip(inst.demand.scenarios, rep.per_scenario)):
            for j, r in enumerate(inst.resources):
                recourse_rows.append((inst.name, w, scen.probability, r.id,
                                      scen.demand[j], rec.on_demand_units[j]))
        recourse_table = Table(
            "sip_recourse",
            ("instance", "scenario", "probability", "resource", "demand",
             "on_demand_units"),
            tuple(recourse_rows),
        )
        art.files.append(write_csv(plan_table, out / "sip_plan.csv"))
        art.files.append(write_csv(cost_table, out / "sip_solve.csv"))
        art.files.append(write_csv(recourse_table, out / "sip_recourse.csv"))
        art.summary.append(
            f"sip first_stage={format_cell(rep.first_stage_cost)} "
            f"on_demand={format_cell(rep.expected_on_demand_cost)} "
            f"total={format_cell(rep.expected_total)}"
        )
        return art

    # compare
    insts = [_materialize_sip(icfg, seed) for icfg in scfg.instances]
    if scfg.generator is not None:
        insts.extend(_generated_sip(scfg.generator, seed))
    rows, flags = sip.compare_schemes(insts)
    table = Table(
        "sip_compare", ("instance", "scheme", "first_stage", "on_demand", "total"),
        tuple((r.instance, r.scheme, r.first_stage, r.on_demand, r.total)
              for r in rows),
    )
    flags_table = Table("sip_flags", ("instance", "scheme"), tuple(flags))
    art.files.append(write_csv(table, out / "sip_compare.csv"))
    art.files.append(write_csv(flags_table, out / "sip_flags.csv"))
    if spec.svg:
        agg_rows = tuple(r for r in table.rows if r[0] == "aggregate")
        agg = Table("sip_totals", table.columns, agg_rows)
        svg = emit_svg(agg, ChartSpec("bar", "scheme", "total",
                                      series="scheme", title="expected total cost"))
        art.files.append(write_svg(svg, out / "sip_compare.svg"))
    for r in rows:
        if r.instance == "aggregate":
            art.summary.append(
                f"{r.scheme} total={format_cell(r.total)} "
                f"on_demand={format_cell(r.on_demand)}"
            )
    for instance, scheme in flags:
        art.summary.append(f"flagged: optimizer beaten by {scheme} on {instance}")
    return art


# --- driver ---------------------------------------------------------------

def run_experiment(spec: ExperimentSpec) -> RunArtifacts:
    cfg = load_config(spec.config_path)
    if spec.seed is not None and not 0 <= spec.seed <= 2**64 - 1:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    if spec.mechanism != cfg.mechanism:
        raise ConfigError(
            f"config is for mechanism {cfg.mechanism!r}, command is {spec.mechanism!r}"
        )
    if spec.seed is not None:
        cfg = SimConfig(spec.seed, cfg.mechanism, cfg.out, cfg.evo, cfg.dda, cfg.sip_cfg)
    out = Path(spec.out or cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    config_dir = Path(spec.config_path).resolve().parent

    if spec.mechanism == "evo":
        art = _run_evo(cfg, spec, out)
    elif spec.mechanism == "dda":
        art = _run_dda(cfg, spec, out, config_dir)
    else:
        art = _run_sip(cfg, spec, out)
    for path in art.files:
        art.summary.append(f"wrote {path}")
    return art


def main(argv: list[str] | None = None) -> int:
    spec = parse_cli(sys.argv[1:] if argv is None else argv)
    try:
        artifacts = run_experiment(spec)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for line in artifacts.summary:
        print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
