"""Command-line interface: one subcommand per analysis, tables out.

Subcommands
-----------
flat            closed-form flat-course optimum (optionally swept)
fatigue         numerically optimized fatigue-limited attack (optionally swept)
terrain         race simulation over a course profile (time series + summary)
crash-mc        Monte Carlo validation of the analytic crash exposure
microstructure  composite vs full attack-onset velocity series

Every run prints (or writes with --out) a single table whose metadata block
echoes the complete effective configuration; re-running with the same
configuration and seed reproduces the output byte for byte.  Exit codes:
0 success, 1 usage or configuration error, 2 numerical failure, 3 the
Monte Carlo statistical gate tripped.
"""

from __future__ import annotations

import argparse
import math
import sys
from multiprocessing import Pool

import numpy as np

from . import __version__, fatigue, flat, microstructure, terrain
from .config import ConfigError, RunConfig, _resolve_key
from .crash import PositionTrace, exposure_simple_attack, monte_carlo_exposure
from .model import PowerProfile
from .numerics import NumericsError
from .tables import ResultTable

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_STATISTICAL = 3

_Z_GATE = 4.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1, not argparse's default 2
        raise UsageError(message)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="PATH", help="INI configuration file")
    sub.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                     dest="overrides", help="override one configuration value")
    sub.add_argument("--out", metavar="PATH", help="write the table here instead of stdout")
    sub.add_argument("--format", choices=("csv", "json"),
                     help="output format (default from config)")
    sub.add_argument("--seed", type=int, help="Monte Carlo seed")
    sub.add_argument("--trials", type=int, help="Monte Carlo trial count")
    sub.add_argument("--course", metavar="PATH",
                     help="course table file, or 'flat' / 'demo'")
    sub.add_argument("--jobs", type=int, help="parallel workers for sweeps")


def build_parser() -> _Parser:
    parser = _Parser(prog="breakaway",
                     description="Breakaway strategy analysis and simulation")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("flat", "closed-form flat-course optimum"),
        ("fatigue", "fatigue-limited attack optimization"),
        ("terrain", "race simulation over a course profile"),
        ("crash-mc", "Monte Carlo check of the crash exposure"),
        ("microstructure", "attack-onset velocity diagnostics"),
    ):
        _add_common(subs.add_parser(name, help=help_text))
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config, args.overrides)
    if args.format is not None:
        cfg = cfg.with_value("output.format", args.format)
    if args.seed is not None:
        cfg = cfg.with_value("mc.seed", args.seed)
    if args.trials is not None:
        cfg = cfg.with_value("mc.trials", args.trials)
    if args.course is not None:
        cfg = cfg.with_value("terrain.course", args.course)
    if args.jobs is not None:
        cfg = cfg.with_value("output.jobs", args.jobs)
    return cfg


def _new_table(command: str, cfg: RunConfig, columns: list[str]) -> ResultTable:
    table = ResultTable(columns=columns)
    table.add_metadata("run.tool", "breakaway")
    table.add_metadata("run.version", __version__)
    table.add_metadata("run.command", command)
    table.add_metadata("run.units", "dimensionless")
    for key, value in cfg.echo_items():
        table.add_metadata(f"config.{key}", value)
    return table


def _sweep_configs(cfg: RunConfig):
    """The per-point configs of a sweep, or [cfg] for a single-point run."""
    parameter = cfg.get("sweep", "parameter")
    points = cfg.get("sweep", "points")
    if not parameter or points < 1:
        return None, [cfg]
    values = np.linspace(cfg.get("sweep", "lo"), cfg.get("sweep", "hi"), points)
    return parameter, [cfg.with_value(parameter, float(v)) for v in values]


def _map_rows(row_fn, configs, jobs: int):
    if jobs > 1 and len(configs) > 1:
        with Pool(processes=jobs) as pool:
            return pool.map(row_fn, configs)  # input order preserved
    return [row_fn(cfg) for cfg in configs]


def _sweep_value(cfg: RunConfig, parameter: str) -> float:
    section, key = _resolve_key(parameter)
    return cfg.get(section, key)


# -- flat ---------------------------------------------------------------------


def _flat_row(cfg: RunConfig) -> list:
    problem = cfg.strategy_problem()
    result = flat.optimal_attack(problem)
    beta_crit = flat.critical_risk(problem)
    e_min = flat.min_energy_to_win(problem, problem.risk_index)
    beta_min = flat.min_risk_to_win(problem, problem.energy_budget)
    return [
        flat.min_attack_position(problem),
        math.nan if result.attack_position is None else result.attack_position,
        math.nan if result.attack_power is None else result.attack_power,
        result.time_gap,
        result.exposure,
        result.objective,
        result.branch,
        beta_crit,
        e_min,
        math.nan if beta_min is None else beta_min,
    ]


def cmd_flat(cfg: RunConfig) -> tuple[ResultTable, int]:
    parameter, configs = _sweep_configs(cfg)
    columns = ["x_a_min", "x_a_star", "p_a_star", "delta_t", "exposure",
               "objective", "branch", "beta_crit", "e_min_win", "beta_min_win"]
    if parameter:
        columns = [parameter] + columns
    table = _new_table("flat", cfg, columns)
    rows = _map_rows(_flat_row, configs, cfg.get("output", "jobs"))
    for point_cfg, row in zip(configs, rows):
        if parameter:
            row = [_sweep_value(point_cfg, parameter)] + row
        table.add_row(*row)
    return table, EXIT_OK


# -- fatigue ------------------------------------------------------------------


def _fatigue_row(cfg: RunConfig) -> list:
    problem = cfg.strategy_problem()
    result = fatigue.optimize_fatigue(problem, mu=cfg.get("fatigue", "mu"),
                                      p_sustain=cfg.p_sustain())
    return [
        math.nan if result.attack_position is None else result.attack_position,
        math.nan if result.peak_power is None else result.peak_power,
        math.nan if result.finish_time is None else result.finish_time,
        result.time_gap,
        result.objective,
        result.status,
        result.converged,
        result.budget_residual,
        result.arrival_residual,
    ]


def cmd_fatigue(cfg: RunConfig) -> tuple[ResultTable, int]:
    parameter, configs = _sweep_configs(cfg)
    columns = ["x_a_star", "p_max_star", "t_f_star", "delta_t", "objective",
               "status", "converged", "budget_residual", "arrival_residual"]
    if parameter:
        columns = [parameter] + columns
    table = _new_table("fatigue", cfg, columns)
    rows = _map_rows(_fatigue_row, configs, cfg.get("output", "jobs"))
    code = EXIT_OK
    for point_cfg, row in zip(configs, rows):
        if row[6] is False:
            code = EXIT_NUMERICAL  # partial failure: rows are still emitted
        if parameter:
            row = [_sweep_value(point_cfg, parameter)] + row
        table.add_row(*row)
    return table, code


# -- terrain ------------------------------------------------------------------


def _course_profile(cfg: RunConfig) -> terrain.CourseProfile:
    name = cfg.get("terrain", "course")
    if name == "flat":
        return terrain.CourseProfile.flat()
    if name == "demo":
        return terrain.demo_profile()
    return terrain.load_course_table(name)


def cmd_terrain(cfg: RunConfig) -> tuple[ResultTable, int]:
    profile = _course_profile(cfg)
    scales = cfg.terrain_scales()
    power = cfg.get("terrain", "attack_power")
    attack = None if power <= 0.0 else PowerProfile.constant(power)
    run = terrain.simulate_breakaway(
        cfg.get("terrain", "attack_position"), attack, profile, scales,
        cd_front=cfg.get("model", "cd_front"),
        cd_lurk=cfg.get("model", "cd_lurk"),
        mass_ratio=cfg.get("model", "mass_ratio"),
        quasi_steady=cfg.get("terrain", "quasi_steady"),
        method=cfg.get("terrain", "method"),
        n_samples=2 * cfg.get("terrain", "samples") + 1,
    )
    table = _new_table("terrain", cfg,
                       ["series", "t", "x", "v", "power", "energy"])
    table.add_metadata("summary.course", profile.label)
    table.add_metadata("summary.t_peloton", run.peloton.finish_time)
    table.add_metadata("summary.t_rider", run.rider.finish_time)
    table.add_metadata("summary.delta_t", run.time_gap)
    table.add_metadata("summary.attack_time", run.attack_time)
    table.add_metadata("summary.rider_energy", run.rider_energy)
    table.add_metadata("summary.peloton_energy", run.peloton_energy)
    n_out = cfg.get("terrain", "samples")
    for label, traj in (("rider", run.rider), ("peloton", run.peloton)):
        picks = np.linspace(0, traj.times.size - 1, n_out).round().astype(int)
        for k in picks:
            table.add_row(label, float(traj.times[k]), float(traj.positions[k]),
                          float(traj.velocities[k]), float(traj.powers[k]),
                          float(traj.cumulative_energy[k]))
    return table, EXIT_OK


# -- crash Monte Carlo ----------------------------------------------------------


def cmd_crash_mc(cfg: RunConfig) -> tuple[ResultTable, int]:
    model = cfg.crash_model()
    position = cfg.get("model", "position")
    x_attack = cfg.get("mc", "attack_position")
    trials = cfg.get("mc", "trials")
    seed = cfg.get("mc", "seed")
    trace = PositionTrace.simple_attack(position, x_attack)
    analytic = exposure_simple_attack(x_attack, position, model)
    estimate, stderr = monte_carlo_exposure(trace, model, trials, seed)
    z = 0.0 if stderr == 0.0 else (estimate - analytic) / stderr
    table = _new_table("crash-mc", cfg,
                       ["analytic", "estimate", "std_error", "z_score",
                        "trials", "seed"])
    table.add_row(analytic, estimate, stderr, z, trials, seed)
    code = EXIT_OK if abs(z) <= _Z_GATE else EXIT_STATISTICAL
    return table, code


# -- microstructure -------------------------------------------------------------


def cmd_microstructure(cfg: RunConfig) -> tuple[ResultTable, int]:
    drag = cfg.drag_params()
    cd_avg = cfg.get("model", "cd_avg")
    eps = cfg.get("micro", "epsilon")
    kwargs = dict(
        eps=eps,
        position=cfg.get("model", "position"),
        power=cfg.get("micro", "attack_power"),
        drag=drag, cd_avg=cd_avg,
        mass_ratio=cfg.get("model", "mass_ratio"),
        gamma_ratio=cfg.get("micro", "gamma_ratio"),
        n_samples=cfg.get("micro", "samples"),
    )
    full = microstructure.full_ode_attack(**kwargs)
    composite, layer = microstructure.composite_attack(**kwargs)
    deviation = microstructure.max_relative_deviation(composite, full)
    table = _new_table("microstructure", cfg,
                       ["t", "v_composite", "v_full", "rel_deviation"])
    table.add_metadata("summary.max_rel_deviation", deviation)
    table.add_metadata("summary.front_speed", layer.front_speed)
    table.add_metadata("summary.terminal_speed", layer.terminal_speed)
    table.add_metadata("summary.passage_duration_inner", layer.passage_duration)
    table.add_metadata("summary.front_crossing_time", composite.front_crossing_time)
    for t, vc, vf in zip(composite.times, composite.velocities, full.velocities):
        table.add_row(float(t), float(vc), float(vf),
                      float(abs(vc - vf) / abs(vf)))
    return table, EXIT_OK


_COMMANDS = {
    "flat": cmd_flat,
    "fatigue": cmd_fatigue,
    "terrain": cmd_terrain,
    "crash-mc": cmd_crash_mc,
    "microstructure": cmd_microstructure,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config_from_args(args)
        table, code = _COMMANDS[args.command](cfg)
        table.write(cfg.get("output", "format"), args.out)
        return code
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except terrain.CourseFileError as exc:
        print(f"course file error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
