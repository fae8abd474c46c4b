"""Breakaways with fatigue: burst power decaying toward a sustainable floor.

After attacking at time t_a the rider's power is
(p_max - p_sustain) * exp(-mu (t - t_a)) + p_sustain, so the finish time has
no closed form and the strategy optimum is found numerically.  The
three-variable constrained problem (attack position, peak power, finish
time) collapses to nested scalar solves: given the attack position, the peak
power follows from the energy budget in closed form, leaving one bracketed
root-solve for the post-attack duration; the outer minimization over the
attack position reuses the shared grid + golden-section kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .crash import exposure_simple_attack
from .flat import StrategyProblem
from .numerics import (
    DEFAULT_SETTINGS,
    RiderNeverFinishesError,
    SolverSettings,
    find_root_bracketed,
    integrate_adaptive,
    minimize_scalar,
)

__all__ = [
    "FatigueParams",
    "FatigueResult",
    "InfeasibleBudgetError",
    "power_at",
    "total_energy",
    "p_max_from_budget",
    "position_after_attack",
    "finish_time",
    "optimize_fatigue",
]

_X_CAP = 1.0 - 1e-6  # attacks arbitrarily close to the line are allowed, x = 1 is not


class InfeasibleBudgetError(ValueError):
    """The budget cannot cover the requested schedule."""


@dataclass(frozen=True)
class FatigueParams:
    """Time-dependent attack power schedule.

    p_lurk is spent while hiding in the pack; from attack_time onward the
    power starts at p_max and decays at rate mu toward p_sustain.
    """

    p_max: float
    p_sustain: float
    p_lurk: float
    mu: float
    attack_time: float

    def __post_init__(self):
        if self.p_max < self.p_sustain or self.p_sustain < 0.0:
            raise ValueError("need p_max >= p_sustain >= 0")
        if self.mu < 0.0:
            raise ValueError("mu must be non-negative")
        if self.p_lurk < 0.0:
            raise ValueError("p_lurk must be non-negative")
        if self.attack_time < 0.0:
            raise ValueError("attack_time must be non-negative")


@dataclass(frozen=True)
class FatigueResult:
    attack_position: float | None
    peak_power: float | None
    finish_time: float | None
    time_gap: float
    objective: float
    converged: bool
    status: str = "ok"               # "ok" or "no_win"
    iterations: int = 0
    budget_residual: float = math.nan
    arrival_residual: float = math.nan


def power_at(t, params: FatigueParams):
    """Power at time(s) t under the fatigue schedule."""
    t = np.asarray(t, dtype=float)
    burst = (params.p_max - params.p_sustain) * np.exp(
        -params.mu * np.maximum(t - params.attack_time, 0.0))
    out = np.where(t < params.attack_time, params.p_lurk, params.p_sustain + burst)
    return float(out) if out.ndim == 0 else out


def _burst_integral(delta: float, mu: float) -> float:
    """Integral of exp(-mu s) over [0, delta]; exact at mu = 0."""
    if mu == 0.0:
        return delta
    return -math.expm1(-mu * delta) / mu


def total_energy(x_attack: float, t_finish: float, params: FatigueParams) -> float:
    """Energy spent from the start through t_finish (attack at x_attack = t_a)."""
    if not 0.0 <= x_attack <= t_finish:
        raise ValueError("need 0 <= x_attack <= t_finish")
    delta = t_finish - x_attack
    return (params.p_lurk * x_attack
            + params.p_sustain * delta
            + (params.p_max - params.p_sustain) * _burst_integral(delta, params.mu))


def p_max_from_budget(energy_budget: float, x_attack: float, t_finish: float,
                      p_sustain: float, mu: float,
                      p_lurk: float | None = None) -> float:
    """Peak power that makes the schedule spend exactly energy_budget by t_finish.

    p_lurk defaults to p_sustain.  Round-trips with total_energy.
    """
    if t_finish <= x_attack:
        raise ValueError("need t_finish > x_attack")
    if p_lurk is None:
        p_lurk = p_sustain
    delta = t_finish - x_attack
    burst_energy = energy_budget - p_lurk * x_attack - p_sustain * delta
    if burst_energy < -1e-14 * max(1.0, energy_budget):
        raise InfeasibleBudgetError("budget below the steady-state spend")
    return p_sustain + max(burst_energy, 0.0) / _burst_integral(delta, mu)


@lru_cache(maxsize=8)
def _gauss_nodes(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def _speed_integral(delta: float, p_max: float, p_sustain: float,
                    mu: float) -> float:
    """Integral of (p_sustain + (p_max - p_sustain) e^{-mu s})^(1/3) over [0, delta].

    Fixed-order Gauss-Legendre on panels sized to the decay scale; the
    integrand is smooth, so this sits far below 1e-12 absolute error.
    """
    if delta <= 0.0:
        return 0.0
    n_panels = 1 + int(mu * delta / 4.0)
    nodes, weights = _gauss_nodes(32)
    h = delta / n_panels
    offsets = h * (np.arange(n_panels)[:, None] + 0.5 * (nodes[None, :] + 1.0))
    values = np.cbrt(p_sustain + (p_max - p_sustain) * np.exp(-mu * offsets))
    return float(0.5 * h * np.sum(values @ weights))


def position_after_attack(t: float, params: FatigueParams,
                          cd_front: float) -> float:
    """Rider position at time t >= attack_time, starting the attack at x = t_a."""
    if t < params.attack_time:
        raise ValueError("t must not precede the attack")
    integral = _speed_integral(t - params.attack_time, params.p_max,
                               params.p_sustain, params.mu)
    return params.attack_time + integral / cd_front ** (1.0 / 3.0)


def finish_time(params: FatigueParams, cd_front: float,
                settings: SolverSettings = DEFAULT_SETTINGS) -> float:
    """Time at which the post-attack position reaches the finish line."""
    t_a = params.attack_time
    if t_a >= 1.0:
        raise ValueError("the attack must happen before the finish")

    def gap(t):
        return position_after_attack(t, params, cd_front) - 1.0

    if params.p_sustain > 0.0:
        v_floor = (params.p_sustain / cd_front) ** (1.0 / 3.0)
        t_hi = t_a + (1.0 - t_a) / v_floor * (1.0 + 1e-12) + 1e-9
    else:
        if params.mu > 0.0:
            reach = (params.p_max / cd_front) ** (1.0 / 3.0) * 3.0 / params.mu
            if t_a + reach <= 1.0:
                raise RiderNeverFinishesError(
                    "the decaying burst cannot carry the rider to the line")
        t_hi = t_a + max(1.0, (1.0 - t_a)
                         * (cd_front / max(params.p_max, 1e-300)) ** (1.0 / 3.0)) * 4.0
        while gap(t_hi) < 0.0:
            t_hi = t_a + (t_hi - t_a) * settings.bracket_expansion
            if t_hi - t_a > 1e6:
                raise RiderNeverFinishesError("no finish within the search horizon")
    return find_root_bracketed(gap, t_a, t_hi, settings)


# -- constrained solve at a fixed attack position ----------------------------


def _attack_solve(x: float, energy_budget: float, p_sustain: float,
                  p_lurk: float, mu: float, cd_front: float,
                  settings: SolverSettings = DEFAULT_SETTINGS):
    """Solve budget + arrival for the post-attack duration and peak power.

    Returns (t_finish, p_max) or None when the budget cannot bring the
    rider home from x.  Uniqueness: at fixed x, raising the peak power
    shortens the ride but costs more energy per unit distance, so the spent
    energy is monotone along the arrival constraint.
    """
    e_rem = energy_budget - p_lurk * x
    if e_rem <= 0.0 or p_sustain <= 0.0:
        return None
    distance = (1.0 - x) * cd_front ** (1.0 / 3.0)
    delta_max = e_rem / p_sustain
    # steady riding (no burst) maximizes distance per unit of energy
    if p_sustain ** (1.0 / 3.0) * delta_max < distance:
        return None

    def surplus(delta):
        burst = (e_rem - p_sustain * delta) / _burst_integral(delta, mu)
        return _speed_integral(delta, p_sustain + burst, p_sustain, mu) - distance

    lo = 1e-13 * max(1.0, delta_max)
    if surplus(lo) >= 0.0:
        delta = lo
    elif surplus(delta_max) <= 0.0:
        delta = delta_max
    else:
        delta = find_root_bracketed(surplus, lo, delta_max, settings)
    p_max = p_sustain + (e_rem - p_sustain * delta) / _burst_integral(delta, mu)
    return x + delta, p_max


def _feasibility_boundary(energy_budget: float, p_sustain: float,
                          p_lurk: float, cd_front: float) -> float | None:
    """Earliest attack position from which the budget reaches the finish.

    Riding steadily at p_sustain is the energy-cheapest way home, so the
    reachable-distance condition is linear in the attack position.
    """
    spend_rate = cd_front ** (1.0 / 3.0) * p_sustain ** (2.0 / 3.0)
    if spend_rate <= p_lurk:
        return 0.0 if energy_budget >= spend_rate else None
    x = (spend_rate - energy_budget) / (spend_rate - p_lurk)
    if x >= 1.0:
        return None
    return max(x, 0.0)


def optimize_fatigue(problem: StrategyProblem, mu: float,
                     p_sustain: float | None = None,
                     grid_points: int = 128,
                     settings: SolverSettings = DEFAULT_SETTINGS) -> FatigueResult:
    """Minimize the risk-weighted objective over the attack position.

    The search domain starts at the zero-gap boundary (the earliest attack
    that at least matches the peloton); earlier attacks fail and leave the
    rider with the group, as in the constant-power model.
    """
    if mu < 0.0:
        raise ValueError("mu must be non-negative")
    p_lurk = problem.cd_lurk
    p_s = p_lurk if p_sustain is None else p_sustain
    if p_s <= 0.0:
        raise ValueError("optimization requires a positive sustainable power")
    beta = problem.risk_index
    cd_front = problem.cd_front

    n_solves = 0

    def solve(x):
        nonlocal n_solves
        n_solves += 1
        return _attack_solve(x, problem.energy_budget, p_s, p_lurk, mu,
                             cd_front, settings)

    def no_win() -> FatigueResult:
        risk = exposure_simple_attack(1.0, problem.position, problem.crash)
        return FatigueResult(None, None, None, 0.0, (1.0 - beta) * risk,
                             converged=True, status="no_win")

    x_feas = _feasibility_boundary(problem.energy_budget, p_s, p_lurk, cd_front)
    if x_feas is None or x_feas >= _X_CAP:
        return no_win()

    def time_gap_at(x):
        # a finite sentinel keeps the zero-gap bracketing well posed if the
        # closed-form feasibility boundary lands infeasible by rounding
        solved = solve(x)
        return -1.0 if solved is None else 1.0 - solved[0]

    # earliest attack that at least matches the peloton (gap crosses zero)
    if time_gap_at(x_feas) >= 0.0:
        x_zero = x_feas
    elif time_gap_at(_X_CAP) < 0.0:
        return no_win()
    else:
        x_zero = find_root_bracketed(time_gap_at, x_feas, _X_CAP, settings)

    def objective_at(x):
        gap = max(time_gap_at(x), 0.0)
        return (-beta * gap
                + (1.0 - beta) * exposure_simple_attack(x, problem.position,
                                                        problem.crash))

    boundary_value = objective_at(x_zero)
    if x_zero < _X_CAP:
        x_best, value = minimize_scalar(objective_at, x_zero, _X_CAP,
                                        settings, grid_points=grid_points)
        if boundary_value <= value + 1e-12:
            x_best, value = x_zero, boundary_value
    else:
        x_best, value = x_zero, boundary_value

    t_finish, p_max = solve(x_best)
    params = FatigueParams(p_max=p_max, p_sustain=p_s, p_lurk=p_lurk,
                           mu=mu, attack_time=x_best)
    budget_res = abs(total_energy(x_best, t_finish, params) - problem.energy_budget)
    integrand = lambda s: np.cbrt(p_s + (p_max - p_s) * np.exp(-mu * s))
    arrival, _ = integrate_adaptive(integrand, 0.0, t_finish - x_best, settings)
    arrival_res = abs(x_best + arrival / cd_front ** (1.0 / 3.0) - 1.0)
    converged = budget_res < 1e-8 and arrival_res < 1e-8
    return FatigueResult(
        attack_position=x_best,
        peak_power=p_max,
        finish_time=t_finish,
        time_gap=max(1.0 - t_finish, 0.0),
        objective=value,
        converged=converged,
        iterations=n_solves,
        budget_residual=budget_res,
        arrival_residual=arrival_res,
    )
