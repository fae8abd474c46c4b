"""Two-timescale structure of the attack onset (validation diagnostics).

With a small inertia parameter eps, an attack unfolds in two short phases:
a passage through the peloton on the pack length-scale (spacing ratio
delta = gamma_ratio * eps**2), where the drag falls with the rider's depth,
followed by a solo relaxation at frozen front drag toward the equilibrium
attack speed (P/C_front)**(1/3).

The module provides three views of this:

* ``peloton_passage``: the leading-order passage layer
  gamma * m * zeta'' = P - C(zeta), integrated to the front-crossing event;
* ``post_escape_velocity``: the quoted logistic closed form for the
  relaxation phase;
* ``composite_attack`` / ``full_ode_attack``: a finite-inertia composite
  (passage layer solved in the stretched relative coordinate with the
  velocity feedback retained, then the exact frozen-drag relaxation)
  cross-validated against one monolithic integration of the full equation
  of motion.

Optimizers elsewhere always use the quasi-steady model; this module exists
to quantify how quickly that limit is reached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import DragParams, drag_at_depth
from .numerics import (
    NumericsError,
    SolverSettings,
    ode_solve_with_events,
)

__all__ = [
    "LayerSolution",
    "PassageLayer",
    "AttackSeries",
    "NeverReachesFrontError",
    "relative_drag_behind_front",
    "peloton_passage",
    "post_escape_velocity",
    "full_ode_attack",
    "composite_attack",
    "max_relative_deviation",
]

LAYER_SETTINGS = SolverSettings(abs_tol=1e-12, rel_tol=1e-11)


class NeverReachesFrontError(NumericsError):
    """The attack power cannot push the rider to the front of the pack."""


def relative_drag_behind_front(zeta, drag: DragParams, cd_avg: float):
    """Normalized drag at signed pack coordinate zeta (zeta = 0 is the front).

    Negative zeta means the rider is still inside the peloton at depth
    -zeta; positive zeta means clear of the front, at full drag.
    """
    return drag_at_depth(-np.asarray(zeta, dtype=float), drag) / cd_avg


@dataclass(frozen=True)
class PassageLayer:
    """Leading-order passage through the pack, in inner time units."""

    duration: float      # front-crossing inner time
    front_speed: float   # 1 + exit slope, the layer's velocity reconstruction
    exit_slope: float    # d zeta / d tau at the crossing


@dataclass(frozen=True)
class LayerSolution:
    """Finite-inertia two-layer decomposition of one attack."""

    passage_duration: float          # (t_front - t_attack) / eps**1.5
    front_speed: float               # speed at the front crossing
    relaxation: Callable             # inner time tau -> speed, from the crossing
    terminal_speed: float            # (P / C_front)**(1/3)
    gamma_ratio: float


@dataclass(frozen=True)
class AttackSeries:
    times: np.ndarray
    velocities: np.ndarray
    front_crossing_time: float


def peloton_passage(position: float, power: float, drag: DragParams,
                    cd_avg: float, mass_ratio: float = 1.0,
                    gamma_ratio: float = 1.0,
                    settings: SolverSettings = LAYER_SETTINGS) -> PassageLayer:
    """Integrate the leading-order passage layer until the front is reached.

    The rider starts from rest relative to the pack at depth position - 1
    and is driven by the local power surplus P - C(zeta).  Continuous
    (non-integer) start positions are allowed.
    """
    if position < 1.0:
        raise ValueError("position must be >= 1")
    zeta0 = -(position - 1.0)
    if zeta0 == 0.0:
        return PassageLayer(duration=0.0, front_speed=1.0, exit_slope=0.0)
    if power <= relative_drag_behind_front(zeta0, drag, cd_avg):
        raise NeverReachesFrontError(
            "power does not exceed the local drag; the rider cannot accelerate")

    scale = gamma_ratio * mass_ratio

    def rhs(tau, y):
        zeta, u = y
        return [u, (power - relative_drag_behind_front(zeta, drag, cd_avg)) / scale]

    def front(tau, y):
        return y[0]
    front.terminal = True
    front.direction = 1.0

    def turned(tau, y):
        return y[1]
    turned.terminal = True
    turned.direction = -1.0

    horizon = 20.0 * math.sqrt(2.0 * abs(zeta0) * scale / power) + 10.0
    sol = ode_solve_with_events(rhs, [zeta0, 0.0], (0.0, horizon),
                                events=(front, turned), settings=settings)
    if sol.t_events[1].size or not sol.t_events[0].size:
        raise NeverReachesFrontError("the rider turned back before the front")
    tau_d = float(sol.t_events[0][0])
    exit_slope = float(sol.y_events[0][0][1])
    return PassageLayer(duration=tau_d, front_speed=1.0 + exit_slope,
                        exit_slope=exit_slope)


def post_escape_velocity(tau, v_front: float, power: float,
                         cd_front_raw: float, mass_ratio: float = 1.0):
    """Closed-form relaxation speed after escaping the pack.

    v(tau) = P v_f / (C v_f + (P - C v_f) exp(-P tau / m)); starts at
    v_front and decays exponentially toward power / cd_front_raw.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0.0):
        raise ValueError("tau must be non-negative")
    shed = power - cd_front_raw * v_front
    out = (power * v_front
           / (cd_front_raw * v_front + shed * np.exp(-power * tau / mass_ratio)))
    return float(out) if out.ndim == 0 else out


def _attack_rhs(power, drag, cd_avg, mass_ratio, eps, delta):
    def rhs(t, y):
        zeta, v = y
        c = float(relative_drag_behind_front(zeta, drag, cd_avg))
        return [(v - 1.0) / delta,
                (power / v - c * v * v) / (eps * mass_ratio)]
    return rhs


def _time_grid(eps, position, power, drag, cd_avg, mass_ratio, gamma_ratio):
    """Window covering the passage and the relaxation settle-down."""
    if position > 1.0:
        lead = peloton_passage(position, power, drag, cd_avg, mass_ratio,
                               gamma_ratio)
        passage = 4.0 * eps**1.5 * lead.duration
    else:
        passage = 0.0
    v_eq = (power * cd_avg / drag.cd_max) ** (1.0 / 3.0)
    settle = 16.0 * eps * mass_ratio * v_eq**2 / power
    return passage + settle


def full_ode_attack(eps: float, position: float, power: float,
                    drag: DragParams, cd_avg: float,
                    mass_ratio: float = 1.0, gamma_ratio: float = 1.0,
                    t_end: float | None = None, n_samples: int = 2001,
                    settings: SolverSettings = LAYER_SETTINGS) -> AttackSeries:
    """Monolithic integration of the attack with position-dependent drag.

    State is the signed pack coordinate and the speed; the peloton head
    advances at unit speed, so the relative coordinate moves at (v - 1) on
    the spacing scale delta = gamma_ratio * eps**2.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    delta = gamma_ratio * eps**2
    if t_end is None:
        t_end = _time_grid(eps, position, power, drag, cd_avg, mass_ratio,
                           gamma_ratio)
    rhs = _attack_rhs(power, drag, cd_avg, mass_ratio, eps, delta)

    def front(t, y):
        return y[0]
    front.terminal = False
    front.direction = 1.0

    def stall(t, y):
        return y[1] - 1e-9
    stall.terminal = True
    stall.direction = -1.0

    sol = ode_solve_with_events(rhs, [-(position - 1.0), 1.0], (0.0, t_end),
                                events=(front, stall), settings=settings)
    if sol.t_events[1].size:
        raise NumericsError("rider stalled during the attack onset")
    t_cross = float(sol.t_events[0][0]) if sol.t_events[0].size else 0.0
    times = np.linspace(0.0, t_end, n_samples)
    velocities = sol.sol(times)[1]
    return AttackSeries(times=times, velocities=velocities,
                        front_crossing_time=t_cross)


def _passage_finite(eps, position, power, drag, cd_avg, mass_ratio,
                    gamma_ratio, settings):
    """Finite-inertia passage layer solved in the relative coordinate.

    Returns (t_front, v_front, times, speeds).  The start is regularized
    with the local square-root solution of the layer balance, which removes
    the v = 1 singularity of d/d zeta derivatives.
    """
    zeta0 = -(position - 1.0)
    delta = gamma_ratio * eps**2
    if zeta0 == 0.0:
        return 0.0, 1.0, np.array([0.0]), np.array([1.0])
    g0 = power - float(relative_drag_behind_front(zeta0, drag, cd_avg))
    if g0 <= 0.0:
        raise NeverReachesFrontError(
            "power does not exceed the local drag; the rider cannot accelerate")
    dz0 = 1e-8 * abs(zeta0)
    v1 = 1.0 + math.sqrt(2.0 * gamma_ratio * eps * g0 * dz0 / mass_ratio)
    t1 = delta * math.sqrt(2.0 * mass_ratio * dz0 / (gamma_ratio * eps * g0))

    def rhs(zeta, y):
        t, v = y
        c = float(relative_drag_behind_front(zeta, drag, cd_avg))
        dt = delta / (v - 1.0)
        return [dt, dt * (power / v - c * v * v) / (eps * mass_ratio)]

    def turned(zeta, y):
        return y[1] - (1.0 + 1e-12)
    turned.terminal = True
    turned.direction = -1.0

    sol = ode_solve_with_events(rhs, [t1, v1], (zeta0 + dz0, 0.0),
                                events=(turned,), settings=settings)
    if sol.t_events[0].size:
        raise NeverReachesFrontError("the rider turned back before the front")
    zetas = np.linspace(zeta0 + dz0, 0.0, 513)
    states = sol.sol(zetas)
    times = np.concatenate(([0.0], states[0]))
    speeds = np.concatenate(([1.0], states[1]))
    return float(states[0][-1]), float(states[1][-1]), times, speeds


def composite_attack(eps: float, position: float, power: float,
                     drag: DragParams, cd_avg: float,
                     mass_ratio: float = 1.0, gamma_ratio: float = 1.0,
                     t_end: float | None = None, n_samples: int = 2001,
                     settings: SolverSettings = LAYER_SETTINGS):
    """Two-layer composite velocity through an attack.

    Layer one crosses the peloton in the stretched relative coordinate;
    layer two relaxes the speed at frozen front drag in the inner time
    (t - t_front) / eps.  Returns (AttackSeries, LayerSolution).
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if t_end is None:
        t_end = _time_grid(eps, position, power, drag, cd_avg, mass_ratio,
                           gamma_ratio)
    t_front, v_front, pass_t, pass_v = _passage_finite(
        eps, position, power, drag, cd_avg, mass_ratio, gamma_ratio, settings)

    cd_front = drag.cd_max / cd_avg
    terminal = (power / cd_front) ** (1.0 / 3.0)
    tau_end = max((t_end - t_front) / eps, 1.0)

    def relax_rhs(tau, y):
        v = y[0]
        return [(power / v - cd_front * v * v) / mass_ratio]

    relax = ode_solve_with_events(relax_rhs, [v_front], (0.0, tau_end),
                                  settings=settings)

    def relaxation(tau):
        tau = np.clip(np.asarray(tau, dtype=float), 0.0, tau_end)
        return relax.sol(tau)[0]

    times = np.linspace(0.0, t_end, n_samples)
    velocities = np.where(
        times <= t_front,
        np.interp(times, pass_t, pass_v),
        relaxation(np.maximum(times - t_front, 0.0) / eps),
    )
    series = AttackSeries(times=times, velocities=velocities,
                          front_crossing_time=t_front)
    layer = LayerSolution(
        passage_duration=t_front / eps**1.5,
        front_speed=v_front,
        relaxation=relaxation,
        terminal_speed=terminal,
        gamma_ratio=gamma_ratio,
    )
    return series, layer


def max_relative_deviation(series_a: AttackSeries,
                           series_b: AttackSeries) -> float:
    """Largest pointwise relative velocity difference on the common grid."""
    if series_a.times.shape != series_b.times.shape or np.any(
            series_a.times != series_b.times):
        raise ValueError("series must share one time grid")
    return float(np.max(np.abs(series_a.velocities - series_b.velocities)
                        / np.abs(series_b.velocities)))
