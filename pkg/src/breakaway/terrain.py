"""Race simulation over arbitrary elevation profiles.

The dimensionless equations of motion gain a gravity term gamma*sin(theta(x))
on a graded course, where theta = arctan(h'(x)) and gamma is the
gravity-to-drag force ratio.  Two integration modes are provided:

* full second-order dynamics (inertia epsilon > 0), integrated in time with
  an event handler that stops exactly at the finish line, explicit adaptive
  or implicit multistep per the stiffness of the run;
* the quasi-steady limit (epsilon = 0), where the speed is the positive root
  of C_d v^3 + m*gamma*sin(theta) v = P at every point and the race is
  marched in distance.

While the rider hides in the pack they move with the peloton; the power that
holds them there follows from eliminating the gravity term between the two
equations of motion: P_lurk = m + (C_d - m) v^3, clamped at zero on descents
where no pedaling is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .model import PowerProfile, ScaleSet
from .numerics import (
    RiderNeverFinishesError,
    SolverSettings,
    StallError,
    find_root_bracketed,
    ode_solve_with_events,
)

__all__ = [
    "CourseProfile",
    "CourseFileError",
    "Trajectory",
    "BreakawayRun",
    "steepness",
    "simulate_peloton",
    "lurking_power",
    "simulate_breakaway",
    "load_course_table",
    "demo_profile",
]

SIM_SETTINGS = SolverSettings(abs_tol=1e-12, rel_tol=1e-10)

_V_STALL = 1e-9
_HORIZON = 50.0   # generous multiple of any sane dimensionless race time


class CourseFileError(ValueError):
    """A course table file could not be parsed."""


@dataclass(frozen=True)
class CourseProfile:
    """Elevation h(x) (scaled by the course length) and its derivative."""

    height: Callable
    slope: Callable
    label: str = "custom"

    def steepness(self, x):
        """Grade angle theta(x) = arctan(h'(x))."""
        return np.arctan(self.slope(x))

    @classmethod
    def flat(cls) -> "CourseProfile":
        return cls(height=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                   slope=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                   label="flat")

    @classmethod
    def from_sinusoids(cls, sin_amps=(), cos_amps=(),
                       label: str = "sinusoid") -> "CourseProfile":
        """Superposition sum_k a_k sin(2 pi k x) + b_k (cos(2 pi k x) - 1).

        The cosine terms are shifted so the course starts at height zero.
        """
        a = np.asarray(sin_amps, dtype=float)
        b = np.asarray(cos_amps, dtype=float)
        ka = 2.0 * np.pi * np.arange(1, a.size + 1)
        kb = 2.0 * np.pi * np.arange(1, b.size + 1)

        def height(x):
            x = np.asarray(x, dtype=float)[..., None]
            out = np.sum(a * np.sin(ka * x), axis=-1)
            out += np.sum(b * (np.cos(kb * x) - 1.0), axis=-1)
            return out

        def slope(x):
            x = np.asarray(x, dtype=float)[..., None]
            out = np.sum(a * ka * np.cos(ka * x), axis=-1)
            out -= np.sum(b * kb * np.sin(kb * x), axis=-1)
            return out

        return cls(height=height, slope=slope, label=label)

    @classmethod
    def from_table(cls, xs, hs, label: str = "table") -> "CourseProfile":
        """Monotone cubic interpolation of a sampled (x, h) course table."""
        xs = np.asarray(xs, dtype=float)
        hs = np.asarray(hs, dtype=float)
        if xs.size < 2:
            raise CourseFileError("course table needs at least two samples")
        if np.any(np.diff(xs) <= 0.0):
            raise CourseFileError("course x samples must increase strictly")
        if abs(xs[0]) > 1e-12 or abs(xs[-1] - 1.0) > 1e-12:
            raise CourseFileError("course table must span x = 0 to x = 1")
        interp = PchipInterpolator(xs, hs)
        return cls(height=interp, slope=interp.derivative(), label=label)


def steepness(profile: CourseProfile, x):
    return profile.steepness(x)


def load_course_table(path) -> CourseProfile:
    """Read a two-column (x, h) text file; optional header, '#' comments."""
    xs: list[float] = []
    hs: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.replace(",", " ").split()
            try:
                values = [float(p) for p in parts]
            except ValueError:
                if lineno == 1 and not xs:
                    continue  # header line
                raise CourseFileError(f"line {lineno}: not numeric: {line.strip()!r}")
            if len(values) != 2:
                raise CourseFileError(f"line {lineno}: expected two columns")
            xs.append(values[0])
            hs.append(values[1])
    if len(xs) < 2:
        raise CourseFileError("course table needs at least two data rows")
    try:
        return CourseProfile.from_table(xs, hs, label=str(path))
    except CourseFileError as exc:
        raise CourseFileError(f"{path}: {exc}") from exc


def demo_profile() -> CourseProfile:
    """Built-in hilly course: opening rise, fast mid-race descent, late climb.

    The descent is steep enough that gravity outweighs drag there, so the
    sheltered peloton out-descends a solo rider of equal power.
    """
    return CourseProfile.from_sinusoids(sin_amps=(0.006, 0.0),
                                        cos_amps=(0.0, 0.004),
                                        label="demo-hilly")


@dataclass(frozen=True)
class Trajectory:
    """Sampled time series for one group plus its finish time."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    powers: np.ndarray
    cumulative_energy: np.ndarray
    finish_time: float


@dataclass(frozen=True)
class BreakawayRun:
    rider: Trajectory
    peloton: Trajectory
    time_gap: float
    attack_time: float
    attack_position: float
    rider_energy: float
    peloton_energy: float


def _quasi_steady_root(drag, slope_term, power):
    """Largest real root of drag*v^3 + slope_term*v - power = 0 (vectorized).

    This is the physical speed branch: unique for uphill, and the stable
    fast branch on descents where gravity dominates.
    """
    drag = np.asarray(drag, dtype=float)
    p = np.asarray(slope_term, dtype=float) / drag
    q = -np.asarray(power, dtype=float) / drag
    p, q = np.broadcast_arrays(p, q)
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    out = np.empty_like(q)

    single = disc >= 0.0
    if np.any(single):
        s = np.sqrt(disc[single])
        out[single] = (np.cbrt(-q[single] / 2.0 + s)
                       + np.cbrt(-q[single] / 2.0 - s))
    triple = ~single
    if np.any(triple):
        pt, qt = p[triple], q[triple]
        amp = 2.0 * np.sqrt(-pt / 3.0)
        ang = np.arccos(np.clip(3.0 * qt / (pt * amp), -1.0, 1.0)) / 3.0
        out[triple] = amp * np.cos(ang)
    return float(out) if out.ndim == 0 else out


class _PelotonSolution:
    """Finish time plus interpolants for the peloton's position and speed."""

    def __init__(self, t_finish, position, velocity):
        self.t_finish = t_finish
        self.position = position
        self.velocity = velocity


def _solve_peloton(profile: CourseProfile, scales: ScaleSet,
                   quasi_steady: bool, method: str,
                   settings: SolverSettings) -> _PelotonSolution:
    gamma = scales.gravity_ratio
    if quasi_steady:
        xs = np.linspace(0.0, 1.0, 8193)
        slope_term = gamma * np.sin(profile.steepness(xs))
        vs = _quasi_steady_root(1.0, slope_term, 1.0)
        if np.any(vs < _V_STALL):
            raise StallError("peloton speed collapsed on the course")
        ts = np.concatenate(([0.0], np.cumsum(
            0.5 * (1.0 / vs[1:] + 1.0 / vs[:-1]) * np.diff(xs))))
        return _PelotonSolution(
            t_finish=float(ts[-1]),
            position=lambda t: np.interp(t, ts, xs),
            velocity=lambda t: np.interp(t, ts, vs),
        )

    eps = scales.inertia

    def rhs(t, y):
        x, v, _ = y
        theta = float(profile.steepness(x))
        return [v, (1.0 / v - v * v - gamma * math.sin(theta)) / eps, 1.0]

    def finish(t, y):
        return y[0] - 1.0
    finish.terminal = True
    finish.direction = 1.0

    def stall(t, y):
        return y[1] - _V_STALL
    stall.terminal = True
    stall.direction = -1.0

    sol = ode_solve_with_events(rhs, [0.0, 1.0, 0.0], (0.0, _HORIZON),
                                events=(finish, stall), settings=settings,
                                method=method)
    if sol.t_events[1].size:
        raise StallError("peloton speed collapsed on the course")
    if not sol.t_events[0].size:
        raise RiderNeverFinishesError("peloton did not reach the finish line")
    t_p = float(sol.t_events[0][0])
    dense = sol.sol
    return _PelotonSolution(
        t_finish=t_p,
        position=lambda t: dense(np.minimum(t, t_p))[0],
        velocity=lambda t: dense(np.minimum(t, t_p))[1],
    )


def _resolve_method(scales: ScaleSet, quasi_steady: bool, method: str) -> str:
    if method != "auto":
        return method
    return "bdf" if (not quasi_steady and scales.inertia < 1e-3) else "rk45"


def lurking_power(peloton: Trajectory, cd_position: float,
                  mass_ratio: float = 1.0) -> np.ndarray:
    """Power series holding a rider at drag ratio cd_position in the pack.

    Clamped at zero where gravity does the work.
    """
    return _lurk_power(peloton.velocities, cd_position, mass_ratio)


def _lurk_power(velocities, cd_position: float, mass_ratio: float):
    raw = mass_ratio + (cd_position - mass_ratio) * np.asarray(velocities) ** 3
    return np.maximum(raw, 0.0)


def simulate_peloton(profile: CourseProfile, scales: ScaleSet,
                     quasi_steady: bool = False, method: str = "auto",
                     n_samples: int = 1025,
                     settings: SolverSettings = SIM_SETTINGS) -> Trajectory:
    """Ride the peloton (unit power) over the course until x = 1."""
    method = _resolve_method(scales, quasi_steady, method)
    pel = _solve_peloton(profile, scales, quasi_steady, method, settings)
    times = np.linspace(0.0, pel.t_finish, n_samples)
    return Trajectory(
        times=times,
        positions=np.asarray(pel.position(times), dtype=float),
        velocities=np.asarray(pel.velocity(times), dtype=float),
        powers=np.ones_like(times),
        cumulative_energy=times.copy(),
        finish_time=pel.t_finish,
    )


def _as_profile(attack) -> PowerProfile:
    if isinstance(attack, PowerProfile):
        return attack
    return PowerProfile.constant(float(attack))


def simulate_breakaway(x_attack: float, attack, profile: CourseProfile,
                       scales: ScaleSet,
                       cd_front: float = 1.43, cd_lurk: float = 0.46,
                       mass_ratio: float = 1.0,
                       quasi_steady: bool = False, method: str = "auto",
                       n_samples: int = 2049,
                       settings: SolverSettings = SIM_SETTINGS) -> BreakawayRun:
    """Simulate a breakaway at course position x_attack.

    `attack` is the post-attack power: a PowerProfile evaluated in time
    since the attack, a plain number for a constant power, or None to stay
    with the peloton for the whole race.  Both trajectories stop exactly at
    the finish line; the time gap is peloton time minus rider time.
    """
    if not 0.0 <= x_attack < 1.0:
        raise ValueError("attack position must lie in [0, 1)")
    method = _resolve_method(scales, quasi_steady, method)
    pel = _solve_peloton(profile, scales, quasi_steady, method, settings)
    n_half = max(n_samples // 2, 33)

    if attack is None:
        times = np.linspace(0.0, pel.t_finish, n_samples)
        velocities = np.asarray(pel.velocity(times), dtype=float)
        powers = _lurk_power(velocities, cd_lurk, mass_ratio)
        energy = _cumtrapz(powers, times)
        rider = Trajectory(times, np.asarray(pel.position(times), dtype=float),
                           velocities, powers, energy, pel.t_finish)
        peloton = _sample_peloton(pel, n_samples)
        return BreakawayRun(rider, peloton, 0.0, math.nan, math.nan,
                            float(energy[-1]), pel.t_finish)

    power_profile = _as_profile(attack)

    # the rider tracks the peloton, so they reach x_attack when it does
    if x_attack == 0.0:
        t_attack = 0.0
    else:
        t_attack = find_root_bracketed(
            lambda t: float(pel.position(t)) - x_attack, 0.0, pel.t_finish,
            settings)
    v_attack = float(pel.velocity(t_attack))

    pre_times = np.linspace(0.0, t_attack, n_half) if t_attack > 0.0 else np.array([0.0])
    pre_vel = np.asarray(pel.velocity(pre_times), dtype=float)
    pre_pow = _lurk_power(pre_vel, cd_lurk, mass_ratio)
    pre_energy = _cumtrapz(pre_pow, pre_times)
    e_attack = float(pre_energy[-1])

    gamma = scales.gravity_ratio
    if quasi_steady:
        t_f, post = _ride_quasi_steady(x_attack, t_attack, e_attack,
                                       power_profile, profile, gamma,
                                       cd_front, mass_ratio, n_half, settings)
    else:
        t_f, post = _ride_full(x_attack, t_attack, v_attack, e_attack,
                               power_profile, profile, gamma, cd_front,
                               mass_ratio, scales.inertia, n_half, settings,
                               method)

    # keep the attack instant twice (lurk-side and attack-side samples) so a
    # trapezoid over the power series sees the jump as a vertical step
    post_times, post_x, post_v, post_p, post_e = post
    rider = Trajectory(
        times=np.concatenate((pre_times, post_times)),
        positions=np.concatenate((np.asarray(pel.position(pre_times), dtype=float),
                                  post_x)),
        velocities=np.concatenate((pre_vel, post_v)),
        powers=np.concatenate((pre_pow, post_p)),
        cumulative_energy=np.concatenate((pre_energy, post_e)),
        finish_time=t_f,
    )
    peloton = _sample_peloton(pel, n_samples)
    return BreakawayRun(
        rider=rider, peloton=peloton,
        time_gap=pel.t_finish - t_f,
        attack_time=t_attack, attack_position=x_attack,
        rider_energy=float(rider.cumulative_energy[-1]),
        peloton_energy=pel.t_finish,
    )


def _sample_peloton(pel: _PelotonSolution, n_samples: int) -> Trajectory:
    times = np.linspace(0.0, pel.t_finish, n_samples)
    return Trajectory(
        times=times,
        positions=np.asarray(pel.position(times), dtype=float),
        velocities=np.asarray(pel.velocity(times), dtype=float),
        powers=np.ones_like(times),
        cumulative_energy=times.copy(),
        finish_time=pel.t_finish,
    )


def _cumtrapz(values, times):
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if times.size == 1:
        return np.zeros(1)
    steps = 0.5 * (values[1:] + values[:-1]) * np.diff(times)
    return np.concatenate(([0.0], np.cumsum(steps)))


def _ride_full(x0, t0, v0, e0, power_profile, profile, gamma, cd_front,
               mass_ratio, eps, n_samples, settings, method):
    def rhs(t, y):
        x, v, _ = y
        p = float(power_profile.power_at(t - t0))
        theta = float(profile.steepness(x))
        dv = (p / v - cd_front * v * v
              - mass_ratio * gamma * math.sin(theta)) / (eps * mass_ratio)
        return [v, dv, p]

    def finish(t, y):
        return y[0] - 1.0
    finish.terminal = True
    finish.direction = 1.0

    def stall(t, y):
        return y[1] - _V_STALL
    stall.terminal = True
    stall.direction = -1.0

    sol = ode_solve_with_events(rhs, [x0, v0, e0], (t0, t0 + _HORIZON),
                                events=(finish, stall), settings=settings,
                                method=method)
    if sol.t_events[1].size:
        raise StallError("rider stalled after the attack")
    if not sol.t_events[0].size:
        raise RiderNeverFinishesError("rider never reached the finish line")
    t_f = float(sol.t_events[0][0])
    times = np.linspace(t0, t_f, n_samples)
    states = sol.sol(np.minimum(times, t_f))
    powers = np.asarray(power_profile.power_at(times - t0), dtype=float)
    return t_f, (times, states[0], states[1], powers, states[2])


def _ride_quasi_steady(x0, t0, e0, power_profile, profile, gamma, cd_front,
                       mass_ratio, n_samples, settings):
    def speed_at(x, t):
        p = float(power_profile.power_at(t - t0))
        slope_term = mass_ratio * gamma * math.sin(float(profile.steepness(x)))
        v = _quasi_steady_root(cd_front, slope_term, p)
        if v < _V_STALL:
            raise StallError("rider stalled after the attack")
        return v, p

    def rhs(x, y):
        v, p = speed_at(x, y[0])
        return [1.0 / v, p / v]

    sol = ode_solve_with_events(rhs, [t0, e0], (x0, 1.0), settings=settings,
                                method="rk45")
    xs = np.linspace(x0, 1.0, n_samples)
    states = sol.sol(xs)
    times = states[0]
    energies = states[1]
    speeds = np.empty_like(xs)
    powers = np.empty_like(xs)
    for k, (x, t) in enumerate(zip(xs, times)):
        speeds[k], powers[k] = speed_at(float(x), float(t))
    return float(times[-1]), (times, xs, speeds, powers, energies)
