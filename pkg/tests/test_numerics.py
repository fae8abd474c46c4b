import math

import numpy as np
import pytest

from breakaway.numerics import (
    BracketError,
    SolverSettings,
    StiffnessError,
    ToleranceError,
    expand_bracket,
    find_root_bracketed,
    integrate_adaptive,
    minimize_scalar,
    ode_solve_with_events,
    solve_cubic_real,
)


def cubic_residual(a3, a1, a0, y):
    return a3 * y**3 + a1 * y + a0


class TestCubic:
    def test_three_real_roots(self):
        roots = solve_cubic_real(1.0, -1.0, 0.0)
        assert roots == pytest.approx([-1.0, 0.0, 1.0], abs=1e-14)

    def test_single_real_root(self):
        roots = solve_cubic_real(1.0, 1.0, -2.0)
        assert roots == pytest.approx([1.0], abs=1e-14)

    def test_linear_degenerate(self):
        assert solve_cubic_real(0.0, 2.0, -1.0) == pytest.approx([0.5])
        assert solve_cubic_real(0.0, 0.0, 3.0) == []

    def test_double_root(self):
        # (y - 1)^2 (y + 2) = y^3 - 3y + 2
        roots = solve_cubic_real(1.0, -3.0, 2.0)
        assert min(roots) == pytest.approx(-2.0, abs=1e-12)
        assert max(roots) == pytest.approx(1.0, abs=1e-8)

    def test_random_draws_residuals_and_roots(self):
        rng = np.random.default_rng(11)
        for _ in range(10_000):
            a3 = rng.uniform(-2, 2)
            if abs(a3) < 1e-3:
                a3 = 1.0
            a1 = rng.uniform(-3, 3)
            a0 = rng.uniform(-3, 3)
            roots = solve_cubic_real(a3, a1, a0)
            assert roots, "an odd-degree polynomial always has a real root"
            scale = max(1.0, abs(a1), abs(a0))
            for y in roots:
                assert abs(cubic_residual(a3, a1, a0, y)) < 1e-12 * scale * max(1.0, abs(y) ** 3)
            # every root reported by the reference solver is matched
            ref = np.roots([a3, 0.0, a1, a0])
            ref_real = sorted(r.real for r in ref if abs(r.imag) < 1e-9)
            for target in ref_real:
                assert min(abs(target - y) for y in roots) < 1e-6 * max(1.0, abs(target))


class TestRootFinding:
    def test_linear(self):
        assert find_root_bracketed(lambda x: x - 0.5, 0.0, 1.0) == pytest.approx(0.5)

    def test_cube_root_of_two(self):
        root = find_root_bracketed(lambda x: x**3 - 2.0, 1.0, 2.0)
        assert root == pytest.approx(2.0 ** (1.0 / 3.0), abs=1e-10)

    def test_no_sign_change(self):
        with pytest.raises(BracketError):
            find_root_bracketed(lambda x: x * x + 1.0, -1.0, 1.0)

    def test_expand_bracket(self):
        lo, hi = expand_bracket(lambda x: x - 7.0, 0.0, 1.0)
        assert lo <= 7.0 <= hi
        with pytest.raises(BracketError):
            expand_bracket(lambda x: x + 1.0, 0.0, 1.0, hi_cap=10.0)


class TestQuadrature:
    def test_constant(self):
        value, err = integrate_adaptive(lambda t: 1.0, 0.0, 1.0)
        assert value == pytest.approx(1.0, abs=1e-12)
        assert err >= 0.0

    def test_exponential(self):
        value, err = integrate_adaptive(lambda t: math.exp(-t), 0.0, 1.0)
        exact = 1.0 - math.exp(-1.0)
        assert value == pytest.approx(exact, abs=1e-12)
        # error estimate honest to within a factor of 10
        assert abs(value - exact) <= 10.0 * max(err, 1e-15)

    def test_smooth_oscillatory_estimate(self):
        value, err = integrate_adaptive(lambda t: math.sin(10.0 * t), 0.0, 1.0)
        exact = (1.0 - math.cos(10.0)) / 10.0
        assert abs(value - exact) <= 10.0 * max(err, 1e-15)


class TestOdeEvents:
    def test_unit_slope_event(self):
        def hit(t, y):
            return y[0] - 1.0
        hit.terminal = True
        sol = ode_solve_with_events(lambda t, y: [1.0], [0.0], (0.0, 5.0),
                                    events=(hit,))
        assert sol.t_events[0][0] == pytest.approx(1.0, abs=1e-10)

    def test_decay_event(self):
        def hit(t, y):
            return y[0] - math.exp(-1.0)
        hit.terminal = True
        sol = ode_solve_with_events(lambda t, y: [-y[0]], [1.0], (0.0, 5.0),
                                    events=(hit,))
        assert sol.t_events[0][0] == pytest.approx(1.0, abs=1e-8)

    def test_observed_order_at_least_four(self):
        # force near-fixed steps with loose tolerances and a max_step cap
        def run(h):
            settings = SolverSettings(abs_tol=1e6, rel_tol=1e6)
            sol = ode_solve_with_events(lambda t, y: [y[0]], [1.0], (0.0, 1.0),
                                        settings=settings, max_step=h,
                                        dense_output=False)
            return abs(sol.y[0][-1] - math.e)

    # halving the step should cut the error by at least 2^4
        e1, e2 = run(0.1), run(0.05)
        order = math.log2(e1 / e2)
        assert order >= 4.0

    def test_bad_method(self):
        with pytest.raises(ValueError):
            ode_solve_with_events(lambda t, y: [0.0], [0.0], (0.0, 1.0),
                                  method="euler")

    def test_integrator_failure_raises(self):
        def exploding(t, y):
            return [y[0] ** 3 * 1e8]
        with pytest.raises(StiffnessError):
            ode_solve_with_events(exploding, [1.0], (0.0, 10.0))

    def test_bdf_mode_handles_stiff_decay(self):
        sol = ode_solve_with_events(lambda t, y: [-1e6 * (y[0] - 1.0)], [0.0],
                                    (0.0, 1.0), method="bdf")
        assert sol.y[0][-1] == pytest.approx(1.0, abs=1e-6)


class TestMinimizeScalar:
    def test_parabola(self):
        x, fx = minimize_scalar(lambda x: (x - 0.3) ** 2, 0.0, 1.0)
        assert x == pytest.approx(0.3, abs=1e-8)
        assert fx == pytest.approx(0.0, abs=1e-15)

    def test_constant_ties_to_lo(self):
        x, fx = minimize_scalar(lambda x: 2.5, 0.2, 0.9)
        assert x == 0.2
        assert fx == 2.5

    def test_kinked_function(self):
        x, _ = minimize_scalar(lambda x: abs(x - 0.4), 0.0, 1.0)
        assert x == pytest.approx(0.4, abs=1e-8)

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            SolverSettings(abs_tol=0.0)
        with pytest.raises(ValueError):
            minimize_scalar(lambda x: x, 1.0, 0.0)


def test_kernels_are_bit_deterministic():
    rng = np.random.default_rng(99)
    coeffs = rng.uniform(-2, 2, size=(50, 3))
    first = [solve_cubic_real(*c) for c in coeffs]
    second = [solve_cubic_real(*c) for c in coeffs]
    assert first == second
    f = lambda x: math.sin(3.0 * x) + 0.5 * x
    assert minimize_scalar(f, 0.0, 2.0) == minimize_scalar(f, 0.0, 2.0)
    assert integrate_adaptive(f, 0.0, 2.0) == integrate_adaptive(f, 0.0, 2.0)


def test_tolerance_error_on_nasty_integrand():
    # an integrable singularity with a tight budget triggers the failure path
    settings = SolverSettings(abs_tol=1e-13, rel_tol=1e-13, max_iterations=2)
    with pytest.raises(ToleranceError):
        integrate_adaptive(lambda t: abs(t - 1.0 / 3.0) ** -0.9, 0.0, 1.0,
                           settings)
