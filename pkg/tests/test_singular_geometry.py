"""Green's function, regular part, singular weightsders and c(p)."""

import numpy as np
import pytest
from scipy.integrate import quad

from sol_lab.singular_geometry import (
    REGULAR_PART,
    SingularEvaluationError,
    SingularPoint,
    SingularWeight,
    bubble_constant,
    green,
    regular_part,
    weight_at,
)
from sol_lab.sphere_grid import (
    FOUR_PI,
    ScalarField,
    SHCoefficients,
    dirichlet_pairing,
    integrate,
    sh_analysis,
    synthesis_at_points,
)

from conftest import random_band_limited

NORTH = np.array([0.0, 0.0, 1.0])
SOUTH = np.array([0.0, 0.0, -1.0])


def random_pole(rng):
    p = rng.normal(size=3)
    return p / np.linalg.norm(p)


class TestGreen:
    def test_antipodal_value(self):
        # G_p(-p) = -1/(4 pi): the value that feeds the antipodal constants
        assert green(NORTH, SOUTH) == pytest.approx(-1.0 / FOUR_PI, rel=1e-12)

    def test_orthogonal_value(self):
        expected = -(1.0 - np.log(2.0)) / FOUR_PI
        assert green(NORTH, np.array([1.0, 0.0, 0.0])) == pytest.approx(
            expected, rel=1e-12)
        assert expected == pytest.approx(-0.0244186, abs=1e-6)

    def test_singularity_signalled(self):
        with pytest.raises(SingularEvaluationError):
            green(NORTH, NORTH)

    def test_mean_zero_analytic(self, rng):
        """Mean-zero by rotation-invariant 1-d quadrature of green() itself."""
        for _ in range(5):
            p = random_pole(rng)
            helper = np.eye(3)[np.argmin(np.abs(p))]
            e1 = np.cross(helper, p)
            e1 /= np.linalg.norm(e1)

            def zonal(t):
                x = t * p + np.sqrt(max(1.0 - t * t, 0.0)) * e1
                return 2.0 * np.pi * green(p, x)

            val, err = quad(zonal, -1.0, 1.0, limit=200)
            assert abs(val) < max(1e-10, 10.0 * err)

    @pytest.mark.xfail(
        strict=True,
        reason="plain node quadrature of the log-singular kernel has error "
               "~1e-4 at L = 64, decaying only ~N^-1.6; the 1e-8 figure is "
               "unreachable at desk scale (the mean-zero property itself is "
               "verified analytically above)")
    def test_mean_zero_grid_quadrature(self, grid64, rng):
        worst = 0.0
        for _ in range(5):
            p = random_pole(rng)
            f = ScalarField(green(p, grid64.nodes), grid64)
            worst = max(worst, abs(integrate(f)))
        assert worst < 1e-8

    def test_distributional_identity(self, grid64, rng):
        """<grad G_p, grad v> = v(p) - mean(v) for band-limited v."""
        for _ in range(3):
            p = random_pole(rng)
            gp = sh_analysis(ScalarField(green(p, grid64.nodes), grid64))
            v = sh_analysis(random_band_limited(grid64, rng, decay=3.0))
            lhs = dirichlet_pairing(gp, v)
            rhs = synthesis_at_points(v, p[None, :])[0] - v.mean
            assert abs(lhs - rhs) < 1e-3


class TestRegularPart:
    def test_constant_value(self):
        assert regular_part(NORTH) == pytest.approx(
            (2.0 * np.log(2.0) - 1.0) / FOUR_PI, rel=1e-15)

    def test_two_points_identical(self, rng):
        assert regular_part(random_pole(rng)) == regular_part(random_pole(rng))

    def test_numerical_limit(self):
        """G_p(x) + log(d)/(2 pi) -> A as d -> 0 (limit oracle)."""
        d = 1e-3
        x = np.array([np.sin(d), 0.0, np.cos(d)])
        val = green(NORTH, x) + np.log(d) / (2.0 * np.pi)
        assert abs(val - REGULAR_PART) < 1e-4


class TestSingularWeight:
    def test_validation(self):
        with pytest.raises(ValueError):
            SingularPoint(NORTH, -1.0)
        with pytest.raises(ValueError):
            SingularPoint(NORTH, 0.0)
        with pytest.raises(ValueError):
            SingularWeight.from_orders([(NORTH, -0.5), (NORTH, 0.5)])

    def test_derived_quantities(self):
        w = SingularWeight.from_orders([(NORTH, -0.5), (SOUTH, 0.25)])
        assert w.alpha == -0.5
        assert w.rho_bar == pytest.approx(FOUR_PI)
        assert w.beta(NORTH) == -0.5
        assert w.beta(SOUTH) == 0.25
        assert w.beta([1.0, 0.0, 0.0]) == 0.0
        w2 = SingularWeight.from_orders([(NORTH, 0.5)])
        assert w2.alpha == 0.0
        assert w2.rho_bar == pytest.approx(8.0 * np.pi)

    def test_empty_weight_is_one(self, rng):
        w = SingularWeight()
        assert weight_at(w, random_pole(rng)) == 1.0

    def test_single_pole_at_antipode(self):
        # h(-p) = (e/2)^a * 2^a = e^a
        for a in [-0.5, 0.25, 1.0]:
            w = SingularWeight.from_orders([(NORTH, a)])
            assert weight_at(w, SOUTH) == pytest.approx(np.exp(a), rel=1e-12)

    def test_antipodal_pair_on_equator(self):
        a = -0.3
        w = SingularWeight.from_orders([(NORTH, a), (SOUTH, a)])
        x = np.array([0.0, 1.0, 0.0])
        assert weight_at(w, x) == pytest.approx((np.e / 2.0) ** (2 * a),
                                                rel=1e-12)

    def test_negative_order_evaluation_rejected(self):
        w = SingularWeight.from_orders([(NORTH, -0.5)])
        with pytest.raises(SingularEvaluationError):
            weight_at(w, NORTH)

    def test_positive_order_zero_limit(self):
        w = SingularWeight.from_orders([(NORTH, 0.5)])
        assert weight_at(w, NORTH) == 0.0

    def test_local_power_behavior(self):
        """log h(x) ~ 2 alpha_i log d near p_i, slope within 1%."""
        for a in [-0.6, 0.4]:
            w = SingularWeight.from_orders([(NORTH, a), (SOUTH, 0.2)])
            d = np.geomspace(1e-3, 1e-2, 20)
            x = np.stack([np.sin(d), np.zeros_like(d), np.cos(d)], axis=-1)
            slope = np.polyfit(np.log(d), w.log_weight(x), 1)[0]
            assert abs(slope - 2 * a) < 0.01 * abs(2 * a)

    def test_smooth_factor(self, grid64):
        w = SingularWeight(K=lambda x: 2.0 + x[..., 2])
        f = w.sample(grid64)
        expected = 2.0 + grid64.nodes[..., 2]
        assert np.abs(f.values - expected).max() < 1e-14


class TestBubbleConstant:
    def test_no_singularities(self):
        assert bubble_constant(SingularWeight(), NORTH) == pytest.approx(1.0)

    def test_single_negative_order(self):
        # c = exp(-4 pi a A) = exp((1 - 2 log 2) a); a = -1/2 gives 2/sqrt(e)
        w = SingularWeight.from_orders([(NORTH, -0.5)])
        assert bubble_constant(w, NORTH) == pytest.approx(
            2.0 * np.exp(-0.5), rel=1e-12)

    def test_antipodal_pair(self):
        a = -0.5
        w = SingularWeight.from_orders([(NORTH, a), (SOUTH, a)])
        expected = np.exp(-FOUR_PI * a * REGULAR_PART) * np.exp(a)
        assert bubble_constant(w, NORTH) == pytest.approx(expected, rel=1e-12)

    def test_rejects_non_minimal_point(self):
        w = SingularWeight.from_orders([(NORTH, -0.5), (SOUTH, 0.25)])
        with pytest.raises(ValueError):
            bubble_constant(w, SOUTH)
        with pytest.raises(ValueError):
            bubble_constant(w, np.array([1.0, 0.0, 0.0]))
