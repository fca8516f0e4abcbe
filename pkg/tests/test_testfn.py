"""Tests for the explicit test function and its grid verification."""

import math

import numpy as np
import pytest

from bsdelab._util import log_grid
from bsdelab.errors import DomainError, GridError, ParameterError
from bsdelab.ineq import check_key_inequality
from bsdelab.iterlog import IterLogSpec, il, tower
from bsdelab.testfn import (TestFunctionSpec, default_spec, finite_difference_check,
                            mu, phi, phi_s, phi_x, phi_xx, verify_bounds,
                            verify_supersolution)


@pytest.fixture(scope="module")
def spec():
    return default_spec()


class TestConstructor:
    def test_default_lands_at_level_four(self, spec):
        # smallest quarter-step level passing the sandwich bounds is 4.0
        assert spec.k == pytest.approx(math.exp(math.exp(4.0)), rel=1e-12)
        assert math.log(math.log(spec.k)) == pytest.approx(4.0, abs=1e-12)

    def test_tower_shift_rejected(self):
        # the bracket vanishes at the corner, so phi would not stay positive
        with pytest.raises(ParameterError):
            TestFunctionSpec(k=tower(2))

    def test_level_below_two_rejected(self):
        with pytest.raises(ParameterError):
            TestFunctionSpec(k=1000.0)

    def test_lambda_at_half_rejected(self):
        with pytest.raises(ParameterError):
            TestFunctionSpec(lam=0.5)

    def test_depth_three_not_representable(self):
        with pytest.raises(ParameterError):
            TestFunctionSpec(n=3, lam=0.6)

    def test_explicit_valid_shift_accepted(self):
        sp = TestFunctionSpec(k=math.exp(math.exp(4.5)))
        assert verify_bounds(sp).passed


class TestMu:
    def test_at_zero(self, spec):
        assert mu(spec, 0.0) == 1.0

    def test_frozen_horizon_value(self, spec):
        # rate = 2 * (0 + 2/(2*0.75-1)) = 8; mpmath exp(8)
        assert mu(spec, 1.0) == pytest.approx(2980.9579870417283, rel=1e-13)

    def test_nondecreasing(self, spec):
        s = np.linspace(0, 1, 50)
        assert np.all(np.diff(mu(spec, s)) >= 0)

    def test_out_of_range(self, spec):
        with pytest.raises(DomainError):
            mu(spec, 1.5)
        with pytest.raises(DomainError):
            mu(spec, -0.1)


class TestPhi:
    def test_corner_value_is_half_k(self, spec):
        # level 4 and exponent 1-2*lambda = -1/2 make the bracket exactly 1/2
        assert phi(spec, 0.0, 0.0) == pytest.approx(0.5 * spec.k, rel=1e-12)

    def test_positive_everywhere(self, spec):
        s = np.linspace(0, 1, 7)[:, None]
        x = log_grid(1e6, 50)[None, :]
        for fn in (phi, phi_x, phi_xx, phi_s):
            assert np.all(fn(spec, s, x) > 0), fn.__name__

    def test_time_derivative_proportional_to_value(self, spec):
        s = np.linspace(0.1, 0.9, 5)[:, None]
        x = log_grid(1e5, 30)[None, :]
        np.testing.assert_array_equal(phi_s(spec, s, x), spec.rate() * phi(spec, s, x))

    def test_negative_x_rejected(self, spec):
        with pytest.raises(DomainError):
            phi(spec, 0.0, -1.0)

    def test_derivatives_match_extended_precision_differences(self, spec):
        worst = finite_difference_check(spec, points=60, seed=11)
        assert max(worst.values()) <= 1e-6, worst


class TestVerifyBounds:
    def test_default_spec_passes(self, spec):
        rep = verify_bounds(spec)
        assert rep.passed
        assert all(v >= 0 for v in rep.rel_margins.values())

    def test_tower_shift_fails_lower_slope_bound(self):
        bad = TestFunctionSpec(k=tower(2), verify=False)
        rep = verify_bounds(bad)
        assert not rep.passed
        assert rep.rel_margins["phi_x_lower"] < 0

    def test_empty_grid_rejected(self, spec):
        with pytest.raises(GridError):
            verify_bounds(spec, grid_s=[], grid_x=[1.0])


class TestSupersolution:
    def test_default_spec_passes(self, spec):
        rep = verify_supersolution(spec, grid_s=np.linspace(0, 1, 10),
                                   grid_x=log_grid(1e6, 60), grid_z=log_grid(1e6, 60))
        assert rep.passed
        assert rep.violations == 0

    def test_zero_z_plane_nonnegative(self, spec):
        rep = verify_supersolution(spec, grid_s=np.linspace(0, 1, 10),
                                   grid_x=log_grid(1e6, 100), grid_z=[0.0])
        assert rep.passed
        assert rep.worst_margin >= 0

    def test_degenerate_shift_fails(self):
        bad = TestFunctionSpec(lam=0.51, k=tower(2), verify=False)
        rep = verify_supersolution(bad, grid_s=np.linspace(0, 1, 10),
                                   grid_x=log_grid(1e4, 60), grid_z=log_grid(1e4, 60))
        assert not rep.passed
        assert rep.worst_rel_margin < 0

    def test_reduced_inequality_implies_full_margin(self, spec):
        # with the p=2 pairwise inequality, the z-independent reduction
        # lower-bounds the full margin at every (s, x, z)
        ils = spec.il_spec
        gs = np.linspace(0.0, 1.0, 6)
        gx = log_grid(1e5, 40)
        gz = log_grid(1e6, 120)
        assert check_key_inequality(ils, 2.0, log_grid(1e8, 200), log_grid(1e8, 200)).passed
        for s in gs:
            px = phi_x(spec, s, gx)
            pxx = phi_xx(spec, s, gx)
            ps = phi_s(spec, s, gx)
            ratio = spec.gamma * px / pxx
            reduced = (ps - spec.beta * px * gx
                       - spec.gamma**2 * px**2 / (pxx * il(ils, ratio) ** 2))
            full = (ps - spec.beta * px * gx)[:, None] \
                - spec.gamma * np.outer(px, gz / il(ils, gz)) \
                + 0.5 * np.outer(pxx, gz**2)
            scale = np.maximum(np.abs(full), 1.0)
            assert np.all(full >= reduced[:, None] - 1e-10 * scale)


class TestReports:
    def test_bounds_report_serializes(self, spec):
        d = verify_bounds(spec).to_dict()
        assert d["pass"] is True
        assert d["config"]["k"] == spec.k
        assert set(d["margins"]) == {"phi_x_lower", "phi_x_upper", "phi_xx_lower",
                                     "phi_xx_upper", "phi_s_lower", "ratio_lower"}

    def test_supersolution_report_serializes(self, spec):
        rep = verify_supersolution(spec, grid_s=np.linspace(0, 1, 4),
                                   grid_x=log_grid(1e4, 20), grid_z=log_grid(1e4, 20))
        d = rep.to_dict()
        assert d["pass"] is True
        assert len(d["worst_point"]) == 3
