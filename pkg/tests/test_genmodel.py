"""Tests for generator models, certificates, and sampling checks.

Frozen constant: the slow modulus at 1e-5 is
1e-5 * ln(1e5) * ln(ln(1e5)) = 0.00028131492103857657 (mpmath, 30 dps).
"""

import math

import numpy as np
import pytest

from bsdelab._util import log_grid
from bsdelab.errors import CertificateMissingError, ParameterError
from bsdelab.genmodel import (E8, GeneratorModel, H2Cert, H2SCert, H5Cert,
                              H5PrimeCert, Modulus, SampleBox, abs_z_model,
                              builtin_model, check_certificate, check_h1, check_h2,
                              check_h2s, check_h3, check_h4, check_h5,
                              divergence_spot_check, example_26, example_27,
                              holder_sqrt_model, il_damped, kappa_from_envelope,
                              l_modulus, model_from_config, quadratic_z_model, sgn,
                              transform_h5prime_to_h5, zero_model)
from bsdelab.iterlog import IterLogSpec, holder_domination_constant, il

SEED = 20240


@pytest.fixture(scope="module")
def model26():
    return example_26()


@pytest.fixture(scope="module")
def model27():
    return example_27()


class TestSgnConvention:
    def test_sign_at_zero_is_minus_one(self):
        assert float(sgn(0.0)) == -1.0
        np.testing.assert_array_equal(sgn(np.array([-1.0, 0.0, 2.0])), [-1.0, -1.0, 1.0])

    def test_check_h2_exercises_minus_g_branch_at_zero(self):
        # constant positive generator: at y = 0 the checked quantity is -g,
        # so the margin passes; at y > 0 it is +g and fails with f = 0
        const = GeneratorModel("const5", lambda t, b, y, z: np.full_like(y, 5.0),
                               lambda t, b: np.zeros_like(b))
        cert = H2Cert(2, 0.75, beta=0.0, gamma=1.0)
        at_zero = check_h2(const, cert, count=2000, seed=SEED,
                           box=SampleBox(y=(0.0, 0.0), z_mag=(0.0, 1.0)))
        assert at_zero.passed and at_zero.min_margin >= 5.0
        above = check_h2(const, cert, count=2000, seed=SEED,
                         box=SampleBox(y=(0.5, 1.0), z_mag=(0.0, 1.0)))
        assert not above.passed


class TestBrownianDampedExample:
    def test_value_at_origin(self, model26):
        assert float(model26.eval(0.0, 0.0, 0.0, 0.0)) == 0.0

    def test_certified_checks_pass(self, model26):
        for kind in ("H1", "H2", "H3"):
            rep = check_certificate(model26, kind, count=2 * 10**4, seed=SEED)
            assert rep.passed, (kind, rep.min_rel_margin)

    def test_verbatim_driver_fails_growth_check(self):
        # b+1 is not nonnegative: at y <= 0 and b < -1/2 the margin flips
        rep = check_certificate(example_26(repaired_driver=False), "H2",
                                count=2 * 10**4, seed=SEED)
        assert not rep.passed

    def test_growth_envelope_fails_beyond_sampling_box(self, model26):
        # outside |y| <= pi the quadratic z-term changes sign: documented
        # reason the declared H2 box stops at |y| = 3
        t, b, y, z = 0.0, 0.0, 4.7, 31.4
        cert = model26.certificate("H2")
        rhs = model26.driver_f(t, b) + cert.gamma * il_damped(IterLogSpec(2, 0.75), z)
        lhs = sgn(y) * model26.eval(t, b, y, z)
        assert lhs > rhs

    def test_quadratic_budget_fails_beyond_h3_box(self, model26):
        # at |sin y| ~ 1 the oscillatory damped term exceeds 1 + e^|y| once
        # |z| ~ 26: documented reason the H3 box stops at |z| = 10
        t, b, y, z = 0.0, 0.0, -math.pi / 2.0, 100.0
        cert = model26.certificate("H3")
        rhs = model26.driver_f(t, b) + cert.h(abs(y)) + cert.c * z * z
        assert abs(float(model26.eval(t, b, y, z))) > rhs

    def test_h3_box_is_declared_in_report(self, model26):
        rep = check_certificate(model26, "H3", count=1000, seed=SEED)
        assert rep.box.z_mag == (0.0, 10.0)
        assert rep.to_dict()["config"]["box"]["z_mag"] == [0.0, 10.0]


class TestSlowModulusExample:
    def test_certified_checks_pass(self, model27):
        for kind in ("H1", "H2", "H3", "H4", "H5"):
            rep = check_certificate(model27, kind, count=2 * 10**4, seed=SEED)
            assert rep.passed, (kind, rep.min_rel_margin)

    def test_modulus_frozen_value(self):
        assert l_modulus()(1e-5) == pytest.approx(0.00028131492103857657, rel=1e-13)

    def test_modulus_vanishes_continuously_at_zero(self):
        lm = l_modulus()
        u = np.geomspace(1e-300, 1e-4, 50)
        v = lm(u)
        assert lm(0.0) == 0.0
        assert np.all(np.diff(v) > 0)
        assert v[0] < 1e-296

    def test_modulus_continuous_and_increasing_at_junction(self):
        lm = l_modulus(eps=1e-3)
        below, above = lm(1e-3 * (1 - 1e-9)), lm(1e-3 * (1 + 1e-9))
        assert above - below < 1e-10
        assert above > below

    def test_verbatim_extension_jumps_negative(self):
        # the u - l(eps) variant is discontinuous and negative past eps,
        # leaving the admissible modulus class: kept only behind the flag
        lm = l_modulus(eps=1e-3, continuous_ext=False)
        assert lm(1e-3 * 1.01) < 0

    def test_eps_outside_monotone_range_rejected(self):
        with pytest.raises(ParameterError):
            l_modulus(eps=0.2)

    def test_divergence_spot_check_is_informational(self, model27):
        # the integral over [1e-8, 1e-2] is ~0.61 (closed form through the
        # core and the linear extension): far below the default threshold
        # even though the full integral diverges; the check is a flag,
        # never a pass gate
        rep = divergence_spot_check(model27.certificate("H4").rho)
        assert rep["integral"] == pytest.approx(0.6107, rel=0.01)
        assert not rep["flag"]
        assert rep["declared_divergent"]
        h4 = check_certificate(model27, "H4", count=5000, seed=SEED)
        assert h4.passed
        assert not h4.extras["divergence_spot_check"]["flag"]

    def test_h5_kappa_has_linear_growth(self, model27):
        kappa = model27.certificate("H5").kappa
        assert kappa.linear_growth_A is not None
        v = np.geomspace(1e-8, 1e8, 200)
        assert np.all(kappa(v) <= kappa.linear_growth_A * (v + 1.0) * (1 + 1e-9))

    def test_z_increment_bound_tight_near_zero(self, model27):
        # kappa composed with the damped increment reproduces the summed
        # envelope, which is tight as the increment shrinks
        cert = model27.certificate("H5")
        spec = IterLogSpec(cert.n, cert.lam)
        gap = np.geomspace(1e-10, 1.0, 100)
        lhs = np.abs(model27.eval(0.0, 0.0, 1.0, gap) - model27.eval(0.0, 0.0, 1.0, 0.0))
        rhs = cert.kappa(il_damped(spec, gap))
        assert np.all(rhs >= lhs * (1 - 1e-9))
        assert rhs[0] <= 4 * lhs[0]   # within a small factor at tiny gaps


class TestNegativeControls:
    def test_quadratic_generator_fails_h5(self):
        cert = example_27().certificate("H5")
        rep = check_h5(quadratic_z_model(), cert, count=10**4, seed=SEED)
        assert not rep.passed
        assert rep.min_margin < -100

    def test_linear_generator_fails_damped_h2(self):
        rep = check_h2(abs_z_model(), H2Cert(1, 1.0, beta=0.0, gamma=1.0),
                       count=10**4, seed=SEED)
        assert not rep.passed

    def test_step_generator_fails_continuity(self):
        step = GeneratorModel("step", lambda t, b, y, z: np.where(y > 0, 1.0, 0.0),
                              lambda t, b: np.zeros_like(b))
        assert not check_h1(step, count=5000, seed=SEED).passed

    def test_missing_certificate_raises(self):
        with pytest.raises(CertificateMissingError):
            check_certificate(zero_model(), "H2")


class TestTransforms:
    def test_primed_transform_continuous_at_one(self):
        cert = transform_h5prime_to_h5(
            H5PrimeCert(A=1.0, kappa_tilde=Modulus("id", lambda x: x)), 1, 0.0)
        lo, hi = cert.kappa(1.0 - 1e-12), cert.kappa(1.0 + 1e-12)
        assert hi == pytest.approx(lo, rel=1e-9)

    def test_primed_transform_branches(self):
        # large kappa_tilde picks the first branch, small the second
        big = transform_h5prime_to_h5(
            H5PrimeCert(A=1e-6, kappa_tilde=Modulus("id", lambda x: x)), 2, 0.75)
        small = transform_h5prime_to_h5(
            H5PrimeCert(A=100.0, kappa_tilde=Modulus("id", lambda x: x)), 2, 0.75)
        assert big.kappa(2.0) < small.kappa(2.0)

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(ParameterError):
            transform_h5prime_to_h5(
                H5PrimeCert(A=0.0, kappa_tilde=Modulus("id", lambda x: x)), 1, 0.0)
        with pytest.raises(ParameterError):
            transform_h5prime_to_h5(
                H5PrimeCert(A=1.0, kappa_tilde=Modulus("zero", lambda x: 0.0 * x)), 1, 0.0)

    def test_bounded_uniformly_continuous_model_passes_transformed_cert(self):
        clip = GeneratorModel("clip5", lambda t, b, y, z: np.minimum(np.abs(z), 5.0),
                              lambda t, b: np.zeros_like(b))
        cert = transform_h5prime_to_h5(
            H5PrimeCert(A=5.0, kappa_tilde=Modulus("min_id_5", lambda x: np.minimum(x, 5.0))),
            2, 2.0 / 3.0)
        rep = check_h5(clip, cert, count=2 * 10**4, seed=SEED)
        assert rep.passed

    def test_hoelder_bridge_into_damped_growth(self):
        # sublinear-power certificate implies the damped certificate with
        # gamma scaled by the grid domination constant, on the grid's range
        model = holder_sqrt_model()
        h2s = model.certificate("H2S")
        rep = check_h2s(model, h2s, count=10**4, seed=SEED,
                        box=SampleBox(z_mag=(1.0, 1e8)))
        assert rep.passed
        spec = IterLogSpec(2, 0.75)
        K = holder_domination_constant(h2s.alpha, spec, log_grid(1e8, 10**4, xmin=1.0))
        bridged = H2Cert(2, 0.75, beta=h2s.beta, gamma=h2s.gamma * K)
        rep2 = check_h2(model, bridged, count=10**4, seed=SEED,
                        box=SampleBox(z_mag=(1.0, 1e8)))
        assert rep2.passed

    def test_sum_of_damped_moduli_satisfies_weakest_certificate(self):
        # closure under sums: two damped terms with different outer
        # exponents certify at the smaller exponent
        def fn(t, b, y, z):
            az = np.abs(z)
            return il_damped(IterLogSpec(2, 0.75, E8), az) \
                + il_damped(IterLogSpec(2, 2.0 / 3.0, E8), az)

        combined = GeneratorModel("sum_damped", fn, lambda t, b: np.zeros_like(b))
        envelope = lambda u: (il_damped(IterLogSpec(2, 0.75, E8), u)
                              + il_damped(IterLogSpec(2, 2.0 / 3.0, E8), u))
        kappa = kappa_from_envelope(envelope, IterLogSpec(2, 2.0 / 3.0), name="sum")
        rep = check_h5(combined, H5Cert(2, 2.0 / 3.0, kappa), count=2 * 10**4, seed=SEED)
        assert rep.passed, rep.min_rel_margin


class TestModelConfig:
    def test_builtin_passthrough(self):
        assert model_from_config({"builtin": "zero"}).name == "zero"

    def test_atoms_reproduce_builtin(self):
        cfg = {
            "name": "rebuilt",
            "driver": {"kind": "abs_brownian_plus", "value": 1.0},
            "atoms": [
                {"coeff": 1.0, "b": {"kind": "identity"}},
                {"coeff": -1.0, "y": {"kind": "exp"}, "z": {"kind": "sin2_abs"}},
                {"coeff": 1.0, "z": {"kind": "iterlog_damped", "n": 2, "lambda": 0.75,
                                     "k": E8}},
                {"coeff": -1.0, "y": {"kind": "sin"}, "z": {"kind": "abs_pow", "power": 2}},
            ],
        }
        # the damped atom lacks the cos factor of the builtin; patch it in
        cfg["atoms"][2]["z"]["kind"] = "iterlog_damped"
        built = model_from_config(cfg)
        ref = example_26()
        rng = np.random.default_rng(3)
        t, b = rng.uniform(0, 1, 100), rng.uniform(-3, 3, 100)
        y, z = rng.uniform(-3, 3, 100), rng.uniform(-20, 20, 100)
        # compare against the builtin with its cos|z| factor removed
        damp = il_damped(IterLogSpec(2, 0.75, E8), np.abs(z))
        expected = ref.eval(t, b, y, z) - damp * np.cos(np.abs(z)) + damp
        np.testing.assert_allclose(built.eval(t, b, y, z), expected, rtol=1e-12, atol=1e-12)

    def test_unknown_atom_rejected(self):
        with pytest.raises(ParameterError):
            model_from_config({"atoms": [{"z": {"kind": "nope"}}]})

    def test_empty_config_rejected(self):
        with pytest.raises(ParameterError):
            model_from_config({})

    def test_unknown_builtin_rejected(self):
        with pytest.raises(ParameterError):
            builtin_model("nosuch")


class TestCheckPlumbing:
    def test_deterministic_across_threads(self):
        model = example_27()
        a = check_certificate(model, "H5", count=4 * 10**4, seed=SEED, threads=1)
        b = check_certificate(model, "H5", count=4 * 10**4, seed=SEED, threads=4)
        assert a.min_margin == b.min_margin
        assert a.argmin == b.argmin

    def test_report_echoes_box_and_count(self):
        rep = check_certificate(example_26(), "H2", count=3000, seed=SEED)
        d = rep.to_dict()
        assert d["config"]["n_samples"] == 3000
        assert d["config"]["seed"] == SEED
        assert d["assumption"] == "H2"

    def test_h4_samples_are_strictly_ordered(self):
        from bsdelab.genmodel import draw_samples

        s = draw_samples(SampleBox(), 5000, SEED, pairs="y")
        assert np.all(s["y"] > s["y2"])

    def test_h3_margin_for_constant_generator(self):
        # |g| = 0: margin is exactly f + h(|y|) + c|z|^2
        zm = zero_model()
        h = Modulus("sq", lambda u: u**2)
        rep = check_h3(zm, __import__("bsdelab.genmodel", fromlist=["H3Cert"]).H3Cert(c=1.0, h=h),
                       count=2000, seed=SEED)
        assert rep.passed
        assert rep.min_margin >= 0
