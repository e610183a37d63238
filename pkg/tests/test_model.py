import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad as scipy_quad


from polaron import (
    CouplingSpec,
    EpsilonSpec,
    InputError,
    ModelParams,
    free_energy,
    threshold,
    validate_model,
)


def make_params(d=3, alpha=0.1, eps=None, coupling=None, c0=0.5):
    return ModelParams(
        d=d,
        alpha=alpha,
        eps=eps or EpsilonSpec.constant(1.0),
        coupling=coupling or CouplingSpec(amplitude=1.0, width=1.0),
        c0=c0,
    )


class TestEpsilon:
    def test_constant(self):
        eps = EpsilonSpec.constant(1.5)
        assert eps.radial(0.0) == 1.5
        assert eps(np.array([2.0, 0.0, 0.0])) == 1.5

    def test_relativistic(self):
        eps = EpsilonSpec.relativistic(1.0, 0.5)
        assert eps.radial(0.0) == pytest.approx(1.5, abs=1e-15)
        q = np.array([3.0, 4.0, 0.0])
        assert eps(q) == pytest.approx(math.sqrt(26.0) + 0.5, rel=1e-14)

    def test_tabulated_matches_knots(self):
        r = np.linspace(0.0, 5.0, 40)
        vals = np.sqrt(r * r + 1.0)
        eps = EpsilonSpec.tabulated(r, vals)
        assert eps.radial(r) == pytest.approx(vals, abs=1e-14)
        # interpolation error for a smooth convex profile stays small
        mid = 0.5 * (r[:-1] + r[1:])
        assert np.max(np.abs(eps.radial(mid) - np.sqrt(mid * mid + 1.0))) < 1e-3

    def test_invalid_inputs(self):
        with pytest.raises(InputError):
            EpsilonSpec.tabulated([0.0, 1.0], [1.0])
        with pytest.raises(InputError):
            EpsilonSpec.tabulated([0.0, 0.0], [1.0, 1.0])


class TestCoupling:
    def test_h_norm_against_quadrature(self):
        c = CouplingSpec(amplitude=0.7, width=1.3)
        for d in (1, 2, 3):
            area = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}[d]
            ref, _ = scipy_quad(
                lambda r: r ** (d - 1) * c.envelope(r) ** 2, 0.0, 40.0
            )
            assert c.h_norm_sq(d) == pytest.approx(area * ref, rel=1e-10)

    def test_envelope_dominates(self):
        c = CouplingSpec(kind="p-modulated", amplitude=1.0, width=1.0, p_width=2.0)
        rng = np.random.default_rng(1)
        p = rng.normal(size=(50, 3))
        q = rng.normal(size=(50, 3))
        assert np.all(np.abs(c.evaluate(p, q)) <= c.envelope(np.linalg.norm(q, axis=-1)) + 1e-15)

    def test_invalid(self):
        with pytest.raises(InputError):
            CouplingSpec(kind="other")
        with pytest.raises(InputError):
            CouplingSpec(width=0.0)


class TestFreeEnergy:
    def test_zero_bosons(self):
        params = make_params()
        p = np.array([1.0, 2.0, 0.0])
        assert free_energy(params, 0, p) == pytest.approx(2.5, abs=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=6))
    def test_permutation_invariance(self, seed):
        params = make_params(eps=EpsilonSpec.relativistic(1.0, 0.5))
        rng = np.random.default_rng(seed)
        p = rng.normal(size=3)
        qs = rng.normal(size=(3, 3))
        base = free_energy(params, 3, p, qs)
        perm = rng.permutation(3)
        assert free_energy(params, 3, p, qs[perm]) == pytest.approx(base, rel=1e-14)

    def test_explicit_value(self):
        params = make_params()
        p = np.array([1.0, 0.0, 0.0])
        qs = np.array([[0.5, 0.0, 0.0], [0.0, 0.5, 0.0]])
        expect = 0.5 * (0.25 + 0.25) + 2.0
        assert free_energy(params, 2, p, qs) == pytest.approx(expect, abs=1e-15)


class TestThreshold:
    def test_constant_dispersion_closed_form(self):
        # collinear reduction: min over t of (|p| - n t)^2 / 2 + n eps0
        params = make_params()
        p = np.array([1.2, 0.0, 0.0])
        for n in (1, 2, 3):
            assert threshold(params, n, p) == pytest.approx(float(n), abs=1e-10)

    def test_zero_momentum(self):
        params = make_params(eps=EpsilonSpec.relativistic(1.0, 0.5))
        assert threshold(params, 2, np.zeros(3)) == pytest.approx(3.0, abs=1e-12)

    def test_against_dense_scan(self):
        # independent oracle: brute-force scan of the collinear reduction
        params = make_params(eps=EpsilonSpec.relativistic(1.0, 0.5))
        p = np.array([2.0, 1.0, 0.0])
        pmag = np.linalg.norm(p)
        for n in (1, 2, 3):
            t = np.linspace(0.0, pmag / n, 200001)
            vals = 0.5 * (pmag - n * t) ** 2 + n * params.eps.radial(t)
            assert threshold(params, n, p) == pytest.approx(
                float(vals.min()), abs=1e-9
            )

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=0.0, max_value=3.0))
    def test_gap_property(self, pmag):
        params = make_params(eps=EpsilonSpec.relativistic(1.0, 0.5), c0=0.5)
        p = np.array([pmag, 0.0, 0.0])
        lams = [threshold(params, n, p) for n in (1, 2, 3)]
        assert lams[1] - lams[0] >= params.c0 - 1e-8
        assert lams[2] - lams[1] >= params.c0 - 1e-8


class TestValidate:
    def test_good_model_passes(self):
        report = validate_model(make_params(eps=EpsilonSpec.relativistic(1.0, 0.5)))
        assert report.all_passed
        assert len(report.checks) >= 5

    def test_bad_gap_fails(self):
        # eps(0) = 1 gives subadditivity slack exactly 1; c0 = 1.5 must fail
        report = validate_model(make_params(c0=1.5))
        assert not report.all_passed

    def test_report_str_mentions_checks(self):
        text = str(validate_model(make_params()))
        assert "PASS" in text


class TestParams:
    def test_dimension_check(self):
        with pytest.raises(InputError):
            make_params(d=0)
        with pytest.raises(InputError):
            make_params(alpha=-0.1)

    def test_vector_check(self):
        params = make_params(d=3)
        with pytest.raises(InputError):
            threshold(params, 1, np.zeros(2))
