"""Frailty transform math: frozen high-precision values, finite-difference
derivative checks, limit continuity, and shape properties."""

import numpy as np
import pytest

from frailnet import frailty
from frailnet.errors import DomainError, SpecError
from frailnet.frailty import FrailtySpec

GAMMA1 = FrailtySpec("gamma", theta=1.0)
BOXCOX1 = FrailtySpec("boxcox", theta=1.0)

# interior theta values, safely above the limit switch and spread over the
# range the optimizer can reach
THETAS = [0.05, 0.3, 0.7, 1.5, 3.0, 7.0]
XGRID = np.array([0.0, 1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 12.0, 50.0])


def all_specs(theta):
    return [
        FrailtySpec("gamma", theta=theta),
        FrailtySpec("boxcox", theta=theta),
        FrailtySpec("igg", theta=theta, alpha=0.25),
        FrailtySpec("igg", theta=theta, alpha=0.75),
    ]


def test_gamma_unit_values():
    assert frailty.transform(GAMMA1, 1.0) == pytest.approx(np.log(2.0), abs=1e-15)
    assert frailty.transform_dx(GAMMA1, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert frailty.log_transform_dx(GAMMA1, 1.0) == pytest.approx(-np.log(2.0), abs=1e-15)


def test_boxcox_theta_one_is_identity():
    # theta = 1 collapses the transform to G(x) = x: plain proportional hazards
    assert frailty.transform(BOXCOX1, 2.5) == pytest.approx(2.5, abs=1e-15)
    x = np.linspace(0.0, 20.0, 41)
    np.testing.assert_allclose(frailty.transform(BOXCOX1, x), x, atol=1e-13)
    np.testing.assert_allclose(frailty.transform_dx(BOXCOX1, x), 1.0, atol=1e-14)


def test_igg_frozen_value():
    # mpmath (40 digits): (1-a)/(a*th) * ((1 + th*x/(1-a))**a - 1) at a=1/4, th=1/2, x=1
    spec = FrailtySpec("igg", theta=0.5, alpha=0.25)
    assert frailty.transform(spec, 1.0) == pytest.approx(0.81731619880499621103, abs=1e-14)
    assert frailty.transform_dx(spec, 1.0) == pytest.approx(0.6817316198804996211, abs=1e-14)


def test_dtheta_frozen_values():
    # mpmath derivatives in theta at fixed x
    assert frailty.transform_dtheta(GAMMA1, 1.0) == pytest.approx(
        -0.19314718055994530942, abs=1e-13
    )
    assert frailty.log_transform_dx_dtheta(GAMMA1, 1.0) == pytest.approx(-0.5, abs=1e-14)
    assert frailty.transform_dtheta(FrailtySpec("boxcox", theta=0.7), 2.0) == pytest.approx(
        1.0237553267931407042, abs=1e-13
    )
    assert frailty.transform_dtheta(
        FrailtySpec("igg", theta=0.5, alpha=0.25), 1.0
    ) == pytest.approx(-0.27116915784899317985, abs=1e-13)


@pytest.mark.parametrize("theta", THETAS)
def test_dx_derivatives_match_finite_differences(theta):
    x = XGRID[XGRID >= 1e-3]
    # step scaled per point: keeps both truncation and cancellation below tol
    h = 3e-6 * np.maximum(1.0, x)
    for spec in all_specs(theta):
        fd = (frailty.transform(spec, x + h) - frailty.transform(spec, x - h)) / (2 * h)
        np.testing.assert_allclose(frailty.transform_dx(spec, x), fd, rtol=5e-9, atol=1e-10)
        fd_log = (
            frailty.log_transform_dx(spec, x + h) - frailty.log_transform_dx(spec, x - h)
        ) / (2 * h)
        np.testing.assert_allclose(
            frailty.log_transform_dx_dx(spec, x), fd_log, rtol=5e-9, atol=1e-9
        )


@pytest.mark.parametrize("theta", THETAS)
def test_dtheta_derivatives_match_finite_differences(theta):
    h = 1e-6 * max(1.0, theta)
    for spec in all_specs(theta):
        up = FrailtySpec(spec.family, theta=theta + h, alpha=spec.alpha)
        dn = FrailtySpec(spec.family, theta=theta - h, alpha=spec.alpha)
        fd = (frailty.transform(up, XGRID) - frailty.transform(dn, XGRID)) / (2 * h)
        np.testing.assert_allclose(
            frailty.transform_dtheta(spec, XGRID), fd, rtol=1e-7, atol=1e-8
        )
        fd_log = (
            frailty.log_transform_dx(up, XGRID) - frailty.log_transform_dx(dn, XGRID)
        ) / (2 * h)
        np.testing.assert_allclose(
            frailty.log_transform_dx_dtheta(spec, XGRID), fd_log, rtol=1e-7, atol=1e-8
        )


def test_limit_branch_is_continuous():
    # crossing the switch from just above must move values by at most 1e-6
    x = np.linspace(0.0, 10.0, 101)
    for make in [
        lambda th: FrailtySpec("gamma", theta=th),
        lambda th: FrailtySpec("boxcox", theta=th),
        lambda th: FrailtySpec("igg", theta=th, alpha=0.25),
    ]:
        near, zero = make(1e-8), make(0.0)
        for op in [
            frailty.transform,
            frailty.transform_dx,
            frailty.log_transform_dx,
            frailty.transform_dtheta,
            frailty.log_transform_dx_dtheta,
            frailty.log_transform_dx_dx,
        ]:
            gap = np.max(np.abs(op(near, x) - op(zero, x)))
            assert gap <= 1e-6, (make(0.0).family, op.__name__, gap)


def test_theta_zero_limits():
    x = np.linspace(0.0, 10.0, 101)
    for fam, alpha in [("gamma", None), ("igg", 0.25)]:
        spec = FrailtySpec(fam, theta=0.0, alpha=alpha)
        np.testing.assert_allclose(frailty.transform(spec, x), x, atol=0)
        np.testing.assert_allclose(frailty.transform_dx(spec, x), 1.0, atol=0)
        np.testing.assert_allclose(frailty.transform_dtheta(spec, x), -0.5 * x * x, atol=0)
    bc = FrailtySpec("boxcox", theta=0.0)
    np.testing.assert_allclose(frailty.transform(bc, x), np.log1p(x), atol=0)
    np.testing.assert_allclose(frailty.transform_dx(bc, x), 1.0 / (1.0 + x), atol=0)


def test_igg_alpha_zero_collapses_to_gamma():
    # the alpha -> 0 limit of the igg formula is exactly the gamma transform
    x = np.linspace(0.0, 30.0, 61)
    for theta in [0.3, 1.0, 4.0]:
        igg = FrailtySpec("igg", theta=theta, alpha=0.0)
        gam = FrailtySpec("gamma", theta=theta)
        np.testing.assert_allclose(frailty.transform(igg, x), frailty.transform(gam, x), rtol=1e-14)
        np.testing.assert_allclose(
            frailty.transform_dx(igg, x), frailty.transform_dx(gam, x), rtol=1e-14
        )
        tiny = FrailtySpec("igg", theta=theta, alpha=1e-9)
        np.testing.assert_allclose(
            frailty.transform(tiny, x), frailty.transform(gam, x), rtol=1e-7, atol=1e-9
        )


@pytest.mark.parametrize("theta", [0.0, 0.2, 1.0, 5.0])
def test_shape_properties(theta):
    # G(0) = 0, G increasing, g positive, g(0) = 1 for every family.
    # gamma/igg are concave for all theta; boxcox only up to theta = 1
    # (beyond that the transform is convex but still a valid model).
    x = np.linspace(0.0, 40.0, 401)
    for spec in all_specs(theta):
        vals = frailty.transform(spec, x)
        assert vals[0] == 0.0
        assert np.all(np.diff(vals) > 0)
        g = frailty.transform_dx(spec, x)
        assert np.all(g > 0)
        assert frailty.transform_dx(spec, 0.0) == pytest.approx(1.0, abs=1e-14)
        concave = spec.family != "boxcox" or spec.theta <= 1.0
        if concave:
            assert np.all(np.diff(np.diff(vals)) <= 1e-12)
            assert np.all(np.diff(g) <= 1e-15)


def test_inverse_round_trip():
    y = np.array([0.0, 1e-4, 0.05, 0.4, 1.0, 3.0, 10.0, 35.0])
    for theta in [0.0, 0.05, 0.5, 1.0, 4.0]:
        for spec in all_specs(theta):
            x = frailty.inverse(spec, y)
            np.testing.assert_allclose(frailty.transform(spec, x), y, rtol=1e-10, atol=1e-12)


def test_inverse_matches_closed_forms():
    # independent closed-form inversions for the Newton-based families
    y = np.array([0.2, 1.0, 2.5, 8.0])
    th = 0.6
    bc = frailty.inverse(FrailtySpec("boxcox", theta=th), y)
    np.testing.assert_allclose(bc, (1.0 + th * y) ** (1.0 / th) - 1.0, rtol=1e-11)
    a, c = 0.25, 0.75
    ig = frailty.inverse(FrailtySpec("igg", theta=th, alpha=a), y)
    np.testing.assert_allclose(
        ig, (c / th) * ((1.0 + a * th * y / c) ** (1.0 / a) - 1.0), rtol=1e-11
    )
    gm = frailty.inverse(FrailtySpec("gamma", theta=th), y)
    np.testing.assert_allclose(gm, np.expm1(th * y) / th, rtol=1e-13)


def test_scalar_in_scalar_out():
    v = frailty.transform(GAMMA1, 2.0)
    assert isinstance(v, float)
    arr = frailty.transform(GAMMA1, np.array([2.0, 3.0]))
    assert arr.shape == (2,)


def test_spec_validation():
    with pytest.raises(SpecError):
        FrailtySpec("weibull", theta=1.0)
    with pytest.raises(SpecError):
        FrailtySpec("gamma", theta=-0.1)
    with pytest.raises(SpecError):
        FrailtySpec("igg", theta=1.0)  # alpha missing
    with pytest.raises(SpecError):
        FrailtySpec("igg", theta=1.0, alpha=1.0)
    with pytest.raises(SpecError):
        FrailtySpec("gamma", theta=1.0, alpha=0.5)
    with pytest.raises(DomainError):
        frailty.transform(GAMMA1, -1.0)
