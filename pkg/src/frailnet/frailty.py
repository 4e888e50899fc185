"""Frailty transforms and their derivatives.

A multiplicative frailty model puts an unobserved positive multiplier
omega on the conditional hazard.  Marginalizing omega out turns the
aggregated conditional hazard x = integral of exp(nu) into a marginal
cumulative hazard G(x) = -log E[exp(-omega * x)], the Laplace exponent
of the frailty distribution.  Everything the likelihood and its
gradient need is G and a handful of partial derivatives, all of which
have closed forms for the three families supported here:

    gamma:   G(x) = log(1 + theta*x) / theta
    boxcox:  G(x) = ((1 + x)**theta - 1) / theta
    igg:     G(x) = (1-alpha)/(alpha*theta) * ((1 + theta*x/(1-alpha))**alpha - 1)

theta >= 0 indexes each family; igg carries a second fixed shape
parameter alpha in [0, 1).  theta -> 0 is degenerate (no frailty for
gamma/igg), and every formula above is 0/0 there, so below a small
switch value we evaluate the analytic limit instead of the formula.

All functions are vectorized over x and preserve scalar-in/scalar-out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SpecError

FAMILIES = ("gamma", "boxcox", "igg")

# Below this theta the closed forms lose too many digits to cancellation
# and we switch to the analytic theta -> 0 limit.
THETA_SWITCH = 1e-7


@dataclass(frozen=True)
class FrailtySpec:
    """Choice of frailty family plus its parameters.

    theta is the free parameter the likelihood is optimized over; alpha
    (igg only) is fixed at configuration time.
    """

    family: str
    theta: float = 1.0
    alpha: float | None = None

    def __post_init__(self):
        validate_spec(self)


def validate_spec(spec: FrailtySpec) -> None:
    """Raise SpecError unless the spec is usable."""
    if spec.family not in FAMILIES:
        raise SpecError(f"unknown frailty family {spec.family!r}; expected one of {FAMILIES}")
    if not np.isfinite(spec.theta) or spec.theta < 0:
        raise SpecError(f"theta must be finite and >= 0, got {spec.theta}")
    if spec.family == "igg":
        if spec.alpha is None:
            raise SpecError("igg frailty requires alpha")
        if not (0.0 <= spec.alpha < 1.0):
            raise SpecError(f"igg alpha must lie in [0, 1), got {spec.alpha}")
    elif spec.alpha is not None:
        raise SpecError(f"alpha is only meaningful for igg, not {spec.family}")


def _as_nonneg_array(x):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("frailty transforms are defined for x >= 0")
    return arr


def _ret(arr, scalar_in):
    return float(arr) if scalar_in else arr


# For igg we write c = 1 - alpha throughout.  Note (alpha - 1)/c = -1,
# which is why the igg theta -> 0 limits below do not depend on alpha.


def transform(spec: FrailtySpec, x):
    """Marginal cumulative hazard G(x) for aggregated conditional hazard x."""
    arr = _as_nonneg_array(x)
    scalar = arr.ndim == 0
    th = spec.theta
    if spec.family == "gamma":
        out = arr.copy() if th < THETA_SWITCH else np.log1p(th * arr) / th
    elif spec.family == "boxcox":
        out = np.log1p(arr) if th < THETA_SWITCH else np.expm1(th * np.log1p(arr)) / th
    else:  # igg
        if th < THETA_SWITCH:
            out = arr.copy()
        else:
            a = spec.alpha
            c = 1.0 - a
            lp = np.log1p(th * arr / c)
            # expm1(a*lp)/a stays stable as a -> 0; at a == 0 the limit is lp.
            out = (c / th) * (np.expm1(a * lp) / a if a > 0 else lp)
    return _ret(out, scalar)


def transform_dx(spec: FrailtySpec, x):
    """g(x) = dG/dx, the marginal hazard multiplier."""
    arr = _as_nonneg_array(x)
    scalar = arr.ndim == 0
    th = spec.theta
    if spec.family == "gamma":
        out = np.ones_like(arr) if th < THETA_SWITCH else 1.0 / (1.0 + th * arr)
    elif spec.family == "boxcox":
        if th < THETA_SWITCH:
            out = 1.0 / (1.0 + arr)
        else:
            out = np.exp((th - 1.0) * np.log1p(arr))
    else:  # igg
        if th < THETA_SWITCH:
            out = np.ones_like(arr)
        else:
            c = 1.0 - spec.alpha
            out = np.exp((spec.alpha - 1.0) * np.log1p(th * arr / c))
    return _ret(out, scalar)


def log_transform_dx(spec: FrailtySpec, x):
    """log g(x), used directly in the event term of the likelihood."""
    arr = _as_nonneg_array(x)
    scalar = arr.ndim == 0
    th = spec.theta
    if spec.family == "gamma":
        out = np.zeros_like(arr) if th < THETA_SWITCH else -np.log1p(th * arr)
    elif spec.family == "boxcox":
        factor = -1.0 if th < THETA_SWITCH else th - 1.0
        out = factor * np.log1p(arr)
    else:  # igg
        if th < THETA_SWITCH:
            out = np.zeros_like(arr)
        else:
            c = 1.0 - spec.alpha
            out = (spec.alpha - 1.0) * np.log1p(th * arr / c)
    return _ret(out, scalar)


def transform_dtheta(spec: FrailtySpec, x):
    """dG/dtheta at fixed x.

    For gamma and igg this is (x*g(x) - G(x)) / theta; the cancellation
    in the numerator is O(theta*x^2), so dividing by theta stays accurate
    well above THETA_SWITCH.  Below the switch the limit is -x^2/2 for
    gamma/igg and log(1+x)^2/2 for boxcox.
    """
    arr = _as_nonneg_array(x)
    scalar = arr.ndim == 0
    th = spec.theta
    if spec.family == "boxcox":
        lp = np.log1p(arr)
        if th < THETA_SWITCH:
            out = 0.5 * lp * lp
        else:
            g_ = np.exp(th * lp)  # (1+x)**theta
            big_g = np.expm1(th * lp) / th
            out = (lp * g_ - big_g) / th
    else:
        if th < THETA_SWITCH:
            out = -0.5 * arr * arr
        else:
            out = (arr * transform_dx(spec, arr) - transform(spec, arr)) / th
    return _ret(out, scalar)


def log_transform_dx_dtheta(spec: FrailtySpec, x):
    """d(log g)/dtheta at fixed x."""
    arr = _as_nonneg_array(x)
    scalar = arr.ndim == 0
    th = spec.theta
    if spec.family == "gamma":
        out = -arr if th < THETA_SWITCH else -arr / (1.0 + th * arr)
    elif spec.family == "boxcox":
        out = np.log1p(arr)
    else:  # igg
        if th < THETA_SWITCH:
            out = -arr
        else:
            c = 1.0 - spec.alpha
            out = (spec.alpha - 1.0) * arr / (c + th * arr)
    return _ret(out, scalar)


def log_transform_dx_dx(spec: FrailtySpec, x):
    """d(log g)/dx, the curvature term feeding the gradient's event part."""
    arr = _as_nonneg_array(x)
    scalar = arr.ndim == 0
    th = spec.theta
    if spec.family == "gamma":
        out = np.zeros_like(arr) if th < THETA_SWITCH else -th / (1.0 + th * arr)
    elif spec.family == "boxcox":
        factor = -1.0 if th < THETA_SWITCH else th - 1.0
        out = factor / (1.0 + arr)
    else:  # igg
        if th < THETA_SWITCH:
            out = np.zeros_like(arr)
        else:
            c = 1.0 - spec.alpha
            out = (spec.alpha - 1.0) * th / (c + th * arr)
    return _ret(out, scalar)


# Exponents beyond this overflow float64; the capped result is still
# astronomically large and only affects probability-|log U| tails that a
# float64 uniform draw cannot reach in practice.
_EXP_CAP = 700.0


def inverse(spec: FrailtySpec, y):
    """Solve G(x) = y for x >= 0.

    gamma inverts in closed form.  boxcox and igg use guarded Newton:
    G is increasing and concave with G(y) <= y, so iterating from x = y
    climbs monotonically to the root.  Converges to relative tol 1e-12.
    """
    arr = np.asarray(y, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("inverse transform is defined for y >= 0")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    th = spec.theta

    if th < THETA_SWITCH:
        if spec.family == "boxcox":
            out = np.expm1(np.minimum(arr, _EXP_CAP))
        else:
            out = arr.copy()
        return float(out[0]) if scalar else out

    if spec.family == "gamma":
        out = np.expm1(np.minimum(th * arr, _EXP_CAP)) / th
        return float(out[0]) if scalar else out

    x = arr.copy()
    for _ in range(200):
        resid = transform(spec, x) - arr
        step = resid / transform_dx(spec, x)
        x = np.maximum(x - step, 0.0)
        if np.all(np.abs(step) <= 1e-12 * np.maximum(1.0, x)):
            break
    else:
        raise DomainError("frailty inverse did not converge")
    return float(x[0]) if scalar else x
