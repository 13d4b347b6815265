"""Special functions and one-dimensional numerical kernels.

Everything downstream works with log-volumes, so :func:`log_gamma` is the
workhorse here.  The Airy function only seeds the Painleve II integration in
:mod:`critballs.tracywidom`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import zetac

from .errors import ConvergenceError, DomainError, IntegrandNaNError

__all__ = [
    "QuadratureRule",
    "OdeStepperConfig",
    "log_gamma",
    "airy_ai",
    "integrate",
    "ode_integrate",
]

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# B_{2k} / (2k (2k-1)), k = 1..8
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)
_STIRLING_MIN = 10.0

_EULER_GAMMA = 0.57721566490153286061
# (-1)^k (zeta(k) - 1) / k for the expansion of log Gamma(1 + z), |z| <= 1/2
_ZETA_SERIES = np.array([(-1.0) ** k * zetac(k) / k for k in range(2, 34)])


def _log_gamma_near_one(z):
    """log Gamma(1 + z) for |z| <= 1/2; exactly 0 at z = 0."""
    acc = np.zeros_like(z)
    for c in _ZETA_SERIES[::-1]:
        acc = (acc + c) * z
    return acc * z - np.log1p(z) + z * (1.0 - _EULER_GAMMA)


def log_gamma(x):
    """Natural logarithm of the Gamma function for positive arguments.

    Uses the Stirling series with eight Bernoulli terms for ``x >= 10`` and
    shifts smaller arguments upward with ``Gamma(x+1) = x Gamma(x)``.  On
    ``[0.5, 2.5)`` a zeta-function expansion about 1 is used instead, which
    keeps ``log_gamma(1)`` and ``log_gamma(2)`` exactly zero.

    Parameters
    ----------
    x : float or array_like
        Strictly positive, finite argument(s).

    Returns
    -------
    float or ndarray
        ``ln Gamma(x)``; a Python float for scalar input.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"log_gamma requires finite x > 0, got {x!r}")
    near = (arr >= 0.5) & (arr < 2.5)
    steps = np.where(arr < _STIRLING_MIN, np.ceil(_STIRLING_MIN - arr), 0.0)
    y = arr + steps
    prod = np.ones_like(arr)
    for k in range(int(steps.max(initial=0.0))):
        prod = np.where(k < steps, prod * (arr + k), prod)

    inv = 1.0 / y
    inv2 = inv * inv
    series = np.zeros_like(y)
    for c in reversed(_STIRLING):
        series = series * inv2 + c
    out = (y - 0.5) * np.log(y) - y + _HALF_LOG_2PI + series * inv - np.log(prod)
    if near.any():
        xs = arr[near]
        upper = xs >= 1.5
        z = np.where(upper, xs - 2.0, xs - 1.0)
        out[near] = _log_gamma_near_one(z) + np.where(upper, np.log1p(z), 0.0)
    if scalar:
        return float(out[0])
    return out


# Ai(0) and Ai'(0)
_AI0 = 1.0 / (3.0 ** (2.0 / 3.0) * math.gamma(2.0 / 3.0))
_AIP0 = -1.0 / (3.0 ** (1.0 / 3.0) * math.gamma(1.0 / 3.0))
_AIRY_RANGE = 15.0
_AIRY_ASYMPTOTIC_FROM = 6.0
_AIRY_SERIES_DOWN_TO = -4.0
_AIRY_STEP = 0.5


def _airy_taylor(x0, y0, yp0, h):
    """Advance a solution of y'' = x y from x0 to x0 + h by its Taylor series."""
    # a[k] = y^(k)(x0) h^k / k!, recurrence from y'' = x0 y + (x - x0) y
    a_prev2, a_prev1 = y0, yp0 * h
    a_cur = 0.5 * x0 * y0 * h * h
    val = a_prev2 + a_prev1 + a_cur
    der = a_prev1 + 2.0 * a_cur
    k = 2
    small = 0
    while k < 400:
        a_next = (x0 * h * h * a_prev1 + h * h * h * a_prev2) / ((k + 1) * k)
        a_prev2, a_prev1, a_cur = a_prev1, a_cur, a_next
        k += 1
        val += a_cur
        der += k * a_cur
        scale = abs(val) + abs(der) + 1e-300
        small = small + 1 if abs(a_cur) * (k + 1) < 1e-18 * scale else 0
        if small >= 3:
            break
    else:
        raise ConvergenceError(f"Airy Taylor series did not converge at x0={x0}")
    return val, der / h if h != 0.0 else yp0


def _airy_asymptotic(x):
    zeta = 2.0 / 3.0 * x**1.5
    u_sum, v_sum = 1.0, 1.0
    u = 1.0
    prev = math.inf
    for k in range(1, 60):
        u *= (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
        v = -(6 * k + 1) / (6 * k - 1) * u
        term = u / zeta**k
        if term >= prev or term < 1e-17:
            break
        prev = term
        sign = -1.0 if k % 2 else 1.0
        u_sum += sign * term
        v_sum += sign * v / zeta**k
    pref = math.exp(-zeta) / (2.0 * math.sqrt(math.pi))
    return pref * u_sum / x**0.25, -pref * x**0.25 * v_sum


def airy_ai(x: float) -> tuple[float, float]:
    """Return ``(Ai(x), Ai'(x))`` for ``x`` in [-15, 15]."""
    x = float(x)
    if not math.isfinite(x) or abs(x) > _AIRY_RANGE:
        raise DomainError(f"airy_ai supports x in [-15, 15], got {x!r}")
    if x > _AIRY_ASYMPTOTIC_FROM:
        return _airy_asymptotic(x)
    if x >= _AIRY_SERIES_DOWN_TO:
        if x == 0.0:
            return _AI0, _AIP0
        return _airy_taylor(0.0, _AI0, _AIP0, x)
    # oscillatory side: the Maclaurin series cancels badly, so re-centre
    x0 = _AIRY_SERIES_DOWN_TO
    y, yp = _airy_taylor(0.0, _AI0, _AIP0, x0)
    while x0 - x > 1e-15:
        h = max(x - x0, -_AIRY_STEP)
        y, yp = _airy_taylor(x0, y, yp, h)
        x0 += h
    return y, yp


@dataclass(frozen=True)
class QuadratureRule:
    """A fixed-node quadrature rule on an interval."""

    nodes: int = 64
    scheme: Literal["gauss-legendre", "composite-simpson"] = "gauss-legendre"

    def __post_init__(self):
        if self.nodes < 3:
            raise DomainError("a quadrature rule needs at least 3 nodes")
        if self.scheme not in ("gauss-legendre", "composite-simpson"):
            raise DomainError(f"unknown quadrature scheme {self.scheme!r}")
        if self.scheme == "composite-simpson" and self.nodes % 2 == 0:
            raise DomainError("composite Simpson needs an odd node count")

    def points_weights(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        half = 0.5 * (b - a)
        if self.scheme == "gauss-legendre":
            x, w = np.polynomial.legendre.leggauss(self.nodes)
            return a + half * (x + 1.0), half * w
        x = np.linspace(a, b, self.nodes)
        h = (b - a) / (self.nodes - 1)
        w = np.full(self.nodes, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        return x, w * h / 3.0


def integrate(
    f: Callable, a: float, b: float, rule: QuadratureRule = QuadratureRule()
) -> float:
    """Integrate ``f`` over ``[a, b]`` with a fixed rule.

    ``f`` may be vectorised; a scalar-only callable is evaluated node by node.
    """
    if not a <= b:
        raise DomainError(f"integrate needs a <= b, got [{a}, {b}]")
    if a == b:
        return 0.0
    x, w = rule.points_weights(a, b)
    try:
        fx = np.asarray(f(x), dtype=float)
    except (TypeError, ValueError):
        fx = None
    if fx is None or fx.shape != x.shape:
        fx = np.array([f(xi) for xi in x], dtype=float)
    bad = np.flatnonzero(np.isnan(fx))
    if bad.size:
        raise IntegrandNaNError(x[bad[0]])
    return float(np.dot(w, fx))


@dataclass(frozen=True)
class OdeStepperConfig:
    """Controls for the adaptive Runge-Kutta stepper.

    ``max_step`` caps the step length; halving it is the refinement knob used
    by the stability checks.
    """

    initial_step: float = 1e-3
    rtol: float = 2.5e-14
    atol: float = 1e-30
    max_step: float = 0.05

    def __post_init__(self):
        for name in ("rtol", "atol"):
            tol = getattr(self, name)
            if not 0.0 < tol <= 1e-2:
                raise DomainError(f"{name} must lie in (0, 1e-2], got {tol}")
        if self.initial_step <= 0.0 or self.max_step <= 0.0:
            raise DomainError("step sizes must be positive")


def ode_integrate(rhs, span, y0, config: OdeStepperConfig = OdeStepperConfig(), events=None):
    """Integrate ``y' = rhs(s, y)`` over ``span`` with an 8th-order Dormand-Prince pair.

    Returns the ``scipy`` solution object with dense output attached.
    """
    sol = solve_ivp(
        rhs,
        span,
        np.asarray(y0, dtype=float),
        method="DOP853",
        rtol=config.rtol,
        atol=config.atol,
        first_step=config.initial_step,
        max_step=config.max_step,
        dense_output=True,
        events=events,
    )
    if sol.status < 0:
        raise ConvergenceError(f"ODE integration failed: {sol.message}")
    return sol
