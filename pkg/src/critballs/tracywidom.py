"""Tracy-Widom distribution functions F_1, F_2, F_4 from Painleve II.

The Hastings-McLeod solution of ``q'' = s q + 2 q^3`` is integrated backward
from ``s_start`` with Airy data.  Three running tail integrals are carried
alongside ``(q, q')`` so that

    log F_2(x) = -(int_x^inf s q^2 ds - x int_x^inf q^2 ds)
    F_1(x)     = exp(-1/2 int_x^inf q) F_2(x)^{1/2}
    F_4(x)     = cosh(1/2 int_x^inf q) F_2(x)^{1/2}

can be read off the dense ODE output at any ``x`` in the solved range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import BlowUpError, ConvergenceError, DomainError, MonotonicityError
from .specfun import OdeStepperConfig, QuadratureRule, airy_ai, integrate, ode_integrate

__all__ = [
    "PainleveSolution",
    "TWTable",
    "solve_painleve_ii",
    "default_solution",
    "tw_cdf",
    "tw_cdf_table",
]

_BLOWUP = 1e3
_GRID_STEP = 0.01
_LEFT_TOL = 1e-3


@dataclass(frozen=True)
class PainleveSolution:
    """Hastings-McLeod solution sampled on a descending grid.

    ``dense`` evaluates the full state ``(q, q', int q, int q^2, int s q^2)``
    anywhere in ``[s_end, s_start]``.
    """

    grid: np.ndarray
    q: np.ndarray
    qprime: np.ndarray
    dense: object = field(repr=False, compare=False)

    @property
    def s_start(self) -> float:
        return float(self.grid[0])

    @property
    def s_end(self) -> float:
        return float(self.grid[-1])

    def state(self, s):
        if np.any(np.asarray(s) < self.s_end) or np.any(np.asarray(s) > self.s_start):
            raise DomainError(
                f"s outside the solved range [{self.s_end}, {self.s_start}]"
            )
        return self.dense(s)


def _airy_tails(s0: float) -> tuple[float, float, float]:
    """Tails beyond s0 of int q, int q^2 and int s q^2 with q replaced by Ai.

    At s0 >= 6 the cubic term changes these by less than Ai(s0)^3 relative,
    i.e. below 1e-12.  The squared tails have closed forms; int Ai is done
    by quadrature to 15, beyond which Ai < 1e-17.
    """
    ai, aip = airy_ai(s0)
    sq = aip * aip - s0 * ai * ai
    s_sq = (s0 * aip * aip - s0 * s0 * ai * ai - ai * aip) / 3.0
    lin = integrate(lambda s: airy_ai(s)[0], s0, 15.0, QuadratureRule(96))
    return lin, sq, s_sq


def _rhs(s, y):
    q, qp = y[0], y[1]
    q2 = q * q
    return [qp, s * q + 2.0 * q2 * q, -q, -q2, -s * q2]


def solve_painleve_ii(
    s_start: float = 8.0,
    s_end: float = -10.0,
    config: OdeStepperConfig = OdeStepperConfig(),
) -> PainleveSolution:
    """Integrate the Hastings-McLeod solution from ``s_start`` down to ``s_end``."""
    if not (s_start >= 6.0 and s_end <= -2.0 and s_start > s_end):
        raise DomainError(
            f"need s_start >= 6 > -2 >= s_end, got s_start={s_start}, s_end={s_end}"
        )
    ai, aip = airy_ai(s_start)
    y0 = [ai, aip, *_airy_tails(s_start)]

    def escape(s, y):
        return _BLOWUP - abs(y[0])

    escape.terminal = True
    sol = ode_integrate(_rhs, (s_start, s_end), y0, config, events=escape)
    if sol.status == 1:
        s_hit = float(sol.t_events[0][0])
        raise BlowUpError(s_hit, float(sol.y_events[0][0][0]))

    n_grid = int(round((s_start - s_end) / _GRID_STEP)) + 1
    grid = np.linspace(s_start, s_end, n_grid)
    state = sol.sol(grid)
    q, qp = state[0], state[1]
    if np.any(q <= 0.0):
        bad = grid[np.argmax(q <= 0.0)]
        raise BlowUpError(bad, 0.0)
    _check_left_asymptotics(s_end, q[-1])
    return PainleveSolution(grid, q, qp, sol.sol)


def _check_left_asymptotics(s: float, q: float) -> None:
    """A loose tolerance can drift off the Hastings-McLeod branch without
    blowing up; compare with ``q ~ sqrt(-s/2)(1 + 1/(8 s^3))`` at the left end."""
    if s > -6.0:
        return
    expected = math.sqrt(-0.5 * s) * (1.0 + 1.0 / (8.0 * s**3) - 73.0 / (128.0 * s**6))
    if abs(q / expected - 1.0) > _LEFT_TOL:
        raise ConvergenceError(
            f"q({s:g}) = {q:.6g} misses the left asymptote {expected:.6g}; "
            "tighten the stepper tolerance"
        )


@lru_cache(maxsize=4)
def default_solution() -> PainleveSolution:
    return solve_painleve_ii()


def _log_f2_and_tail(x, solution: PainleveSolution):
    st = solution.state(x)
    return -(st[4] - x * st[3]), st[2]


def tw_cdf(beta: int, x, solution: PainleveSolution | None = None):
    """Tracy-Widom distribution function ``F_beta(x)`` for beta in {1, 2, 4}."""
    if beta not in (1, 2, 4):
        raise DomainError(f"beta must be 1, 2 or 4, got {beta!r}")
    solution = solution or default_solution()
    xa = np.asarray(x, dtype=float)
    log_f2, lin = _log_f2_and_tail(xa, solution)
    if beta == 2:
        log_f = log_f2
    elif beta == 1:
        log_f = 0.5 * log_f2 - 0.5 * lin
    else:
        # 1 - F_4 is a near-cancellation of two terms in the right tail
        log_f = 0.5 * log_f2 + _log_cosh(0.5 * lin)
    out = np.exp(log_f)
    return float(out) if out.ndim == 0 else out


def _log_cosh(y):
    y = np.abs(y)
    small = y < 1e-3
    ys = np.where(small, y, 0.0)
    series = ys * ys * (0.5 - ys * ys / 12.0)
    return np.where(small, series, y + np.log1p(np.exp(-2.0 * y)) - math.log(2.0))


@dataclass(frozen=True)
class TWTable:
    """Tabulated ``F_beta`` with monotone cubic interpolation between nodes."""

    beta: int
    grid: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_interp", PchipInterpolator(self.grid, self.F, extrapolate=False))

    def cdf(self, x):
        """Interpolated CDF; 0 left of the table and 1 right of it."""
        xa = np.asarray(x, dtype=float)
        out = np.asarray(self._interp(np.clip(xa, self.grid[0], self.grid[-1])))
        out = np.where(xa < self.grid[0], 0.0, np.where(xa > self.grid[-1], 1.0, out))
        return float(out) if out.ndim == 0 else out


def tw_cdf_table(
    beta: int,
    x_min: float = -10.0,
    x_max: float = 8.0,
    step: float = 0.01,
    solution: PainleveSolution | None = None,
) -> TWTable:
    """Tabulate ``F_beta`` on ``x_min, x_min + step, ..., x_max``.

    Raises :class:`MonotonicityError` instead of clamping if any difference
    between consecutive nodes is negative.
    """
    if not step > 0.0 or not x_max > x_min:
        raise DomainError("need step > 0 and x_max > x_min")
    solution = solution or default_solution()
    count = int(math.floor((x_max - x_min) / step + 1e-9)) + 1
    grid = np.minimum(x_min + step * np.arange(count), x_max)
    F = np.asarray(tw_cdf(beta, grid, solution))
    drops = np.flatnonzero(np.diff(F) < 0.0)
    if drops.size:
        i = drops[0]
        raise MonotonicityError(
            f"F_{beta} decreases between x={grid[i]:.6g} and x={grid[i + 1]:.6g}"
        )
    return TWTable(beta, grid, F)
