"""Volumes, volume radii and threshold constants of l_p and Schatten balls.

All volume arithmetic stays in natural-log space: ``Gamma(1 + d/2)``
overflows a double once the matrix size reaches about 20.  An infinite
exponent is carried as ``math.inf`` and every formula branches on
:func:`is_inf` before any ``1/p`` is formed, so the ``1/inf = 0`` convention
never depends on float division.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Union

import numpy as np

from .errors import DomainError
from .specfun import log_gamma

__all__ = [
    "LpBallSpec",
    "SchattenBallSpec",
    "BallSpec",
    "LogVolume",
    "parse_exponent",
    "is_inf",
    "inv",
    "schatten_dimension",
    "log_volume_lp",
    "e_n_lp",
    "volume_radius_lp_asymptotic",
    "log_volume_schatten2",
    "log_c_n_beta",
    "log_volume_schatten_inf",
    "log_volume",
    "delta",
    "volume_radius_schatten_asymptotic",
    "log_volume_expansion_residual",
    "ratio_schatten_radii",
    "threshold_lp_inf",
    "threshold_schatten",
    "threshold_schatten_provenance",
    "GumbelConstants",
    "gumbel_constants",
    "critical_offset_R",
]

BETAS = (1, 2, 4)
LOG2 = math.log(2.0)


def parse_exponent(p) -> float:
    """Normalise an exponent given as a number or the strings ``inf``/``infinity``."""
    if isinstance(p, str):
        key = p.strip().lower()
        if key in ("inf", "infinity", "∞"):
            return math.inf
        p = float(key)
    p = float(p)
    if math.isnan(p) or p < 1.0:
        raise DomainError(f"exponent must lie in [1, inf], got {p!r}")
    return p


def is_inf(p: float) -> bool:
    return math.isinf(p)


def inv(p: float) -> float:
    """``1/p`` with ``1/inf`` defined as exactly 0."""
    return 0.0 if is_inf(p) else 1.0 / p


def _check_beta(beta) -> int:
    if beta not in BETAS:
        raise DomainError(f"beta must be one of {BETAS}, got {beta!r}")
    return int(beta)


def _check_n(n, minimum=1) -> int:
    if int(n) != n or n < minimum:
        raise DomainError(f"n must be an integer >= {minimum}, got {n!r}")
    return int(n)


@dataclass(frozen=True)
class LpBallSpec:
    """The unit ball of the l_p norm in R^n."""

    p: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "p", parse_exponent(self.p))
        _check_n(self.n)

    @property
    def dimension(self) -> int:
        return self.n

    @property
    def family(self) -> str:
        return "lp"


@dataclass(frozen=True)
class SchattenBallSpec:
    """The unit ball of the Schatten p-norm on self-adjoint n x n matrices over F_beta."""

    p: float
    beta: int
    n: int

    def __post_init__(self):
        object.__setattr__(self, "p", parse_exponent(self.p))
        _check_beta(self.beta)
        _check_n(self.n)

    @property
    def dimension(self) -> int:
        return schatten_dimension(self.beta, self.n)

    @property
    def family(self) -> str:
        return "schatten"


BallSpec = Union[LpBallSpec, SchattenBallSpec]

Tag = Literal["lp-exact", "schatten-2-exact", "schatten-inf-exact", "asymptotic"]


@dataclass(frozen=True)
class LogVolume:
    value: float
    tag: Tag

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError(f"log-volume must be finite, got {self.value}")

    @property
    def exact(self) -> bool:
        return self.tag != "asymptotic"


def schatten_dimension(beta: int, n: int) -> int:
    """Real dimension ``beta n (n-1)/2 + n`` of the self-adjoint n x n matrices."""
    beta = _check_beta(beta)
    n = _check_n(n)
    return beta * n * (n - 1) // 2 + n


def log_volume_lp(p, n: int) -> LogVolume:
    """Log-volume of the l_p^n unit ball, ``2^n Gamma(1+1/p)^n / Gamma(1+n/p)``."""
    p = parse_exponent(p)
    n = _check_n(n)
    if is_inf(p):
        return LogVolume(n * LOG2, "lp-exact")
    value = n * (LOG2 + log_gamma(1.0 + 1.0 / p)) - log_gamma(1.0 + n / p)
    return LogVolume(value, "lp-exact")


def _log_c_p(p: float) -> float:
    # c_p = 2 e^{1/p} p^{1/p} Gamma(1 + 1/p), the limit of n^{1/p} vol^{1/n}
    return LOG2 + 1.0 / p + math.log(p) / p + log_gamma(1.0 + 1.0 / p)


def e_n_lp(p, n: int) -> float:
    """Relative deviation of ``n^{1/p} vol(B_p^n)^{1/n}`` from its limit ``c_p``."""
    p = parse_exponent(p)
    if is_inf(p):
        raise DomainError("e_n is identically zero for p = inf; use the inf branch")
    n = _check_n(n, 2)
    lv = log_volume_lp(p, n).value
    return math.expm1(math.log(n) / p + lv / n - _log_c_p(p))


def volume_radius_lp_asymptotic(p, n: int) -> float:
    """Leading-order ``vol(B_p^n)^{1/n}``, namely ``c_p n^{-1/p}``; exactly 2 for p = inf."""
    p = parse_exponent(p)
    n = _check_n(n)
    if is_inf(p):
        return 2.0
    return math.exp(_log_c_p(p) - math.log(n) / p)


def log_volume_schatten2(beta: int, n: int) -> LogVolume:
    """Schatten-2 ball is the Euclidean ball of dimension d_n."""
    d = schatten_dimension(beta, n)
    return LogVolume(0.5 * d * math.log(math.pi) - log_gamma(1.0 + 0.5 * d), "schatten-2-exact")


def log_c_n_beta(beta: int, n: int) -> float:
    """Log of the constant relating eigenvalue integrals to matrix volumes."""
    beta = _check_beta(beta)
    n = _check_n(n)
    half = 0.5 * beta
    k = np.arange(1, n + 1, dtype=float)
    # the 2^{1-beta/2} and pi^{beta/2} factors cancel against the sphere term
    terms = half * (k - 1.0) * math.log(2.0 * math.pi) + log_gamma(half) - log_gamma(half * k)
    return float(math.fsum(terms) - log_gamma(n + 1.0))


def log_volume_schatten_inf(beta: int, n: int) -> LogVolume:
    """Log-volume of the operator-norm ball via the Selberg integral."""
    beta = _check_beta(beta)
    n = _check_n(n)
    half = 0.5 * beta
    d = schatten_dimension(beta, n)
    j = np.arange(n, dtype=float)
    terms = (
        2.0 * log_gamma(1.0 + j * half)
        + log_gamma((j + 1.0) * half)
        - log_gamma(2.0 + (n + j - 1.0) * half)
        - log_gamma(half)
    )
    value = log_c_n_beta(beta, n) + d * LOG2 + log_gamma(n + 1.0) + math.fsum(terms)
    return LogVolume(value, "schatten-inf-exact")


def log_volume(spec: BallSpec) -> LogVolume:
    """Exact log-volume for any supported ball."""
    if isinstance(spec, LpBallSpec):
        return log_volume_lp(spec.p, spec.n)
    if spec.p == 2.0:
        return log_volume_schatten2(spec.beta, spec.n)
    if is_inf(spec.p):
        return log_volume_schatten_inf(spec.beta, spec.n)
    raise DomainError(f"Schatten volume is only available for p in {{2, inf}}, got p={spec.p}")


def delta(p) -> float:
    """The p-dependent factor in the asymptotic Schatten volume radius."""
    p = parse_exponent(p)
    if is_inf(p):
        return 0.5
    log_inner = (
        math.log(p)
        + 0.5 * math.log(math.pi)
        + log_gamma(0.5 * p)
        - 0.5
        - log_gamma(0.5 * (p + 1.0))
    )
    return 0.5 * math.exp(log_inner / p)


def volume_radius_schatten_asymptotic(p, beta: int, n: int) -> float:
    """Leading-order approximation of ``vol(B_{p,beta}^n)^{1/d_n}``."""
    p = parse_exponent(p)
    _check_beta(beta)
    n = _check_n(n)
    return (
        n ** (-(inv(p) + 0.5))
        * delta(p)
        * math.sqrt(4.0 * math.pi / beta)
        * math.exp(0.75)
    )


def log_volume_expansion_residual(p, beta: int, n: int) -> float:
    """``log(vol)/d_n`` minus its expansion up to the ``O(log n / n)`` remainder."""
    p = parse_exponent(p)
    n = _check_n(n, 2)
    d = schatten_dimension(beta, n)
    common = 0.5 * math.log(4.0 * math.pi / beta)
    if p == 2.0:
        lead = -math.log(n) + common + 0.5
        lv = log_volume_schatten2(beta, n).value
    elif is_inf(p):
        lead = -0.5 * math.log(n) + common + 0.75 - LOG2
        lv = log_volume_schatten_inf(beta, n).value
    else:
        raise DomainError("the log-volume expansion is only known for p in {2, inf}")
    return lv / d - lead


def ratio_schatten_radii(beta: int, n: int) -> tuple[float, float]:
    """Return ``(T_n, e_n)`` for the Schatten-2 / Schatten-inf radius ratio.

    ``T_n = n^{1/2} vol(B_2)^{1/d} / vol(B_inf)^{1/d}`` and ``e_n`` is its
    relative deviation from ``delta(2)/delta(inf) = 2 e^{-1/4}``.
    """
    n = _check_n(n, 2)
    d = schatten_dimension(beta, n)
    diff = log_volume_schatten2(beta, n).value - log_volume_schatten_inf(beta, n).value
    log_t = 0.5 * math.log(n) + diff / d
    log_limit = math.log(delta(2.0)) - math.log(delta(math.inf))
    return math.exp(log_t), math.expm1(log_t - log_limit)


def threshold_lp_inf(p) -> float:
    """Critical dilation ``e^{-1/p} / Gamma(1 + 1/p)`` for l_p against l_inf."""
    p = parse_exponent(p)
    if is_inf(p):
        return 1.0
    return math.exp(-1.0 / p - log_gamma(1.0 + 1.0 / p))


def threshold_schatten(p, q, beta: int) -> float:
    """Threshold ``t_{p,q,beta}`` for Schatten-p against Schatten-q balls.

    The value does not depend on ``beta``.  For ``q = inf`` the limit
    ``e^{1/(2p)}`` is returned; only ``(2, inf, 2)`` is a proven threshold,
    see :func:`threshold_schatten_provenance`.
    """
    p = parse_exponent(p)
    q = parse_exponent(q)
    _check_beta(beta)
    if is_inf(p):
        raise DomainError("threshold_schatten needs a finite p")
    if is_inf(q):
        return math.exp(0.5 / p)
    return math.exp(0.5 * (1.0 / p - 1.0 / q)) * (2.0 * p / (p + q)) ** (1.0 / q)


def threshold_schatten_provenance(p, q, beta: int) -> str:
    p = parse_exponent(p)
    q = parse_exponent(q)
    if not is_inf(q):
        return "exact: closed form for finite p, q"
    if p == 2.0 and beta == 2:
        return "exact: proven critical threshold e^{1/4}"
    return "conjectured: q -> inf limit e^{1/(2p)}, proven only for p = 2, beta = 2"


class GumbelConstants(NamedTuple):
    A: float
    scale: float
    K: float


def gumbel_constants(p, n: int) -> GumbelConstants:
    """Centering, scale and ``K_p`` for the sup-norm Gumbel limit in l_p^n balls."""
    p = parse_exponent(p)
    if is_inf(p):
        raise DomainError("gumbel_constants needs a finite p")
    n = _check_n(n, 3)
    plog = p * math.log(n)
    if plog <= 1.0:
        raise DomainError(f"need p log n > 1, got {plog:.4g}")
    log_k = -math.log(p) / p - log_gamma(1.0 + 1.0 / p)
    # tail of the density exp(-|x|^p / p): P[|X| > x] ~ K_p x^{1-p} exp(-x^p / p)
    A = plog + (1.0 - p) / p * math.log(plog) + log_k
    scale = math.exp(math.log(n) / p - (1.0 / p - 1.0) * math.log(plog))
    return GumbelConstants(A, scale, math.exp(log_k))


def critical_offset_R(p, n: int, t: float) -> float:
    """Finite-n offset R_n so that the Gumbel prediction is ``exp(-exp(-R_n))``.

    ``t`` is the dilation before the ``(log n)^{1/p}`` factor is applied.
    """
    p = parse_exponent(p)
    A, _, _ = gumbel_constants(p, n)
    if not t > 0.0:
        raise DomainError(f"t must be positive, got {t}")
    log_radius = math.log(n) / p + log_volume_lp(p, n).value / n
    lead = p * t * math.exp(log_radius - math.log(p) / p) / 2.0
    return lead * math.log(n) - A
