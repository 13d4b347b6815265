"""Monte Carlo estimators and empirical-distribution checks.

Every stochastic routine draws its samples in fixed blocks of
``BLOCK`` draws; block ``b`` uses the stream ``stream.child(b)``.  Worker
threads only decide which blocks run where, so results are bit-identical for
any thread count.  Reductions happen once, serially, on the concatenated
per-sample arrays (integer success counts for proportions).

The normalised volume of ``D_X`` intersected with ``t D_Y`` equals the
probability that ``||Z||_Y <= t r_X / r_Y`` for ``Z`` uniform in the unit
ball ``B_X`` and ``r`` the volume radius.  :func:`dilations` returns
``c = ||Z||_Y r_Y / r_X`` per sample, so one sample set answers every ``t``
(common random numbers) and the estimate is exactly monotone in ``t``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.stats import binomtest, ks_2samp

from .balls import (
    BallSpec,
    LpBallSpec,
    SchattenBallSpec,
    critical_offset_R,
    gumbel_constants,
    is_inf,
    log_volume,
    parse_exponent,
    schatten_dimension,
)
from .errors import ConvergenceError, DomainError, UnsupportedPairError
from .sampling import (
    EigSample,
    RandomStream,
    beta_hermite_eigenvalues,
    beta_hermite_tridiagonal,
    lp_norm,
    uniform_lp_ball,
    uniform_schatten2_eigenvalues,
)
from .tracywidom import default_solution, tw_cdf

__all__ = [
    "BLOCK",
    "MCEstimate",
    "EmpiricalCDF",
    "ExtremalPair",
    "IndependenceReport",
    "ScanTable",
    "MomentSummary",
    "dilations",
    "intersection_volume_mc",
    "dilation_scan",
    "intersection_scan",
    "critical_scan",
    "empirical_threshold",
    "edge_scaling",
    "extremal_scalings",
    "extremal_sample",
    "edge_limit_cdf",
    "max_abs_scaling",
    "max_abs_sample",
    "max_abs_limit_cdf",
    "gumbel_statistic_sample",
    "gumbel_cdf",
    "gumbel_check",
    "independence_probe",
    "DEFAULT_INDEPENDENCE_GRID",
    "norm_clt_statistics",
    "norm_clt_check",
    "ks_distance",
    "ks_two_sample",
]

BLOCK = 256
_BOOTSTRAP_KEY = (1 << 64) - 1
_CI_LEVEL = 0.95


# -- records -------------------------------------------------------------------


@dataclass(frozen=True)
class MCEstimate:
    """Bernoulli-proportion estimate from ``successes`` out of ``count`` draws."""

    value: float
    stderr: float
    count: int
    seed: int
    ci_level: float = _CI_LEVEL
    successes: int = 0

    @classmethod
    def from_counts(cls, successes: int, count: int, seed: int, ci_level: float = _CI_LEVEL):
        if count < 1:
            raise DomainError("count must be positive")
        successes = int(successes)
        value = successes / count
        return cls(value, math.sqrt(value * (1.0 - value) / count), int(count), int(seed),
                   ci_level, successes)

    @property
    def ci(self) -> tuple[float, float]:
        """Wilson score interval at ``ci_level``."""
        ci = binomtest(self.successes, self.count).proportion_ci(self.ci_level, "wilson")
        return float(ci.low), float(ci.high)


class EmpiricalCDF:
    """Right-continuous empirical distribution function of a sample."""

    def __init__(self, sample):
        s = np.sort(np.asarray(sample, dtype=float).ravel())
        if s.size == 0:
            raise DomainError("an empirical CDF needs at least one point")
        if np.isnan(s).any():
            raise DomainError("sample contains NaN")
        self.sample = s
        self.count = int(s.size)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.searchsorted(self.sample, x, side="right") / self.count
        return float(out) if out.ndim == 0 else out

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.sample, q))


@dataclass(frozen=True)
class ExtremalPair:
    xmin: float
    xmax: float


@dataclass(frozen=True)
class IndependenceReport:
    beta: int
    n: int
    grid: np.ndarray
    joint: np.ndarray
    product: np.ndarray
    max_abs_gap: float
    gap_stderr: float
    point_stderr: np.ndarray = field(repr=False)
    count: int = 0
    seed: int = 0


@dataclass(frozen=True)
class ScanTable:
    """Estimates indexed by ``(n, t)``; ``t_effective`` is the dilation actually applied."""

    n_list: tuple[int, ...]
    t_grid: tuple[float, ...]
    t_effective: np.ndarray
    estimates: tuple[tuple[MCEstimate, ...], ...]
    prediction: np.ndarray | None = None

    @property
    def values(self) -> np.ndarray:
        return np.array([[e.value for e in row] for row in self.estimates])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([[e.stderr for e in row] for row in self.estimates])


class MomentSummary(NamedTuple):
    mean: float
    stderr: float
    variance: float
    count: int


# -- block machinery -----------------------------------------------------------


def _check_count(N) -> int:
    if int(N) != N or N < 1:
        raise DomainError(f"sample count must be a positive integer, got {N!r}")
    return int(N)


def _map_blocks(draw: Callable, N: int, stream: RandomStream, threads: int = 1) -> np.ndarray:
    """Concatenate ``draw(rng, size)`` over the fixed blocks covering ``N`` draws."""
    N = _check_count(N)
    sizes = [min(BLOCK, N - start) for start in range(0, N, BLOCK)]

    def run(b):
        return draw(stream.child(b).generator(), sizes[b])

    if threads <= 1 or len(sizes) == 1:
        parts = [run(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    return np.concatenate(parts, axis=0)


# -- intersection volumes --------------------------------------------------------


def _pair_plan(X: BallSpec, Y: BallSpec):
    """Validate a pair and return ``(draw, log ratio)`` for :func:`dilations`."""
    if X.family != Y.family:
        raise UnsupportedPairError(f"cannot pair a {X.family} ball with a {Y.family} ball")
    if X.dimension != Y.dimension:
        raise DomainError(f"dimension mismatch: {X.dimension} vs {Y.dimension}")
    if isinstance(X, SchattenBallSpec):
        if X.beta != Y.beta:
            raise DomainError(f"beta mismatch: {X.beta} vs {Y.beta}")
        if X.p != 2.0:
            raise UnsupportedPairError("only the Schatten-2 ball can be sampled uniformly")
        if not (Y.p == 2.0 or is_inf(Y.p)):
            raise UnsupportedPairError("Schatten volumes are exact only for p in {2, inf}")
    lv_x = log_volume(X)
    lv_y = log_volume(Y)
    if not (lv_x.exact and lv_y.exact):
        raise DomainError("intersection estimates need exact log-volumes")
    log_ratio = (lv_y.value - lv_x.value) / X.dimension
    same = X.p == Y.p

    if isinstance(X, LpBallSpec):
        def draw(rng, size):
            radial, direction = uniform_lp_ball(X.p, X.n, size, rng)
            if same:
                return radial
            return radial * lp_norm(direction, Y.p)
    else:
        def draw(rng, size):
            radial, direction = uniform_schatten2_eigenvalues(X.beta, X.n, size, rng)
            if same:
                return radial
            return radial * np.abs(direction).max(axis=1)

    return draw, log_ratio


def dilations(X: BallSpec, Y: BallSpec, N: int, stream: RandomStream,
              threads: int = 1) -> np.ndarray:
    """Per-sample critical dilation ``||Z||_Y r_Y / r_X`` for ``Z`` uniform in ``B_X``.

    The normalised intersection volume at dilation ``t`` is the fraction of
    entries ``<= t``.
    """
    draw, log_ratio = _pair_plan(X, Y)
    norms = _map_blocks(draw, N, stream, threads)
    if log_ratio == 0.0:
        return norms
    return norms * math.exp(log_ratio)


def dilation_scan(X: BallSpec, Y: BallSpec, t_grid: Sequence[float], N: int,
                  stream: RandomStream, threads: int = 1) -> tuple[MCEstimate, ...]:
    """Intersection-volume estimates for every ``t`` in ``t_grid`` from one sample set."""
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0 or np.any(~(t > 0.0)):
        raise DomainError("t_grid must be a nonempty list of positive dilations")
    c = np.sort(dilations(X, Y, N, stream, threads))
    hits = np.searchsorted(c, t, side="right")
    return tuple(MCEstimate.from_counts(int(h), c.size, stream.seed) for h in hits)


def intersection_volume_mc(X: BallSpec, Y: BallSpec, t: float, N: int,
                           stream: RandomStream, threads: int = 1) -> MCEstimate:
    """Monte Carlo estimate of ``vol(D_X intersected with t D_Y)`` for volume-normalised balls.

    Parameters
    ----------
    X, Y : BallSpec
        Same family and ambient dimension.  For Schatten balls ``X`` must be
        the Schatten-2 ball and ``Y`` has ``p`` in {2, inf}.
    t : float
        Dilation applied to ``D_Y``.
    N : int
        Number of uniform draws from ``B_X``.
    stream : RandomStream
    threads : int, optional
        Worker threads; does not change the result.
    """
    return dilation_scan(X, Y, [t], N, stream, threads)[0]


def _ball(family: str, p, beta, n: int) -> BallSpec:
    if family == "lp":
        return LpBallSpec(p, n)
    if family == "schatten":
        if beta is None:
            raise DomainError("Schatten balls need beta")
        return SchattenBallSpec(p, beta, n)
    raise DomainError(f"unknown ball family {family!r}")


def intersection_scan(family: str, p, q, beta, n_list: Sequence[int], t_grid: Sequence[float],
                      N: int, stream: RandomStream, log_dilate: bool = False,
                      threads: int = 1) -> ScanTable:
    """Scan ``vol(D_X intersected with t' D_Y)`` over ``n`` and ``t``.

    Row ``n`` uses the stream ``stream.child(n)``.  With ``log_dilate`` the
    applied dilation is ``t' = t (log n)^{1/p}``, the scaling under which the
    l_p against l_inf volumes have a nontrivial limit.  For that case the
    finite-n Gumbel prediction ``exp(-exp(-R_n))`` is attached where defined.
    """
    n_list = tuple(int(n) for n in n_list)
    t_grid = tuple(float(t) for t in t_grid)
    if not n_list or not t_grid:
        raise DomainError("n_list and t_grid must be nonempty")
    p = parse_exponent(p)
    q = parse_exponent(q)
    gumbel = log_dilate and family == "lp" and is_inf(q) and not is_inf(p)
    if log_dilate and is_inf(p):
        raise DomainError("log dilation needs a finite p")
    rows, eff, pred = [], [], []
    for n in n_list:
        X = _ball(family, p, beta, n)
        Y = _ball(family, q, beta, n)
        factor = math.log(n) ** (1.0 / p) if log_dilate else 1.0
        t_eff = [t * factor for t in t_grid]
        rows.append(dilation_scan(X, Y, t_eff, N, stream.child(n), threads))
        eff.append(t_eff)
        if gumbel:
            pred.append([_gumbel_prediction(p, n, t) for t in t_grid])
    prediction = np.array(pred) if gumbel else None
    return ScanTable(n_list, t_grid, np.array(eff), tuple(rows), prediction)


def _gumbel_prediction(p: float, n: int, t: float) -> float:
    if n < 3 or p * math.log(n) <= 1.0:
        return math.nan
    return math.exp(-math.exp(-critical_offset_R(p, n, t)))


def critical_scan(p, beta, n_list: Sequence[int], t_grid: Sequence[float], N: int,
                  stream: RandomStream, threads: int = 1) -> ScanTable:
    """Scan a ball against its ``p = inf`` counterpart.

    With ``beta=None`` this is l_p against l_inf with the ``(log n)^{1/p}``
    dilation; otherwise Schatten-p against Schatten-inf over ``F_beta``
    (only ``p = 2`` can be sampled).
    """
    if beta is None:
        return intersection_scan("lp", p, math.inf, None, n_list, t_grid, N, stream,
                                 log_dilate=True, threads=threads)
    return intersection_scan("schatten", p, math.inf, beta, n_list, t_grid, N, stream,
                             threads=threads)


def empirical_threshold(X: BallSpec, Y: BallSpec, N: int, stream: RandomStream,
                        threads: int = 1, tol: float = 1e-3,
                        bracket: tuple[float, float] = (1e-3, 1e3)) -> float:
    """Dilation at which the estimated intersection volume crosses 1/2.

    Bisection in ``t`` on a single common sample set, stopped once the
    bracket is shorter than ``tol`` and the estimate is within two standard
    errors of 1/2.
    """
    c = np.sort(dilations(X, Y, N, stream, threads))

    def frac(t):
        return np.searchsorted(c, t, side="right") / c.size

    lo, hi = bracket
    if not (frac(lo) < 0.5 <= frac(hi)):
        raise ConvergenceError(
            f"no crossing of 1/2 inside [{lo:g}, {hi:g}] (estimates {frac(lo):.3g}, {frac(hi):.3g})"
        )
    # stop once the bracket is below tol and the estimate is within 2 stderr
    # of 1/2; a sharply concentrated dilation law needs the second condition
    near = 2.0 * 0.5 / math.sqrt(c.size)
    for _ in range(200):
        t = 0.5 * (lo + hi)
        f = frac(t)
        if hi - lo <= tol and abs(f - 0.5) <= near:
            return float(t)
        if f < 0.5:
            lo = t
        else:
            hi = t
    raise ConvergenceError(f"bisection stalled at t={t:.6g} with estimate {f:.4g}")


# -- extremal eigenvalues ----------------------------------------------------------


def edge_scaling(beta: int, n: int) -> tuple[float, float]:
    """``(scale, centre)`` so that ``scale * (max X - centre)`` has a Tracy-Widom limit.

    For density ``exp(-|x|^2) |Delta|^beta`` the spectral edge sits at
    ``sqrt(beta n)`` and ``scale = 2 n^{1/6} / sqrt(beta)``; at ``beta = 2``
    this is ``sqrt(2) n^{1/6}(max X - sqrt(2n))``.
    """
    return 2.0 * n ** (1.0 / 6.0) / math.sqrt(beta), math.sqrt(beta * n)


def _extremal_arrays(values: np.ndarray, beta: int, n: int):
    scale, centre = edge_scaling(beta, n)
    return scale * (values[..., 0] + centre), scale * (values[..., -1] - centre)


def extremal_scalings(sample: EigSample) -> ExtremalPair:
    """Rescaled smallest and largest eigenvalue of a beta-ensemble sample."""
    if sample.density != "f-2-beta-n":
        raise DomainError(f"need a beta-ensemble sample, got density {sample.density!r}")
    xmin, xmax = _extremal_arrays(np.asarray(sample.values), sample.beta, sample.n)
    return ExtremalPair(float(xmin), float(xmax))


def extremal_sample(beta: int, n: int, N: int, stream: RandomStream,
                    threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Arrays ``(xmin, xmax)`` of rescaled extremal eigenvalues over ``N`` draws."""
    def draw(rng, size):
        return beta_hermite_eigenvalues(beta, n, size, rng, seed=stream.seed)[:, [0, -1]]

    ends = _map_blocks(draw, N, stream, threads)
    return _extremal_arrays(ends, beta, n)


def edge_limit_cdf(beta: int, x):
    """Limiting CDF of ``xmax`` from :func:`edge_scaling`.

    For ``beta = 4`` the tabulated ``F_4`` is read at ``2^{2/3} x``: its
    argument convention differs from the edge scaling of the tridiagonal
    model by that factor.
    """
    sol = default_solution()
    x = np.asarray(x, dtype=float)
    arg = x * 2.0 ** (2.0 / 3.0) if beta == 4 else x
    inside = np.clip(arg, sol.s_end, sol.s_start)
    f = np.asarray(tw_cdf(beta, inside, sol))
    out = np.where(arg < sol.s_end, 0.0, np.where(arg > sol.s_start, 1.0, f))
    return float(out) if out.ndim == 0 else out


def _max_abs_array(values: np.ndarray, n: int) -> np.ndarray:
    return math.sqrt(2.0) * n ** (2.0 / 3.0) * (math.sqrt(n) * np.abs(values).max(axis=-1) - 2.0)


def max_abs_scaling(sample: EigSample, n: int | None = None) -> float:
    """``sqrt(2) n^{2/3} (n^{1/2} max|v| - 2)`` for a uniform Schatten-2 point, ``beta = 2``."""
    if sample.density != "uniform-schatten2-ball" or sample.beta != 2:
        raise DomainError("need a uniform Schatten-2 ball sample with beta = 2")
    n = sample.n if n is None else n
    return float(_max_abs_array(np.asarray(sample.values), n))


def max_abs_sample(n: int, N: int, stream: RandomStream, threads: int = 1) -> np.ndarray:
    def draw(rng, size):
        radial, direction = uniform_schatten2_eigenvalues(2, n, size, rng, seed=stream.seed)
        return radial * np.abs(direction).max(axis=1)

    return math.sqrt(2.0) * n ** (2.0 / 3.0) * (
        math.sqrt(n) * _map_blocks(draw, N, stream, threads) - 2.0
    )


def max_abs_limit_cdf(x):
    """``F_2(x / sqrt 2)^2``."""
    f = edge_limit_cdf(2, np.asarray(x, dtype=float) / math.sqrt(2.0))
    return f * f


# -- Gumbel limit of the sup-norm ----------------------------------------------------


def gumbel_cdf(t):
    return np.exp(-np.exp(-np.asarray(t, dtype=float)))


def gumbel_statistic_sample(p, n: int, N: int, stream: RandomStream,
                            threads: int = 1) -> np.ndarray:
    """``scale * ||Z||_inf - A`` for ``Z`` uniform in the l_p^n ball."""
    p = parse_exponent(p)
    A, scale, _ = gumbel_constants(p, n)

    def draw(rng, size):
        radial, direction = uniform_lp_ball(p, n, size, rng)
        return radial * np.abs(direction).max(axis=1)

    return scale * _map_blocks(draw, N, stream, threads) - A


def gumbel_check(p, n: int, N: int, stream: RandomStream,
                 threads: int = 1) -> tuple[EmpiricalCDF, float]:
    """Empirical CDF of the scaled sup-norm and its KS distance to ``exp(-e^{-t})``."""
    emp = EmpiricalCDF(gumbel_statistic_sample(p, n, N, stream, threads))
    return emp, ks_distance(emp, gumbel_cdf)


# -- asymptotic independence of the extremes ------------------------------------------


DEFAULT_INDEPENDENCE_GRID = tuple(
    (x, y) for x in (-1.0, 0.0, 1.0, 2.0, 3.0) for y in (-3.0, -2.0, -1.0, 0.0, 1.0)
)


def independence_probe(beta: int, n: int, N: int, stream: RandomStream,
                       grid: Sequence[tuple[float, float]] = DEFAULT_INDEPENDENCE_GRID,
                       threads: int = 1, resamples: int = 200) -> IndependenceReport:
    """Compare ``P[xmin <= x, xmax <= y]`` with the product of the marginals.

    The standard error of the maximal gap comes from ``resamples`` bootstrap
    replicates drawn from a stream separate from the samples.
    """
    g = np.asarray(grid, dtype=float).reshape(-1, 2)
    if g.size == 0 or np.any(g < -5.0) or np.any(g > 3.0):
        raise DomainError("grid points must lie in [-5, 3] x [-5, 3]")
    xmin, xmax = extremal_sample(beta, n, N, stream, threads)
    a = (xmin[:, None] <= g[:, 0]).astype(float)
    b = (xmax[:, None] <= g[:, 1]).astype(float)
    ab = a * b
    joint = ab.mean(axis=0)
    product = a.mean(axis=0) * b.mean(axis=0)
    gap = np.abs(joint - product)

    rng = stream.child(_BOOTSTRAP_KEY).generator()
    diffs = np.empty((resamples, g.shape[0]))
    for r in range(resamples):
        w = np.bincount(rng.integers(0, N, size=N), minlength=N) / N
        diffs[r] = w @ ab - (w @ a) * (w @ b)
    max_gaps = np.abs(diffs).max(axis=1)
    return IndependenceReport(
        beta, n, g, joint, product, float(gap.max()),
        float(max_gaps.std(ddof=1)), diffs.std(axis=0, ddof=1), int(N), stream.seed,
    )


# -- norm fluctuations -----------------------------------------------------------------


def norm_clt_statistics(beta: int, n: int, N: int, stream: RandomStream,
                        threads: int = 1) -> np.ndarray:
    """``n (sqrt(|X|^2 / (beta n^2)) - 1/2)`` for beta-ensemble samples ``X``.

    ``|X|^2`` is the squared Frobenius norm of the tridiagonal matrix, which
    equals the sum of its squared eigenvalues, so no eigensolve is needed.
    """
    if n < 10:
        raise DomainError("the norm statistic needs n >= 10")

    def draw(rng, size):
        d, e = beta_hermite_tridiagonal(beta, n, size, rng)
        return np.einsum("ij,ij->i", d, d) + 2.0 * np.einsum("ij,ij->i", e, e)

    sq = _map_blocks(draw, N, stream, threads)
    return n * (np.sqrt(sq / (beta * n * n)) - 0.5)


def norm_clt_check(beta: int, n: int, N: int, stream: RandomStream,
                   threads: int = 1) -> MomentSummary:
    """Empirical mean, its standard error and the variance of :func:`norm_clt_statistics`."""
    s = norm_clt_statistics(beta, n, N, stream, threads)
    var = float(s.var(ddof=1)) if s.size > 1 else 0.0
    return MomentSummary(float(s.mean()), math.sqrt(var / s.size), var, int(s.size))


# -- distribution distances ------------------------------------------------------------


def ks_distance(F_emp: EmpiricalCDF, F_ref: Callable) -> float:
    """Sup distance between an empirical CDF and a reference CDF.

    Both one-sided limits of the empirical CDF are compared at every jump.
    """
    s = F_emp.sample
    f = np.asarray(F_ref(s), dtype=float)
    upper = np.searchsorted(s, s, side="right") / F_emp.count
    lower = np.searchsorted(s, s, side="left") / F_emp.count
    return float(max(np.max(upper - f), np.max(f - lower), 0.0))


def ks_two_sample(a, b) -> float:
    return float(ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float)).statistic)
