"""Seeded samplers for l_p balls, Gaussian beta-ensembles and Schatten-2 balls.

Random numbers come from the counter-based Philox generator keyed by
``(seed, index, *sub)``, so any stream can be regenerated independently of
what else was drawn before it.  Eigenvalues of the tridiagonal beta-Hermite
model are computed by a compiled implicit QL iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numba
import numpy as np

from .balls import BETAS, is_inf, parse_exponent, schatten_dimension
from .errors import ConvergenceError, DomainError

__all__ = [
    "RandomStream",
    "EigSample",
    "LpSample",
    "HERMITE_SCALE",
    "sample_generalized_gaussian",
    "generalized_gaussian",
    "sample_uniform_lp_ball",
    "uniform_lp_ball",
    "sample_beta_hermite_eigs",
    "beta_hermite_eigenvalues",
    "beta_hermite_tridiagonal",
    "lp_norm",
    "sample_gue_dense_eigs",
    "gue_dense_eigenvalues",
    "sample_uniform_schatten2_ball",
    "uniform_schatten2_eigenvalues",
    "symmetric_tridiagonal_eigenvalues",
    "tridiagonal_eigenvalues_batch",
]

_MASK64 = (1 << 64) - 1

# maps the Dumitriu-Edelman density exp(-sum x^2 / 2) onto exp(-sum x^2);
# frozen after the E||X||^2 = d_n / 2 check in tests/test_sampling.py
HERMITE_SCALE = 1.0 / math.sqrt(2.0)

_DENSE_MAX_N = 64


@dataclass(frozen=True)
class RandomStream:
    """Address of an independent random stream.

    Identical ``(seed, index, sub)`` triples reproduce identical draws; any
    difference selects a statistically independent Philox key.
    """

    seed: int = 0
    index: int = 0
    sub: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for v in (self.seed, self.index, *self.sub):
            if not 0 <= int(v) <= _MASK64:
                raise DomainError(f"stream coordinates must be 64-bit unsigned, got {v}")

    def child(self, i: int) -> "RandomStream":
        return replace(self, sub=self.sub + (int(i),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.index), *self.sub))
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class EigSample:
    values: np.ndarray
    beta: int
    n: int
    density: Literal["f-2-beta-n", "uniform-schatten2-ball"]


@dataclass(frozen=True)
class LpSample:
    coordinates: np.ndarray
    p: float
    n: int


def _rng(stream):
    return stream.generator() if isinstance(stream, RandomStream) else stream


# -- generalized Gaussians and l_p balls -------------------------------------


def generalized_gaussian(p: float, size, rng: np.random.Generator) -> np.ndarray:
    """Draws with density proportional to ``exp(-|x|^p)``."""
    p = parse_exponent(p)
    if is_inf(p):
        raise DomainError("generalized Gaussian needs a finite p")
    mag = rng.standard_gamma(1.0 / p, size=size) ** (1.0 / p)
    sign = rng.integers(0, 2, size=size) * 2 - 1
    return mag * sign


def sample_generalized_gaussian(p: float, stream: RandomStream) -> float:
    return float(generalized_gaussian(p, None, _rng(stream)))


def lp_norm(x: np.ndarray, p: float, axis=-1) -> np.ndarray:
    """Row norms, rescaled by the maximum so large exponents cannot overflow."""
    a = np.abs(x)
    m = a.max(axis=axis, keepdims=True)
    if is_inf(p):
        return np.squeeze(m, axis=axis)
    safe = np.where(m > 0.0, m, 1.0)
    if p == 1.0:
        return a.sum(axis=axis)
    if p == 2.0:
        r = a / safe
        return np.squeeze(safe, axis=axis) * np.sqrt(np.einsum("...i,...i->...", r, r))
    return np.squeeze(safe, axis=axis) * np.sum((a / safe) ** p, axis=axis) ** (1.0 / p)


def uniform_lp_ball(p: float, n: int, size: int, rng: np.random.Generator):
    """Return ``(radial, direction)`` with uniform points ``radial[:, None] * direction``.

    ``direction`` rows have unit l_p norm (for p = inf the cube point itself is
    returned with ``radial`` equal to 1).
    """
    p = parse_exponent(p)
    if is_inf(p):
        return np.ones(size), rng.uniform(-1.0, 1.0, size=(size, n))
    y = generalized_gaussian(p, (size, n), rng)
    u = rng.random(size)
    return u ** (1.0 / n), y / lp_norm(y, p)[:, None]


def sample_uniform_lp_ball(p, n: int, stream: RandomStream) -> LpSample:
    p = parse_exponent(p)
    radial, direction = uniform_lp_ball(p, n, 1, _rng(stream))
    return LpSample(radial[0] * direction[0], p, n)


# -- tridiagonal eigensolver ---------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _tql1(d, e, jitter, max_sweeps):
    """Eigenvalues of a symmetric tridiagonal matrix by implicit QL, in place.

    ``e[i]`` couples ``d[i]`` and ``d[i+1]``; ``e[n-1]`` is workspace.
    Returns the number of unconverged eigenvalues (0 on success).
    """
    n = d.shape[0]
    eps = 2.220446049250313e-16
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_sweeps:
                return n - l
            # Wilkinson-type shift from the leading 2x2 block
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.sqrt(g * g + 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g)) * (1.0 + jitter)
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.sqrt(f * f + g * g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


@numba.njit(cache=True, nogil=True)
def _tql1_batch(diag, sub, jitter, max_sweeps):
    rows, n = diag.shape
    out = np.empty((rows, n))
    failed = -1
    work_e = np.zeros(n)
    for k in range(rows):
        d = diag[k].copy()
        for i in range(n - 1):
            work_e[i] = sub[k, i]
        work_e[n - 1] = 0.0
        if _tql1(d, work_e, jitter, max_sweeps) != 0:
            failed = k
            break
        out[k] = np.sort(d)
    return out, failed


_MAX_SWEEPS = 60
_RETRY_JITTER = 1e-7


def tridiagonal_eigenvalues_batch(diag, sub, seed=None) -> np.ndarray:
    """Sorted eigenvalues for each row of a batch of symmetric tridiagonal matrices.

    ``diag`` has shape ``(rows, n)`` and ``sub`` shape ``(rows, n - 1)``.  A
    failed row is retried once with perturbed shifts before raising.
    """
    diag = np.ascontiguousarray(diag, dtype=float)
    if diag.ndim != 2:
        raise DomainError("diag must be two-dimensional (rows, n)")
    rows, n = diag.shape
    sub = np.ascontiguousarray(sub, dtype=float).reshape(rows, max(n - 1, 0))
    if n == 0:
        return diag.copy()
    out, failed = _tql1_batch(diag, sub, 0.0, _MAX_SWEEPS)
    while failed >= 0:
        redo, bad = _tql1_batch(diag[failed:failed + 1], sub[failed:failed + 1],
                                _RETRY_JITTER, _MAX_SWEEPS)
        if bad >= 0:
            raise ConvergenceError(
                f"tridiagonal QL did not converge (row {failed}, seed {seed})"
            )
        out[failed] = redo[0]
        rest, failed_rest = _tql1_batch(diag[failed + 1:], sub[failed + 1:], 0.0, _MAX_SWEEPS)
        out[failed + 1:] = rest
        failed = failed + 1 + failed_rest if failed_rest >= 0 else -1
    return out


def symmetric_tridiagonal_eigenvalues(diagonal, subdiagonal) -> np.ndarray:
    """All eigenvalues, ascending, of the tridiagonal matrix (diagonal, subdiagonal)."""
    d = np.asarray(diagonal, dtype=float)
    e = np.asarray(subdiagonal, dtype=float)
    if d.ndim != 1 or e.shape != (max(d.size - 1, 0),):
        raise DomainError("need a diagonal of length n and a subdiagonal of length n-1")
    return tridiagonal_eigenvalues_batch(d[None, :], e[None, :])[0]


# -- beta-ensembles ------------------------------------------------------------


def _check_beta(beta):
    if beta not in BETAS:
        raise DomainError(f"beta must be one of {BETAS}, got {beta!r}")


def beta_hermite_tridiagonal(beta: int, n: int, size: int, rng: np.random.Generator):
    """Diagonals ``(diag, sub)`` of scaled tridiagonal beta-Hermite matrices.

    The eigenvalues of each matrix have joint density proportional to
    ``exp(-|x|^2) |Delta(x)|^beta``.
    """
    _check_beta(beta)
    if n < 1:
        raise DomainError("n must be positive")
    diag = rng.normal(0.0, math.sqrt(2.0), size=(size, n))
    dof = beta * np.arange(n - 1, 0, -1, dtype=float)
    # chi_k as sqrt of Gamma(k/2, scale 2)
    sub = np.sqrt(rng.gamma(dof / 2.0, 2.0, size=(size, n - 1)))
    scale = HERMITE_SCALE / math.sqrt(2.0)
    return diag * scale, sub * scale


def beta_hermite_eigenvalues(beta: int, n: int, size: int, rng: np.random.Generator,
                             seed=None) -> np.ndarray:
    """Rows of sorted eigenvalues with joint density prop. to ``exp(-|x|^2) |Delta(x)|^beta``."""
    diag, sub = beta_hermite_tridiagonal(beta, n, size, rng)
    return tridiagonal_eigenvalues_batch(diag, sub, seed=seed)


def sample_beta_hermite_eigs(beta: int, n: int, stream: RandomStream) -> EigSample:
    seed = stream.seed if isinstance(stream, RandomStream) else None
    values = beta_hermite_eigenvalues(beta, n, 1, _rng(stream), seed=seed)[0]
    return EigSample(values, beta, n, "f-2-beta-n")


def gue_dense_eigenvalues(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """GUE eigenvalues from full Hermitian matrices with density prop. to ``exp(-tr A^2)``.

    ``tr A^2 = sum a_ii^2 + 2 sum_{i<j} |a_ij|^2``, so the diagonal has variance
    1/2 and real and imaginary off-diagonal parts variance 1/4 each.
    """
    if not 1 <= n <= _DENSE_MAX_N:
        raise DomainError(f"dense GUE oracle is limited to 1 <= n <= {_DENSE_MAX_N}")
    re = rng.normal(0.0, 0.5, size=(size, n, n))
    im = rng.normal(0.0, 0.5, size=(size, n, n))
    upper = np.triu(re + 1j * im, 1)
    diag = rng.normal(0.0, math.sqrt(0.5), size=(size, n))
    a = upper + np.conj(np.swapaxes(upper, 1, 2))
    a[:, np.arange(n), np.arange(n)] = diag
    return np.linalg.eigvalsh(a)


def sample_gue_dense_eigs(n: int, stream: RandomStream) -> EigSample:
    return EigSample(gue_dense_eigenvalues(n, 1, _rng(stream))[0], 2, n, "f-2-beta-n")


def uniform_schatten2_eigenvalues(beta: int, n: int, size: int, rng: np.random.Generator,
                                  seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(radial, direction)``: eigenvalues of uniform points in the Schatten-2 ball.

    ``direction`` rows are GbetaE eigenvalues normalised to unit Euclidean
    norm and ``radial = U^{1/d_n}``; the point is ``radial[:, None] * direction``.
    """
    d = schatten_dimension(beta, n)
    x = beta_hermite_eigenvalues(beta, n, size, rng, seed=seed)
    norms = lp_norm(x, 2.0)
    zero = norms == 0.0
    while zero.any():
        x[zero] = beta_hermite_eigenvalues(beta, n, int(zero.sum()), rng, seed=seed)
        norms = lp_norm(x, 2.0)
        zero = norms == 0.0
    u = rng.random(size)
    return u ** (1.0 / d), x / norms[:, None]


def sample_uniform_schatten2_ball(beta: int, n: int, stream: RandomStream) -> EigSample:
    seed = stream.seed if isinstance(stream, RandomStream) else None
    radial, direction = uniform_schatten2_eigenvalues(beta, n, 1, _rng(stream), seed=seed)
    return EigSample(radial[0] * direction[0], beta, n, "uniform-schatten2-ball")
