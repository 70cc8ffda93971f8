"""Multivariate normal rectangle probabilities.

Dimension 1 uses the normal CDF; dimension 2 the Drezner-Wesolowsky
Gauss-Legendre method with the high-correlation series correction; dimensions
3 and up a separation-of-variables transform integrated with a shifted
Richtmyer lattice.  The lattice shifts come from a seeded generator, so
results are deterministic for a fixed seed, and the sample count adapts until
the batch error estimate drops under the requested tolerance.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr, ndtri, roots_legendre

DEFAULT_MAX_DIM = 8
DEFAULT_TOL = 1e-6
DEFAULT_SEED = 20230817

_EPS = 1e-300


class RectangleError(ValueError):
    pass


class NotPositiveDefiniteError(RectangleError):
    pass


def norm_cdf(x):
    return ndtr(x)


def _phi_diff(lo: float, hi: float) -> float:
    # Phi(hi) - Phi(lo), stable in the far tails
    if lo > 0:
        return ndtr(-lo) - ndtr(-hi)
    return ndtr(hi) - ndtr(lo)


def bvn_upper(h: float, k: float, r: float) -> float:
    """P(X > h, Y > k) for standard bivariate normal with correlation r."""
    if h == math.inf or k == math.inf:
        return 0.0
    if h == -math.inf:
        return 1.0 if k == -math.inf else ndtr(-k)
    if k == -math.inf:
        return ndtr(-h)
    if r == 0.0:
        return ndtr(-h) * ndtr(-k)

    tp = 2.0 * math.pi
    hk = h * k
    bvn = 0.0
    if abs(r) < 0.3:
        x, w = roots_legendre(6)
    elif abs(r) < 0.75:
        x, w = roots_legendre(12)
    else:
        x, w = roots_legendre(20)
    x = 1.0 + x  # symmetric nodes cover both half-intervals

    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r) / 2.0
        sn = np.sin(asr * x)
        bvn = float(np.exp((sn * hk - hs) / (1.0 - sn ** 2)) @ w)
        bvn = bvn * asr / tp + ndtr(-h) * ndtr(-k)
        return min(1.0, max(0.0, bvn))

    # high-|r| branch: expansion around r = +-1
    if r < 0:
        k = -k
        hk = -hk
    if abs(r) < 1.0:
        a2 = (1.0 - r) * (1.0 + r)
        a = math.sqrt(a2)
        b2 = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        expnt = -(b2 / a2 + hk) / 2.0
        if expnt > -100.0:
            bvn = a * math.exp(expnt) * (1.0 - c * (b2 - a2) * (1.0 - d * b2) / 3.0
                                         + c * d * a2 * a2)
        if hk > -100.0:
            b = math.sqrt(b2)
            sp = math.sqrt(tp) * ndtr(-b / a)
            bvn -= math.exp(-hk / 2.0) * sp * b * (1.0 - c * b2 * (1.0 - d * b2) / 3.0)
        a /= 2.0
        xs = (a * x) ** 2
        expnt = -(b2 / xs + hk) / 2.0
        keep = expnt > -100.0
        xs = xs[keep]
        sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs)
        rs = np.sqrt(1.0 - xs)
        ep = np.exp(-(hk / 2.0) * xs / (1.0 + rs) ** 2) / rs
        t = float((np.exp(expnt[keep]) * (sp - ep)) @ w[keep])
        bvn = (a * t - bvn) / tp
    if r > 0:
        bvn += ndtr(-max(h, k))
    elif h >= k:
        bvn = -bvn
    else:
        L = (ndtr(k) - ndtr(h)) if h < 0 else (ndtr(-h) - ndtr(-k))
        bvn = L - bvn
    return min(1.0, max(0.0, bvn))


def _bvn_rectangle_std(lo: np.ndarray, hi: np.ndarray, r: float) -> float:
    p = (bvn_upper(lo[0], lo[1], r) - bvn_upper(hi[0], lo[1], r)
         - bvn_upper(lo[0], hi[1], r) + bvn_upper(hi[0], hi[1], r))
    return min(1.0, max(0.0, p))


# -- d >= 3: separation of variables + lattice rule ---------------------------

_PRIMES = np.array([2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47,
                    53, 59, 61, 67, 71], dtype=float)


def _ordered_cholesky(sigma: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                      tol: float = 1e-12):
    """Cholesky with greedy variable ordering by conditional interval mass."""
    n = sigma.shape[0]
    C = sigma.astype(float).copy()
    lo = lo.astype(float).copy()
    hi = hi.astype(float).copy()
    L = np.zeros((n, n))
    y = np.zeros(n)
    order = np.arange(n)
    scale = float(np.max(np.diag(C)))
    for k in range(n):
        best, best_p = k, np.inf
        for i in range(k, n):
            cii = C[i, i] - L[i, :k] @ L[i, :k]
            if cii <= tol * scale:
                raise NotPositiveDefiniteError("covariance is not positive definite")
            ci = math.sqrt(cii)
            s = L[i, :k] @ y[:k]
            p = _phi_diff((lo[i] - s) / ci, (hi[i] - s) / ci)
            if p < best_p:
                best, best_p = i, p
        if best != k:
            for arr in (lo, hi, order):
                arr[k], arr[best] = arr[best], arr[k]
            C[[k, best], :] = C[[best, k], :]
            C[:, [k, best]] = C[:, [best, k]]
            L[[k, best], :k] = L[[best, k], :k]
        ckk = C[k, k] - L[k, :k] @ L[k, :k]
        if ckk <= tol * scale:
            raise NotPositiveDefiniteError("covariance is not positive definite")
        L[k, k] = math.sqrt(ckk)
        for i in range(k + 1, n):
            L[i, k] = (C[i, k] - L[i, :k] @ L[k, :k]) / L[k, k]
        s = L[k, :k] @ y[:k]
        a = (lo[k] - s) / L[k, k]
        b = (hi[k] - s) / L[k, k]
        da = _phi_diff(a, b)
        # conditional expectation of the truncated component
        pa = math.exp(-0.5 * a * a) / math.sqrt(2 * math.pi) if np.isfinite(a) else 0.0
        pb = math.exp(-0.5 * b * b) / math.sqrt(2 * math.pi) if np.isfinite(b) else 0.0
        y[k] = (pa - pb) / da if da > 1e-14 else (max(a, -10.0) + min(b, 10.0)) / 2.0
    return L, lo, hi


def _sov_batch(L: np.ndarray, lo: np.ndarray, hi: np.ndarray,
               u: np.ndarray) -> float:
    """Mean integrand over one batch of points ``u`` in [0,1)^(d-1)."""
    npts = u.shape[0]
    d = L.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.full(npts, ndtr(lo[0] / L[0, 0]))
        e = np.full(npts, ndtr(hi[0] / L[0, 0]))
        p = e - c
        y = np.zeros((npts, d - 1))
        for i in range(1, d):
            z = np.clip(c + u[:, i - 1] * (e - c), 1e-15, 1 - 1e-15)
            y[:, i - 1] = ndtri(z)
            s = y[:, :i] @ L[i, :i]
            c = ndtr((lo[i] - s) / L[i, i])
            e = ndtr((hi[i] - s) / L[i, i])
            p = p * np.maximum(e - c, 0.0)
    return float(np.mean(p))


def _lattice_points(npts: int, dim: int, shift: np.ndarray) -> np.ndarray:
    j = np.arange(1, npts + 1, dtype=float)[:, None]
    q = np.sqrt(_PRIMES[:dim])[None, :]
    u = np.modf(j * q + shift[None, :])[0]
    return np.abs(2.0 * u - 1.0)  # baker transform


def mvn_rectangle(mu, sigma, lower, upper, *,
                  tol: float = DEFAULT_TOL,
                  max_dim: int = DEFAULT_MAX_DIM,
                  seed: int = DEFAULT_SEED) -> float:
    """P(lower <= X <= upper) for X ~ N(mu, sigma)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    d = len(mu)
    if sigma.shape != (d, d) or len(lower) != d or len(upper) != d:
        raise RectangleError("dimension mismatch between mu, sigma, and bounds")
    if d > max_dim:
        raise RectangleError(f"dimension {d} exceeds the ordinal limit {max_dim}")
    if np.any(lower >= upper):
        raise RectangleError("require lower < upper elementwise")

    lo = lower - mu
    hi = upper - mu

    if d == 1:
        v = sigma[0, 0]
        if v <= 0:
            raise NotPositiveDefiniteError("variance must be positive")
        sd = math.sqrt(v)
        return _phi_diff(lo[0] / sd, hi[0] / sd)

    sd = np.sqrt(np.diag(sigma))
    if np.any(sd <= 0):
        raise NotPositiveDefiniteError("covariance has a nonpositive diagonal")
    lo = lo / sd
    hi = hi / sd
    corr = sigma / np.outer(sd, sd)

    if d == 2:
        r = float(corr[0, 1])
        if abs(r) >= 1.0:
            raise NotPositiveDefiniteError("correlation magnitude must be < 1")
        return _bvn_rectangle_std(lo, hi, r)

    L, lo, hi = _ordered_cholesky(corr, lo, hi)
    rng = np.random.default_rng(seed)
    n_batches = 10
    npts = 4096
    estimate, error = 0.0, math.inf
    while True:
        shifts = rng.random((n_batches, d - 1))
        vals = np.array([_sov_batch(L, lo, hi, _lattice_points(npts, d - 1, s))
                         for s in shifts])
        estimate = float(np.mean(vals))
        error = 3.0 * float(np.std(vals, ddof=1)) / math.sqrt(n_batches)
        if error < tol or npts >= 2 ** 17:
            break
        npts *= 4
    return min(1.0, max(0.0, estimate))
