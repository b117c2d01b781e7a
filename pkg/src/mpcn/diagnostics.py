"""Autocorrelation, integrated autocorrelation time and stuck-chain summaries."""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, DomainError

MIN_IAT_LENGTH = 10


def radial_stat(x, mode: str = "plain") -> float:
    """``||x||^2 / d`` (``plain``) or ``(||x||^2 - d) / sqrt(2 d)`` (``gaussian_centered``)."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    s = np.einsum("...i,...i->...", x, x)
    if mode == "plain":
        return s / d
    if mode == "gaussian_centered":
        return (s - d) / np.sqrt(2.0 * d)
    raise DomainError(f"unknown radial mode {mode!r}")


def _centered(series):
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DegenerateInputError("series must be one-dimensional")
    if x.size == 0 or np.ptp(x) == 0.0:
        raise DegenerateInputError("series has zero variance")
    xc = x - x.mean()
    c0 = float(xc @ xc)
    if not c0 > 0.0:
        raise DegenerateInputError("series has zero variance")
    return xc, c0


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelation at lags ``0..max_lag``.

    Uses the biased autocovariance (divide by the series length at every lag),
    computed lag by lag.
    """
    xc, c0 = _centered(series)
    n = xc.size
    if not 0 <= max_lag < n:
        raise DegenerateInputError(f"max_lag={max_lag} needs a series longer than {max_lag}")
    acf = np.empty(max_lag + 1)
    acf[0] = 1.0
    for k in range(1, max_lag + 1):
        acf[k] = float(xc[:-k] @ xc[k:]) / c0
    return acf


def autocorrelation_fft(series) -> np.ndarray:
    """Biased sample autocorrelation at every lag, via zero-padded FFT."""
    xc, c0 = _centered(series)
    n = xc.size
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n]
    return acov / acov[0]


def integrated_autocorr_time(series) -> float:
    """IAT ``1 + 2 sum_k rho(k)`` truncated by Geyer's initial positive sequence.

    Adjacent-pair sums ``rho(2m) + rho(2m+1)`` are accumulated while positive.
    """
    x = np.asarray(series, dtype=float)
    if x.size < MIN_IAT_LENGTH:
        raise DegenerateInputError(f"need at least {MIN_IAT_LENGTH} points, got {x.size}")
    acf = autocorrelation_fft(x)
    n_pairs = acf.size // 2
    pairs = acf[: 2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)
    neg = np.flatnonzero(pairs <= 0.0)
    stop = neg[0] if neg.size else n_pairs
    # sum of pairs from m=0 counts rho(0) once; IAT = -1 + 2 * sum(pairs)
    return float(-1.0 + 2.0 * pairs[:stop].sum())


def stuck_statistics(accepted):
    """``(acceptance_rate, longest_reject_run)`` of a boolean acceptance series."""
    a = np.asarray(accepted, dtype=bool)
    if a.size == 0:
        raise DegenerateInputError("empty acceptance series")
    rate = float(np.count_nonzero(a)) / a.size
    rej = np.concatenate(([0], (~a).astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(rej))
    starts, ends = edges[::2], edges[1::2]
    longest = int((ends - starts).max()) if starts.size else 0
    return rate, longest


def scaling_slope(dims, iats):
    """Least-squares slope and r^2 of ``log(iat)`` against ``log(d)``."""
    d = np.asarray(dims, dtype=float)
    t = np.asarray(iats, dtype=float)
    if d.size != t.size or d.size < 3:
        raise DomainError("need at least three (d, iat) pairs")
    if np.any(d <= 0) or np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise DomainError("dims and iats must be positive and finite")
    lx, ly = np.log(d), np.log(t)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + icept)
    sst = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
    return float(slope), float(r2)


def chain_statistic(trace) -> np.ndarray:
    """Radial series used for IAT summaries.

    Gaussian-centred radial values are used as is.  Plain radial values of
    heavy-tailed targets have no finite variance, so their logarithm is used.
    """
    if trace.meta.get("radial_mode") == "plain":
        return np.log(trace.radial)
    return trace.radial


def summarize(trace) -> dict:
    """Summary row: acceptance rate, IATs (in steps) and longest rejection run.

    IATs of thinned traces are scaled back by the thinning factor.  A chain
    that never moves gets an infinite IAT; a series that was not recorded (or
    is too short) gets ``nan``.
    """
    rate, longest = stuck_statistics(trace.accepted)
    thin = trace.meta.get("thin", 1)
    out = {"acceptance_rate": rate, "longest_reject_run": longest}
    for name, series in (("iat_radial", chain_statistic(trace)), ("iat_coord1", trace.coord1)):
        if len(series) < MIN_IAT_LENGTH:
            out[name] = float("nan")
            continue
        try:
            out[name] = thin * integrated_autocorr_time(series)
        except DegenerateInputError:
            out[name] = float("inf")
    return out
