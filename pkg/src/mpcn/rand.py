"""Seeded random streams and the handful of distributions the samplers need.

Gamma distributions are parametrised by shape and *rate*: the density is
proportional to ``x**(shape - 1) * exp(-rate * x)``.  Inverse-gamma
distributions use shape and scale with density
``scale**shape / Gamma(shape) * z**(-shape - 1) * exp(-scale / z)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

#: Recorded in every experiment config so that runs can be replayed.
RNG_ALGORITHM = "numpy.PCG64/SeedSequence(seed, spawn_key=(stream_id,))"

_LOG_2PI = float(np.log(2.0 * np.pi))


class RngStream:
    """One independent pseudo-random stream, identified by ``(seed, stream_id)``.

    A stream is owned by a single chain and must not be shared between threads.
    """

    def __init__(self, seed: int = 0, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise DomainError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def spawn(self, stream_id: int) -> "RngStream":
        """A sibling stream sharing this seed."""
        return RngStream(self.seed, stream_id)

    # thin pass-throughs, so callers never touch the generator directly
    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, size=None):
        return self.generator.random(size)

    def standard_gamma(self, shape, size=None):
        return self.generator.standard_gamma(shape, size)

    def standard_t(self, df, size=None):
        return self.generator.standard_t(df, size)


@dataclass(frozen=True)
class GammaParams:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError(f"Gamma needs shape > 0 and rate > 0, got {self}")


@dataclass(frozen=True)
class InvGammaParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError(f"InvGamma needs shape > 0 and scale > 0, got {self}")

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        nu, a = self.shape, self.scale
        with np.errstate(divide="ignore"):
            out = nu * np.log(a) - gammaln(nu) - (nu + 1.0) * np.log(z) - a / z
        return np.where(z > 0, out, -np.inf)

    def cdf(self, z):
        from scipy.special import gammaincc

        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(z > 0, gammaincc(self.shape, self.scale / np.where(z > 0, z, 1.0)), 0.0)


def sample_std_normal_vec(d: int, rng: RngStream) -> np.ndarray:
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    return rng.normal(d)


def sample_gamma(p: GammaParams, rng: RngStream, size=None):
    return rng.standard_gamma(p.shape, size) / p.rate


def sample_inv_gamma(p: InvGammaParams, rng: RngStream, size=None):
    """Draw ``scale / G`` with ``G ~ Gamma(shape, rate=1)``."""
    return p.scale / rng.standard_gamma(p.shape, size)


def sample_chi2(df: float, rng: RngStream, size=None):
    # Gamma(df/2, rate 1/2); exact and O(1) in df
    return 2.0 * rng.standard_gamma(0.5 * df, size)


def sample_t_scalar(df: float, rng: RngStream, size=None):
    """Student-t draw as a standard normal over ``sqrt(chi2(df) / df)``."""
    if not df > 0:
        raise DomainError(f"degrees of freedom must be positive, got {df}")
    return rng.standard_t(df, size)


def sq_norm(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.dot(x, x))


def log_sq_norm(x) -> float:
    """``log ||x||**2`` without overflowing for huge coordinates."""
    x = np.asarray(x, dtype=float)
    m = float(np.max(np.abs(x))) if x.size else 0.0
    if m == 0.0:
        return -np.inf
    if not np.isfinite(m):
        return np.inf
    u = x / m
    return 2.0 * np.log(m) + float(np.log(np.dot(u, u)))


def log_density_normal_vec(x, mean, var: float) -> float:
    """Log density of ``N_d(mean, var * I_d)`` at ``x``."""
    if not var > 0:
        raise DomainError(f"variance must be positive, got {var}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.broadcast_to(np.asarray(mean, dtype=float), x.shape)
    d = x.size
    lsq = log_sq_norm(x - mean)
    quad = 0.0 if lsq == -np.inf else np.exp(lsq - np.log(2.0 * var))
    return -0.5 * d * (_LOG_2PI + np.log(var)) - quad


def chi2_scaled_moment(d: int, k: float) -> float:
    """``E[(xi/d)**k]`` for ``xi`` chi-squared with ``d`` degrees of freedom."""
    if not 0.5 * d + k > 0:
        raise DomainError(f"moment of order {k} does not exist for d={d}")
    return float(np.exp(k * np.log(2.0 / d) + gammaln(0.5 * d + k) - gammaln(0.5 * d)))
