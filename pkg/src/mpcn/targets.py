"""Target distributions as unnormalised log-densities.

Targets built by the named constructors also carry a ``kind``/``params``
description that the compiled chain core understands.  Anything else (a
generic scale mixture, a user callable) runs on the pure-Python path.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from .errors import DomainError, NumericalError
from .rand import InvGammaParams, RngStream, log_sq_norm

_LOG_2PI = float(np.log(2.0 * np.pi))

# codes shared with the compiled core
KIND_CODES = {"gaussian": 0, "student_t": 1, "perturbed_t": 2}


@dataclass(frozen=True)
class MixingInfo:
    """Density ``q`` of the variance mixing law ``Q`` and its log-derivative.

    ``invgamma`` is set when ``Q`` is inverse-gamma, which makes the limiting
    drift affine and lets the compiled SDE stepper take over.
    """

    log_q: Callable[[float], float]
    dlog_q: Callable[[float], float]
    invgamma: Optional[InvGammaParams] = None

    def dlog_qtilde(self, y):
        """Derivative of ``log(y * q(y))``."""
        return 1.0 / y + self.dlog_q(y)

    def log_qtilde(self, y):
        return np.log(y) + self.log_q(y)

    def log_qd(self, r, d: int, rtol: float = 1e-12):
        """Log density of ``||X||^2 / d`` when ``X | Z ~ N_d(0, Z I)``, ``Z ~ Q``.

        Closed form (a scaled F law) for inverse-gamma mixing, quadrature otherwise.
        """
        if self.invgamma is not None:
            a, b = self.invgamma.shape, self.invgamma.scale
            s = b / a
            x = np.asarray(r, dtype=float) / s
            d1, d2 = float(d), 2.0 * a
            return (0.5 * d1 * np.log(d1 / d2) + (0.5 * d1 - 1.0) * np.log(x)
                    - 0.5 * (d1 + d2) * np.log1p(d1 * x / d2)
                    - (gammaln(0.5 * d1) + gammaln(0.5 * d2) - gammaln(0.5 * (d1 + d2)))
                    - np.log(s))
        return _mixture_log_qd(float(r), d, self, rtol)

    def log_qtilde_d(self, r, d: int):
        """``log(r * q_d(r))``, the quantity whose ratio is the MpCN acceptance ratio."""
        return np.log(r) + self.log_qd(r, d)

    def sample(self, rng: RngStream, size=None):
        if self.invgamma is None:
            raise NotImplementedError("no sampler for a generic mixing density")
        return self.invgamma.scale / rng.standard_gamma(self.invgamma.shape, size)

    @classmethod
    def inverse_gamma(cls, shape: float, scale: float) -> "MixingInfo":
        p = InvGammaParams(shape, scale)
        const = shape * np.log(scale) - gammaln(shape)

        def log_q(y):
            return const - (shape + 1.0) * np.log(y) - scale / y

        def dlog_q(y):
            return -(shape + 1.0) / y + scale / (y * y)

        return cls(log_q=log_q, dlog_q=dlog_q, invgamma=p)


@dataclass(frozen=True)
class Target:
    dim: int
    log_density_unnorm: Callable[[np.ndarray], float]
    mixing: Optional[MixingInfo] = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    # location around which the radial statistics are measured
    center: Optional[np.ndarray] = None
    sampler: Optional[Callable] = None

    def __call__(self, x):
        return self.log_density_unnorm(x)

    @property
    def fast(self) -> bool:
        return self.kind in KIND_CODES

    @property
    def location(self) -> np.ndarray:
        return np.zeros(self.dim) if self.center is None else self.center

    def sample(self, rng: RngStream, n: Optional[int] = None) -> np.ndarray:
        """Exact draw(s), shape ``(d,)`` or ``(n, d)``.

        Only Gaussian and scale-mixture targets (and their shifts) can do this.
        """
        if self.sampler is None:
            raise NotImplementedError(f"no exact sampler for target {self.kind!r}")
        return self.sampler(rng, n)


def _check_dim(d):
    if int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d}")
    return int(d)


def target_gaussian(d: int, sigma: float = 1.0) -> Target:
    d = _check_dim(d)
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    log_s2 = 2.0 * np.log(sigma)

    def logp(x):
        lsq = log_sq_norm(x)
        return 0.0 if lsq == -np.inf else -np.exp(lsq - log_s2 - np.log(2.0))

    def sampler(rng, n=None):
        return sigma * rng.normal(d if n is None else (n, d))

    return Target(d, logp, None, "gaussian", {"sigma": float(sigma)}, None, sampler)


def target_student_t(d: int, nu: float = 2.0, mu=0.0, sigma: float = 5.0) -> Target:
    """Multivariate t with ``nu`` degrees of freedom, location ``mu``, scale ``sigma``."""
    d = _check_dim(d)
    if not (nu > 0 and sigma > 0):
        raise DomainError(f"need nu > 0 and sigma > 0, got nu={nu}, sigma={sigma}")
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (d,)).copy()
    centered = not np.any(mu)
    expo = 0.5 * (nu + d)
    log_s2nu = 2.0 * np.log(sigma) + np.log(nu)

    def logp(x):
        lsq = log_sq_norm(np.asarray(x, dtype=float) - mu)
        # log(1 + s) with s = ||x - mu||^2 / (nu sigma^2), stable for huge s
        return -expo * float(np.logaddexp(0.0, lsq - log_s2nu))

    mixing = MixingInfo.inverse_gamma(0.5 * nu, 0.5 * nu * sigma**2)

    def sampler(rng, n=None):
        if n is None:
            return mu + np.sqrt(mixing.sample(rng)) * rng.normal(d)
        z = mixing.sample(rng, (n, 1))
        return mu + np.sqrt(z) * rng.normal((n, d))

    return Target(
        d,
        logp,
        mixing if centered else None,
        "student_t",
        {"nu": float(nu), "sigma": float(sigma)},
        None if centered else mu,
        sampler,
    )


def target_perturbed_t(d: int = 20) -> Target:
    """Asymmetric heavy-tailed density with exponent ``-(4 + d) / 2``."""
    d = _check_dim(d)
    if d < 2:
        raise DomainError("perturbed t needs d >= 2")
    expo = 0.5 * (4 + d)

    def logp(x):
        x = np.asarray(x, dtype=float)
        u = (x - 1.0) / 5.0
        inner = 1.0 + np.dot(u, u) + abs(x[0]) + 0.5 * np.sin(x[1])
        return -expo * float(np.log(inner))

    return Target(d, logp, None, "perturbed_t", {}, None, None)


def target_shifted(base: Target, xi) -> Target:
    """Translate ``base`` by ``xi * 1`` (scalar) or by the vector ``xi``."""
    shift = np.broadcast_to(np.asarray(xi, dtype=float), (base.dim,)).copy()
    if not np.any(shift):
        return base
    new_center = base.location + shift
    base_logp = base.log_density_unnorm

    def logp(x):
        return base_logp(np.asarray(x, dtype=float) - shift)

    sampler = None
    if base.sampler is not None:
        base_sampler = base.sampler

        def sampler(rng, n=None):
            return base_sampler(rng, n) + shift

    return Target(base.dim, logp, None, base.kind, dict(base.params), new_center, sampler)


def _log_quad(h, peak: float, rtol: float) -> float:
    """``log int exp(h(u)) du`` for a unimodal ``h`` peaking near ``peak``.

    The range is cut where the integrand falls below ``exp(-750)`` of its peak.
    """
    def hh(u):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            v = h(u)
        return v if np.isfinite(v) else -np.inf

    hmax = hh(peak)
    if not np.isfinite(hmax):
        raise NumericalError("non-finite integrand at its mode", peak=peak, value=hmax)
    bounds = []
    for sign in (-1.0, 1.0):
        step = 1.0
        while hh(peak + sign * step) > hmax - 750.0:
            step *= 2.0
            if step > 1e4:
                raise NumericalError("integrand does not decay", peak=peak, direction=sign)
        bounds.append(peak + sign * step)

    def f(u):
        return np.exp(hh(u) - hmax)

    lo, e1 = integrate.quad(f, bounds[0], peak, epsrel=rtol, epsabs=0.0, limit=500)
    hi, e2 = integrate.quad(f, peak, bounds[1], epsrel=rtol, epsabs=0.0, limit=500)
    total = lo + hi
    if not (total > 0 and np.isfinite(total)) or (e1 + e2) > 1e3 * rtol * total + 1e-14:
        raise NumericalError("quadrature did not converge", integral=total, abserr=e1 + e2, peak=peak)
    return hmax + float(np.log(total))


def _mixture_logpdf(lsq: float, d: int, mixing: MixingInfo, rtol: float) -> float:
    # log of int phi_d(x; 0, z I) q(z) dz with z = exp(u)
    def h(u):
        return -0.5 * d * (_LOG_2PI + u) - 0.5 * np.exp(lsq - u) + mixing.log_q(np.exp(u)) + u

    if lsq == -np.inf:
        peak = optimize.minimize_scalar(lambda u: -h(u), bounds=(-50.0, 50.0), method="bounded").x
    else:
        guess = lsq - np.log(d)
        peak = optimize.minimize_scalar(lambda u: -h(u), bracket=(guess - 1.0, guess + 1.0)).x
    return _log_quad(h, peak, rtol)


def _mixture_log_qd(r: float, d: int, mixing: MixingInfo, rtol: float) -> float:
    # ||X||^2 / d = Z * chi2_d / d: integrate q(z) times the scaled chi-square density
    half = 0.5 * d
    const = half * np.log(half) - gammaln(half)

    def h(u):
        z = np.exp(u)
        # the Jacobian dz = z du cancels one power of z
        return mixing.log_q(z) + const + (half - 1.0) * (np.log(r) - u) - half * r / z

    peak = optimize.minimize_scalar(lambda u: -h(u), bracket=(np.log(r) - 1.0, np.log(r) + 1.0)).x
    return _log_quad(h, peak, rtol)


def target_scale_mixture(d: int, mixing: MixingInfo, rtol: float = 1e-9) -> Target:
    """``X | Z ~ N_d(0, Z I)``, ``Z ~ Q``, evaluated by 1-D quadrature in ``log z``."""
    d = _check_dim(d)

    def logp(x):
        return _mixture_logpdf(log_sq_norm(x), d, mixing, rtol)

    sampler = None
    if mixing.invgamma is not None:

        def sampler(rng, n=None):
            if n is None:
                return np.sqrt(mixing.sample(rng)) * rng.normal(d)
            return np.sqrt(mixing.sample(rng, (n, 1))) * rng.normal((n, d))

    return Target(d, logp, mixing, "custom", {}, None, sampler)


def with_constant(target: Target, c: float) -> Target:
    """Same target with ``c`` added to the log-density (forces the Python path)."""
    base = target.log_density_unnorm
    return replace(target, log_density_unnorm=lambda x: base(x) + c, kind="custom")


def make_target(name: str, d: int, **params) -> Target:
    """Build a target from its config name and parameter map."""
    if name == "gaussian":
        return target_gaussian(d, params.get("sigma", 1.0))
    if name == "student_t":
        return target_student_t(d, params.get("nu", 2.0), params.get("mu", 0.0), params.get("sigma", 5.0))
    if name == "perturbed_t":
        return target_perturbed_t(d)
    raise DomainError(f"unknown target {name!r}")
