"""Metropolis-Hastings engine with RWM, pCN and MpCN proposal kernels.

Everything is computed in log space.  The log proposal correction returned by
a kernel is the term that, added to ``log p(y) - log p(x)``, gives the
Metropolis-Hastings log acceptance ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _backend
from .errors import DomainError, StateError
from .rand import RngStream
from .targets import KIND_CODES, Target

KERNEL_KINDS = ("rwm_gauss", "rwm_t", "pcn", "mpcn", "mpcn_general")
_KERNEL_CODES = {k: i for i, k in enumerate(KERNEL_KINDS)}
_REQUIRED = {
    "rwm_gauss": {"sigma_d"},
    "rwm_t": {"sigma_d", "df"},
    "pcn": {"rho"},
    "mpcn": {"rho"},
    "mpcn_general": {"rho", "nu_bar"},
}

#: steps per pre-drawn noise block; part of the reproducibility contract
CHUNK = 4096


@dataclass
class ProposalKernel:
    kind: str
    rho: Optional[float] = None
    sigma_d: Optional[float] = None
    df: Optional[float] = None
    nu_bar: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _REQUIRED:
            raise DomainError(f"unknown kernel kind {self.kind!r}")
        given = {k for k in ("rho", "sigma_d", "df", "nu_bar") if getattr(self, k) is not None}
        need = _REQUIRED[self.kind]
        if given != need:
            raise DomainError(f"{self.kind} takes parameters {sorted(need)}, got {sorted(given)}")
        if self.rho is not None and not 0.0 < self.rho < 1.0:
            raise DomainError(f"rho must lie in (0, 1), got {self.rho}")
        for name in ("sigma_d", "df", "nu_bar"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise DomainError(f"{name} must be positive, got {v}")

    @property
    def code(self) -> int:
        return _KERNEL_CODES[self.kind]

    @property
    def needs_gamma(self) -> bool:
        return self.kind in ("mpcn", "mpcn_general")

    def gamma_shape(self, d: int) -> float:
        return 0.5 * d if self.kind == "mpcn" else 0.5 * (d + self.nu_bar)

    def params(self) -> dict:
        return {k: getattr(self, k) for k in sorted(_REQUIRED[self.kind])}

    # -- noise ----------------------------------------------------------------
    def draw_noise(self, n: int, d: int, rng: RngStream):
        """Noise block for ``n`` steps, drawn in the fixed order noise, gamma, uniform."""
        if self.kind == "rwm_t":
            w = rng.standard_t(self.df, (n, d))
        else:
            w = rng.normal((n, d))
        g = rng.standard_gamma(self.gamma_shape(d), n) if self.needs_gamma else None
        u = rng.uniform(n)
        return w, g, u

    # -- proposals ------------------------------------------------------------
    def move(self, X, w, g):
        """Deterministic part of the proposal given the noise.  Works on (n, d) arrays."""
        X = np.asarray(X, dtype=float)
        if self.kind in ("rwm_gauss", "rwm_t"):
            return X + self.sigma_d * w
        sr = math.sqrt(self.rho)
        if self.kind == "pcn":
            return sr * X + math.sqrt(1.0 - self.rho) * w
        sx = np.einsum("...i,...i->...", X, X)
        if self.kind == "mpcn":
            z = sx / (2.0 * g)
        else:
            z = (sx + self.nu_bar) / (2.0 * g)
        return sr * X + np.sqrt((1.0 - self.rho) * z)[..., None] * w

    def log_correction(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        sx = np.einsum("...i,...i->...", X, X)
        sy = np.einsum("...i,...i->...", Y, Y)
        d = X.shape[-1]
        if self.kind == "pcn":
            return 0.5 * (sy - sx)
        if self.kind == "mpcn":
            with np.errstate(divide="ignore"):
                return 0.5 * d * np.log(sy / sx)
        if self.kind == "mpcn_general":
            return 0.5 * (d + self.nu_bar) * np.log((self.nu_bar + sy) / (self.nu_bar + sx))
        return np.zeros_like(sx)

    def propose(self, x, rng: RngStream):
        """One proposal from ``x``: returns ``(y, log_correction, u)``.

        The uniform used for the accept test is drawn here so that every step
        consumes the same amount of randomness whatever the acceptance ratio.
        """
        x = np.asarray(x, dtype=float)
        if self.needs_gamma and self.kind == "mpcn" and not np.any(x):
            raise StateError("MpCN is undefined at x = 0")
        w, g, u = self.draw_noise(1, x.size, rng)
        y = self.move(x[None, :], w, g)[0]
        return y, float(self.log_correction(x, y)), float(u[0])

    def propose_batch(self, X, rng: RngStream):
        """Independent proposals from each row of ``X``."""
        X = np.asarray(X, dtype=float)
        n, d = X.shape
        w, g, u = self.draw_noise(n, d, rng)
        Y = self.move(X, w, g)
        return Y, self.log_correction(X, Y), u


def _proposal(kind, **kw):
    return ProposalKernel(kind, **kw)


def propose_rwm_gauss(state, sigma_d: float, rng: RngStream):
    y, corr, _ = _proposal("rwm_gauss", sigma_d=sigma_d).propose(state.x, rng)
    return y, corr


def propose_rwm_t(state, sigma_d: float, rng: RngStream, df: float = 2.0):
    y, corr, _ = _proposal("rwm_t", sigma_d=sigma_d, df=df).propose(state.x, rng)
    return y, corr


def propose_pcn(state, rho: float, rng: RngStream):
    y, corr, _ = _proposal("pcn", rho=rho).propose(state.x, rng)
    return y, corr


def propose_mpcn(state, rho: float, rng: RngStream):
    y, corr, _ = _proposal("mpcn", rho=rho).propose(state.x, rng)
    return y, corr


def propose_mpcn_general(state, rho: float, nu_bar: float, rng: RngStream):
    y, corr, _ = _proposal("mpcn_general", rho=rho, nu_bar=nu_bar).propose(state.x, rng)
    return y, corr


@dataclass
class ChainState:
    x: np.ndarray
    log_target: float
    sq_norm: float

    @classmethod
    def initial(cls, x, target: Target) -> "ChainState":
        x = np.array(x, dtype=float)
        if x.shape != (target.dim,):
            raise DomainError(f"initial state has shape {x.shape}, expected ({target.dim},)")
        return cls(x, float(target(x)), float(x @ x))

    @property
    def log_radial(self) -> float:
        """``d * log ||x||``, the log of the MpCN reference density's reciprocal."""
        return 0.5 * self.x.size * math.log(self.sq_norm) if self.sq_norm > 0 else -math.inf


@dataclass
class StepOutcome:
    state: ChainState
    proposed: np.ndarray
    accepted: bool
    log_alpha: float


def mh_step(state: ChainState, kernel: ProposalKernel, target: Target, rng: RngStream) -> StepOutcome:
    """One Metropolis-Hastings transition.

    Non-finite target or correction values at the proposal reject the move.
    """
    if kernel.kind == "mpcn" and state.sq_norm == 0.0:
        raise StateError("MpCN is undefined at x = 0")
    y, corr, u = kernel.propose(state.x, rng)
    lpy = float(target(y))
    la = lpy - state.log_target + corr
    if math.isnan(la) or math.isinf(lpy) or math.isinf(corr):
        la = -math.inf
    la = min(0.0, la)
    accepted = (math.log(u) if u > 0.0 else -math.inf) < la
    if accepted:
        state = ChainState(y, lpy, float(y @ y))
    return StepOutcome(state, y, accepted, la)


@dataclass
class ChainTrace:
    radial: np.ndarray
    coord1: np.ndarray
    accepted: np.ndarray
    meta: dict
    final: np.ndarray
    nonfinite: int = 0
    path: Optional[np.ndarray] = None

    def __len__(self):
        return self.radial.size


def radial_mode_for(target: Target) -> str:
    return "gaussian_centered" if target.kind == "gaussian" else "plain"


def _target_args(target: Target):
    p = target.params
    return (
        KIND_CODES[target.kind],
        float(p.get("sigma", 1.0)),
        float(p.get("nu", 1.0)),
        np.ascontiguousarray(target.location, dtype=float),
    )


def _python_target_block(kernel, target, x, lp, w, g, u, stat_center, radial_mode, coord_offset,
                         radial, coord, acc, path, start):
    # generic targets: the same loop, with the target's own callable
    d = x.size
    nonfinite = 0
    sqrt2d = math.sqrt(2.0 * d)
    for m in range(u.size):
        y = kernel.move(x[None, :], w[m:m + 1], None if g is None else g[m:m + 1])[0]
        corr = float(kernel.log_correction(x, y))
        lpy = float(target(y))
        la = lpy - lp + corr
        if math.isnan(la) or math.isinf(lpy) or math.isinf(corr):
            la = -math.inf
            nonfinite += 1
        la = min(0.0, la)
        ok = (math.log(u[m]) if u[m] > 0.0 else -math.inf) < la
        if ok:
            x[:] = y
            lp = lpy
        k = start + m
        r = x - stat_center
        rr = float(r @ r)
        radial[k] = (rr - d) / sqrt2d if radial_mode == 0 else rr / d
        coord[k] = x[0] + coord_offset
        acc[k] = ok
        if path is not None:
            path[k] = x
    return lp, nonfinite


def run_chain(
    x0,
    kernel: ProposalKernel,
    target: Target,
    M: int,
    rng: RngStream,
    *,
    radial_mode: Optional[str] = None,
    stat_center=None,
    offset=None,
    record: tuple = ("radial", "coord1"),
    thin: int = 1,
    record_path: bool = False,
    backend: Optional[str] = None,
    chunk: int = CHUNK,
) -> ChainTrace:
    """Run ``M`` MH steps from ``x0`` and record the panel statistics.

    ``radial`` holds the radial statistic of each state measured around
    ``stat_center`` (default: the target's location); ``coord1`` holds the first
    coordinate plus ``offset[0]``, which lets a recentred chain report in the
    original coordinates.  Series missing from ``record`` come back empty;
    acceptance flags are always kept.  Full paths are stored only with
    ``record_path``.  With ``thin > 1`` only every ``thin``-th state enters the
    radial and coordinate series.
    """
    if M < 0:
        raise DomainError("M must be non-negative")
    d = target.dim
    x = np.array(x0, dtype=float)
    if x.shape != (d,):
        raise DomainError(f"x0 has shape {x.shape}, expected ({d},)")
    if kernel.kind == "mpcn" and not np.any(x):
        raise StateError("MpCN chains cannot start at x = 0")
    mode = radial_mode or radial_mode_for(target)
    mode_code = {"gaussian_centered": 0, "plain": 1}[mode]
    center = target.location if stat_center is None else np.asarray(stat_center, dtype=float)
    center = np.ascontiguousarray(np.broadcast_to(center, (d,)), dtype=float)
    coord_offset = 0.0 if offset is None else float(np.asarray(offset, dtype=float).ravel()[0])

    if thin < 1:
        raise DomainError("thin must be >= 1")
    keep_radial = "radial" in record
    keep_coord = "coord1" in record
    n_rec = M // thin
    radial = np.empty(n_rec if keep_radial else 0)
    coord = np.empty(n_rec if keep_coord else 0)
    acc = np.zeros(M, dtype=np.uint8)
    path = np.empty((M, d)) if record_path else None
    # per-block scratch so unrecorded series never occupy M slots
    b_rad = np.empty(min(chunk, M))
    b_coord = np.empty(min(chunk, M))
    lp = float(target(x))
    nonfinite = 0
    impl = _backend.get(backend)
    fast = target.fast
    if fast:
        tcode, tsigma, tnu, tcenter = _target_args(target)
        lp = float(impl.log_target(tcode, tsigma, tnu, tcenter, x))
    for start in range(0, M, chunk):
        n = min(chunk, M - start)
        w, g, u = kernel.draw_noise(n, d, rng)
        w = np.ascontiguousarray(w)
        b_acc = acc[start:start + n]
        b_path = None if path is None else path[start:start + n]
        if fast:
            gg = g if g is not None else np.empty(0)
            lp, nf = impl.run_chain_block(
                kernel.code,
                kernel.rho or 0.5,
                kernel.sigma_d or 0.0,
                kernel.nu_bar or 0.0,
                tcode, tsigma, tnu, tcenter,
                x, lp, w, gg, u, center, mode_code, coord_offset,
                b_rad, b_coord, b_acc, b_path, 0,
            )
        else:
            lp, nf = _python_target_block(
                kernel, target, x, lp, w, g, u, center, mode_code, coord_offset,
                b_rad, b_coord, b_acc, b_path, 0,
            )
        if thin == 1:
            sel, dst = slice(0, n), slice(start, start + n)
        else:
            first = (-(start + 1)) % thin
            sel = slice(first, n, thin)
            k0 = (start + first + 1) // thin - 1
            dst = slice(k0, k0 + len(range(first, n, thin)))
        if keep_radial:
            radial[dst] = b_rad[sel]
        if keep_coord:
            coord[dst] = b_coord[sel]
        nonfinite += nf
    meta = {
        "d": d,
        "kernel": kernel.kind,
        **kernel.params(),
        "target": target.kind,
        **{f"target_{k}": v for k, v in target.params.items()},
        "seed": rng.seed,
        "stream_id": rng.stream_id,
        "M": M,
        "radial_mode": mode,
        "chunk": chunk,
        "thin": thin,
    }
    return ChainTrace(radial, coord, acc.astype(bool), meta, x, nonfinite, path)


def mpcn_proposal_logpdf(x, y, rho: float, method: str = "quad") -> float:
    """Log density of the MpCN proposal ``y`` given ``x`` (mixing variable integrated out).

    ``quad`` integrates ``InvGamma(z; d/2, ||x||^2/2) * N(y; sqrt(rho) x, (1-rho) z I)``
    numerically over ``log z``; ``closed`` uses the analytic integral.
    """
    from scipy.special import gammaln

    from .targets import _log_quad

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x.size
    sx = float(x @ x)
    r = y - math.sqrt(rho) * x
    q = float(r @ r) / (1.0 - rho)
    log_norm = 0.5 * d * math.log(0.5 * sx) - gammaln(0.5 * d) - 0.5 * d * math.log(2.0 * math.pi * (1.0 - rho))
    if method == "closed":
        # int z^{-d-1} exp(-(sx + q) / (2 z)) dz = Gamma(d) ((sx + q) / 2)^{-d}
        return log_norm + gammaln(d) - d * math.log(0.5 * (sx + q))
    if method != "quad":
        raise DomainError(f"unknown method {method!r}")

    def h(u):
        return -d * u - 0.5 * (sx + q) * math.exp(-u)

    return log_norm + _log_quad(h, math.log(0.5 * (sx + q) / d), 1e-13)


def mixing_log_alpha(target: Target, x, y) -> float:
    """MpCN log acceptance ratio written through the radial density of the target.

    Equals ``log qtilde_d(||y||^2/d) - log qtilde_d(||x||^2/d)`` (capped at 0);
    needs a scale-mixture target.
    """
    if target.mixing is None:
        raise DomainError("mixing form needs a scale-mixture target")
    d = target.dim
    rx = float(np.dot(x, x)) / d
    ry = float(np.dot(y, y)) / d
    return min(0.0, float(target.mixing.log_qtilde_d(ry, d) - target.mixing.log_qtilde_d(rx, d)))


def generic_log_alpha(kernel: ProposalKernel, target: Target, x, y) -> float:
    """``min(0, log p(y) - log p(x) + log correction)`` for a given proposal."""
    la = float(target(y)) - float(target(x)) + float(kernel.log_correction(x, y))
    return min(0.0, la) if not math.isnan(la) else -math.inf


def _eval_batch(target: Target, X):
    if target.kind == "gaussian":
        r = X - target.location
        return -np.einsum("ij,ij->i", r, r) / (2.0 * target.params["sigma"] ** 2)
    if target.kind == "student_t":
        r = X - target.location
        nu, s = target.params["nu"], target.params["sigma"]
        return -0.5 * (nu + target.dim) * np.log1p(np.einsum("ij,ij->i", r, r) / (nu * s * s))
    return np.array([target(x) for x in X])


def detailed_balance_statistic(
    kernel: ProposalKernel,
    target: Target,
    n: int,
    f: Callable,
    g: Callable,
    rng: RngStream,
):
    """Estimate ``E[f(X0) g(X1)] - E[g(X0) f(X1)]`` over ``n`` stationary transitions.

    ``X0`` is an exact draw from ``target`` and ``X1`` one MH step from it; a
    kernel that is reversible with respect to the target gives zero.  ``f`` and
    ``g`` act row-wise on an ``(n, d)`` array.  Returns ``(estimate, std_error)``.
    """
    if f is g:
        return 0.0, 0.0
    X0 = target.sample(rng, n)
    Y, corr, u = kernel.propose_batch(X0, rng)
    with np.errstate(invalid="ignore"):
        la = _eval_batch(target, Y) - _eval_batch(target, X0) + corr
    la = np.where(np.isnan(la), -np.inf, np.minimum(la, 0.0))
    with np.errstate(divide="ignore"):
        accept = np.log(u) < la
    X1 = np.where(accept[:, None], Y, X0)
    h = f(X0) * g(X1) - g(X0) * f(X1)
    return float(h.mean()), float(h.std(ddof=1) / math.sqrt(n))
