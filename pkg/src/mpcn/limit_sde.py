"""Diffusion limit of the MpCN radial statistic and the moment-triplet check.

For a scale-mixture target with mixing density ``q``, the radial process
``r_d(X_[d t]) = ||X_[d t]||^2 / d`` of an MpCN chain approaches

    dY = a(Y) dt + sqrt(b(Y)) dW,   Y_0 ~ Q,
    a(y) = 2 (2 y + (log q)'(y) y^2) (1 - rho),   b(y) = 4 y^2 (1 - rho).

One chain step corresponds to ``dt = 1 / d`` of diffusion time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _backend
from .errors import DegenerateInputError, DomainError
from .rand import RngStream
from .targets import MixingInfo, Target

EM_CHUNK = 1 << 20


@dataclass(frozen=True)
class DiffusionSpec:
    a: Callable[[float], float]
    b: Callable[[float], float]
    rho: float
    mixing: Optional[MixingInfo] = None
    # (a0, a1, b2) with a(y) = a0 + a1 y and b(y) = b2 y^2, when that holds
    affine: Optional[tuple] = None

    @classmethod
    def affine_spec(cls, a0: float, a1: float, b2: float, rho: float = 0.5) -> "DiffusionSpec":
        return cls(lambda y: a0 + a1 * y, lambda y: b2 * y * y, rho, None, (a0, a1, b2))


def diffusion_from_target(target: Target, rho: float) -> DiffusionSpec:
    if target.mixing is None:
        raise DomainError(
            f"target {target.kind!r} is not a scale mixture of normals; no diffusion limit"
        )
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    mix = target.mixing
    c = 1.0 - rho

    def a(y):
        return 2.0 * (2.0 * y + mix.dlog_q(y) * y * y) * c

    def b(y):
        return 4.0 * y * y * c

    affine = None
    if mix.invgamma is not None:
        # (log q)'(y) = -(shape + 1) / y + scale / y^2 makes the drift affine
        shape, scale = mix.invgamma.shape, mix.invgamma.scale
        affine = (2.0 * c * scale, 2.0 * c * (1.0 - shape), 4.0 * c)
    return DiffusionSpec(a, b, rho, mix, affine)


def euler_maruyama(spec: DiffusionSpec, y0: float, dt: float, steps: int, rng: RngStream,
                   backend: Optional[str] = None) -> np.ndarray:
    """Euler-Maruyama path ``Y_1..Y_steps`` (``y0`` excluded).

    A step that lands at or below zero is reflected to its absolute value.
    """
    if not y0 > 0:
        raise DomainError("y0 must be positive")
    if not dt > 0:
        raise DomainError("dt must be positive")
    out = np.empty(steps)
    y = float(y0)
    impl = _backend.get(backend)
    for start in range(0, steps, EM_CHUNK):
        n = min(EM_CHUNK, steps - start)
        z = rng.normal(n)
        if spec.affine is not None:
            a0, a1, b2 = spec.affine
            y = impl.euler_affine(a0, a1, b2, y, dt, z, out[start:start + n])
        else:
            for k in range(n):
                y = y + spec.a(y) * dt + math.sqrt(max(spec.b(y), 0.0) * dt) * z[k]
                if y <= 0.0:
                    y = -y if y < 0.0 else 5e-324
                out[start + k] = y
    return out


@dataclass
class TripletEstimate:
    bin_centers: np.ndarray
    a_hat: np.ndarray
    b_hat: np.ndarray
    c_hat: np.ndarray
    counts: np.ndarray
    suppressed: int = 0

    def __len__(self):
        return self.bin_centers.size


def _as_series(radial):
    if isinstance(radial, (list, tuple)):
        return [np.asarray(getattr(r, "radial", r), dtype=float) for r in radial]
    return [np.asarray(getattr(radial, "radial", radial), dtype=float)]


def empirical_triplet(radial, d: int, n_bins: int = 30, lo: float = 5.0, hi: float = 95.0,
                      min_count: int = 200, block: int = 1 << 22) -> TripletEstimate:
    """Binned ``d``-scaled conditional moments of one-step radial increments.

    ``radial`` is a plain radial series (``||x||^2 / d``), a trace carrying one,
    or a list of those from independent chains, which are pooled.  Bins are
    equal-probability between the ``lo`` and ``hi`` percentiles of the pooled
    values; bins with fewer than ``min_count`` transitions are dropped.
    """
    series = _as_series(radial)
    if sum(r.size - 1 for r in series) < 1:
        raise DegenerateInputError("need at least two radial values")
    pooled = series[0] if len(series) == 1 else np.concatenate(series)
    edges = np.percentile(pooled, np.linspace(lo, hi, n_bins + 1))
    del pooled
    acc = np.zeros((5, n_bins))
    for r in series:
        for s0 in range(0, r.size - 1, block):
            src = r[s0:s0 + block]
            dr = r[s0 + 1:s0 + block + 1] - src[: r.size - 1 - s0]
            src = src[: dr.size]
            idx = np.searchsorted(edges, src, side="right") - 1
            # the top edge belongs to the last bin
            idx[src == edges[-1]] = n_bins - 1
            inside = (idx >= 0) & (idx < n_bins)
            idx, src, dr = idx[inside], src[inside], dr[inside]
            dr2 = dr * dr
            acc[0] += np.bincount(idx, minlength=n_bins)
            acc[1] += np.bincount(idx, weights=src, minlength=n_bins)
            acc[2] += np.bincount(idx, weights=dr, minlength=n_bins)
            acc[3] += np.bincount(idx, weights=dr2, minlength=n_bins)
            acc[4] += np.bincount(idx, weights=dr2 * dr2, minlength=n_bins)
    counts = acc[0].astype(np.int64)
    keep = counts >= min_count
    n = acc[0][keep]
    return TripletEstimate(
        bin_centers=acc[1][keep] / n,
        a_hat=d * acc[2][keep] / n,
        b_hat=d * acc[3][keep] / n,
        c_hat=d * acc[4][keep] / n,
        counts=counts[keep],
        suppressed=int(np.count_nonzero(~keep)),
    )
