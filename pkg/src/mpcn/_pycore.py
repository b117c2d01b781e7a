"""Pure-Python chain and SDE kernels.

Mirrors ``_core.pyx``; used when the extension is not built or when
``MPCN_BACKEND=python`` is set.  Both consume the same pre-drawn noise blocks,
so the two backends agree up to summation-order rounding.
"""
import math

RWM_GAUSS, RWM_T, PCN, MPCN, MPCN_GENERAL = range(5)
GAUSSIAN, STUDENT_T, PERTURBED_T = range(3)
CENTERED, PLAIN = range(2)


def log_target(tcode, tsigma, tnu, center, x):
    d = x.shape[0]
    if tcode == GAUSSIAN:
        r = x - center
        return -float(r @ r) / (2.0 * (tsigma * tsigma))
    if tcode == STUDENT_T:
        r = x - center
        return -0.5 * (tnu + d) * math.log1p(float(r @ r) / (tnu * (tsigma * tsigma)))
    r = x - center
    u = (r - 1.0) / 5.0
    inner = 1.0 + float(u @ u) + abs(r[0]) + 0.5 * math.sin(r[1])
    return -0.5 * (4.0 + d) * math.log(inner)


def run_chain_block(kcode, rho, sigma_d, nu_bar, tcode, tsigma, tnu, center,
                    x, lp, noise, gam, unif, stat_center, radial_mode, coord_offset,
                    radial_out, coord_out, acc_out, path_out, start):
    """Advance ``x`` in place through ``len(unif)`` MH steps; returns ``(lp, n_nonfinite)``."""
    d = x.shape[0]
    sr = math.sqrt(rho)
    s1r = math.sqrt(1.0 - rho)
    nonfinite = 0
    sx = float(x @ x)
    sqrt2d = math.sqrt(2.0 * d)
    for m in range(unif.shape[0]):
        w = noise[m]
        if kcode == RWM_GAUSS or kcode == RWM_T:
            y = x + sigma_d * w
        elif kcode == PCN:
            y = sr * x + s1r * w
        elif kcode == MPCN:
            y = sr * x + math.sqrt((1.0 - rho) * (sx / (2.0 * gam[m]))) * w
        else:
            y = sr * x + math.sqrt((1.0 - rho) * ((sx + nu_bar) / (2.0 * gam[m]))) * w
        sy = float(y @ y)

        if kcode == PCN:
            corr = 0.5 * (sy - sx)
        elif kcode == MPCN:
            corr = 0.5 * d * math.log(sy / sx) if sy > 0.0 else -math.inf
        elif kcode == MPCN_GENERAL:
            corr = 0.5 * (d + nu_bar) * math.log((nu_bar + sy) / (nu_bar + sx))
        else:
            corr = 0.0

        lpy = log_target(tcode, tsigma, tnu, center, y)
        la = lpy - lp + corr
        if math.isnan(la) or math.isinf(lpy) or math.isinf(corr):
            la = -math.inf
            nonfinite += 1
        elif la > 0.0:
            la = 0.0
        u = unif[m]
        accepted = (math.log(u) if u > 0.0 else -math.inf) < la
        if accepted:
            x[:] = y
            lp = lpy
            sx = sy

        k = start + m
        r = x - stat_center
        if radial_mode == CENTERED:
            radial_out[k] = (float(r @ r) - d) / sqrt2d
        else:
            radial_out[k] = float(r @ r) / d
        coord_out[k] = x[0] + coord_offset
        acc_out[k] = accepted
        if path_out is not None:
            path_out[k] = x
    return lp, nonfinite


def euler_affine(a0, a1, b2, y0, dt, noise, out):
    """Euler-Maruyama for ``dY = (a0 + a1 Y) dt + sqrt(b2 Y^2) dW``, reflected at 0."""
    y = y0
    for k in range(noise.shape[0]):
        y = y + (a0 + a1 * y) * dt + math.sqrt(b2 * y * y * dt) * noise[k]
        if y <= 0.0:
            y = -y if y < 0.0 else 5e-324
        out[k] = y
    return y
