# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled chain and SDE kernels; see ``_pycore`` for the reference version."""
from libc.math cimport sqrt, log, log1p, sin, fabs, isnan, isinf, INFINITY

cdef enum:
    RWM_GAUSS = 0
    RWM_T = 1
    PCN = 2
    MPCN = 3
    MPCN_GENERAL = 4

cdef enum:
    GAUSSIAN = 0
    STUDENT_T = 1
    PERTURBED_T = 2


cdef double _log_target(int tcode, double tsigma, double tnu, const double[::1] center,
                        double* x, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0, t, inner
    if tcode == GAUSSIAN:
        for i in range(d):
            t = x[i] - center[i]
            s += t * t
        return -s / (2.0 * (tsigma * tsigma))
    if tcode == STUDENT_T:
        for i in range(d):
            t = x[i] - center[i]
            s += t * t
        return -0.5 * (tnu + d) * log1p(s / (tnu * (tsigma * tsigma)))
    for i in range(d):
        t = (x[i] - center[i] - 1.0) / 5.0
        s += t * t
    inner = 1.0 + s + fabs(x[0] - center[0]) + 0.5 * sin(x[1] - center[1])
    return -0.5 * (4.0 + d) * log(inner)


def log_target(int tcode, double tsigma, double tnu, const double[::1] center, double[::1] x):
    return _log_target(tcode, tsigma, tnu, center, &x[0], x.shape[0])


def run_chain_block(int kcode, double rho, double sigma_d, double nu_bar,
                    int tcode, double tsigma, double tnu, const double[::1] center,
                    double[::1] x, double lp,
                    const double[:, ::1] noise, const double[::1] gam, const double[::1] unif,
                    const double[::1] stat_center, int radial_mode, double coord_offset,
                    double[::1] radial_out, double[::1] coord_out, unsigned char[::1] acc_out,
                    path_out, Py_ssize_t start):
    cdef Py_ssize_t d = x.shape[0]
    cdef Py_ssize_t n = unif.shape[0]
    cdef Py_ssize_t m, i, k
    cdef double sr = sqrt(rho), s1r = sqrt(1.0 - rho), sqrt2d = sqrt(2.0 * d)
    cdef double sx = 0.0, sy, scale, corr, lpy, la, u, lu, r, t
    cdef long nonfinite = 0
    cdef bint accepted
    cdef bint record_path = path_out is not None
    cdef double[:, ::1] path
    if record_path:
        path = path_out
    cdef double[::1] ybuf = x.copy()
    cdef double* y = &ybuf[0]

    for i in range(d):
        sx += x[i] * x[i]
    with nogil:
        for m in range(n):
            if kcode == RWM_GAUSS or kcode == RWM_T:
                for i in range(d):
                    y[i] = x[i] + sigma_d * noise[m, i]
            elif kcode == PCN:
                for i in range(d):
                    y[i] = sr * x[i] + s1r * noise[m, i]
            else:
                if kcode == MPCN:
                    scale = sqrt((1.0 - rho) * (sx / (2.0 * gam[m])))
                else:
                    scale = sqrt((1.0 - rho) * ((sx + nu_bar) / (2.0 * gam[m])))
                for i in range(d):
                    y[i] = sr * x[i] + scale * noise[m, i]
            sy = 0.0
            for i in range(d):
                sy += y[i] * y[i]

            if kcode == PCN:
                corr = 0.5 * (sy - sx)
            elif kcode == MPCN:
                corr = 0.5 * d * log(sy / sx) if sy > 0.0 else -INFINITY
            elif kcode == MPCN_GENERAL:
                corr = 0.5 * (d + nu_bar) * log((nu_bar + sy) / (nu_bar + sx))
            else:
                corr = 0.0

            lpy = _log_target(tcode, tsigma, tnu, center, y, d)
            la = lpy - lp + corr
            if isnan(la) or isinf(lpy) or isinf(corr):
                la = -INFINITY
                nonfinite += 1
            elif la > 0.0:
                la = 0.0
            u = unif[m]
            lu = log(u) if u > 0.0 else -INFINITY
            accepted = lu < la
            if accepted:
                for i in range(d):
                    x[i] = y[i]
                lp = lpy
                sx = sy

            k = start + m
            r = 0.0
            for i in range(d):
                t = x[i] - stat_center[i]
                r += t * t
            if radial_mode == 0:
                radial_out[k] = (r - d) / sqrt2d
            else:
                radial_out[k] = r / d
            coord_out[k] = x[0] + coord_offset
            acc_out[k] = 1 if accepted else 0
            if record_path:
                for i in range(d):
                    path[k, i] = x[i]
    return lp, nonfinite


def euler_affine(double a0, double a1, double b2, double y0, double dt,
                 const double[::1] noise, double[::1] out):
    cdef Py_ssize_t k, n = noise.shape[0]
    cdef double y = y0
    with nogil:
        for k in range(n):
            y = y + (a0 + a1 * y) * dt + sqrt(b2 * y * y * dt) * noise[k]
            if y <= 0.0:
                y = -y if y < 0.0 else 5e-324
            out[k] = y
    return y
