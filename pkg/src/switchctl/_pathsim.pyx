# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-path loop for the feedback-policy simulator.

Mirrors the numpy engine step for step: same multilinear interpolation
expressions, same catalog evaluation, same cost accumulation order, and
the caller supplies the same per-path Gaussian blocks, so trajectories are
bitwise identical across backends (costs agree to rounding of exp).

Diagonal diffusion only; the engine falls back to numpy otherwise.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, floor, cos, fabs

cnp.import_array()

DEF PI = 3.14159265358979323846


cdef inline double cat_eval(const double* row, double x0, double x1, int d) nogil:
    """Evaluate one encoded catalog row at a point.

    Layout: [kind, value, amplitude, s0, s1, q00, q01, q11, c0, c1, w0, w1].
    """
    cdef int kind = <int>row[0]
    cdef double v = row[1]
    cdef double t0, t1, bump
    if kind == 0:
        return v
    if kind == 1:
        v += row[3] * x0
        if d == 2:
            v += row[4] * x1
        return v
    if kind == 2:
        v += row[3] * x0 + row[5] * x0 * x0
        if d == 2:
            v += row[4] * x1 + row[7] * x1 * x1 + 2.0 * row[6] * x0 * x1
        return v
    # cosine bump
    t0 = (x0 - row[8]) / row[10]
    if t0 < -1.0 or t0 > 1.0:
        return v
    bump = cos(0.5 * PI * t0)
    bump *= bump
    if d == 2:
        t1 = (x1 - row[9]) / row[11]
        if t1 < -1.0 or t1 > 1.0:
            return v
        t1 = cos(0.5 * PI * t1)
        bump *= t1 * t1
    return v + row[2] * bump


cdef inline double interp_flat(const double* table, int d, int nx, int ny,
                               double lo0, double lo1, double h0, double h1,
                               double x0, double x1) nogil:
    cdef long i, j
    cdef double tx, ty, v
    i = <long>floor((x0 - lo0) / h0)
    if i < 0:
        i = 0
    if i > nx - 2:
        i = nx - 2
    tx = (x0 - (lo0 + i * h0)) / h0
    if d == 1:
        return table[i] * (1.0 - tx) + table[i + 1] * tx
    j = <long>floor((x1 - lo1) / h1)
    if j < 0:
        j = 0
    if j > ny - 2:
        j = ny - 2
    ty = (x1 - (lo1 + j * h1)) / h1
    v = (table[i * ny + j] * (1.0 - tx) * (1.0 - ty)
         + table[(i + 1) * ny + j] * tx * (1.0 - ty)
         + table[i * ny + j + 1] * (1.0 - tx) * ty
         + table[(i + 1) * ny + j + 1] * tx * ty)
    return v


cdef inline double phi_c(double t) nogil:
    if t <= 0.0:
        return 0.0
    if t >= 2.0:
        return t - 1.0
    return 0.25 * t * t


cdef inline double phi_prime_c(double t) nogil:
    if t <= 0.0:
        return 0.0
    if t >= 2.0:
        return 1.0
    return 0.5 * t


def run_policy_block(double[::1] x,
                     cnp.int64_t[::1] ell,
                     double[::1] state,
                     double[:, ::1] normals,
                     double dt,
                     double sqrt_dt,
                     int zero_diff,
                     int d,
                     int m,
                     int nx,
                     int ny,
                     double[::1] lo,
                     double[::1] hs,
                     double[:, ::1] values,
                     double[:, :, ::1] grads,
                     double[:, :, ::1] enc,
                     double[:, ::1] theta,
                     double eps,
                     double switch_tol,
                     double[::1] gamma0,
                     int dom_kind,
                     double[::1] dom_lo,
                     double[::1] dom_hi,
                     double[::1] centre,
                     double radius):
    """Advance one path through up to normals.shape[0] Euler steps.

    state = [r, cost, unused, unused]; x and ell are mutated in place.
    Returns (status, steps_used): status 0 = block exhausted (still alive),
    1 = absorbed at the boundary, 3 = chatter guard tripped.
    """
    cdef int B = normals.shape[0]
    cdef int j, k, ax, l, best, nfn
    cdef double r = state[0]
    cdef double cost = state[1]
    cdef double x0 = x[0]
    cdef double x1 = x[1] if d == 2 else 0.0
    cdef double lo0 = lo[0], lo1 = lo[1], h0 = hs[0], h1 = hs[1]
    cdef double own, mu, cand, gn, gval, hval, cval, tt, pp, rate, disc, lcost
    cdef double g0, g1v, dir0, dir1, b0, b1, a0, a1, nx0, nx1, dx
    cdef int status = 0
    cdef int used = 0
    nfn = 3 + d + d * d

    for j in range(B):
        l = <int>ell[0]
        # --- switching rule at the step start
        if m > 1:
            own = interp_flat(&values[l, 0], d, nx, ny, lo0, lo1, h0, h1, x0, x1)
            mu = 0.0
            best = -1
            for k in range(m):
                if k == l:
                    continue
                cand = interp_flat(&values[k, 0], d, nx, ny, lo0, lo1, h0, h1, x0, x1) + theta[l, k]
                if best < 0 or cand < mu:
                    mu = cand
                    best = k
            if own - mu >= -switch_tol:
                cost += exp(-r) * theta[l, best]
                l = best
                ell[0] = l
                # immediate re-switch at the same point means chattering
                own = interp_flat(&values[l, 0], d, nx, ny, lo0, lo1, h0, h1, x0, x1)
                mu = 0.0
                best = -1
                for k in range(m):
                    if k == l:
                        continue
                    cand = interp_flat(&values[k, 0], d, nx, ny, lo0, lo1, h0, h1, x0, x1) + theta[l, k]
                    if best < 0 or cand < mu:
                        mu = cand
                        best = k
                if own - mu >= -switch_tol:
                    status = 3
                    used = j
                    break

        # --- control from the interpolated gradient
        g0 = interp_flat(&grads[l, 0, 0] + 0, d, nx, ny, lo0, lo1, h0, h1, x0, x1) if d == 1 \
            else interp_strided(&grads[l, 0, 0], 2, nx, ny, lo0, lo1, h0, h1, x0, x1, 0)
        if d == 1:
            gn = sqrt(g0 * g0)
            g1v = 0.0
        else:
            g1v = interp_strided(&grads[l, 0, 0], 2, nx, ny, lo0, lo1, h0, h1, x0, x1, 1)
            gn = sqrt(g0 * g0 + g1v * g1v)
        gval = cat_eval(&enc[l, 2, 0], x0, x1, d)
        tt = gn * gn - gval * gval
        pp = phi_prime_c(tt / eps) / eps
        rate = 2.0 * pp * gn
        if gn > 1e-12:
            dir0 = g0 / gn
            dir1 = g1v / gn
        else:
            dir0 = gamma0[0]
            dir1 = gamma0[1]

        # --- accumulate discounted running cost (left endpoint)
        hval = cat_eval(&enc[l, 1, 0], x0, x1, d)
        cval = cat_eval(&enc[l, 0, 0], x0, x1, d)
        disc = exp(-r)
        lcost = 2.0 * pp * gn * gn - phi_c(tt / eps)
        cost += disc * (hval + lcost) * dt

        # --- Euler step (diagonal diffusion)
        b0 = cat_eval(&enc[l, 3, 0], x0, x1, d)
        a0 = cat_eval(&enc[l, 3 + d, 0], x0, x1, d)
        nx0 = x0 - (b0 + dir0 * rate) * dt
        if zero_diff == 0:
            nx0 += sqrt_dt * sqrt(2.0 * a0) * normals[j, 0]
        if d == 2:
            b1 = cat_eval(&enc[l, 4, 0], x0, x1, d)
            a1 = cat_eval(&enc[l, 3 + d + 3, 0], x0, x1, d)
            nx1 = x1 - (b1 + dir1 * rate) * dt
            if zero_diff == 0:
                nx1 += sqrt_dt * sqrt(2.0 * a1) * normals[j, 1]
        else:
            nx1 = 0.0
        x0 = nx0
        x1 = nx1
        r += cval * dt
        used = j + 1

        # --- exit test on the open domain
        if dom_kind == 0:
            if not (dom_lo[0] < x0 < dom_hi[0]):
                status = 1
                break
            if d == 2 and not (dom_lo[1] < x1 < dom_hi[1]):
                status = 1
                break
        else:
            dx = (x0 - centre[0]) * (x0 - centre[0]) + (x1 - centre[1]) * (x1 - centre[1])
            if dx >= radius * radius:
                status = 1
                break

    x[0] = x0
    if d == 2:
        x[1] = x1
    state[0] = r
    state[1] = cost
    return status, used


cdef inline double interp_strided(const double* table, int stride, int nx, int ny,
                                  double lo0, double lo1, double h0, double h1,
                                  double x0, double x1, int comp) nogil:
    """Bilinear interpolation of component ``comp`` of an (N, stride) table."""
    cdef long i, j
    cdef double tx, ty
    i = <long>floor((x0 - lo0) / h0)
    if i < 0:
        i = 0
    if i > nx - 2:
        i = nx - 2
    tx = (x0 - (lo0 + i * h0)) / h0
    j = <long>floor((x1 - lo1) / h1)
    if j < 0:
        j = 0
    if j > ny - 2:
        j = ny - 2
    ty = (x1 - (lo1 + j * h1)) / h1
    return (table[(i * ny + j) * stride + comp] * (1.0 - tx) * (1.0 - ty)
            + table[((i + 1) * ny + j) * stride + comp] * tx * (1.0 - ty)
            + table[(i * ny + j + 1) * stride + comp] * (1.0 - tx) * ty
            + table[((i + 1) * ny + j + 1) * stride + comp] * tx * ty)
