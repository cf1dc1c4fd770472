"""Penalty function and its Legendre-transform running cost.

The base profile is

    phi(t) = 0            t <= 0
           = t^2 / 4      0 < t < 2
           = t - 1        t >= 2

a convex C^1 function with 0 <= phi' <= 1; the scaled penalty is
psi_eps(t) = phi(t / eps).  The quadratic bridge on (0, 2) is a deliberate
C^1 weakening of a smooth profile: it gives closed forms everywhere and is
sufficient for the discrete scheme.

The dual running cost of an absolutely continuous control rate is

    l_eps(y, x) = sup_{rho >= 0} { rho |y| - psi_eps(rho^2 - g(x)^2) },

using radial symmetry in the control direction.  ``legendre`` computes it
by golden-section bracketing refined with bisection on the stationarity
condition; ``legendre_closed`` is an independent vectorized closed form
used in the Monte Carlo hot path; ``legendre_on_policy`` is the value along
the synthesized feedback rate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def phi(t):
    """Base penalty profile; vectorized."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 2.0, t - 1.0, 0.25 * t * t)
    out = np.where(t <= 0.0, 0.0, out)
    return out if out.ndim else float(out)


def phi_prime(t):
    """Derivative of the base profile: 0, t/2, 1 on the three branches."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 2.0, 1.0, 0.5 * t)
    out = np.where(t <= 0.0, 0.0, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Penalty:
    """Scaled penalty psi_eps(t) = phi(t / eps) with derivative phi'(t/eps)/eps."""

    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("penalty scale epsilon must be positive")

    def psi(self, t):
        return phi(np.asarray(t, dtype=float) / self.epsilon)

    def psi_prime(self, t):
        return phi_prime(np.asarray(t, dtype=float) / self.epsilon) / self.epsilon


def legendre(y_norm: float, g: float, penalty: Penalty) -> float:
    """Dual cost of a control rate of magnitude ``y_norm`` at cost slope ``g``.

    Maximizes f(rho) = rho*y - psi_eps(rho^2 - g^2) over rho >= 0.  f is
    concave; phi' <= 1 bounds the stationary point, so the initial bracket
    [0, max(g,1) + eps*y/2 + 10] closes after at most a few geometric
    expansions.
    """
    if y_norm < 0 or g < 0:
        raise ValueError("y_norm and g must be non-negative")
    if y_norm == 0.0:
        return 0.0
    eps = penalty.epsilon

    def slope(rho: float) -> float:
        return 2.0 * penalty.psi_prime(rho * rho - g * g) * rho - y_norm

    hi = max(g, 1.0) + 0.5 * eps * y_norm + 10.0
    while slope(hi) < 0.0:
        hi *= 2.0

    # golden-section localization of the concave maximum
    def f(rho: float) -> float:
        return rho * y_norm - penalty.psi(rho * rho - g * g)

    a, b = 0.0, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(80):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        if b - a < 1e-13 * max(1.0, hi):
            break

    # refine on the stationarity condition y = 2 psi'(rho^2-g^2) rho
    lo_r, hi_r = (a, b) if slope(a) <= 0.0 <= slope(b) else (0.0, hi)
    for _ in range(200):
        mid = 0.5 * (lo_r + hi_r)
        if mid == lo_r or mid == hi_r:
            break
        if slope(mid) < 0.0:
            lo_r = mid
        else:
            hi_r = mid
    rho = 0.5 * (lo_r + hi_r)
    return float(f(rho))


def legendre_on_policy(grad_norm, g, penalty: Penalty):
    """Dual cost along the feedback rate 2 psi'(q^2-g^2) q, q = grad_norm.

    Closed form 2 psi'(q^2-g^2) q^2 - psi(q^2-g^2); vectorized.
    """
    q = np.asarray(grad_norm, dtype=float)
    gg = np.asarray(g, dtype=float)
    t = q * q - gg * gg
    out = 2.0 * penalty.psi_prime(t) * q * q - penalty.psi(t)
    return out if out.ndim else float(out)


def legendre_closed(y_norm, g, penalty: Penalty):
    """Vectorized closed form of ``legendre`` for the quadratic-bridge profile.

    The maximizer rho* solves y = 2 rho psi'(rho^2 - g^2):
      - y = 0:                         rho* <= g, value 0;
      - bridge zone:                   rho^3 - g^2 rho = eps^2 y (one root > g);
      - linear zone (y >= 2 r2/eps,
        r2 = sqrt(g^2 + 2 eps)):       rho* = eps y / 2.
    Cross-checked against the sup-based ``legendre`` in the test suite.
    """
    eps = penalty.epsilon
    y = np.asarray(y_norm, dtype=float)
    gg = np.asarray(g, dtype=float)
    y, gg = np.broadcast_arrays(y, gg)
    y = y.astype(float, copy=True)
    gg = gg.astype(float)

    r2 = np.sqrt(gg * gg + 2.0 * eps)
    linear = y >= 2.0 * r2 / eps
    rho = np.where(linear, 0.5 * eps * y, 0.0)

    # bridge zone: largest real root of rho^3 + p rho + q = 0,
    # p = -g^2, q = -eps^2 y
    p = -gg * gg
    q = -eps * eps * y
    rho_b = _largest_cubic_root(p, q)
    rho = np.where(linear, rho, rho_b)
    rho = np.where(y == 0.0, 0.0, rho)

    t = rho * rho - gg * gg
    val = rho * y - penalty.psi(t)
    out = np.maximum(val, 0.0)
    return out if out.ndim else float(out)


def _largest_cubic_root(p, q):
    """Largest real root of x^3 + p x + q = 0 (depressed cubic), vectorized."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    disc = 0.25 * q * q + p * p * p / 27.0
    three_real = disc <= 0
    # trigonometric branch (requires p < 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.sqrt(np.where(p < 0, -p / 3.0, np.nan))
        arg = np.clip(3.0 * q / (2.0 * p) / np.where(m > 0, m, 1.0), -1.0, 1.0)
        theta = np.arccos(np.where(three_real, arg, 0.0))
        root_trig = 2.0 * m * np.cos(theta / 3.0)

        sq = np.sqrt(np.where(disc > 0, disc, 0.0))
        root_card = np.cbrt(-0.5 * q + sq) + np.cbrt(-0.5 * q - sq)

    out = np.where(three_real, root_trig, root_card)
    # p == 0 (g = 0): single real root cbrt(-q)
    out = np.where(p == 0.0, np.cbrt(-q), out)
    return out
