"""Penalty profile, Legendre transform, and their consistency relations."""
import numpy as np
import pytest

from switchctl.penalty import (
    Penalty,
    legendre,
    legendre_closed,
    legendre_on_policy,
    phi,
    phi_prime,
)


def brute_legendre(y, g, eps, hi=50.0, step=1e-5):
    """Independent oracle: dense grid search over the control magnitude."""
    rho = np.arange(0.0, hi + step, step)
    vals = rho * y - phi((rho * rho - g * g) / eps)
    return float(vals.max())


def test_phi_branch_values():
    assert phi(-1.0) == 0.0
    assert phi(3.0) == 2.0
    assert phi(1.0) == 0.25
    assert phi_prime(-0.5) == 0.0
    assert phi_prime(3.0) == 1.0
    assert phi_prime(1.0) == 0.5


def test_phi_is_convex_and_c1():
    t = np.linspace(-3, 5, 4001)
    rng = np.random.default_rng(0)
    s = rng.uniform(-3, 5, size=500)
    u = rng.uniform(-3, 5, size=500)
    assert np.all(phi(0.5 * (s + u)) <= 0.5 * (phi(s) + phi(u)) + 1e-14)
    # derivative bounded in [0, 1], continuous at the joints
    p = phi_prime(t)
    assert np.all((0.0 <= p) & (p <= 1.0))
    for joint in (0.0, 2.0):
        left = phi_prime(joint - 1e-9)
        right = phi_prime(joint + 1e-9)
        assert abs(left - right) < 1e-8


def test_psi_convexity_inequality():
    # psi(t) <= psi'(t) * t for all t (used by the a-priori bound argument)
    pen = Penalty(0.37)
    t = np.linspace(-5, 5, 2001)
    assert np.all(pen.psi(t) <= pen.psi_prime(t) * t + 1e-14)


def test_legendre_zero_rate():
    pen = Penalty(0.5)
    assert legendre(0.0, 2.0, pen) == 0.0


def test_legendre_matches_brute_force():
    pen = Penalty(0.5)
    got = legendre(1.0, 1.0, pen)
    assert got == pytest.approx(1.056172885244376, abs=1e-6)  # frozen grid-oracle value
    assert got == pytest.approx(brute_legendre(1.0, 1.0, 0.5), abs=1e-6)


def test_legendre_stationary_point_identity():
    # at y = 2 psi'(rho0^2 - g^2) rho0 the supremum value is explicit
    pen = Penalty(0.3)
    g = 0.7
    for rho0 in (0.9, 1.1, 2.5):
        t = rho0 * rho0 - g * g
        y = 2.0 * pen.psi_prime(t) * rho0
        expect = 2.0 * pen.psi_prime(t) * rho0 * rho0 - pen.psi(t)
        assert legendre(y, g, pen) == pytest.approx(expect, abs=1e-10)


def test_on_policy_closed_form():
    pen = Penalty(0.5)
    # argument 3 lands on the linear branch: psi = 5, psi' = 2
    assert legendre_on_policy(2.0, 1.0, pen) == pytest.approx(11.0)
    assert legendre_on_policy(0.5, 1.0, pen) == 0.0  # grad below g: inactive


def test_on_policy_consistent_with_sup():
    rng = np.random.default_rng(7)
    for _ in range(120):
        q = rng.uniform(0.0, 4.0)
        g = rng.uniform(0.0, 2.0)
        pen = Penalty(rng.uniform(0.02, 1.0))
        y = 2.0 * pen.psi_prime(q * q - g * g) * q
        assert legendre_on_policy(q, g, pen) == pytest.approx(
            legendre(y, g, pen), abs=1e-8
        )


def test_closed_form_matches_sup():
    rng = np.random.default_rng(21)
    for _ in range(300):
        y = rng.uniform(0.0, 30.0)
        g = rng.uniform(0.0, 3.0)
        pen = Penalty(rng.uniform(0.01, 1.0))
        a = legendre(y, g, pen)
        b = float(legendre_closed(y, g, pen))
        assert b == pytest.approx(a, abs=1e-9, rel=1e-9)


def test_legendre_lower_bound_and_monotone():
    rng = np.random.default_rng(5)
    pen = Penalty(0.2)
    last = {}
    for g in (0.0, 0.5, 1.5):
        prev = -1.0
        for y in np.linspace(0.0, 8.0, 30):
            val = legendre(float(y), g, pen)
            assert val >= y * g - 1e-10  # rho = g is feasible with zero penalty
            assert val >= prev - 1e-12  # nondecreasing in the rate magnitude
            prev = val
        last[g] = prev
    assert all(v >= 0 for v in last.values())
