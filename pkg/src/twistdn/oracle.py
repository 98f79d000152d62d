"""Closed-form DN eigenvalues on the unit disc.

On the unit disc the mode problem separates: with ``u = f(r) e^{ik theta}``
the drift acts as ``D = d/dtheta = ik`` and the mode equation becomes
``-Laplace u + (xi - a k)^2 u = 0``. Hence ``f = I_|k|(mu r)`` with
``mu = |xi + SIGMA * a * k|`` and the DN eigenvalue is ``mu I'_|k|(mu) / I_|k|(mu)``.
The conormal cross-terms vanish on the circle because ``x_perp . nu = 0``.
"""

import math

SIGMA = -1
"""Sign in ``mu = |xi + SIGMA a k|`` for the transform kernel ``exp(-i xi x3)``."""

X_MAX = 50.0
_TOL = 1e-17
_MAX_TERMS = 400


def _scaled_series(k, x):
    """``I_k(x) / ((x/2)^k / k!)`` by the power series, summed with ``math.fsum``."""
    q = 0.25 * x * x
    term = 1.0
    terms = [1.0]
    for m in range(1, _MAX_TERMS):
        term *= q / (m * (m + k))
        terms.append(term)
        if term < _TOL * terms[0] and m > q:
            break
    return math.fsum(terms)


def _check(k, x):
    if int(k) != k or k < 0:
        raise ValueError(f"order must be a nonnegative integer, got {k}")
    if not (0.0 <= x <= X_MAX):
        raise ValueError(f"argument {x} outside the supported range [0, {X_MAX}]")


def bessel_I(k, x):
    """Modified Bessel function of the first kind ``I_k(x)``."""
    k = int(k)
    x = float(x)
    _check(k, x)
    if x == 0.0:
        return 1.0 if k == 0 else 0.0
    log_pref = k * math.log(0.5 * x) - math.lgamma(k + 1)
    return math.exp(log_pref) * _scaled_series(k, x)


def bessel_I_prime(k, x):
    """``I_k'(x) = I_{k+1}(x) + (k/x) I_k(x)``; ``I_0' = I_1``."""
    k = int(k)
    x = float(x)
    _check(k, x)
    if x == 0.0:
        return 0.5 if k == 1 else 0.0
    return bessel_I(k + 1, x) + (k / x) * bessel_I(k, x)


def log_derivative(k, mu):
    """``mu I_k'(mu) / I_k(mu)`` with the removable point ``mu = 0`` giving ``k``.

    Uses ``mu I_k'/I_k = k + mu I_{k+1}/I_k`` and the ratio of the scaled
    series, which avoids under/overflow for large orders.
    """
    k = abs(int(k))
    mu = float(mu)
    _check(k, mu)
    if mu == 0.0:
        return float(k)
    ratio = (0.5 * mu / (k + 1)) * _scaled_series(k + 1, mu) / _scaled_series(k, mu)
    return k + mu * ratio


def mode_frequency(a, xi, k):
    return abs(xi + SIGMA * a * k)


def disc_dn_eigenvalue(a, xi, k):
    """DN eigenvalue of the mode problem on the unit disc for ``e^{ik theta}``."""
    if abs(a) >= 1.0:
        raise ValueError("|a| must be < 1 on the unit disc")
    return log_derivative(k, mode_frequency(a, xi, k))
