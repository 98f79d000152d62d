"""Conductivity fields of the straightened waveguide and their spectra.

The straightening ``y = (R(theta(x3)) x', x3)`` of a twisted cylinder turns
the Laplacian into ``div(A0(x', theta') grad u)`` with

    A0(x', t) zeta . zeta = zeta1**2 + zeta2**2 + (zeta3 + t*(x2*zeta1 - x1*zeta2))**2

i.e. ``A0 = diag(1, 1, 0) + V V^T`` with ``V = (t*x2, -t*x1, 1)``. Functions
accept a single point ``x`` of shape ``(2,)`` or a batch ``(..., 2)``.
"""

import numpy as np


def _split(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


def eval_A0(x, t):
    """3x3 metric ``A0(x', t)``; shape ``(..., 3, 3)``."""
    x1, x2 = _split(x)
    t = np.asarray(t, dtype=float)
    x1, x2, t = np.broadcast_arrays(x1, x2, t)
    out = np.zeros(x1.shape + (3, 3))
    out[..., 0, 0] = 1.0 + x2 * x2 * t * t
    out[..., 1, 1] = 1.0 + x1 * x1 * t * t
    out[..., 0, 1] = out[..., 1, 0] = -x1 * x2 * t * t
    out[..., 0, 2] = out[..., 2, 0] = x2 * t
    out[..., 1, 2] = out[..., 2, 1] = -x1 * t
    out[..., 2, 2] = 1.0
    return out


def eval_Atilde(x, a):
    """Reduced 2x2 field ``I + a^2 x_perp x_perp^T`` with ``x_perp = (-x2, x1)``."""
    x1, x2 = _split(x)
    a = np.asarray(a, dtype=float)
    x1, x2, a = np.broadcast_arrays(x1, x2, a)
    out = np.empty(x1.shape + (2, 2))
    out[..., 0, 0] = 1.0 + x2 * x2 * a * a
    out[..., 1, 1] = 1.0 + x1 * x1 * a * a
    out[..., 0, 1] = out[..., 1, 0] = -x1 * x2 * a * a
    return out


def eval_Abullet(x, t):
    """Surrogate ``t * A0(x', 1)``, linear in ``t``."""
    t = np.asarray(t, dtype=float)
    return t[..., None, None] * eval_A0(x, 1.0)


def dtA0(x, t):
    """Entrywise ``t``-derivative of :func:`eval_A0`."""
    x1, x2 = _split(x)
    t = np.asarray(t, dtype=float)
    x1, x2, t = np.broadcast_arrays(x1, x2, t)
    out = np.zeros(x1.shape + (3, 3))
    out[..., 0, 0] = 2.0 * x2 * x2 * t
    out[..., 1, 1] = 2.0 * x1 * x1 * t
    out[..., 0, 1] = out[..., 1, 0] = -2.0 * x1 * x2 * t
    out[..., 0, 2] = out[..., 2, 0] = x2
    out[..., 1, 2] = out[..., 2, 1] = -x1
    return out


def dtA_eigenvalues(x, t):
    """Closed-form spectrum of ``dA0/dt``, ascending: ``(0, r2 t - s, r2 t + s)``.

    ``r2 = |x'|^2`` and ``s = sqrt(r2^2 t^2 + r2)``. The middle value is
    negative whenever ``x' != 0``, so ``dA0/dt`` is never positive
    semidefinite away from the axis.
    """
    x1, x2 = _split(x)
    t = np.asarray(t, dtype=float)
    r2 = x1 * x1 + x2 * x2
    s = np.sqrt(r2 * r2 * t * t + r2)
    lam1 = np.zeros(np.broadcast(r2, t).shape)
    return lam1, r2 * t - s, r2 * t + s


def daAtilde(x, a):
    """``d/da`` of :func:`eval_Atilde`, the rank-one ``2a x_perp x_perp^T``."""
    x1, x2 = _split(x)
    a = np.asarray(a, dtype=float)
    x1, x2, a = np.broadcast_arrays(x1, x2, a)
    out = np.empty(x1.shape + (2, 2))
    out[..., 0, 0] = 2.0 * a * x2 * x2
    out[..., 1, 1] = 2.0 * a * x1 * x1
    out[..., 0, 1] = out[..., 1, 0] = -2.0 * a * x1 * x2
    return out


def daAtilde_eigenvalues(x, a):
    """Spectrum ``(0, 2 a |x'|^2)`` of :func:`daAtilde` (unsorted for ``a < 0``).

    The zero eigenvalue has eigenvector ``x'``; the other has ``x_perp``.
    """
    x1, x2 = _split(x)
    a = np.asarray(a, dtype=float)
    r2 = x1 * x1 + x2 * x2
    lam1 = 2.0 * a * r2
    return np.zeros_like(lam1), lam1


def A0_extreme_eigenvalues(r, t):
    """Smallest and largest eigenvalue of ``A0`` at ``|x'| = r``.

    In the basis ``(x'/r, x_perp/r, e3)`` the metric is ``1`` plus the 2x2
    block ``[[1 + t^2 r^2, -t r], [-t r, 1]]`` whose determinant is one, so
    the extremes are ``1/L`` and ``L`` with ``L = 1 + s/2 + sqrt(s^2/4 + s)``
    and ``s = t^2 r^2``.
    """
    s = np.asarray(t, dtype=float) ** 2 * np.asarray(r, dtype=float) ** 2
    lmax = 1.0 + 0.5 * s + np.sqrt(0.25 * s * s + s)
    return 1.0 / lmax, lmax


def ellipticity_bounds(mesh, t_range):
    """Smallest ``lam >= 1`` with ``lam^-1 |z|^2 <= A0 z.z <= lam |z|^2``.

    Sampled at the mesh vertices and the endpoints of ``t_range`` (a scalar
    or an interval). The spectrum spreads monotonically in ``|t| |x'|``, so the
    extreme is reached at the farthest vertex and the largest ``|t|``.
    """
    t_vals = np.atleast_1d(np.asarray(t_range, dtype=float))
    r = np.linalg.norm(np.asarray(mesh.vertices), axis=1)
    lam = 1.0
    for t in (t_vals.min(), t_vals.max()):
        lmin, lmax = A0_extreme_eigenvalues(r, t)
        lam = max(lam, float(np.max(lmax)), float(np.max(1.0 / lmin)))
    return lam


def coercivity_constant(section, a):
    """``1 - a^2 delta^2``; positive iff ``|a| < 1/delta``.

    ``section`` may be anything with a ``delta`` attribute (cross-section or
    mesh) or the number ``delta`` itself.
    """
    delta = float(getattr(section, "delta", section))
    return 1.0 - a * a * delta * delta
