"""Per-triangle P1 kernels.

Every kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
version with identical output. ``element_matrices`` dispatches on
``twistdn._jit.USE_JIT``.

Integrals use the three-point edge-midpoint rule, exact for quadratics. All
integrands here (quadratic coefficient times constant gradients, linear field
times P1 function) are at most quadratic, so the local matrices are exact.
"""

import numpy as np

from . import _jit
from ._jit import njit


@njit
def _element_matrices_jit(vertices, triangles):
    m = triangles.shape[0]
    s0 = np.empty((m, 3, 3))
    s1 = np.empty((m, 3, 3))
    mass = np.empty((m, 3, 3))
    drift = np.empty((m, 3, 3))
    g = np.empty((3, 2))
    q = np.empty((3, 2))
    perp_g = np.empty((3, 3))  # [quad point, basis]
    for e in range(m):
        i0, i1, i2 = triangles[e, 0], triangles[e, 1], triangles[e, 2]
        x0, y0 = vertices[i0, 0], vertices[i0, 1]
        x1, y1 = vertices[i1, 0], vertices[i1, 1]
        x2, y2 = vertices[i2, 0], vertices[i2, 1]
        det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        area = 0.5 * det
        g[0, 0] = (y1 - y2) / det
        g[0, 1] = (x2 - x1) / det
        g[1, 0] = (y2 - y0) / det
        g[1, 1] = (x0 - x2) / det
        g[2, 0] = (y0 - y1) / det
        g[2, 1] = (x1 - x0) / det
        # quad point k sits on the edge opposite vertex k
        q[0, 0] = 0.5 * (x1 + x2)
        q[0, 1] = 0.5 * (y1 + y2)
        q[1, 0] = 0.5 * (x2 + x0)
        q[1, 1] = 0.5 * (y2 + y0)
        q[2, 0] = 0.5 * (x0 + x1)
        q[2, 1] = 0.5 * (y0 + y1)
        for k in range(3):
            for j in range(3):
                perp_g[k, j] = -q[k, 1] * g[j, 0] + q[k, 0] * g[j, 1]
        w = area / 3.0
        for i in range(3):
            for j in range(3):
                s0[e, i, j] = area * (g[i, 0] * g[j, 0] + g[i, 1] * g[j, 1])
                acc = 0.0
                for k in range(3):
                    acc += perp_g[k, i] * perp_g[k, j]
                s1[e, i, j] = w * acc
                mass[e, i, j] = area / 12.0 * (2.0 if i == j else 1.0)
                # phi_i is 1/2 at the two quad points not opposite vertex i
                acc = 0.0
                for k in range(3):
                    if k != i:
                        acc += 0.5 * perp_g[k, j]
                drift[e, i, j] = w * acc
    return s0, s1, mass, drift


def _element_matrices_numpy(vertices, triangles):
    p = vertices[triangles]  # (m, 3, 2)
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = 0.5 * det
    g = np.empty_like(p)
    g[:, 0, 0] = y[:, 1] - y[:, 2]
    g[:, 0, 1] = x[:, 2] - x[:, 1]
    g[:, 1, 0] = y[:, 2] - y[:, 0]
    g[:, 1, 1] = x[:, 0] - x[:, 2]
    g[:, 2, 0] = y[:, 0] - y[:, 1]
    g[:, 2, 1] = x[:, 1] - x[:, 0]
    g /= det[:, None, None]
    q = 0.5 * (p[:, [1, 2, 0], :] + p[:, [2, 0, 1], :])  # q[k] opposite vertex k
    perp = np.stack([-q[..., 1], q[..., 0]], axis=-1)
    perp_g = np.einsum("mkd,mjd->mkj", perp, g)
    w = (area / 3.0)[:, None, None]
    s0 = area[:, None, None] * np.einsum("mid,mjd->mij", g, g)
    s1 = w * np.einsum("mki,mkj->mij", perp_g, perp_g)
    mass = (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))
    phi_at_q = 0.5 * (1.0 - np.eye(3))  # [i, k]: phi_i at quad point k
    drift = w * np.einsum("ik,mkj->mij", phi_at_q, perp_g)
    return s0, s1, mass, drift


def element_matrices(vertices, triangles, use_jit=None):
    """Local Laplace stiffness, twist stiffness, mass and drift matrices.

    Returns four ``(m, 3, 3)`` arrays. With ``x_perp = (-x2, x1)`` and
    ``D = x_perp . grad``::

        s0[i, j]    = int grad phi_j . grad phi_i
        s1[i, j]    = int (D phi_j)(D phi_i)
        mass[i, j]  = int phi_j phi_i
        drift[i, j] = int (D phi_j) phi_i
    """
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if use_jit is None:
        use_jit = _jit.USE_JIT
    if use_jit:
        return _element_matrices_jit(vertices, triangles)
    return _element_matrices_numpy(vertices, triangles)
