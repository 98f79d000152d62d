"""Dirichlet-to-Neumann matrices on a truncated boundary Fourier basis.

Boundary data are expanded in ``e_k(s) = exp(2 pi i k s / P)``, ``|k| <= K``,
``s`` the polygonal arclength and ``P`` the perimeter. Column ``j`` of a DN
matrix holds the Fourier coefficients of the weak conormal flux produced by
datum ``e_j``::

    M[i, j] = (1/P) sum_{l on boundary} conj(e_i(s_l)) (K u_j)_l

where ``u_j`` is the discrete solution and ``K`` the nodal mode matrix, i.e.
the flux is the residual of the variational form against boundary hat
functions. Because ``(K u_j)`` vanishes at interior nodes this equals
``u_i^H K u_j / P`` and ``M`` is Hermitian.

``H^s`` norms of boundary functions are ``(sum (1 + k^2)^s |c_k|^2)^{1/2}``.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .fem import CoercivityError, assemble_mode_system, solve_mode_many


class GridError(ValueError):
    """Frequency grid too coarse or too short for the chosen profile."""


# ---------------------------------------------------------------------------
# Basis and weights


@dataclass(frozen=True, eq=False)
class BoundaryBasis:
    """Fourier basis ``e_k``, ``k = -K..K``, sampled at the boundary nodes."""

    K: int
    perimeter: float
    arclength: np.ndarray = field(repr=False)

    @classmethod
    def from_mesh(cls, mesh, K):
        if int(K) != K or K < 0:
            raise ValueError("K must be a nonnegative integer")
        return cls(int(K), float(mesh.perimeter), np.asarray(mesh.arclength))

    @property
    def ks(self):
        return np.arange(-self.K, self.K + 1)

    @property
    def size(self):
        return 2 * self.K + 1

    def index(self, k):
        return int(k) + self.K

    def samples(self):
        """``(n_boundary, 2K+1)`` matrix of ``e_k(s_l)``."""
        phase = 2.0 * np.pi * np.outer(self.arclength, self.ks) / self.perimeter
        return np.cos(phase) + 1j * np.sin(phase)

    def gram(self):
        """Trapezoidal ``int e_j conj(e_i) ds / P`` on the boundary nodes."""
        s = self.arclength
        seg = np.diff(np.append(s, self.perimeter))
        w = 0.5 * (seg + np.roll(seg, 1))
        E = self.samples()
        return (E.conj().T * w) @ E / self.perimeter

    def orthogonality_defect(self):
        return float(np.max(np.abs(self.gram() - np.eye(self.size))))


@dataclass(frozen=True)
class SobolevWeighting:
    """Diagonal ``H^s`` weight on Fourier coefficients: ``(1 + k^2)^(s/2)``."""

    s: float

    def weights(self, ks):
        return (1.0 + np.asarray(ks, dtype=float) ** 2) ** (0.5 * self.s)

    def norm(self, coeffs, ks):
        return float(np.linalg.norm(self.weights(ks) * np.asarray(coeffs)))


H_HALF = SobolevWeighting(0.5)
H_MINUS_HALF = SobolevWeighting(-0.5)


# ---------------------------------------------------------------------------
# DN matrices


@dataclass(frozen=True, eq=False)
class DnMatrix:
    matrix: np.ndarray = field(repr=False)
    ks: np.ndarray = field(repr=False)
    a: float
    xi: float
    variant: str
    mesh_h: float
    residual: float = 0.0

    @property
    def K(self):
        return int(self.ks[-1])

    def diagonal(self):
        return np.diag(self.matrix)

    def entry(self, k, j):
        return self.matrix[int(k) + self.K, int(j) + self.K]

    def symmetry_residual(self):
        """``||M - M^H|| / ||M||`` (Frobenius); zero matrix gives 0."""
        return symmetry_residual(self.matrix)

    def to_dict(self):
        return {
            "meta": {"a": self.a, "xi": self.xi, "variant": self.variant, "K": self.K, "mesh_h": self.mesh_h},
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def diagonal_csv(self):
        rows = ["k,re,im"]
        rows += [f"{k},{d.real!r},{d.imag!r}" for k, d in zip(self.ks.tolist(), self.diagonal().tolist())]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_dict(cls, data):
        meta = data["meta"]
        M = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        K = int(meta["K"])
        return cls(M, np.arange(-K, K + 1), meta["a"], meta["xi"], meta["variant"], meta["mesh_h"])


def symmetry_residual(M):
    M = np.asarray(M)
    scale = np.linalg.norm(M)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(M - M.conj().T) / scale)


def _dn_from_system(system, basis):
    mesh = system.mesh
    E = basis.samples()
    U, rel = solve_mode_many(system, E)
    flux = (system.complex_matrix @ U)[mesh.boundary]
    return E.conj().T @ flux / basis.perimeter, rel


def _mode_dn(mesh, twist, xi, basis, scale, variant, label_a):
    system = assemble_mode_system(mesh, twist, xi, scale=scale)
    M, rel = _dn_from_system(system, basis)
    return DnMatrix(M, basis.ks, float(label_a), float(xi), variant, mesh.h, rel)


def dn_mode_matrix(mesh, a, xi, basis):
    """DN matrix of the mode problem with conductivity ``A0(x', a)`` at ``xi``."""
    return _mode_dn(mesh, a, xi, basis, 1.0, "standard", a)


def dn_reduced_matrix(mesh, a, basis):
    """DN matrix of ``div(Atilde_a grad U) = 0``: the ``xi = 0`` mode."""
    return _mode_dn(mesh, a, 0.0, basis, 1.0, "reduced", a)


def dn_bullet_mode_matrix(mesh, a, xi, basis):
    """DN matrix for the surrogate conductivity ``a * A0(x', 1)`` at ``xi``.

    Needs ``a > 0`` and ``delta < 1`` (coercivity of the twist-one system).
    """
    if not a > 0:
        raise CoercivityError(f"the surrogate conductivity needs a > 0, got {a}")
    return _mode_dn(mesh, 1.0, xi, basis, a, "bullet", a)


def conjugate_reflect(dn):
    """DN matrix at ``-xi`` from the one at ``xi``: ``M(-xi)[i,j] = conj(M(xi)[-i,-j])``.

    Follows from the realness of the three-dimensional problem: conjugating
    the data and flipping ``xi`` conjugates the mode solution.
    """
    return DnMatrix(np.conj(dn.matrix[::-1, ::-1]), dn.ks, dn.a, -dn.xi, dn.variant, dn.mesh_h, dn.residual)


# ---------------------------------------------------------------------------
# Families over xi


def gaussian_profile_hat(xi, sigma=1.0):
    """Fourier transform ``int g(x3) exp(-i xi x3) dx3`` of the unit-mass Gaussian."""
    xi = np.asarray(xi, dtype=float)
    return np.exp(-0.5 * (sigma * xi) ** 2)


def gaussian_tail_mass(half_width, sigma=1.0):
    """Fraction of ``int ghat`` lying outside ``[-half_width, half_width]``."""
    return math.erfc(sigma * half_width / math.sqrt(2.0))


@dataclass(frozen=True)
class XiGrid:
    """Uniform symmetric frequency grid with trapezoidal weights."""

    half_width: float = 8.0
    step: float = 0.25

    @property
    def n_half(self):
        n = round(self.half_width / self.step)
        if not math.isclose(n * self.step, self.half_width, rel_tol=1e-12):
            raise GridError("half_width must be an integer multiple of step")
        return int(n)

    @property
    def points(self):
        n = self.n_half
        return self.step * np.arange(-n, n + 1)

    @property
    def weights(self):
        w = np.full(2 * self.n_half + 1, self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w

    def validate(self, sigma):
        tail = gaussian_tail_mass(self.half_width, sigma)
        if tail >= 1e-8:
            raise GridError(f"profile tail mass {tail:.3e} outside the grid exceeds 1e-8")
        half_period = math.pi / self.step
        if half_period < 8.0 * sigma:
            raise GridError(
                f"step {self.step} aliases the profile: half period {half_period:.3g} < 8 sigma_g"
            )
        return tail


@dataclass(frozen=True, eq=False)
class DnFamily:
    """DN matrices ``M(xi)`` on a grid together with the profile ``ghat``.

    Represents ``f -> Lambda(g (x) f)``: at height ``x3`` the flux
    coefficients are ``(1/2pi) int ghat(xi) e^{i xi x3} M(xi) c dxi``.
    """

    matrices: np.ndarray = field(repr=False)  # (n_xi, 2K+1, 2K+1)
    xis: np.ndarray = field(repr=False)
    quad_weights: np.ndarray = field(repr=False)
    ghat: np.ndarray = field(repr=False)
    ks: np.ndarray = field(repr=False)
    a: float
    variant: str
    sigma_g: float
    mesh_h: float

    @property
    def weights(self):
        """Combined weights ``w_xi * ghat(xi)``."""
        return self.quad_weights * self.ghat

    def __sub__(self, other):
        if not (np.array_equal(self.xis, other.xis) and np.array_equal(self.ks, other.ks)):
            raise ValueError("families live on different grids")
        return DnFamily(
            self.matrices - other.matrices, self.xis, self.quad_weights, self.ghat, self.ks,
            float("nan"), "difference", self.sigma_g, self.mesh_h,
        )

    def replace_matrices(self, matrices):
        return DnFamily(
            np.asarray(matrices), self.xis, self.quad_weights, self.ghat, self.ks,
            self.a, self.variant, self.sigma_g, self.mesh_h,
        )

    def at(self, xi):
        j = int(np.argmin(np.abs(self.xis - xi)))
        if not math.isclose(self.xis[j], xi, abs_tol=1e-12):
            raise KeyError(f"xi={xi} not on the grid")
        return DnMatrix(self.matrices[j], self.ks, self.a, float(self.xis[j]), self.variant, self.mesh_h)

    def x3_grid(self):
        """Periodic ``x3`` grid on which the synthesis is exact.

        With ``n`` grid points per side in ``xi`` this uses ``4n`` heights
        spaced ``2 pi / (4 n step)``, so the discrete sum over heights
        annihilates every nonzero frequency of the grid.
        """
        n = (len(self.xis) - 1) // 2
        step = self.xis[1] - self.xis[0]
        nx = 4 * max(n, 1)
        dx = 2.0 * np.pi / (nx * step)
        return dx * (np.arange(nx) - nx // 2), dx

    def synthesize(self, x3=None):
        """Flux operators ``G(x3)`` of shape ``(n_x3, 2K+1, 2K+1)`` and the step ``dx``."""
        if x3 is None:
            x3, dx = self.x3_grid()
        else:
            x3, dx = np.asarray(x3, dtype=float), None
        phase = np.exp(1j * np.outer(x3, self.xis)) * (self.weights / (2.0 * np.pi))
        return np.einsum("mx,xij->mij", phase, self.matrices), dx

    def zero_frequency_sum(self):
        """``sum_m dx G(x_m)``; equals ``ghat(0) M(0)`` exactly on the synthesis grid."""
        G, dx = self.synthesize()
        return dx * G.sum(axis=0)

    def to_dict(self):
        return {
            "meta": {"a": self.a, "variant": self.variant, "K": int(self.ks[-1]), "sigma_g": self.sigma_g,
                     "mesh_h": self.mesh_h},
            "xi": self.xis.tolist(),
            "weights": self.quad_weights.tolist(),
            "ghat": self.ghat.tolist(),
            "re": self.matrices.real.tolist(),
            "im": self.matrices.imag.tolist(),
        }


def dn_3d_synthesize(mesh, a, basis, sigma_g=1.0, grid=XiGrid(), variant="standard", use_symmetry=True):
    """DN family over ``grid`` for the profile ``g`` = unit-mass Gaussian.

    With ``use_symmetry`` only ``xi >= 0`` is solved and negative
    frequencies come from :func:`conjugate_reflect`.
    """
    grid.validate(sigma_g)
    xis = grid.points
    n = grid.n_half
    if variant == "standard":
        make = lambda xi: dn_mode_matrix(mesh, a, xi, basis)  # noqa: E731
    elif variant == "bullet":
        make = lambda xi: dn_bullet_mode_matrix(mesh, a, xi, basis)  # noqa: E731
    else:
        raise ValueError(f"unknown variant {variant!r}")
    mats = np.empty((len(xis), basis.size, basis.size), dtype=complex)
    if use_symmetry:
        for j in range(n, 2 * n + 1):
            dn = make(xis[j])
            mats[j] = dn.matrix
            mats[2 * n - j] = conjugate_reflect(dn).matrix
    else:
        for j, xi in enumerate(xis):
            mats[j] = make(xi).matrix
    ghat = gaussian_profile_hat(xis, sigma_g)
    return DnFamily(mats, xis, grid.weights, ghat, basis.ks, float(a), variant, float(sigma_g), mesh.h)


# ---------------------------------------------------------------------------
# Norms


def _weighted(M, ks, in_weight, out_weight):
    wi = in_weight.weights(ks)
    wo = out_weight.weights(ks)
    return (wo[:, None] * np.asarray(M)) / wi[None, :]


def operator_norm(M, in_weight=H_HALF, out_weight=H_MINUS_HALF, **family_kwargs):
    """Norm from ``H^{1/2}`` to ``H^{-1/2}`` of a DN matrix, or of a family.

    For a single matrix this is the largest singular value of
    ``W_out M W_in^{-1}``. For a :class:`DnFamily` see :func:`family_norm`.
    """
    if isinstance(M, DnFamily):
        return family_norm(M, in_weight, out_weight, **family_kwargs).value
    if isinstance(M, DnMatrix):
        ks, M = M.ks, M.matrix
    else:
        M = np.asarray(M)
        K = (M.shape[0] - 1) // 2
        ks = np.arange(-K, K + 1)
    if not np.any(M):
        return 0.0
    return float(np.linalg.norm(_weighted(M, ks, in_weight, out_weight), 2))


@dataclass(frozen=True)
class FamilyNorm:
    value: float
    maximiser: np.ndarray = field(repr=False)
    iterations: int = 0
    starts: int = 0


def _ascend(B, c, f, max_iter, tol):
    """Monotone fixed-point ascent of ``J(f) = sum_m c_m |B_m f|`` on the unit sphere."""
    val = -np.inf
    it = 0
    for it in range(1, max_iter + 1):
        Bf = np.einsum("mij,j->mi", B, f)
        nrm = np.linalg.norm(Bf, axis=1)
        new = float(c @ nrm)
        if new <= val * (1.0 + tol):
            val = max(val, new)
            break
        val = new
        safe = np.where(nrm > 0, nrm, 1.0)
        g = np.einsum("mji,mj->i", B.conj(), Bf * (c / safe)[:, None])
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        f = g / gn
    return val, f, it


def family_norm(family, in_weight=H_HALF, out_weight=H_MINUS_HALF, domain="x3",
                n_starts=8, seed=0, max_iter=2000, tol=1e-13):
    """Norm of ``f -> Lambda(g (x) f)`` from ``H^{1/2}`` to ``L^1(R_x3; H^{-1/2})``.

    ``domain="x3"`` integrates the synthesised flux over the periodic ``x3``
    grid of :meth:`DnFamily.x3_grid`; ``domain="xi"`` integrates
    ``w_xi ghat(xi) ||M(xi) f||`` over the frequency grid instead.

    The objective is convex and positively homogeneous in ``f``, so its
    maximum over the unit sphere is sought by the fixed-point ascent
    ``f <- grad J(f) / |grad J(f)|`` (monotone for such functions) from
    ``n_starts`` seeded random starts plus the top right singular vector of
    the zero-frequency sum.
    """
    ks = family.ks
    if domain == "x3":
        G, dx = family.synthesize()
        B = _weighted(G, ks, in_weight, out_weight)
        c = np.full(len(B), dx)
    elif domain == "xi":
        B = _weighted(family.matrices, ks, in_weight, out_weight)
        c = np.abs(family.weights)
    else:
        raise ValueError(f"unknown domain {domain!r}")
    if not np.any(B):
        return FamilyNorm(0.0, np.zeros(len(ks), dtype=complex), 0, 0)
    n = len(ks)
    starts = []
    Z = np.einsum("m,mij->ij", c, B)
    if np.any(Z):
        starts.append(np.linalg.svd(Z)[2][0].conj())
    top = int(np.argmax(c * np.linalg.norm(B, axis=(1, 2))))
    starts.append(np.linalg.svd(B[top])[2][0].conj())
    rng = np.random.default_rng(seed)
    for _ in range(n_starts):
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        starts.append(z / np.linalg.norm(z))
    best = (-np.inf, None, 0)
    total = 0
    for f0 in starts:
        val, f, it = _ascend(B, c, f0, max_iter, tol)
        total += it
        if val > best[0]:
            best = (val, f, it)
    return FamilyNorm(float(best[0]), best[1], total, len(starts))


# ---------------------------------------------------------------------------
# Difference identity


@dataclass(frozen=True)
class IdentityCheck:
    residual: float
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)


def dn_difference_identity_check(mesh, a1, a2, xi, basis, n_pairs=20, seed=0, data_scale=1.0):
    """Compare both sides of the DN difference identity on random data pairs.

    Left side ``<(Lambda_1 - Lambda_2) f1, f2> = P d^H (M1 - M2) c`` from the
    DN matrices; right side ``u2^H (K1 - K2) u1`` from the nodal solutions
    (``u1`` solves system 1 with ``f1``, ``u2`` system 2 with ``f2``).
    Returns the largest discrepancy relative to the largest side.
    """
    s1 = assemble_mode_system(mesh, a1, xi)
    s2 = assemble_mode_system(mesh, a2, xi)
    M1, _ = _dn_from_system(s1, basis)
    M2, _ = _dn_from_system(s2, basis)
    rng = np.random.default_rng(seed)
    shape = (basis.size, n_pairs)
    C = data_scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    D = data_scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    lhs = basis.perimeter * np.einsum("ip,ij,jp->p", D.conj(), M1 - M2, C)
    E = basis.samples()
    U1, _ = solve_mode_many(s1, E @ C)
    U2, _ = solve_mode_many(s2, E @ D)
    dK = s1.complex_matrix - s2.complex_matrix
    rhs = np.einsum("np,np->p", U2.conj(), dK @ U1)
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    res = 0.0 if scale == 0 else float(np.max(np.abs(lhs - rhs)) / scale)
    return IdentityCheck(res, lhs, rhs)
