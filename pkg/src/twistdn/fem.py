"""P1 assembly and solution of the Fourier-mode problem on a cross-section.

For a constant twist rate ``a`` and frequency ``xi`` (transform kernel
``exp(-i xi x3)``) the mode ``u`` of a solution of ``div(A0 grad u) = 0``
solves, in weak form,

    int Atilde_a grad u . grad conj(G) + xi^2 int u conj(G)
        + i a xi int (D u conj(G) - u D conj(G)) = 0,

with ``D = x_perp . grad`` and ``x_perp = (-x2, x1)``. The nodal matrix is
``K = S0 + a^2 S1 + xi^2 M + i a xi (C - C^T)``; it is Hermitian and, split
into real and imaginary parts, gives the symmetric coupled real system
``[[R, -J], [J, R]]`` that is factorised here.

The surrogate conductivity ``s * A0(x', t)`` is handled by the same code
with a ``scale`` factor.
"""

from dataclasses import dataclass, field
import weakref

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ._kernels import element_matrices
from .conductivity import coercivity_constant


class CoercivityError(ValueError):
    """Twist rate outside the range where coercivity is guaranteed."""


class SolverError(RuntimeError):
    """Sparse factorisation or solve failed."""


@dataclass(frozen=True)
class MeshOperators:
    """Global sparse P1 matrices of a mesh (CSR, full node set)."""

    s0: sparse.csr_matrix
    s1: sparse.csr_matrix
    mass: sparse.csr_matrix
    drift: sparse.csr_matrix


_OPERATOR_CACHE = weakref.WeakKeyDictionary()


def mesh_operators(mesh):
    """Assemble (once per mesh) the Laplace, twist, mass and drift matrices."""
    ops = _OPERATOR_CACHE.get(mesh)
    if ops is None:
        tri = mesh.triangles
        n = mesh.n_vertices
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()

        def glob(local):
            return sparse.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))

        ops = MeshOperators(*(glob(x) for x in element_matrices(mesh.vertices, tri)))
        _OPERATOR_CACHE[mesh] = ops
    return ops


@dataclass(frozen=True, eq=False)
class ModeSystem:
    """Assembled mode problem for conductivity ``scale * A0(x', twist)`` at ``xi``.

    ``real_matrix`` is the interior block of the coupled real system, ordered
    ``(Re u_I, Im u_I)``. ``complex_matrix`` is the full nodal Hermitian
    matrix ``K``, used for lifts and flux extraction.
    """

    mesh: object
    twist: float
    xi: float
    scale: float
    complex_matrix: sparse.csr_matrix = field(repr=False)
    real_matrix: sparse.csc_matrix = field(repr=False)
    interior: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    _factor: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def a(self):
        return self.twist

    @property
    def n_interior(self):
        return len(self.interior)

    def lift_rhs(self, boundary_data):
        """Right-hand side ``-K_IB g`` of the interior system, as a real 2N vector."""
        g = np.asarray(boundary_data, dtype=complex)
        K = self.complex_matrix
        rhs = -(K[self.interior][:, self.boundary] @ g)
        return np.concatenate([rhs.real, rhs.imag], axis=0)

    def factor(self):
        lu = self._factor.get("lu")
        if lu is None:
            try:
                lu = splu(self.real_matrix, permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise SolverError(f"factorisation failed: {exc} ({self._describe()})") from exc
            self._factor["lu"] = lu
        return lu

    def _describe(self):
        return f"twist={self.twist}, xi={self.xi}, scale={self.scale}, n={self.real_matrix.shape[0]}"


def assemble_mode_system(mesh, a, xi, scale=1.0, check_coercivity=True):
    """Assemble the mode problem for twist ``a`` at frequency ``xi``.

    Raises :class:`CoercivityError` when ``|a| * delta >= 1`` (or when
    ``scale <= 0``).
    """
    a = float(a)
    xi = float(xi)
    scale = float(scale)
    if not scale > 0:
        raise CoercivityError(f"conductivity scale must be positive, got {scale}")
    if check_coercivity:
        margin = coercivity_constant(mesh, a)
        if margin <= 0:
            raise CoercivityError(
                f"|a|*delta = {abs(a) * mesh.delta:.6g} >= 1: coercivity constant "
                f"1 - a^2 delta^2 = {margin:.6g} is not positive"
            )
    ops = mesh_operators(mesh)
    R = ops.s0 + (a * a) * ops.s1 + (xi * xi) * ops.mass
    J = (a * xi) * (ops.drift - ops.drift.T)
    if scale != 1.0:
        R = scale * R
        J = scale * J
    K = (R + 1j * J).tocsr()
    I = mesh.interior
    RII = R[I][:, I]
    JII = J[I][:, I]
    real = sparse.bmat([[RII, -JII], [JII, RII]], format="csc")
    return ModeSystem(
        mesh=mesh,
        twist=a,
        xi=xi,
        scale=scale,
        complex_matrix=K,
        real_matrix=real,
        interior=I,
        boundary=np.asarray(mesh.boundary),
    )


@dataclass(frozen=True)
class ModeSolution:
    """Nodal complex values of the mode on every mesh vertex."""

    system: ModeSystem = field(repr=False)
    values: np.ndarray = field(repr=False)
    relative_residual: float = 0.0

    @property
    def boundary_values(self):
        return self.values[self.system.boundary]

    @property
    def a(self):
        return self.system.twist

    @property
    def xi(self):
        return self.system.xi


def solve_mode_many(system, boundary_data):
    """Solve for several boundary data at once.

    ``boundary_data`` has shape ``(n_boundary, ncols)``; returns the complex
    nodal solutions ``(n_vertices, ncols)`` and the worst relative residual.
    """
    G = np.asarray(boundary_data, dtype=complex)
    if G.ndim == 1:
        G = G[:, None]
    if not np.all(np.isfinite(G)):
        raise ValueError("boundary data must be finite")
    if G.shape[0] != len(system.boundary):
        raise ValueError(f"expected {len(system.boundary)} boundary values, got {G.shape[0]}")
    rhs = system.lift_rhs(G)
    lu = system.factor()
    z = lu.solve(np.ascontiguousarray(rhs))
    if not np.all(np.isfinite(z)):
        raise SolverError(f"non-finite solution ({system._describe()})")
    res = system.real_matrix @ z - rhs
    denom = np.maximum(np.linalg.norm(rhs, axis=0), np.finfo(float).tiny)
    rel = float(np.max(np.linalg.norm(res, axis=0) / denom)) if z.size else 0.0
    if rel > 1e-10:
        cond = _condition_estimate(system)
        raise SolverError(f"relative residual {rel:.3e} > 1e-10, cond1 ~ {cond:.3e} ({system._describe()})")
    n_i = system.n_interior
    U = np.empty((system.mesh.n_vertices, G.shape[1]), dtype=complex)
    U[system.interior] = z[:n_i] + 1j * z[n_i:]
    U[system.boundary] = G
    return U, rel


def solve_mode(system, boundary_data):
    """Solve the mode problem with Dirichlet data on the boundary loop nodes."""
    U, rel = solve_mode_many(system, np.asarray(boundary_data, dtype=complex).reshape(-1, 1))
    return ModeSolution(system=system, values=U[:, 0], relative_residual=rel)


def _condition_estimate(system):
    from scipy.sparse.linalg import onenormest, LinearOperator

    A = system.real_matrix
    lu = system.factor()
    inv = LinearOperator(A.shape, matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="T"))
    try:
        return float(onenormest(A) * onenormest(inv))
    except Exception:  # estimator itself may fail on a broken factor
        return float("nan")


def _quad(sol, mat):
    u = sol.values
    return float(max(np.real(np.vdot(u, mat @ u)), 0.0))


def l2_norm(sol):
    return float(np.sqrt(_quad(sol, mesh_operators(sol.system.mesh).mass)))


def h1_seminorm(sol):
    """``||grad u||_{L^2}`` on the cross-section."""
    return float(np.sqrt(_quad(sol, mesh_operators(sol.system.mesh).s0)))


def h1_norm(sol):
    """Full ``H^1`` norm ``(||grad u||^2 + ||u||^2)^{1/2}``."""
    ops = mesh_operators(sol.system.mesh)
    return float(np.sqrt(_quad(sol, ops.s0) + _quad(sol, ops.mass)))


def energy_norm(sol):
    """``sqrt(u^H K u)``, the mode energy."""
    return float(np.sqrt(_quad(sol, sol.system.complex_matrix)))
