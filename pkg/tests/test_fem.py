import numpy as np
import pytest
from scipy import special

from twistdn.fem import (
    CoercivityError,
    assemble_mode_system,
    h1_norm,
    h1_seminorm,
    l2_norm,
    mesh_operators,
    solve_mode,
)
from twistdn.geometry import CrossSection, build_mesh


def _theta(mesh, nodes=None):
    v = mesh.vertices if nodes is None else mesh.vertices[nodes]
    return np.arctan2(v[:, 1], v[:, 0])


def test_refuses_without_coercivity(disc_coarse):
    with pytest.raises(CoercivityError):
        assemble_mode_system(disc_coarse, 1.0, 0.5)
    with pytest.raises(CoercivityError):
        assemble_mode_system(disc_coarse, -1.2, 0.0)


def test_untwisted_system_decouples(disc_coarse):
    s = assemble_mode_system(disc_coarse, 0.0, 1.3)
    n = s.n_interior
    blk = s.real_matrix[:n, n:]
    assert abs(blk).max() == 0
    ops = mesh_operators(disc_coarse)
    I = disc_coarse.interior
    ref = (ops.s0 + 1.69 * ops.mass)[I][:, I]
    assert abs(s.real_matrix[:n, :n] - ref).max() < 1e-14
    assert abs(s.real_matrix[n:, n:] - ref).max() < 1e-14


def test_zero_frequency_has_no_drift(disc_coarse):
    s = assemble_mode_system(disc_coarse, 0.4, 0.0)
    n = s.n_interior
    assert abs(s.real_matrix[:n, n:]).max() == 0


def test_drift_block_antisymmetric_and_system_symmetric(disc_coarse):
    s = assemble_mode_system(disc_coarse, 0.4, 0.9)
    n = s.n_interior
    J = s.real_matrix[n:, :n]
    assert abs(J + J.T).max() < 1e-15
    assert abs(s.real_matrix - s.real_matrix.T).max() < 1e-15


def test_discrete_coercivity(disc_coarse):
    a = 0.5
    s = assemble_mode_system(disc_coarse, a, 1.1)
    I = disc_coarse.interior
    S0 = mesh_operators(disc_coarse).s0[I][:, I]
    rng = np.random.default_rng(0)
    n = len(I)
    for _ in range(20):
        z = rng.normal(size=2 * n)
        semi = z[:n] @ (S0 @ z[:n]) + z[n:] @ (S0 @ z[n:])
        assert z @ (s.real_matrix @ z) >= (1 - a * a) * semi


def test_first_mode_harmonic_extension(disc_coarse):
    m = disc_coarse
    s = assemble_mode_system(m, 0.0, 0.0)
    sol = solve_mode(s, np.exp(1j * _theta(m, m.boundary)))
    exact = m.vertices[:, 0] + 1j * m.vertices[:, 1]
    assert np.max(np.abs(sol.values - exact)) < 2e-3
    assert np.array_equal(sol.boundary_values, np.exp(1j * _theta(m, m.boundary)))
    assert sol.relative_residual <= 1e-10
    # |grad u|^2 = 2 over the disc, |u|^2 = r^2
    assert h1_seminorm(sol) == pytest.approx(np.sqrt(2 * np.pi), rel=2e-2)
    assert l2_norm(sol) == pytest.approx(np.sqrt(np.pi / 2), rel=2e-2)
    assert h1_norm(sol) == pytest.approx(np.sqrt(5 * np.pi / 2), rel=2e-2)


def test_bessel_modes(disc_medium):
    m = disc_medium
    r = np.linalg.norm(m.vertices, axis=1)
    th = _theta(m)
    for a, xi, k in [(0.0, 1.0, 3), (0.3, 0.7, 2), (-0.4, 1.5, -1)]:
        mu = abs(xi - a * k)
        sol = solve_mode(assemble_mode_system(m, a, xi), np.exp(1j * k * th[m.boundary]))
        exact = special.iv(abs(k), mu * r) / special.iv(abs(k), mu) * np.exp(1j * k * th)
        assert np.max(np.abs(sol.values - exact)) < 5e-3


def test_norm_scaling_and_zero_data(disc_coarse):
    m = disc_coarse
    s = assemble_mode_system(m, 0.3, 0.5)
    g = np.cos(2 * _theta(m, m.boundary))
    zero = solve_mode(s, np.zeros(len(m.boundary)))
    assert h1_norm(zero) == 0 and l2_norm(zero) == 0
    one = solve_mode(s, g)
    three = solve_mode(s, (2 - 1j) * g)
    assert h1_norm(three) == pytest.approx(abs(2 - 1j) * h1_norm(one), rel=1e-12)
    assert l2_norm(three) == pytest.approx(abs(2 - 1j) * l2_norm(one), rel=1e-12)


def test_untwisted_real_data_gives_real_solution(kite):
    s = assemble_mode_system(kite, 0.0, 0.8)
    g = np.sin(3 * kite.arclength / kite.perimeter * 2 * np.pi) + 0.2
    assert np.max(np.abs(solve_mode(s, g).values.imag)) <= 1e-12


def test_conjugation_symmetry(kite):
    rng = np.random.default_rng(1)
    g = rng.normal(size=len(kite.boundary)) + 1j * rng.normal(size=len(kite.boundary))
    u = solve_mode(assemble_mode_system(kite, 0.6, 1.2), g).values
    v = solve_mode(assemble_mode_system(kite, 0.6, -1.2), np.conj(g)).values
    assert np.max(np.abs(v - np.conj(u))) < 1e-12


def test_h1_bound_stable_under_refinement():
    # ||u||_H1 / ||f||_{H^1/2} with f = e^{3 i theta}: the ratio must settle
    ratios = []
    for h in (0.1, 0.05):
        m = build_mesh(CrossSection.unit_disc(), h)
        th = _theta(m, m.boundary)
        sol = solve_mode(assemble_mode_system(m, 0.4, 1.0), np.exp(3j * th))
        ratios.append(h1_norm(sol) / (np.sqrt(2 * np.pi) * (1 + 9) ** 0.25))
    assert abs(ratios[0] - ratios[1]) / ratios[1] < 0.02
