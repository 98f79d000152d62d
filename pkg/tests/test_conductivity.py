import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistdn.conductivity import (
    A0_extreme_eigenvalues,
    coercivity_constant,
    daAtilde,
    daAtilde_eigenvalues,
    dtA0,
    dtA_eigenvalues,
    ellipticity_bounds,
    eval_A0,
    eval_Abullet,
    eval_Atilde,
)
from twistdn.geometry import CrossSection, build_mesh

reals = st.floats(-3, 3, allow_nan=False)


def test_A0_identity_when_untwisted():
    assert np.array_equal(eval_A0((0.3, -0.7), 0.0), np.eye(3))


def test_A0_example_entries():
    # off-diagonal signs follow the factorisation zeta3 + t (x2 zeta1 - x1 zeta2)
    expected = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    assert np.array_equal(eval_A0((1.0, 0.0), 1.0), expected)


@given(reals, reals, reals, reals, reals, reals)
def test_A0_quadratic_form_factorisation(x1, x2, t, z1, z2, z3):
    A = eval_A0((x1, x2), t)
    z = np.array([z1, z2, z3])
    rhs = z1**2 + z2**2 + (z3 + t * (x2 * z1 - x1 * z2)) ** 2
    assert abs(z @ A @ z - rhs) <= 1e-12 * max(1.0, rhs)
    assert np.array_equal(A, A.T)


def test_A0_batched_matches_pointwise():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5, 2))
    t = rng.normal(size=5)
    batch = eval_A0(x, t)
    for i in range(5):
        assert np.array_equal(batch[i], eval_A0(x[i], t[i]))


def test_Atilde_examples():
    assert np.array_equal(eval_Atilde((0.4, 0.1), 0.0), np.eye(2))
    assert np.allclose(eval_Atilde((1.0, 0.0), 2.0), [[1.0, 0.0], [0.0, 5.0]], atol=0)


def test_Atilde_is_upper_block_and_determinant():
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, (200, 2))
    a = rng.uniform(-2, 2, 200)
    At = eval_Atilde(x, a)
    assert np.array_equal(At, eval_A0(x, a)[:, :2, :2])
    det = np.linalg.det(At)
    assert np.max(np.abs(det - (1 + a**2 * np.sum(x**2, axis=1)))) < 1e-13
    assert np.all(np.linalg.eigvalsh(At)[:, 0] >= 1 - 1e-14)


def test_Abullet_linear_in_t():
    x = (0.3, -0.6)
    assert np.array_equal(eval_Abullet(x, 1.0), eval_A0(x, 1.0))
    assert np.array_equal(eval_Abullet(x, 0.0), np.zeros((3, 3)))
    slope = (eval_Abullet(x, 2.5) - eval_Abullet(x, 0.5)) / 2.0
    assert np.max(np.abs(slope - eval_A0(x, 1.0))) < 1e-13


def test_dtA_eigenvalue_examples():
    assert np.allclose(dtA_eigenvalues((0.0, 0.0), 1.7), (0, 0, 0), atol=0)
    assert np.allclose(dtA_eigenvalues((1.0, 0.0), 0.0), (0, -1, 1), atol=0)


def test_dtA_eigenvalues_match_numerics_and_negative():
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, (500, 2))
    t = rng.uniform(-2, 2, 500)
    closed = np.sort(np.stack(dtA_eigenvalues(x, t), -1), -1)
    assert np.max(np.abs(closed - np.linalg.eigvalsh(dtA0(x, t)))) < 1e-10
    assert np.all(dtA_eigenvalues(x, t)[1] < 0)


def test_dtA0_is_derivative_of_A0():
    x, t, e = (0.4, -0.2), 0.7, 1e-6
    fd = (eval_A0(x, t + e) - eval_A0(x, t - e)) / (2 * e)
    assert np.max(np.abs(fd - dtA0(x, t))) < 1e-9


def test_daAtilde_spectrum():
    assert daAtilde_eigenvalues((0.3, 0.4), 0.0) == (0.0, 0.0)
    assert np.allclose(daAtilde_eigenvalues((1.0, 0.0), 1.0), (0.0, 2.0), atol=0)
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = rng.uniform(-1, 1, 2)
        a = rng.uniform(-2, 2)
        e = 1e-5
        fd = (eval_Atilde(x, a + e) - eval_Atilde(x, a - e)) / (2 * e)
        assert np.allclose(np.sort(np.linalg.eigvalsh(fd)), np.sort(daAtilde_eigenvalues(x, a)), atol=1e-8)
        # kernel is spanned by x'
        assert np.linalg.norm(daAtilde(x, a) @ x) < 1e-14


def test_extreme_eigenvalues_closed_form():
    for r, t in [(1.0, 1.0), (0.5, -2.0), (0.0, 3.0)]:
        ev = np.linalg.eigvalsh(eval_A0((r, 0.0), t))
        lo, hi = A0_extreme_eigenvalues(r, t)
        assert ev[0] == pytest.approx(lo, rel=1e-13)
        assert ev[-1] == pytest.approx(hi, rel=1e-13)


def test_ellipticity_bounds(disc_coarse):
    assert ellipticity_bounds(disc_coarse, 0.0) == 1.0
    lam = ellipticity_bounds(disc_coarse, (-1.0, 1.0))
    assert lam == pytest.approx((3 + np.sqrt(5)) / 2, rel=1e-12)
    assert ellipticity_bounds(disc_coarse, (-0.5, 0.5)) <= lam <= ellipticity_bounds(disc_coarse, (-2, 2))
    rng = np.random.default_rng(5)
    r = np.sqrt(rng.uniform(0, 1, 10_000))
    th = rng.uniform(0, 2 * np.pi, 10_000)
    x = np.column_stack([r * np.cos(th), r * np.sin(th)])
    t = rng.uniform(-1, 1, 10_000)
    z = rng.normal(size=(10_000, 3))
    q = np.einsum("ni,nij,nj->n", z, eval_A0(x, t), z)
    zz = np.sum(z * z, axis=1)
    assert np.all(q >= zz / lam * (1 - 1e-12)) and np.all(q <= lam * zz * (1 + 1e-12))


def test_coercivity_constant():
    disc = CrossSection.unit_disc()
    assert coercivity_constant(disc, 0.5) == 0.75
    assert coercivity_constant(disc, 0.0) == 1.0
    assert coercivity_constant(disc, 1.0) == 0.0
    assert coercivity_constant(build_mesh(CrossSection.ellipse(0.5, 0.5), 0.2), 1.0) == pytest.approx(0.75)


@settings(max_examples=50)
@given(st.floats(0, 1), st.floats(-2, 2))
def test_A0_positive_definite(r, t):
    lo, hi = A0_extreme_eigenvalues(r, t)
    assert lo > 0 and lo * hi == pytest.approx(1.0)
