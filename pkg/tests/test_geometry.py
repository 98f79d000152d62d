import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistdn.conductivity import eval_A0
from twistdn.geometry import (
    CrossSection,
    HarmonicPolynomial,
    MeshError,
    TwistMap,
    build_mesh,
    check_mesh,
    harmonic_pullback_residual,
    read_mesh,
    refine_uniform,
    rotation,
    straighten_map,
    twist_map,
    write_mesh,
)


def test_disc_mesh_basics():
    m = build_mesh(CrossSection.unit_disc(), 0.1)
    assert check_mesh(m) == []
    assert m.h <= 0.15
    r = np.linalg.norm(m.vertices, axis=1)
    assert np.all(r <= 1 + 1e-12)
    assert np.max(np.abs(r[m.boundary] - 1.0)) <= 1e-12
    assert m.delta == pytest.approx(1.0, abs=1e-12)
    # boundary loop starts on the positive x1 axis and runs counter-clockwise
    assert np.allclose(m.vertices[m.boundary[0]], (1.0, 0.0))
    assert m.vertices[m.boundary[1], 1] > 0


def test_rectangle_delta():
    m = build_mesh(CrossSection.rectangle(2, 1), 0.2)
    assert check_mesh(m) == []
    assert m.delta == pytest.approx(math.hypot(1.0, 0.5), rel=1e-14)
    assert CrossSection.rectangle(2, 1).delta == pytest.approx(math.hypot(1.0, 0.5))


def test_ellipse_boundary_on_curve():
    m = build_mesh(CrossSection.ellipse(0.8, 0.5), 0.05)
    b = m.vertices[m.boundary]
    assert np.max(np.abs((b[:, 0] / 0.8) ** 2 + (b[:, 1] / 0.5) ** 2 - 1)) < 1e-12


def test_refinement_quadruples_triangles():
    m = build_mesh(CrossSection.unit_disc(), 0.1)
    fine = refine_uniform(m)
    assert len(fine.triangles) == 4 * len(m.triangles)
    assert check_mesh(fine) == []
    rebuilt = build_mesh(CrossSection.unit_disc(), 0.05)
    assert 3.5 <= len(rebuilt.triangles) / len(m.triangles) <= 4.5


def test_polygon_mesh_and_rejections(kite):
    assert check_mesh(kite) == []
    assert kite.h <= 1.5 * 0.08
    with pytest.raises(MeshError):
        build_mesh(CrossSection.polygon([(0, 0), (1, 1), (1, 0), (0, 1)]), 0.1)  # bow tie
    with pytest.raises(MeshError):
        build_mesh(CrossSection.polygon([(0, 0), (1, 0), (2, 0)]), 0.1)
    with pytest.raises(MeshError):
        build_mesh(CrossSection.unit_disc(), 0.0)
    with pytest.raises(MeshError):
        build_mesh(CrossSection.ellipse(1.0, 0.0), 0.1)


def test_clockwise_polygon_is_accepted():
    pts = [(0, 0), (0, 1), (1, 1), (1, 0)]
    m = build_mesh(CrossSection.polygon(pts), 0.2)
    assert check_mesh(m) == []


shapes = st.one_of(
    st.just(CrossSection.unit_disc()),
    st.builds(CrossSection.ellipse, st.floats(0.3, 1.5), st.floats(0.3, 1.5)),
    st.builds(CrossSection.rectangle, st.floats(0.3, 2.0), st.floats(0.3, 2.0)),
)


@settings(max_examples=25, deadline=None)
@given(shapes, st.floats(0.06, 0.4))
def test_mesh_invariants_property(section, h):
    m = build_mesh(section, h)
    assert check_mesh(m) == []
    assert m.h <= 1.5 * h
    assert np.all(np.diff(m.arclength) > 0) and m.arclength[-1] < m.perimeter
    assert m.delta == pytest.approx(section.delta, rel=1e-12)


def test_mesh_roundtrip(tmp_path, kite):
    path = tmp_path / "kite.txt"
    write_mesh(kite, path)
    text = path.read_bytes()
    assert text.startswith(b"twistdn-mesh v1\n") and b"\r" not in text
    back = read_mesh(path)
    assert np.array_equal(back.vertices, kite.vertices)
    assert np.array_equal(back.triangles, kite.triangles)
    assert np.array_equal(back.boundary, kite.boundary)


def test_read_mesh_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("something else\n")
    with pytest.raises(MeshError):
        read_mesh(p)


def test_cross_section_parse_roundtrip():
    for s in (CrossSection.unit_disc(), CrossSection.ellipse(0.5, 0.25), CrossSection.rectangle(2, 1),
              CrossSection.polygon([(0, 0), (1, 0), (0, 1)])):
        assert CrossSection.parse(str(s)) == s


def test_rotation():
    assert np.array_equal(rotation(0.0), np.eye(2))
    assert np.allclose(rotation(np.pi / 2) @ (1, 0), (0, 1), atol=1e-15)
    for xi in (0.3, -2.0, 5.0):
        R = rotation(xi)
        assert np.max(np.abs(R @ rotation(-xi) - np.eye(2))) <= 1e-15
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-15)


def test_twist_maps():
    x = np.array([0.3, -0.4, 2.0])
    assert np.array_equal(twist_map(TwistMap(0.0), x), x)
    y = twist_map(TwistMap(1.0), (1.0, 0.0, np.pi / 2))
    assert np.allclose(y, (0.0, 1.0, np.pi / 2), atol=1e-15)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-3, 3, (1000, 3))
    tm = TwistMap(0.7, 0.2)
    back = twist_map(tm, straighten_map(tm, pts))
    assert np.max(np.abs(back - pts)) <= 1e-13
    assert np.array_equal(straighten_map(tm, pts)[:, 2], pts[:, 2])


def test_harmonic_polynomial_rejects_non_harmonic():
    with pytest.raises(ValueError):
        HarmonicPolynomial(hess=((1.0, 0, 0), (0, 1.0, 0), (0, 0, 0)))
    with pytest.raises(TypeError):
        harmonic_pullback_residual(TwistMap(0.1), build_mesh(CrossSection.unit_disc(), 0.3), lambda y: y)


def _hess(**entries):
    idx = {"1": 0, "2": 1, "3": 2}
    H = np.zeros((3, 3))
    for key, v in entries.items():
        i, j = idx[key[0]], idx[key[1]]
        H[i, j] = H[j, i] = v
    return tuple(map(tuple, H))


def test_pullback_straight_linear_is_exact(disc_coarse):
    r = harmonic_pullback_residual(TwistMap(0.0), disc_coarse, HarmonicPolynomial(grad=(1.0, 0.0, 0.0)))
    assert r <= 1e-12


def test_pullback_y1y3_reproduced_exactly(disc_coarse):
    # u is linear in x' on every slice, so P1 represents it exactly
    v = HarmonicPolynomial(hess=_hess(**{"13": 1.0}))
    assert harmonic_pullback_residual(TwistMap(0.3), disc_coarse, v, 0.8) <= 1e-12


def test_pullback_decays(disc_coarse, disc_medium):
    v = HarmonicPolynomial(hess=_hess(**{"11": 2.0, "22": -2.0}))
    tm = TwistMap(0.2)
    r1 = harmonic_pullback_residual(tm, disc_coarse, v, 0.5)
    r2 = harmonic_pullback_residual(tm, disc_medium, v, 0.5)
    assert r1 / r2 >= 1.8


def test_pullback_detects_wrong_cross_term_sign(disc_coarse, disc_medium):
    def flipped(x, t):
        A = eval_A0(x, t)
        A[..., :2, 2] *= -1
        A[..., 2, :2] *= -1
        return A

    v = HarmonicPolynomial(hess=_hess(**{"13": 1.0}))
    tm = TwistMap(0.3)
    r1 = harmonic_pullback_residual(tm, disc_coarse, v, 0.5, metric=flipped)
    r2 = harmonic_pullback_residual(tm, disc_medium, v, 0.5, metric=flipped)
    assert r2 > 0.05 and r1 / r2 < 1.2
