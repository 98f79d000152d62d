"""Cross-sections, triangular meshes and the twisting maps.

Meshes are immutable containers of numpy arrays. Disc and ellipse meshes are
built from concentric rings whose node counts are all multiples of
``symmetry`` and whose nodes are aligned at angle zero, so the disc mesh is
invariant under rotation by ``2*pi/symmetry``. On such a mesh the boundary
Fourier modes ``e^{ik theta}`` only couple when ``k = j (mod symmetry)``.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ._kernels import element_matrices
from .conductivity import eval_A0

MESH_HEADER = "twistdn-mesh v1"


class MeshError(ValueError):
    """Degenerate section or a mesh that violates its invariants."""


# ---------------------------------------------------------------------------
# Cross-sections


@dataclass(frozen=True)
class CrossSection:
    """Bounded planar region ``omega``.

    ``kind`` is one of ``"unit_disc"``, ``"ellipse"``, ``"rectangle"``,
    ``"polygon"``; ``params`` holds semi-axes, (width, height) or the vertex
    list respectively. Rectangles are centred at the origin.
    """

    kind: str
    params: tuple = ()

    @classmethod
    def unit_disc(cls):
        return cls("unit_disc")

    @classmethod
    def ellipse(cls, a, b):
        return cls("ellipse", (float(a), float(b)))

    @classmethod
    def rectangle(cls, width, height):
        return cls("rectangle", (float(width), float(height)))

    @classmethod
    def polygon(cls, vertices):
        return cls("polygon", tuple((float(x), float(y)) for x, y in vertices))

    @classmethod
    def parse(cls, text):
        """Parse ``unit_disc``, ``ellipse:A,B``, ``rectangle:W,H`` or
        ``polygon:x1,y1;x2,y2;...``."""
        kind, _, rest = text.strip().partition(":")
        kind = kind.strip()
        if kind in ("unit_disc", "disc"):
            return cls.unit_disc()
        if kind == "ellipse":
            a, b = (float(v) for v in rest.split(","))
            return cls.ellipse(a, b)
        if kind == "rectangle":
            w, h = (float(v) for v in rest.split(","))
            return cls.rectangle(w, h)
        if kind == "polygon":
            pts = [tuple(float(v) for v in p.split(",")) for p in rest.split(";") if p.strip()]
            return cls.polygon(pts)
        raise ValueError(f"unknown cross-section {text!r}")

    def __str__(self):
        if self.kind == "unit_disc":
            return "unit_disc"
        if self.kind == "polygon":
            return "polygon:" + ";".join(f"{x!r},{y!r}" for x, y in self.params)
        return f"{self.kind}:" + ",".join(repr(v) for v in self.params)

    @property
    def delta(self):
        """``max |x'|`` over the closure of the section."""
        if self.kind == "unit_disc":
            return 1.0
        if self.kind == "ellipse":
            return max(self.params)
        if self.kind == "rectangle":
            w, h = self.params
            return math.hypot(0.5 * w, 0.5 * h)
        if self.kind == "polygon":
            return max(math.hypot(x, y) for x, y in self.params)
        raise ValueError(self.kind)


# ---------------------------------------------------------------------------
# Mesh container


@dataclass(frozen=True, eq=False)
class Mesh:
    """P1 triangulation of a cross-section.

    ``boundary`` lists the boundary vertices as a closed, counter-clockwise
    loop; ``arclength[i]`` is the polygonal arclength of ``boundary[i]``
    measured from ``boundary[0]``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    arclength: np.ndarray = field(repr=False)
    perimeter: float
    h: float
    section: CrossSection = None

    @property
    def boundary_edges(self):
        b = self.boundary
        return np.stack([b, np.roll(b, -1)], axis=1)

    @property
    def delta(self):
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def interior(self):
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary] = False
        return np.flatnonzero(mask)

    def areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _edge_lengths(vertices, triangles):
    p = vertices[triangles]
    return np.linalg.norm(p - p[:, [1, 2, 0]], axis=-1)


def _orient_ccw(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tri = triangles.copy()
    tri[neg, 1], tri[neg, 2] = triangles[neg, 2], triangles[neg, 1]
    return tri


def _boundary_loop(vertices, triangles):
    """Ordered CCW boundary loop, starting at the vertex of smallest polar angle."""
    directed = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    n = vertices.shape[0]
    keys = directed[:, 0] * n + directed[:, 1]
    rev = directed[:, 1] * n + directed[:, 0]
    counts = {}
    for k in keys.tolist():
        counts[k] = counts.get(k, 0) + 1
    if any(c > 1 for c in counts.values()):
        raise MeshError("an oriented edge appears twice; triangles overlap")
    key_set = set(counts)
    is_bnd = np.array([r not in key_set for r in rev.tolist()])
    bedges = directed[is_bnd]
    succ = {}
    for a, b in bedges.tolist():
        if a in succ:
            raise MeshError("boundary is not a simple loop (pinched vertex)")
        succ[a] = b
    nodes = np.array(sorted(succ))
    ang = np.mod(np.arctan2(vertices[nodes, 1], vertices[nodes, 0]), 2.0 * np.pi)
    # snap tiny negative angles (just below the +x axis) onto zero
    ang[ang > 2.0 * np.pi - 1e-12] = 0.0
    start = int(nodes[np.lexsort((-np.linalg.norm(vertices[nodes], axis=1), ang))[0]])
    loop = [start]
    cur = succ[start]
    while cur != start:
        loop.append(cur)
        if len(loop) > len(succ):
            raise MeshError("boundary walk did not close")
        cur = succ[cur]
    if len(loop) != len(succ):
        raise MeshError("boundary has more than one component")
    return np.array(loop, dtype=np.int64)


def _finish_mesh(vertices, triangles, section=None):
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = _orient_ccw(vertices, np.ascontiguousarray(triangles, dtype=np.int64))
    loop = _boundary_loop(vertices, triangles)
    seg = np.linalg.norm(vertices[np.roll(loop, -1)] - vertices[loop], axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(seg[:-1])])
    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary=loop,
        arclength=arclength,
        perimeter=float(np.sum(seg)),
        h=float(np.max(_edge_lengths(vertices, triangles))),
        section=section,
    )
    for arr in (mesh.vertices, mesh.triangles, mesh.boundary, mesh.arclength):
        arr.setflags(write=False)
    return mesh


def check_mesh(mesh):
    """List of violated mesh invariants (empty when the mesh is valid)."""
    problems = []
    areas = mesh.areas()
    if np.any(areas <= 0):
        problems.append(f"{int(np.sum(areas <= 0))} triangles with non-positive area")
    tri = mesh.triangles
    und = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    _, counts = np.unique(und, axis=0, return_counts=True)
    if np.any(counts > 2):
        problems.append("edge shared by more than two triangles")
    n_bnd_edges = int(np.sum(counts == 1))
    if n_bnd_edges != len(mesh.boundary):
        problems.append("boundary edges do not form a single loop")
    b = mesh.vertices[mesh.boundary]
    signed = 0.5 * np.sum(b[:, 0] * np.roll(b[:, 1], -1) - np.roll(b[:, 0], -1) * b[:, 1])
    if signed <= 0:
        problems.append("boundary loop is not positively oriented")
    if np.any(np.diff(mesh.arclength) <= 0) or mesh.arclength[-1] >= mesh.perimeter:
        problems.append("arclength is not strictly increasing below the perimeter")
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[tri.ravel()] = True
    if not used.all():
        problems.append("unreferenced vertices")
    return problems


# ---------------------------------------------------------------------------
# Mesh generators


def _zip_rings(inner, outer, m, n):
    """Triangles between two concentric rings of ``m`` and ``n`` aligned nodes."""
    tris = []
    i = j = 0
    while i < m or j < n:
        # advance the ring whose next node comes first; exact rational compare
        if j == n or (i < m and (i + 1) * n <= (j + 1) * m):
            tris.append((inner[i % m], outer[j % n], inner[(i + 1) % m]))
            i += 1
        else:
            tris.append((inner[i % m], outer[j % n], outer[(j + 1) % n]))
            j += 1
    return tris


def _ellipse_perimeter(a, b):
    h = ((a - b) / (a + b)) ** 2
    return math.pi * (a + b) * (1.0 + 3.0 * h / (10.0 + math.sqrt(4.0 - 3.0 * h)))


def _ring_mesh(semi_a, semi_b, target_h, symmetry):
    spacing = target_h / math.sqrt(2.0)
    n_rings = max(1, math.ceil(max(semi_a, semi_b) / spacing))
    pts = [(0.0, 0.0)]
    prev_idx, prev_n = [0], 1
    tris = []
    for i in range(1, n_rings + 1):
        rho = i / n_rings
        per = _ellipse_perimeter(rho * semi_a, rho * semi_b)
        n = symmetry * max(1, math.ceil(per / (spacing * symmetry)))
        n = max(n, prev_n)
        theta = 2.0 * np.pi * np.arange(n) / n
        start = len(pts)
        ring = list(range(start, start + n))
        if i == n_rings:
            pts.extend(zip(semi_a * np.cos(theta), semi_b * np.sin(theta)))
        else:
            pts.extend(zip(rho * semi_a * np.cos(theta), rho * semi_b * np.sin(theta)))
        if prev_n == 1:
            tris.extend((0, ring[j], ring[(j + 1) % n]) for j in range(n))
        else:
            tris.extend(_zip_rings(prev_idx, ring, prev_n, n))
        prev_idx, prev_n = ring, n
    return np.array(pts), np.array(tris, dtype=np.int64)


def _rect_mesh(width, height, target_h):
    spacing = target_h / math.sqrt(2.0)
    nx = 2 * max(1, math.ceil(width / spacing / 2))
    ny = 2 * max(1, math.ceil(height / spacing / 2))
    xs = np.linspace(-0.5 * width, 0.5 * width, nx + 1)
    ys = np.linspace(-0.5 * height, 0.5 * height, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return pts, tris


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _points_in_polygon(points, poly):
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    n = len(poly)
    for k in range(n):
        x1, y1 = poly[k]
        x2, y2 = poly[(k + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xint)
    return inside


def _distance_to_polyline(points, poly):
    n = len(poly)
    best = np.full(len(points), np.inf)
    for k in range(n):
        a = np.asarray(poly[k])
        b = np.asarray(poly[(k + 1) % n])
        ab = b - a
        s = np.clip(((points - a) @ ab) / (ab @ ab), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(points - (a + s[:, None] * ab), axis=1))
    return best


def _polygon_mesh(vertices, target_h):
    from scipy.spatial import Delaunay

    poly = np.asarray(vertices, dtype=float)
    n = len(poly)
    if n < 3:
        raise MeshError("polygon needs at least three vertices")
    signed = 0.5 * np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
    if abs(signed) < 1e-14:
        raise MeshError("polygon has zero area")
    if signed < 0:
        poly = poly[::-1]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]):
                raise MeshError(f"polygon edges {i} and {j} intersect")
    spacing = target_h / math.sqrt(2.0)
    bpts = []
    for k in range(n):
        a, b = poly[k], poly[(k + 1) % n]
        m = max(1, math.ceil(np.linalg.norm(b - a) / spacing))
        bpts.extend(a + (b - a) * s for s in np.arange(m) / m)
    bpts = np.array(bpts)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    dy = spacing * math.sqrt(3.0) / 2.0
    rows = []
    for r, y in enumerate(np.arange(lo[1] + dy, hi[1], dy)):
        xs = np.arange(lo[0] + (0.5 * spacing if r % 2 else 0.0), hi[0], spacing)
        rows.append(np.column_stack([xs, np.full_like(xs, y)]))
    ipts = np.concatenate(rows) if rows else np.empty((0, 2))
    if len(ipts):
        keep = _points_in_polygon(ipts, poly) & (_distance_to_polyline(ipts, poly) > 0.6 * spacing)
        ipts = ipts[keep]
    pts = np.concatenate([bpts, ipts])
    tri = Delaunay(pts, qhull_options="Qbb Qc Qz").simplices.astype(np.int64)
    centroids = pts[tri].mean(axis=1)
    tri = tri[_points_in_polygon(centroids, poly)]
    p = pts[tri]
    area = 0.5 * np.abs(
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    tri = tri[area > 1e-12 * spacing**2]
    return pts, tri, len(bpts)


def build_mesh(section, target_h, symmetry=24):
    """Triangulate ``section`` with maximum edge length close to ``target_h``.

    Raises :class:`MeshError` for degenerate sections or when the generated
    mesh fails :func:`check_mesh`.
    """
    if not target_h > 0:
        raise MeshError("target_h must be positive")
    kind = section.kind
    n_bnd_expected = None
    if kind == "unit_disc":
        pts, tris = _ring_mesh(1.0, 1.0, target_h, symmetry)
    elif kind == "ellipse":
        a, b = section.params
        if not (a > 0 and b > 0):
            raise MeshError("ellipse semi-axes must be positive")
        pts, tris = _ring_mesh(a, b, target_h, symmetry)
    elif kind == "rectangle":
        w, h = section.params
        if not (w > 0 and h > 0):
            raise MeshError("rectangle sides must be positive")
        pts, tris = _rect_mesh(w, h, target_h)
    elif kind == "polygon":
        pts, tris, n_bnd_expected = _polygon_mesh(section.params, target_h)
    else:
        raise MeshError(f"unknown section kind {kind!r}")
    try:
        mesh = _finish_mesh(pts, tris, section)
    except MeshError as exc:
        raise MeshError(f"{kind}: {exc}; try a smaller target_h") from exc
    problems = check_mesh(mesh)
    if n_bnd_expected is not None and len(mesh.boundary) != n_bnd_expected:
        problems.append("triangulation does not conform to the polygon boundary")
    if problems:
        raise MeshError(f"{kind} mesh invalid: " + "; ".join(problems))
    return mesh


def refine_uniform(mesh):
    """Split every triangle into four; new boundary nodes stay on the chords."""
    tri = mesh.triangles
    n = mesh.n_vertices
    edges = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.reshape(3, -1).T + n
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    pts = np.concatenate([mesh.vertices, mids])
    m01, m12, m20 = inv[:, 0], inv[:, 1], inv[:, 2]
    new = np.concatenate([
        np.column_stack([tri[:, 0], m01, m20]),
        np.column_stack([tri[:, 1], m12, m01]),
        np.column_stack([tri[:, 2], m20, m12]),
        np.column_stack([m01, m12, m20]),
    ])
    return _finish_mesh(pts, new, mesh.section)


# ---------------------------------------------------------------------------
# Mesh text format


def write_mesh(mesh, path):
    lines = [MESH_HEADER, f"V {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"T {len(mesh.triangles)}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"B {len(mesh.boundary)}")
    lines += [str(i) for i in mesh.boundary.tolist()]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path, section=None):
    with open(path) as fh:
        tokens = fh.read().split("\n")
    if not tokens or tokens[0].strip() != MESH_HEADER:
        raise MeshError(f"{path}: missing '{MESH_HEADER}' header")
    body = " ".join(tokens[1:]).split()
    pos = 0

    def take(tag, width, conv):
        nonlocal pos
        if body[pos] != tag:
            raise MeshError(f"{path}: expected section {tag}")
        count = int(body[pos + 1])
        pos += 2
        vals = [conv(v) for v in body[pos:pos + count * width]]
        pos += count * width
        return np.array(vals).reshape(count, width) if width > 1 else np.array(vals)

    verts = take("V", 2, float)
    tris = take("T", 3, int).astype(np.int64)
    bnd = take("B", 1, int).astype(np.int64)
    mesh = _finish_mesh(verts, tris, section)
    if not np.array_equal(np.sort(mesh.boundary), np.sort(bnd)):
        raise MeshError(f"{path}: boundary list does not match the triangulation")
    return mesh


# ---------------------------------------------------------------------------
# Twisting maps


def rotation(xi):
    """Counter-clockwise rotation of the plane by angle ``xi``."""
    c, s = math.cos(xi), math.sin(xi)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class TwistMap:
    """Affine twist angle ``theta(x3) = rate * x3 + offset``."""

    rate: float
    offset: float = 0.0

    def theta(self, x3):
        return self.rate * np.asarray(x3, dtype=float) + self.offset


def _rotate(points, angle):
    points = np.asarray(points, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    out = np.empty(np.broadcast(points[..., 0], c).shape + (3,))
    out[..., 0] = c * points[..., 0] - s * points[..., 1]
    out[..., 1] = s * points[..., 0] + c * points[..., 1]
    out[..., 2] = points[..., 2]
    return out


def twist_map(tm, x):
    """Straight cylinder -> twisted: ``(R(theta(x3)) x', x3)``."""
    x = np.asarray(x, dtype=float)
    return _rotate(x, tm.theta(x[..., 2]))


def straighten_map(tm, y):
    """Twisted cylinder -> straight; inverse of :func:`twist_map`."""
    y = np.asarray(y, dtype=float)
    return _rotate(y, -tm.theta(y[..., 2]))


# ---------------------------------------------------------------------------
# Harmonic pull-back check


@dataclass(frozen=True)
class HarmonicPolynomial:
    """``v(y) = const + grad . y + y^T hess y / 2`` with ``trace(hess) = 0``."""

    const: float = 0.0
    grad: tuple = (0.0, 0.0, 0.0)
    hess: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    def __post_init__(self):
        H = np.asarray(self.hess, dtype=float)
        if H.shape != (3, 3) or not np.allclose(H, H.T, atol=0.0):
            raise ValueError("hess must be a symmetric 3x3 matrix")
        scale = max(1.0, float(np.max(np.abs(H))))
        if abs(np.trace(H)) > 1e-12 * scale:
            raise ValueError(f"polynomial is not harmonic: Laplacian = {np.trace(H)!r}")

    def value(self, y):
        y = np.asarray(y, dtype=float)
        H = np.asarray(self.hess, dtype=float)
        return self.const + y @ np.asarray(self.grad, dtype=float) + 0.5 * np.einsum("...i,ij,...j->...", y, H, y)

    def gradient(self, y):
        return np.asarray(self.grad, dtype=float) + np.asarray(y, dtype=float) @ np.asarray(self.hess, dtype=float)


def pullback_fields(tm, v, points, x3):
    """Nodal ``u``, ``du/dx3`` and ``d2u/dx3^2`` for ``u = v(twist_map(x))``."""
    pts = np.asarray(points, dtype=float)
    a = tm.rate
    theta = float(tm.theta(x3))
    R = rotation(theta)
    x = np.column_stack([pts, np.full(len(pts), float(x3))])
    y = twist_map(tm, x)
    gv = v.gradient(y)
    xperp = np.column_stack([-pts[:, 1], pts[:, 0]])
    t = np.column_stack([a * xperp @ R.T, np.ones(len(pts))])
    dt = np.column_stack([-a * a * pts @ R.T, np.zeros(len(pts))])
    H = np.asarray(v.hess, dtype=float)
    u = v.value(y)
    u3 = np.sum(gv * t, axis=1)
    u33 = np.einsum("ni,ij,nj->n", t, H, t) + np.sum(gv * dt, axis=1)
    return u, u3, u33


def harmonic_pullback_residual(tm, mesh, v, x3_slice=0.0, metric=eval_A0):
    """Discrete weak residual of ``div(A0(x', a) grad u) = 0`` on one slice.

    ``u = v o twist_map`` is interpolated (together with its first and second
    ``x3`` derivatives) into P1 on the cross-section mesh. The residual
    functional against interior hat functions is returned in the discrete
    ``H^{-1}`` norm ``sqrt(r^T S^{-1} r)``, ``S`` the Laplace stiffness.
    """
    if not isinstance(v, HarmonicPolynomial):
        raise TypeError("v must be a HarmonicPolynomial")
    verts, tri = mesh.vertices, mesh.triangles
    u, u3, u33 = pullback_fields(tm, v, verts, x3_slice)
    p = verts[tri]
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    g = np.empty_like(p)
    g[:, 0] = np.column_stack([y[:, 1] - y[:, 2], x[:, 2] - x[:, 1]])
    g[:, 1] = np.column_stack([y[:, 2] - y[:, 0], x[:, 0] - x[:, 2]])
    g[:, 2] = np.column_stack([y[:, 0] - y[:, 1], x[:, 1] - x[:, 0]])
    g /= det[:, None, None]
    w = det / 6.0  # area / 3
    gradU = np.einsum("mi,mid->md", u[tri], g)
    gradU3 = np.einsum("mi,mid->md", u3[tri], g)
    opp = ([1, 2], [2, 0], [0, 1])  # quad point k = midpoint of edge opposite vertex k
    r_loc = np.zeros((len(tri), 3))
    for k, (i, j) in enumerate(opp):
        q = 0.5 * (p[:, i] + p[:, j])
        A = metric(q, tm.rate)
        flux = np.einsum("mab,mb->ma", A[:, :2, :2], gradU) + A[:, :2, 2] * (0.5 * (u3[tri[:, i]] + u3[tri[:, j]]))[:, None]
        src = np.einsum("ma,ma->m", A[:, :2, 2], gradU3) + 0.5 * (u33[tri[:, i]] + u33[tri[:, j]])
        r_loc += w[:, None] * np.einsum("ma,mia->mi", flux, g)
        phi = np.zeros(3)
        phi[[i, j]] = 0.5
        r_loc -= w[:, None] * src[:, None] * phi[None, :]
    r = np.bincount(tri.ravel(), weights=r_loc.ravel(), minlength=mesh.n_vertices)
    s0 = element_matrices(verts, tri)[0]
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    S = sparse.csr_matrix((s0.ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2)
    I = mesh.interior
    rI = r[I]
    z = spsolve(S[I][:, I].tocsc(), rI)
    return float(np.sqrt(max(float(rI @ z), 0.0)))
