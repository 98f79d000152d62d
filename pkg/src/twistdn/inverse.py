"""Recovery of a constant twist rate from DN data and the stability experiments."""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from .conductivity import coercivity_constant
from .dn import (
    BoundaryBasis,
    DnMatrix,
    XiGrid,
    dn_3d_synthesize,
    dn_bullet_mode_matrix,
    dn_mode_matrix,
    dn_reduced_matrix,
    family_norm,
    operator_norm,
)
from .fem import CoercivityError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class MultipleMinimaWarning(UserWarning):
    """The coarse misfit scan has more than one local minimum."""


def _check_admissible(mesh, a):
    if coercivity_constant(mesh, a) <= 0:
        raise CoercivityError(f"a={a} violates |a|*delta < 1 (delta={mesh.delta:.6g})")


def exceeds_sample_bound(mesh, a):
    """True when ``|a| >= delta^(-1/2)``, the smaller bound quoted for the stability theorem."""
    return abs(a) >= mesh.delta ** -0.5


@dataclass(eq=False)
class ForwardModel:
    """Mesh, basis and frequency grid shared by measurements and simulations.

    Forward results are memoised per twist rate; the cache is the only
    mutable state and is never shared across processes.
    """

    mesh: object
    K: int = 4
    sigma_g: float = 1.0
    grid: XiGrid = XiGrid()
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.basis = BoundaryBasis.from_mesh(self.mesh, self.K)
        self.grid.validate(self.sigma_g)

    def family(self, a):
        key = ("family", float(a))
        if key not in self._cache:
            _check_admissible(self.mesh, a)
            self._cache[key] = dn_3d_synthesize(self.mesh, a, self.basis, self.sigma_g, self.grid)
        return self._cache[key]

    def reduced(self, a):
        key = ("reduced", float(a))
        if key not in self._cache:
            _check_admissible(self.mesh, a)
            self._cache[key] = dn_reduced_matrix(self.mesh, a, self.basis)
        return self._cache[key]

    def provenance(self):
        return {
            "section": str(self.mesh.section) if self.mesh.section is not None else None,
            "mesh_h": self.mesh.h,
            "n_vertices": int(self.mesh.n_vertices),
            "K": self.K,
            "sigma_g": self.sigma_g,
            "xi_half_width": self.grid.half_width,
            "xi_step": self.grid.step,
        }


@dataclass(frozen=True, eq=False)
class Measurement:
    """DN data (family or reduced) with optional seeded entrywise Gaussian noise."""

    forward: ForwardModel
    mode: str
    data: object = field(repr=False)
    noise: float = 0.0
    seed: int = 0
    a_true: float = None

    @property
    def provenance(self):
        return dict(self.forward.provenance(), mode=self.mode, noise=self.noise, seed=self.seed)


def _add_noise(M, noise, rng):
    if noise == 0:
        return M
    return M + noise * (rng.standard_normal(M.shape) + 1j * rng.standard_normal(M.shape))


def measure(forward, a, mode="family", noise=0.0, seed=0):
    """Simulated measurement at twist ``a``; noise is added to real and imaginary parts."""
    if mode not in ("family", "reduced"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    if mode == "family":
        fam = forward.family(a)
        data = fam if noise == 0 else fam.replace_matrices(_add_noise(fam.matrices, noise, rng))
    else:
        red = forward.reduced(a)
        data = red if noise == 0 else DnMatrix(
            _add_noise(red.matrix, noise, rng), red.ks, red.a, red.xi, red.variant, red.mesh_h
        )
    return Measurement(forward, mode, data, float(noise), int(seed), float(a))


def misfit(measurement, a):
    """Norm of the difference between the data and the simulation at ``a``."""
    fwd = measurement.forward
    if measurement.mode == "family":
        return family_norm(measurement.data - fwd.family(a)).value
    return operator_norm(measurement.data.matrix - fwd.reduced(a).matrix)


@dataclass(frozen=True)
class RecoveryResult:
    a_hat: float
    misfit_curve: tuple
    bracket: tuple
    iterations: int
    residual: float
    mode: str
    sign_ambiguous: bool = False
    multiple_minima: bool = False

    def to_dict(self):
        return {
            "a_hat": self.a_hat,
            "bracket": list(self.bracket),
            "iterations": self.iterations,
            "residual": self.residual,
            "mode": self.mode,
            "sign_ambiguous": self.sign_ambiguous,
            "multiple_minima": self.multiple_minima,
            "misfit_curve": [list(p) for p in self.misfit_curve],
        }


def recover_rate(measurement, search=(-0.5, 0.5), mode=None, n_scan=21, tol=1e-4):
    """Coarse scan followed by golden-section refinement of the misfit.

    In ``reduced`` mode only ``a >= 0`` is searched (the reduced map depends
    on ``a^2``) and ``sign_ambiguous`` is set whenever ``a_hat`` is nonzero.
    """
    mode = mode or measurement.mode
    if mode != measurement.mode:
        raise ValueError(f"measurement is {measurement.mode!r}, cannot recover in {mode!r} mode")
    lo, hi = map(float, search)
    if mode == "reduced":
        lo, hi = max(lo, 0.0), max(abs(lo), abs(hi))
    mesh = measurement.forward.mesh
    for end in (lo, hi):
        _check_admissible(mesh, end)
    evals = {}

    def f(a):
        if a not in evals:
            evals[a] = misfit(measurement, a)
        return evals[a]

    grid = np.linspace(lo, hi, n_scan)
    vals = np.array([f(float(a)) for a in grid])
    interior = [i for i in range(1, n_scan - 1) if vals[i] < vals[i - 1] and vals[i] <= vals[i + 1]]
    ends = [i for i in (0, n_scan - 1) if vals[i] == vals.min()]
    n_minima = len(interior) + len(ends)
    i_best = int(np.argmin(vals))
    multi = n_minima > 1
    iterations = 0
    if multi:
        warnings.warn(
            f"misfit scan has {n_minima} local minima; returning the best scan point",
            MultipleMinimaWarning,
            stacklevel=2,
        )
        bracket = (float(grid[max(i_best - 1, 0)]), float(grid[min(i_best + 1, n_scan - 1)]))
    else:
        x0 = float(grid[max(i_best - 1, 0)])
        x3 = float(grid[min(i_best + 1, n_scan - 1)])
        x1 = x3 - GOLDEN * (x3 - x0)
        x2 = x0 + GOLDEN * (x3 - x0)
        while x3 - x0 > tol:
            iterations += 1
            if f(x1) <= f(x2):
                x3, x2 = x2, x1
                x1 = x3 - GOLDEN * (x3 - x0)
            else:
                x0, x1 = x1, x2
                x2 = x0 + GOLDEN * (x3 - x0)
        bracket = (x0, x3)
    a_hat = min(evals, key=lambda a: (evals[a], abs(a)))
    curve = tuple(sorted((float(a), float(v)) for a, v in evals.items()))
    return RecoveryResult(
        a_hat=float(a_hat),
        misfit_curve=curve,
        bracket=bracket,
        iterations=iterations,
        residual=float(evals[a_hat]),
        mode=mode,
        sign_ambiguous=(mode == "reduced" and a_hat > tol),
        multiple_minima=multi,
    )


# ---------------------------------------------------------------------------
# Stability


@dataclass(frozen=True)
class StabilityReport:
    pairs: tuple
    differences: tuple  # family-norm ||Lambda_1 - Lambda_2||
    reduced_differences: tuple  # ||Lambda~_1 - Lambda~_2||
    ratios: tuple
    c_hat: float
    reduced_bound_holds: bool
    beyond_sample_bound: tuple
    metadata: dict

    def to_dict(self):
        return {
            "c_hat": self.c_hat,
            "reduced_bound_holds": self.reduced_bound_holds,
            "metadata": self.metadata,
            "pairs": [
                {"a1": a1, "a2": a2, "family_diff": d, "reduced_diff": r, "ratio": q}
                for (a1, a2), d, r, q in zip(self.pairs, self.differences, self.reduced_differences, self.ratios)
            ],
            "beyond_sample_bound": list(self.beyond_sample_bound),
        }

    def ratio_csv(self):
        rows = ["a1,a2,family_diff,reduced_diff,ratio"]
        for (a1, a2), d, r, q in zip(self.pairs, self.differences, self.reduced_differences, self.ratios):
            rows.append(f"{a1!r},{a2!r},{d!r},{r!r},{q!r}")
        return "\n".join(rows) + "\n"


def default_pairs(values=None, close=1e-3):
    """All distinct pairs of ``values`` plus close pairs ``(a, a + close)``."""
    if values is None:
        values = [round(0.1 * i, 10) for i in range(-4, 5)]
    values = [float(v) for v in values]
    pairs = [(a1, a2) for i, a1 in enumerate(values) for a2 in values[i + 1:]]
    pairs += [(a, round(a + close, 12)) for a in values[:-1]]
    return pairs


def stability_experiment(pairs, forward, rtol=1e-12):
    """Empirical Lipschitz ratios ``|a1 - a2| / ||Lambda_1 - Lambda_2||``.

    Also checks, for every pair, that the reduced-map difference is bounded
    by the family-norm difference.
    """
    pairs = [(float(a1), float(a2)) for a1, a2 in pairs if a1 != a2]
    diffs, rdiffs, ratios, flags = [], [], [], []
    holds = True
    for a1, a2 in pairs:
        d = family_norm(forward.family(a1) - forward.family(a2)).value
        r = operator_norm(forward.reduced(a1).matrix - forward.reduced(a2).matrix)
        holds &= r <= d * (1.0 + rtol)
        q = abs(a1 - a2) / d if d > 0 else math.inf
        diffs.append(d)
        rdiffs.append(r)
        ratios.append(q)
        flags.append(exceeds_sample_bound(forward.mesh, a1) or exceeds_sample_bound(forward.mesh, a2))
    return StabilityReport(
        pairs=tuple(pairs),
        differences=tuple(diffs),
        reduced_differences=tuple(rdiffs),
        ratios=tuple(ratios),
        c_hat=max(ratios) if ratios else 0.0,
        reduced_bound_holds=bool(holds),
        beyond_sample_bound=tuple(flags),
        metadata=forward.provenance(),
    )


# ---------------------------------------------------------------------------
# Surrogate approximation


def mode_norm_3d(M, ks, xi):
    """Per-mode norm with the boundary weights ``(1 + k^2 + xi^2)^(+-1/4)``.

    For an operator commuting with translations in ``x3`` the supremum of
    this over ``xi`` is its norm from ``H^{1/2}`` to ``H^{-1/2}`` of the
    cylinder boundary.
    """
    w = (1.0 + np.asarray(ks, dtype=float) ** 2 + xi * xi) ** 0.25
    return float(np.linalg.norm(np.asarray(M) / np.outer(w, w), 2))


@dataclass(frozen=True)
class ApproximationRow:
    a: float
    difference: float
    ratio: float
    worst_xi: float


@dataclass(frozen=True)
class ApproximationTable:
    rows: tuple
    c_approx: float
    variation: float

    def to_csv(self):
        out = ["a,difference,ratio,worst_xi"]
        out += [f"{r.a!r},{r.difference!r},{r.ratio!r},{r.worst_xi!r}" for r in self.rows]
        return "\n".join(out) + "\n"


def approximation_experiment(a_values, mesh, K=4, xis=None):
    """``sup_xi`` distance between the standard and surrogate DN maps.

    Returns, per ``a``, the distance and its ratio to ``|a - 1|``
    (``nan`` at ``a = 1``). ``c_approx`` is the largest ratio and
    ``variation`` is ``max/min - 1`` over the finite ratios.
    """
    if xis is None:
        xis = XiGrid().points
    xis = np.unique(np.abs(np.asarray(xis, dtype=float)))  # the norm is even in xi
    basis = BoundaryBasis.from_mesh(mesh, K)
    rows = []
    for a in a_values:
        a = float(a)
        if not a > 0:
            raise CoercivityError(f"the surrogate needs a > 0, got {a}")
        _check_admissible(mesh, a)
        _check_admissible(mesh, 1.0)
        best, best_xi = 0.0, 0.0
        for xi in xis:
            d = dn_mode_matrix(mesh, a, xi, basis).matrix - dn_bullet_mode_matrix(mesh, a, xi, basis).matrix
            v = mode_norm_3d(d, basis.ks, xi)
            if v > best:
                best, best_xi = v, float(xi)
        ratio = best / abs(a - 1.0) if a != 1.0 else float("nan")
        rows.append(ApproximationRow(a, best, ratio, best_xi))
    finite = [r.ratio for r in rows if not math.isnan(r.ratio)]
    c_approx = max(finite) if finite else 0.0
    variation = (max(finite) / min(finite) - 1.0) if finite else 0.0
    return ApproximationTable(tuple(rows), c_approx, variation)


__all__ = [
    "ApproximationRow",
    "ApproximationTable",
    "ForwardModel",
    "Measurement",
    "MultipleMinimaWarning",
    "RecoveryResult",
    "StabilityReport",
    "approximation_experiment",
    "default_pairs",
    "exceeds_sample_bound",
    "measure",
    "misfit",
    "mode_norm_3d",
    "recover_rate",
    "stability_experiment",
]
