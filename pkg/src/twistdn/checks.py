"""Invariant suite behind ``twistdn verify``.

Each check returns a :class:`CheckResult` with the measured quantity and the
threshold it is compared to. Sizes are kept small so the whole suite runs in
well under a minute at the default settings.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import conductivity as cond
from .dn import (
    BoundaryBasis,
    XiGrid,
    dn_bullet_mode_matrix,
    dn_difference_identity_check,
    dn_mode_matrix,
    dn_reduced_matrix,
    family_norm,
    operator_norm,
)
from .geometry import CrossSection, HarmonicPolynomial, TwistMap, build_mesh, check_mesh, harmonic_pullback_residual
from .inverse import ForwardModel, measure, recover_rate
from .oracle import disc_dn_eigenvalue


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    comparison: str = "<="

    @property
    def passed(self):
        if not math.isfinite(self.value):
            return False
        if self.comparison == "<=":
            return self.value <= self.threshold
        return self.value >= self.threshold

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "value": float(f"{self.value:.10g}"),
            "threshold": self.threshold,
            "comparison": self.comparison,
        }


def _rel(x, y):
    return abs(x - y) / max(abs(y), 1e-300)


def check_algebra(seed=0, n=10_000):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (n, 2))
    t = rng.uniform(-2, 2, n)
    z = rng.standard_normal((n, 3))
    A = cond.eval_A0(x, t)
    q = np.einsum("ni,nij,nj->n", z, A, z)
    f = z[:, 0] ** 2 + z[:, 1] ** 2 + (z[:, 2] + t * (x[:, 1] * z[:, 0] - x[:, 0] * z[:, 1])) ** 2
    fact = float(np.max(np.abs(q - f) / np.maximum(1.0, np.abs(f))))
    num = np.linalg.eigvalsh(cond.dtA0(x, t))
    eig = float(np.max(np.abs(np.sort(np.stack(cond.dtA_eigenvalues(x, t), -1), -1) - num)))
    return [
        CheckResult("A0 quadratic-form factorisation", fact, 1e-14),
        CheckResult("dA0/dt eigenvalue formulas", eig, 1e-10),
        CheckResult("dA0/dt has a negative eigenvalue off the axis",
                    float(np.max(cond.dtA_eigenvalues(x, t)[1])), 0.0),
    ]


def check_disc(h, K, a=0.3, xi=0.7):
    mesh = build_mesh(CrossSection.unit_disc(), h)
    basis = BoundaryBasis.from_mesh(mesh, K)
    M = dn_mode_matrix(mesh, a, xi, basis)
    oracle = np.array([disc_dn_eigenvalue(a, xi, k) for k in basis.ks])
    err = float(np.max(np.abs(M.diagonal().real - oracle) / oracle))
    off = M.matrix - np.diag(M.diagonal())
    k0 = [dn_mode_matrix(mesh, s, xi, basis).entry(0, 0) for s in (-0.4, 0.0, 0.4)]
    R = dn_reduced_matrix(mesh, a, basis).matrix
    Rm = dn_reduced_matrix(mesh, -a, basis).matrix
    ident = dn_difference_identity_check(mesh, 0.2, 0.4, 1.0, basis).residual
    return [
        CheckResult("mesh invariants (unit disc)", float(len(check_mesh(mesh))), 0.0),
        CheckResult("disc DN diagonal vs Bessel oracle (relative)", err, 10.0 * h * h),
        CheckResult("disc DN off-diagonal / norm", float(np.max(np.abs(off)) / np.max(np.abs(M.matrix))), 1e-8),
        CheckResult("DN Hermitian symmetry", M.symmetry_residual(), 1e-8),
        CheckResult("DN difference identity", ident, 1e-8),
        CheckResult("k=0 entry independent of a", float(max(abs(v - k0[1]) for v in k0)), 1e-6),
        CheckResult("reduced map parity (exact)", float(np.max(np.abs(R - Rm))), 0.0),
    ]


def check_bullet(h, K, xi=0.5):
    mesh = build_mesh(CrossSection.ellipse(0.5, 0.5), 0.5 * h)
    basis = BoundaryBasis.from_mesh(mesh, K)
    b1 = dn_bullet_mode_matrix(mesh, 1.0, xi, basis).matrix
    b2 = dn_bullet_mode_matrix(mesh, 1.7, xi, basis).matrix
    std = dn_mode_matrix(mesh, 1.0, xi, basis).matrix
    scale = float(np.max(np.abs(b2 - 1.7 * b1)) / np.max(np.abs(b2)))
    return [
        CheckResult("surrogate DN linear in a", scale, 1e-12),
        CheckResult("surrogate equals standard at a=1", float(np.max(np.abs(b1 - std))), 1e-9),
    ]


def check_family(h, K, sigma_g, grid, a_pairs=((0.1, 0.3), (-0.2, 0.2))):
    fwd = ForwardModel(build_mesh(CrossSection.unit_disc(), h), K, sigma_g, grid)
    worst = -math.inf
    zf = 0.0
    for a1, a2 in a_pairs:
        fam = fwd.family(a1) - fwd.family(a2)
        red = fwd.reduced(a1).matrix - fwd.reduced(a2).matrix
        worst = max(worst, operator_norm(red) - family_norm(fam).value)
        zf = max(zf, float(np.max(np.abs(fwd.family(a1).zero_frequency_sum() - fwd.reduced(a1).matrix))))
    rec = recover_rate(measure(fwd, 0.3), (-0.5, 0.5))
    red = recover_rate(measure(fwd, 0.3, mode="reduced"), (-0.5, 0.5))
    return [
        CheckResult("zero-frequency synthesis equals reduced DN", zf, 1e-10),
        CheckResult("reduced difference <= family difference (margin)", worst, 1e-12),
        CheckResult("noiseless recovery |a_hat - 0.3|", abs(rec.a_hat - 0.3), 1e-3),
        CheckResult("reduced recovery flags sign ambiguity", float(red.sign_ambiguous), 1.0, ">="),
    ]


def check_pullback(h):
    section = CrossSection.unit_disc()
    coarse, fine = build_mesh(section, 2 * h), build_mesh(section, h)
    v = HarmonicPolynomial(hess=((2.0, 0.0, 0.0), (0.0, -2.0, 0.0), (0.0, 0.0, 0.0)))
    tm = TwistMap(0.2)
    r1 = harmonic_pullback_residual(tm, coarse, v, 0.4)
    r2 = harmonic_pullback_residual(tm, fine, v, 0.4)
    lin = harmonic_pullback_residual(TwistMap(0.0), fine, HarmonicPolynomial(grad=(1.0, 0.0, 0.0)))
    return [
        CheckResult("pullback residual, straight linear case", lin, 1e-12),
        CheckResult("pullback residual reduction factor on refinement", r1 / r2, 1.8, ">="),
    ]


def run_checks(h=0.1, K=4, sigma_g=1.0, grid=XiGrid(6.0, 0.375)):
    results = []
    results += check_algebra()
    results += check_disc(h, K)
    results += check_bullet(h, K)
    results += check_family(h, K, sigma_g, grid)
    results += check_pullback(h)
    return results
