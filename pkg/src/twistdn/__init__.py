"""Dirichlet-to-Neumann maps of straightened twisted waveguides.

Forward P1 computation of the mode-wise DN maps for a constant twist rate,
their operator identities, and recovery of the twist rate from DN data.
"""

from .conductivity import (
    coercivity_constant,
    daAtilde_eigenvalues,
    dtA_eigenvalues,
    ellipticity_bounds,
    eval_A0,
    eval_Abullet,
    eval_Atilde,
)
from .dn import (
    BoundaryBasis,
    DnFamily,
    DnMatrix,
    GridError,
    SobolevWeighting,
    XiGrid,
    dn_3d_synthesize,
    dn_bullet_mode_matrix,
    dn_difference_identity_check,
    dn_mode_matrix,
    dn_reduced_matrix,
    family_norm,
    operator_norm,
)
from .fem import CoercivityError, ModeSolution, ModeSystem, SolverError, assemble_mode_system, solve_mode
from .geometry import (
    CrossSection,
    HarmonicPolynomial,
    Mesh,
    MeshError,
    TwistMap,
    build_mesh,
    harmonic_pullback_residual,
    rotation,
    straighten_map,
    twist_map,
)
from .inverse import ForwardModel, measure, misfit, recover_rate, stability_experiment, approximation_experiment
from .oracle import bessel_I, bessel_I_prime, disc_dn_eigenvalue

__version__ = "0.1.0"
