"""D-bar reconstruction methods for 2-D electrical impedance tomography.

Three direct reconstruction methods from electrode current-voltage data
(the real-conductivity method and two complex-admittivity matrix methods),
a Complete Electrode Model forward simulator for synthetic phantoms, and
evaluation tools for the robustness experiments (wrong boundary shapes,
perturbed electrode angles).
"""

__version__ = "0.1.0"

from .geometry import (
    BoundaryGeometry,
    ElectrodeLayout,
    NormalTangent,
    build_boundary,
    normal_tangent,
    perturb_angles,
    place_electrodes,
)
from .forward import (
    CurrentPatternSet,
    Ellipse,
    MeasurementFrame,
    Phantom,
    Polygon,
    change_of_basis,
    generate_mesh,
    radial_oracle,
    simulate_frame,
    solve_cem,
    trig_patterns,
)
from .dnmap import (
    DNMap,
    NDMap,
    assemble_nd,
    calibrate_nd,
    estimate_gamma0,
    estimate_gamma0_analytic,
    invert_to_dn,
    normalize,
    scale_dn,
)
from .scattering import (
    KGrid,
    ScatteringData,
    default_kgrid,
    expand_exponential,
    psi_exp_scattering,
    sdiff,
    sexp,
    tdiff,
    texp,
    truncate,
)
from .dbar import CGOField, CGOSolution, SolverConfig, conv_cauchy, gmres, solve_image, solve_matrix, solve_real
from .recovery import AdmittivityImage, ZGrid, gamma_from_q, q_from_m, sigma_from_mu, zgrid_for_boundary
from .evaluation import RegionMask, dynamic_range, region_stats, rotation_estimate
from .reconstructor import DbarReconstructor

__all__ = [
    "AdmittivityImage",
    "BoundaryGeometry",
    "CGOField",
    "CGOSolution",
    "CurrentPatternSet",
    "DNMap",
    "DbarReconstructor",
    "ElectrodeLayout",
    "Ellipse",
    "KGrid",
    "MeasurementFrame",
    "NDMap",
    "NormalTangent",
    "Phantom",
    "Polygon",
    "RegionMask",
    "ScatteringData",
    "SolverConfig",
    "ZGrid",
    "assemble_nd",
    "build_boundary",
    "calibrate_nd",
    "change_of_basis",
    "conv_cauchy",
    "default_kgrid",
    "dynamic_range",
    "estimate_gamma0",
    "estimate_gamma0_analytic",
    "expand_exponential",
    "gamma_from_q",
    "generate_mesh",
    "gmres",
    "invert_to_dn",
    "normal_tangent",
    "normalize",
    "perturb_angles",
    "place_electrodes",
    "psi_exp_scattering",
    "q_from_m",
    "radial_oracle",
    "region_stats",
    "rotation_estimate",
    "scale_dn",
    "sdiff",
    "sexp",
    "sigma_from_mu",
    "simulate_frame",
    "solve_cem",
    "solve_image",
    "solve_matrix",
    "solve_real",
    "tdiff",
    "texp",
    "trig_patterns",
    "truncate",
    "zgrid_for_boundary",
]
