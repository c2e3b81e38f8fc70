"""Discrete Neumann-to-Dirichlet and Dirichlet-to-Neumann maps.

The ND matrix is assembled from normalized currents and voltages with the
electrode area entering as the surface quadrature weight,

    R(m, n) = sum_l phi^m_l v^n_l |e_l|,

so that on a homogeneous disk of radius r0 the matrix reproduces the
continuum ND eigenvalues r0 / (n sigma) in the trigonometric basis (up to
electrode-model attenuation).  The DN matrix is its inverse; scaling by
r / gamma0 nondimensionalizes the problem to the unit disk with unit
background admittivity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import IllConditioned, NonPositiveEstimate, ScalingMismatch, ZeroPattern

RAW = "raw"
SCALED = "scaled"

_COND_GUARD = 1e12


@dataclass(frozen=True)
class NDMap:
    matrix: np.ndarray
    L: int
    scaling: str = RAW
    r: float = None
    gamma0: complex = None


@dataclass(frozen=True)
class DNMap:
    matrix: np.ndarray
    L: int
    scaling: str = RAW
    r: float = None
    gamma0: complex = None

    def require_scaled(self):
        if self.scaling != SCALED:
            raise ScalingMismatch("DN map must be scaled (r, gamma0) before use")


def normalize(frame):
    """Normalized currents phi (unit columns) and voltages v (mean-zero, / ||Phi||)."""
    Phi = frame.patterns.matrix
    norms = np.linalg.norm(Phi, axis=0)
    if np.any(norms == 0.0):
        raise ZeroPattern("current pattern column with zero norm")
    phi = Phi / norms
    V = frame.voltages
    v = (V - V.mean(axis=0)) / norms
    return phi, v


def assemble_nd(frame):
    """Discrete ND map R(m,n) = sum_l phi^m_l v^n_l |e_l|."""
    phi, v = normalize(frame)
    area = frame.layout.area
    if area <= 0.0:
        raise ValueError("electrode area must be positive")
    R = phi.T @ v * area
    return NDMap(matrix=R, L=frame.layout.count, scaling=RAW)


def invert_to_dn(nd):
    """DN map as the matrix inverse of the ND map.

    Raises
    ------
    IllConditioned
        If cond(R) exceeds 1e12.
    """
    cond = np.linalg.cond(nd.matrix)
    if not np.isfinite(cond) or cond > _COND_GUARD:
        raise IllConditioned(f"ND matrix condition number {cond:.3e} exceeds guard")
    return DNMap(
        matrix=np.linalg.inv(nd.matrix),
        L=nd.L,
        scaling=nd.scaling,
        r=nd.r,
        gamma0=nd.gamma0,
    )


def scale_dn(dn, r, gamma0):
    """Scale the DN matrix by r / gamma0 (raw -> scaled, once).

    Downstream z-coordinates are then in units of r: the boundary is mapped
    into the unit disk and the background admittivity to ~1.
    """
    if dn.scaling == SCALED:
        raise ScalingMismatch("DN map is already scaled")
    if r <= 0.0:
        raise ValueError("scaling radius must be positive")
    if np.real(gamma0) <= 0.0:
        raise ValueError("gamma0 must have positive real part")
    return DNMap(
        matrix=dn.matrix * (r / gamma0),
        L=dn.L,
        scaling=SCALED,
        r=float(r),
        gamma0=complex(gamma0),
    )


def check_same_scaling(dn_a, dn_b, require_same_gamma0=True):
    """Guard for scattering transforms combining two DN maps."""
    dn_a.require_scaled()
    dn_b.require_scaled()
    if abs(dn_a.r - dn_b.r) > 1e-12 * abs(dn_a.r):
        raise ScalingMismatch(f"radius scalings differ: {dn_a.r} vs {dn_b.r}")
    if require_same_gamma0 and abs(dn_a.gamma0 - dn_b.gamma0) > 1e-12 * abs(dn_a.gamma0):
        raise ScalingMismatch(f"gamma0 scalings differ: {dn_a.gamma0} vs {dn_b.gamma0}")


def _best_constant(v_meas, v_ref):
    """argmin_c || V_meas - V_ref / c ||_F over complex constants c."""
    denom = np.vdot(v_ref, v_meas)
    if denom == 0.0:
        raise NonPositiveEstimate("reference and measured voltages are orthogonal")
    gamma0 = complex(np.vdot(v_ref, v_ref) / denom)
    if gamma0.real <= 0.0:
        raise NonPositiveEstimate(f"best-constant estimate {gamma0} has Re <= 0")
    return gamma0


def estimate_gamma0(frame, reference_simulator):
    """Best constant-admittivity fit against a homogeneous reference solve.

    ``reference_simulator(frame)`` must return the voltage matrix of a
    unit-admittivity solve on the frame's working geometry (one CEM solve
    per geometry; callers are expected to cache it).
    """
    v_ref = np.asarray(reference_simulator(frame))
    return _best_constant(frame.voltages, v_ref)


# -- analytic disk reference (no forward solver required) --------------------
#
# Absolute imaging with the matrix method must not depend on simulated
# data, so its gamma0 scaling and the electrode-model calibration below
# come from a semi-analytic unit-admittivity CEM solve on the enclosing
# disk.  The current density on each electrode is expanded in
# Chebyshev-weighted polynomials T_p(t)/sqrt(1-t^2) (the correct
# edge behavior of the CEM as z_c -> 0), whose Fourier coefficients are
# Bessel functions, and the electrode conditions u + z_c f = U_l are
# enforced by Galerkin projection.  Only nominal layout parameters
# (L, angles, width, height, z_c) and the enclosing radius enter.

_DISK_REFERENCE_CACHE = {}


def _disk_cem_reference(r0, angles, width, height, z_c, pattern_matrix,
                        order=10, n_fourier=6000):
    from scipy.special import jv
    from numpy.polynomial.legendre import leggauss

    key = (
        round(r0, 12),
        tuple(np.round(angles, 12).tolist()),
        round(width, 12),
        round(height, 12),
        round(z_c, 16),
        pattern_matrix.shape,
        pattern_matrix.tobytes(),
        order,
        n_fourier,
    )
    if key in _DISK_REFERENCE_CACHE:
        return _DISK_REFERENCE_CACHE[key]

    L = len(angles)
    P = order
    alpha = 0.5 * width / r0
    m = np.arange(1, n_fourier + 1)
    Jp = np.stack([jv(p, m * alpha) for p in range(P)])
    gx, gw = leggauss(96)
    Tq = np.stack([np.cos(q * np.arccos(gx)) for q in range(P)])
    Wq = (Tq * gw) @ np.exp(1j * np.outer(gx, m * alpha))   # int T_q e^{i m a t} dt
    pf = np.stack([(-1j) ** p * Jp[p] for p in range(P)])

    blocks = {}

    def block(dtheta):
        key_d = round(float(dtheta) % (2.0 * np.pi), 12)
        if key_d not in blocks:
            ph = np.exp(1j * m * key_d) / m
            blocks[key_d] = alpha * r0 * np.einsum("m,pm,qm->qp", ph, pf, Wq).real
        return blocks[key_d]

    gq = np.array([0.0 if q % 2 else 2.0 / (1 - q * q) for q in range(P)])
    cheb_w = np.array([np.pi if q == 0 else np.pi / 2 for q in range(P)])
    A = np.zeros((L * P + 1, L * (P - 1) + L + 1))
    rhs = np.zeros((L * P + 1, pattern_matrix.shape[1]))
    # p = 0 coefficients carry the prescribed currents exactly:
    # I_l = h r0 alpha pi c_{l0}
    c0 = 2.0 * pattern_matrix / (np.pi * height * width)

    def col(l2, p):
        return l2 * (P - 1) + (p - 1)

    for ell in range(L):
        for q in range(P):
            row = ell * P + q
            for ell2 in range(L):
                G = block(angles[ell] - angles[ell2])
                A[row, [col(ell2, p) for p in range(1, P)]] += G[q, 1:]
                rhs[row] -= G[q, 0] * c0[ell2]
            if q >= 1:
                A[row, col(ell, q)] += z_c * cheb_w[q]
            else:
                rhs[row] -= z_c * cheb_w[0] * c0[ell]
            A[row, L * (P - 1) + L] += gq[q]       # constant-potential unknown
            A[row, L * (P - 1) + ell] -= gq[q]     # -U_l
    A[L * P, L * (P - 1) : L * (P - 1) + L] = 1.0  # zero-mean gauge
    sol = np.linalg.solve(A, rhs)
    U = sol[L * (P - 1) : L * (P - 1) + L]
    U = U - U.mean(axis=0)
    _DISK_REFERENCE_CACHE[key] = U
    return U


def analytic_reference_voltages(frame):
    """Unit-admittivity electrode voltages on the enclosing disk."""
    layout = frame.layout
    return _disk_cem_reference(
        layout.boundary.r_enc,
        layout.angles,
        layout.width,
        layout.height,
        frame.contact_impedance,
        frame.patterns.matrix,
    )


def estimate_gamma0_analytic(frame):
    """Best-constant admittivity fit against the analytic disk reference.

    Requires no forward (FEM) simulation; this is the scaling estimate used
    by the absolute matrix method, which by construction needs no
    homogeneous data.
    """
    return _best_constant(frame.voltages, analytic_reference_voltages(frame))


def trig_frequencies(L):
    """Trigonometric frequency of each pattern column: 1..L/2 then 1..L/2-1."""
    return np.array(list(range(1, L // 2 + 1)) + list(range(1, L // 2)))


def attenuation_profile(frame):
    """Per-pattern electrode-model attenuation of the ND eigenvalues.

    The discrete ND map of a homogeneous disk differs from the continuum
    eigenvalues r0 / (n sigma) by a mode-dependent factor (electrode gaps,
    current staircase, and shunting through the low-impedance contacts).
    The profile is computed from the analytic disk reference at unit
    admittivity on the nominal geometry.
    """
    layout = frame.layout
    L = layout.count
    u_ref = analytic_reference_voltages(frame)
    phi_n = frame.patterns.matrix / np.linalg.norm(frame.patterns.matrix, axis=0)
    v_ref = (u_ref - u_ref.mean(axis=0)) / np.linalg.norm(frame.patterns.matrix, axis=0)
    r_diag = np.einsum("lj,lj->j", phi_n, v_ref) * layout.area
    cont = layout.boundary.r_enc / trig_frequencies(L)
    return r_diag / cont


def calibrate_nd(nd, frame):
    """Correct the ND matrix for the electrode-model attenuation.

    Divides entry (m, n) by sqrt(A_m A_n) where A is the attenuation
    profile of the nominal geometry, restoring continuum-calibrated data
    for the scattering transforms that pair measured DN action with
    analytic tangential terms.  Requires trigonometric patterns.
    """
    if frame.patterns.basis_tag != "trig":
        raise ValueError("attenuation calibration requires trigonometric patterns")
    prof = attenuation_profile(frame)
    scale = 1.0 / np.sqrt(np.abs(prof))
    mat = nd.matrix * np.outer(scale, scale)
    return NDMap(matrix=mat, L=nd.L, scaling=nd.scaling, r=nd.r, gamma0=nd.gamma0)
