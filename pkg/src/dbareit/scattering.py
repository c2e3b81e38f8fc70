"""Born-approximation scattering transforms on a truncated k-grid.

All transforms work in the nondimensionalized frame: the DN maps must be
scaled (r, gamma0), electrode centers are divided by r, and the perimeter
weight P/L uses the scaled perimeter (periodic-uniform quadrature of the
boundary integrals).

The real method evaluates

    t(k) = sum_l e^{i conj(k) conj(z_l)} [phi (L_sigma - L_1) a(k)]_l * P/L,

with a(k) the pattern-basis coefficients of e^{i k z}.  The matrix method
evaluates the two off-diagonal entries

    S12(k) =  (i/4pi) (P/L) sum_l e^{-i conj(k) z_l} [phi L a_2(k) + d12(k)]_l
    S21(k) = -(i/4pi) (P/L) sum_l e^{ i conj(k) conj(z_l)} [phi L a_1(k) + d21(k)]_l

where d12 = -i * (tangential derivative of e^{-i k conj(z)} / (-ik)) and
d21 = +i * (tangential derivative of e^{i k z} / (ik)); with the outward
normal nu = -i tau these are -conj(nu) e^{-ik conj(z)} and -nu e^{ikz}.
This sign pairing makes both brackets vanish identically for homogeneous
data, as the theory requires (the scattering matrix of the unit
admittivity is zero).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dnmap import check_same_scaling
from .errors import GridMismatch, ZeroK
from .forward.patterns import trig_patterns
from .geometry import outward_normals


@dataclass(frozen=True)
class KGrid:
    """Uniform (2^N+1)-per-side grid in the complex k plane, centered at 0."""

    n: int
    h_k: float
    R: float

    def __post_init__(self):
        m = self.n - 1
        if m <= 0 or m & (m - 1) != 0:
            raise GridMismatch(f"grid size {self.n} is not 2^N + 1")
        if (self.n - 1) * self.h_k / 2.0 < self.R - 1e-12:
            raise GridMismatch("k-grid does not cover the scattering disc |k| <= R")

    @property
    def axis(self):
        c = self.n // 2
        return (np.arange(self.n) - c) * self.h_k

    @property
    def nodes(self):
        ax = self.axis
        kx, ky = np.meshgrid(ax, ax, indexing="xy")
        return kx + 1j * ky  # [iy, ix]

    @property
    def center(self):
        return self.n // 2

    def inside_cutoff(self):
        return np.abs(self.nodes) <= self.R + 1e-12


def default_kgrid():
    """The 33 x 33 grid with h_k = 0.4706 and cutoff R = 4."""
    return KGrid(n=33, h_k=0.4706, R=4.0)


@dataclass(frozen=True)
class ScatteringData:
    """Scattering values on a k-grid: scalar t or the matrix pair (S12, S21)."""

    kind: str                 # "real_t" | "matrix_S"
    kgrid: KGrid
    mode: str = "absolute"    # "absolute" | "difference"
    t: np.ndarray = None
    s12: np.ndarray = None
    s21: np.ndarray = None
    cutoff: float = None
    threshold: float = None

    def grids(self):
        if self.kind == "real_t":
            return (self.t,)
        return (self.s12, self.s21)

    def is_zero(self):
        return all(not np.any(g) for g in self.grids())


@dataclass(frozen=True)
class BoundaryQuadrature:
    """Electrode-center quadrature data in the unit-radius working frame."""

    centers: np.ndarray   # complex (L,), scaled by 1/r
    normals: np.ndarray   # complex (L,), outward unit normals
    weight: float         # scaled perimeter / L
    phi: np.ndarray       # L x (L-1) normalized current patterns


def boundary_quadrature(layout, r, phi=None, boundary=None):
    if boundary is None:
        boundary = layout.boundary
    if phi is None:
        pats = trig_patterns(layout.count, 1.0, angles=layout.angles)
        phi = pats.matrix / np.linalg.norm(pats.matrix, axis=0)
    nu = outward_normals(boundary, layout.angles)
    return BoundaryQuadrature(
        centers=layout.centers / r,
        normals=nu,
        weight=boundary.perimeter / (r * layout.count),
        phi=phi,
    )


def expand_exponential(k, layout, patterns, which="plain", centers=None):
    """Project CGO asymptotics onto the normalized current-pattern span.

    Returns the electrode samples of the projection sum_j c_j phi^j with
    c_j = sum_l f(z_l) phi^j_l, where f is e^{ikz} (``plain``),
    e^{ikz}/(ik) (``u1``) or e^{-ik conj(z)}/(-ik) (``u2``).
    """
    if centers is None:
        centers = layout.centers
    phi = patterns.matrix / np.linalg.norm(patterns.matrix, axis=0)
    if which == "plain":
        f = np.exp(1j * k * centers)
    elif which == "u1":
        if k == 0:
            raise ZeroK("u1 asymptotics undefined at k = 0")
        f = np.exp(1j * k * centers) / (1j * k)
    elif which == "u2":
        if k == 0:
            raise ZeroK("u2 asymptotics undefined at k = 0")
        f = np.exp(-1j * k * np.conj(centers)) / (-1j * k)
    else:
        raise ValueError(f"unknown asymptotic: {which!r}")
    return phi @ (phi.T @ f)


def _nonzero_nodes(kgrid):
    k = kgrid.nodes.ravel()
    mask = (np.abs(k) <= kgrid.R + 1e-12) & (k != 0.0)
    return k, mask


def _real_t_values(G, kvals, quad):
    """t(k) for an array of k, given the DN difference matrix G."""
    z = quad.centers
    E = np.exp(1j * np.multiply.outer(z, kvals))           # (L, M): e^{i k z_l}
    coeffs = quad.phi.T @ E                                 # (L-1, M)
    samples = quad.phi @ (G @ coeffs)                       # (L, M)
    Wt = np.exp(1j * np.multiply.outer(np.conj(z), np.conj(kvals)))
    return quad.weight * np.sum(Wt * samples, axis=0)


def texp(dn_sigma, dn_one, kgrid, layout, boundary=None, phi=None, threshold=None):
    """Born scattering transform of the real method, (L_sigma - L_1) data."""
    check_same_scaling(dn_sigma, dn_one, require_same_gamma0=False)
    quad = boundary_quadrature(layout, dn_sigma.r, phi=phi, boundary=boundary)
    G = dn_sigma.matrix - dn_one.matrix
    kflat, mask = _nonzero_nodes(kgrid)
    t = np.zeros(kflat.shape, dtype=complex)
    t[mask] = _real_t_values(G, kflat[mask], quad)
    data = ScatteringData(
        kind="real_t",
        kgrid=kgrid,
        mode="absolute",
        t=t.reshape(kgrid.n, kgrid.n),
        cutoff=kgrid.R,
    )
    return truncate(data, kgrid.R, threshold) if threshold else data


def tdiff(dn_sigma, dn_ref, kgrid, layout, boundary=None, phi=None, threshold=None):
    """Differencing scattering transform: L_ref replaces L_1."""
    check_same_scaling(dn_sigma, dn_ref)
    out = texp(dn_sigma, dn_ref, kgrid, layout, boundary=boundary, phi=phi,
               threshold=threshold)
    return replace(out, mode="difference")


def _matrix_entries(apply_dn, kvals, quad, with_tangential):
    """S12, S21 values at k (column arrays) for one DN-action callable."""
    z = quad.centers
    zb = np.conj(z)
    nu = quad.normals
    E1 = np.exp(1j * np.multiply.outer(z, kvals))           # e^{i k z_l}
    E2 = np.exp(-1j * np.multiply.outer(zb, kvals))         # e^{-i k conj(z_l)}
    u1 = E1 / (1j * kvals)
    u2 = E2 / (-1j * kvals)
    g2 = quad.phi @ apply_dn(quad.phi.T @ u2)
    g1 = quad.phi @ apply_dn(quad.phi.T @ u1)
    if with_tangential:
        g2 = g2 - np.conj(nu)[:, None] * E2
        g1 = g1 - nu[:, None] * E1
    w12 = np.exp(-1j * np.multiply.outer(z, np.conj(kvals)))        # e^{-i conj(k) z}
    w21 = np.exp(1j * np.multiply.outer(zb, np.conj(kvals)))        # e^{i conj(k) conj(z)}
    pref = 1j / (4.0 * np.pi) * quad.weight
    s12 = pref * np.sum(w12 * g2, axis=0)
    s21 = -pref * np.sum(w21 * g1, axis=0)
    return s12, s21


def _fill_k0(grid, kgrid):
    """Bilinear interpolation at the origin node from its four neighbors."""
    c = kgrid.center
    grid[c, c] = 0.25 * (grid[c - 1, c] + grid[c + 1, c] + grid[c, c - 1] + grid[c, c + 1])
    return grid


def _matrix_scattering(apply_dn, kgrid, quad, with_tangential, mode, threshold):
    kflat, mask = _nonzero_nodes(kgrid)
    s12 = np.zeros(kflat.shape, dtype=complex)
    s21 = np.zeros(kflat.shape, dtype=complex)
    s12[mask], s21[mask] = _matrix_entries(apply_dn, kflat[mask], quad, with_tangential)
    s12 = _fill_k0(s12.reshape(kgrid.n, kgrid.n), kgrid)
    s21 = _fill_k0(s21.reshape(kgrid.n, kgrid.n), kgrid)
    data = ScatteringData(
        kind="matrix_S", kgrid=kgrid, mode=mode, s12=s12, s21=s21, cutoff=kgrid.R
    )
    return truncate(data, kgrid.R, threshold)


def sexp(dn_gamma, kgrid, layout, boundary=None, phi=None, threshold=0.4):
    """Approach-2 Born scattering data, from the measured DN map alone."""
    dn_gamma.require_scaled()
    quad = boundary_quadrature(layout, dn_gamma.r, phi=phi, boundary=boundary)
    G = dn_gamma.matrix
    return _matrix_scattering(
        lambda c: G @ c, kgrid, quad, with_tangential=True, mode="absolute",
        threshold=threshold,
    )


def sdiff(dn_gamma, dn_ref, kgrid, layout, boundary=None, phi=None, threshold=0.4):
    """Approach-2 difference imaging: DN difference, no tangential term."""
    check_same_scaling(dn_gamma, dn_ref)
    quad = boundary_quadrature(layout, dn_gamma.r, phi=phi, boundary=boundary)
    G = dn_gamma.matrix - dn_ref.matrix
    return _matrix_scattering(
        lambda c: G @ c, kgrid, quad, with_tangential=False, mode="difference",
        threshold=threshold,
    )


def _psi_traces(G, kvals, quad):
    """Born CGO traces on electrode centers for the trace-based method."""
    z = quad.centers
    zb = np.conj(z)
    E1 = np.exp(1j * np.multiply.outer(z, kvals))
    E2 = np.exp(-1j * np.multiply.outer(zb, kvals))
    g2 = quad.phi @ (G @ (quad.phi.T @ (E2 / (-1j * kvals))))
    g1 = quad.phi @ (G @ (quad.phi.T @ (E1 / (1j * kvals))))
    dz = z[:, None] - z[None, :]                  # z_l - zeta_l'
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(dz == 0.0, 0.0, 1.0 / np.where(dz == 0.0, 1.0, dz))
    # kernel12[l, l', m] = e^{i conj(k)(z_l - zeta_l')} / (2 pi (z_l - zeta_l'));
    # the 1/(2 pi) weight makes the trace-based Born data reduce to the
    # DN-form Born data in the linearized (small k) regime, which pins the
    # constant unambiguously.
    phase = np.exp(1j * np.multiply.outer(dz, np.conj(kvals)))
    K12 = phase * inv[:, :, None] / (2.0 * np.pi)
    psi12 = quad.weight * np.einsum("abm,bm->am", K12, g2)
    phase21 = np.conj(np.exp(1j * np.multiply.outer(dz, kvals)))
    K21 = phase21 * np.conj(inv)[:, :, None] / (2.0 * np.pi)
    psi21 = quad.weight * np.einsum("abm,bm->am", K21, g1)
    return psi12, psi21


def psi_exp_scattering(
    dn_gamma, dn_ref, kgrid, layout, boundary=None, phi=None, threshold=0.4,
    mode="absolute",
):
    """Approach-1 scattering data via Born-approximated CGO traces.

    The trace kernels follow the Faddeev structure e^{i conj(k)(z - zeta)}
    / (4 pi (z - zeta)) with the coincident-node term omitted
    (principal-value reading of the Cauchy kernel).
    """
    require_same = mode == "difference"
    check_same_scaling(dn_gamma, dn_ref, require_same_gamma0=require_same)
    quad = boundary_quadrature(layout, dn_gamma.r, phi=phi, boundary=boundary)
    G = dn_gamma.matrix - dn_ref.matrix
    kflat, mask = _nonzero_nodes(kgrid)
    s12 = np.zeros(kflat.shape, dtype=complex)
    s21 = np.zeros(kflat.shape, dtype=complex)
    kv = kflat[mask]
    psi12, psi21 = _psi_traces(G, kv, quad)
    z = quad.centers
    nu = quad.normals
    w12 = np.exp(-1j * np.multiply.outer(z, np.conj(kv)))
    w21 = np.exp(1j * np.multiply.outer(np.conj(z), np.conj(kv)))
    pref = 1j / (2.0 * np.pi) * quad.weight
    s12[mask] = pref * np.sum(w12 * psi12 * nu[:, None], axis=0)
    s21[mask] = -pref * np.sum(w21 * psi21 * np.conj(nu)[:, None], axis=0)
    s12 = _fill_k0(s12.reshape(kgrid.n, kgrid.n), kgrid)
    s21 = _fill_k0(s21.reshape(kgrid.n, kgrid.n), kgrid)
    data = ScatteringData(
        kind="matrix_S", kgrid=kgrid, mode=mode, s12=s12, s21=s21, cutoff=kgrid.R
    )
    return truncate(data, kgrid.R, threshold)


def truncate(sdata, R=None, threshold=None):
    """Zero values outside |k| <= R and entries with |Re| or |Im| above threshold.

    Idempotent; applied entrywise and independently to S12 and S21.
    """
    R = sdata.cutoff if R is None else R
    keep = np.abs(sdata.kgrid.nodes) <= (R + 1e-12 if R is not None else np.inf)

    def clip(g):
        if g is None:
            return None
        out = np.where(keep, g, 0.0)
        if threshold is not None:
            bad = (np.abs(out.real) > threshold) | (np.abs(out.imag) > threshold)
            out = np.where(bad, 0.0, out)
        return out

    return replace(
        sdata,
        t=clip(sdata.t),
        s12=clip(sdata.s12),
        s21=clip(sdata.s21),
        cutoff=R,
        threshold=threshold if threshold is not None else sdata.threshold,
    )
