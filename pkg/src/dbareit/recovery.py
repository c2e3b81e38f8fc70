"""From CGO values at k = 0 to admittivity images.

Works in the unit-disk frame (coordinates scaled by r); the final image is
rescaled by gamma0.  The real method uses sigma = mu(z,0)^2 (the squared
form, consistent with the difference rule sigma_diff = mu_diff^2 - 1); the
matrix method reconstructs the potentials Q by centered differencing of
M(z,0) and exponentiates their Cauchy transforms, returning the geometric
mean of the two redundant variants with their disagreement as a
diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dbar import conv_cauchy
from .errors import GridMismatch


@dataclass(frozen=True)
class ZGrid:
    """Uniform n x n pixel grid on [-extent, extent]^2 with a domain mask."""

    n: int = 64
    extent: float = 1.05
    mask: np.ndarray = None

    @property
    def h_z(self):
        return 2.0 * self.extent / (self.n - 1)

    @property
    def axis(self):
        return np.linspace(-self.extent, self.extent, self.n)

    @property
    def nodes(self):
        x, y = np.meshgrid(self.axis, self.axis, indexing="xy")
        return x + 1j * y

    def dilated_mask(self):
        """Mask grown by one pixel ring (gives centered stencils inside the mask)."""
        m = self.mask
        out = m.copy()
        out[1:, :] |= m[:-1, :]
        out[:-1, :] |= m[1:, :]
        out[:, 1:] |= m[:, :-1]
        out[:, :-1] |= m[:, 1:]
        return out


def zgrid_for_boundary(boundary, n=64, extent=1.05, scale=None):
    """Pixel grid with mask = nodes strictly inside the boundary scaled by r."""
    if scale is None:
        scale = boundary.r_enc
    g = ZGrid(n=n, extent=extent)
    z = g.nodes
    r_bound = boundary.radius(np.angle(z)) / scale
    mask = np.abs(z) < r_bound
    return ZGrid(n=n, extent=extent, mask=mask)


@dataclass
class AdmittivityImage:
    """Complex admittivity values (S/m) on a ZGrid."""

    values: np.ndarray
    grid: ZGrid
    mode: str                  # "absolute" | "difference"
    method_tag: str            # "texp" | "approach1" | "approach2"
    gamma0: complex = 1.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def masked_values(self):
        return self.values[self.grid.mask]


def sigma_from_mu(mu_field, gamma0, mode, zgrid, method_tag="texp"):
    """Conductivity from the scalar CGO field at k = 0.

    absolute:   sigma = mu(z,0)^2 * gamma0
    difference: sigma = (mu_diff(z,0)^2 - 1) * gamma0
    Non-converged pixels are masked out.
    """
    mu0 = mu_field.values
    mask = zgrid.mask & mu_field.converged
    if mode == "absolute":
        vals = np.where(mask, mu0**2 * gamma0, gamma0)
    elif mode == "difference":
        vals = np.where(mask, (mu0**2 - 1.0) * gamma0, 0.0)
    else:
        raise ValueError(f"unknown mode: {mode!r}")
    return AdmittivityImage(
        values=vals,
        grid=ZGrid(zgrid.n, zgrid.extent, mask),
        mode=mode,
        method_tag=method_tag,
        gamma0=complex(gamma0),
        diagnostics={"convergence_fraction": mu_field.convergence_fraction},
    )


def _masked_wirtinger(F, h_z, mask):
    """d/dz and d/dzbar of F by centered differences, one-sided at mask edges.

    Pixels with no valid neighbor in a direction get derivative 0 there.
    """
    F = np.asarray(F, dtype=complex)
    Fm = np.where(mask, F, 0.0)

    def directional(axis):
        fwd = np.zeros_like(F)
        bwd = np.zeros_like(F)
        has_f = np.zeros_like(mask)
        has_b = np.zeros_like(mask)
        sl_f = [slice(None)] * 2
        sl_b = [slice(None)] * 2
        sl_f[axis] = slice(None, -1)
        sl_b[axis] = slice(1, None)
        fwd[tuple(sl_f)] = Fm[tuple(sl_b)]
        has_f[tuple(sl_f)] = mask[tuple(sl_b)]
        bwd[tuple(sl_b)] = Fm[tuple(sl_f)]
        has_b[tuple(sl_b)] = mask[tuple(sl_f)]
        both = has_f & has_b
        d = np.zeros_like(F)
        d[both] = (fwd[both] - bwd[both]) / (2.0 * h_z)
        only_f = has_f & ~has_b & mask
        d[only_f] = (fwd[only_f] - Fm[only_f]) / h_z
        only_b = has_b & ~has_f & mask
        d[only_b] = (Fm[only_b] - bwd[only_b]) / h_z
        return d

    dFdx = directional(axis=1)   # x varies along columns
    dFdy = directional(axis=0)
    dz = 0.5 * (dFdx - 1j * dFdy)
    dzbar = 0.5 * (dFdx + 1j * dFdy)
    return dz, dzbar


def q_from_m(m_field_values, h_z, mask, denom_floor=1e-8):
    """Potentials Q12, Q21 from the matrix CGO field M(z, 0).

        Q12 = dzbar[M11 + M12] / (M22 + M21),
        Q21 = dz[M22 + M21] / (M11 + M12).

    The derivative pairing follows from the first-order system at k = 0
    (dzbar couples row 1 to Q12, dz couples row 2 to Q21); the Cauchy
    kernels in gamma_from_q invert exactly these operators.

    Returns (Q12, Q21, ok_mask); pixels whose denominator magnitude falls
    below ``denom_floor`` are dropped from ok_mask.
    """
    M = np.asarray(m_field_values)
    if M.ndim != 4 or M.shape[2:] != (2, 2):
        raise GridMismatch(f"expected (n, n, 2, 2) M field, got {M.shape}")
    top = M[:, :, 0, 0] + M[:, :, 0, 1]
    bot = M[:, :, 1, 1] + M[:, :, 1, 0]
    _, dzbar_top = _masked_wirtinger(top, h_z, mask)
    dz_bot, _ = _masked_wirtinger(bot, h_z, mask)
    ok = mask & (np.abs(bot) > denom_floor) & (np.abs(top) > denom_floor)
    q12 = np.zeros_like(top)
    q21 = np.zeros_like(bot)
    q12[ok] = dzbar_top[ok] / bot[ok]
    q21[ok] = dz_bot[ok] / top[ok]
    return q12, q21, ok


def gamma_from_q(q12, q21, gamma0, mode, zgrid, mask=None, method_tag="approach2"):
    """Admittivity via the exponentiated Cauchy transforms of Q12 and Q21.

        gamma = exp{ -(2/(pi zbar)) * Q12 } = exp{ -(2/(pi z)) * Q21 },

    computed as FFT convolutions on the z-grid.  The two variants are
    combined as exp of the mean log (their geometric mean); their maximum
    relative disagreement over the mask is reported as a diagnostic.
    Difference mode returns gamma0 * (exp{...} - 1).
    """
    if mask is None:
        mask = zgrid.mask
    q12 = np.where(mask, q12, 0.0)
    q21 = np.where(mask, q21, 0.0)
    h = zgrid.h_z
    w1 = -2.0 * conv_cauchy(q12, h, kernel="1/(pi*zbar)")
    w2 = -2.0 * conv_cauchy(q21, h, kernel="1/(pi*z)")
    g1 = np.exp(w1)
    g2 = np.exp(w2)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(g1 - g2) / np.maximum(np.abs(g1), 1e-300)
    disagreement = float(np.max(rel[mask])) if np.any(mask) else 0.0
    gmean = np.exp(0.5 * (w1 + w2))
    if mode == "absolute":
        vals = np.where(mask, gmean * gamma0, gamma0)
    elif mode == "difference":
        vals = np.where(mask, (gmean - 1.0) * gamma0, 0.0)
    else:
        raise ValueError(f"unknown mode: {mode!r}")
    return AdmittivityImage(
        values=vals,
        grid=ZGrid(zgrid.n, zgrid.extent, mask),
        mode=mode,
        method_tag=method_tag,
        gamma0=complex(gamma0),
        diagnostics={"variant_disagreement": disagreement},
    )
