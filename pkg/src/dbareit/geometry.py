"""Boundary curves, electrode layouts, and their deliberate perturbations.

Boundaries are star-shaped curves given by a truncated complex Fourier
series of the radius function,

    r(theta) = Re( sum_n c_n exp(i n theta) ),    z(theta) = r(theta) e^{i theta},

so Re(c_n) feeds cos(n theta) and -Im(c_n) feeds sin(n theta).  All objects
here are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateStep, ElectrodesOverlap, NonPositiveRadius, OddElectrodeCount

_DENSE = 4096  # samples for arc-length tables; spectrally adequate for <=32 modes

# Chest-shaped tank preset: smooth chest-like curve scaled to perimeter 1.026 m.
# Radius spans roughly 0.138..0.180 m (tank scale).
_CHEST_COEFFS = (
    0.16109899 + 0.0j,
    0.00161099 + 0.00563846j,
    0.01610990 + 0.0j,
    0.00128879 + 0.00322198j,
    -0.00338308 + 0.0j,
    0.0 + 0.0j,
    0.00096659 + 0.0j,
)

# "Alternative" boundary: same tank digitized imprecisely (wobbled harmonics).
_ALT_COEFFS = (
    0.16109899 + 0.0j,
    0.00561099 - 0.00036154j,
    0.01482111 + 0.0j,
    -0.00371121 + 0.00722198j,
    -0.00338308 + 0.0j,
    0.00400000 + 0.0j,
    0.00096659 + 0.0j,
)


@dataclass(frozen=True)
class BoundaryGeometry:
    """Star-shaped boundary curve with precomputed arc-length data."""

    fourier_coeffs: tuple
    perimeter: float
    r_enc: float
    preset_tag: str = "custom"
    # dense arc-length table s(theta) used for gap checks and meshing
    _theta_table: np.ndarray = field(repr=False, default=None)
    _arclen_table: np.ndarray = field(repr=False, default=None)

    def radius(self, theta):
        """r(theta), vectorized."""
        theta = np.asarray(theta, dtype=float)
        n = np.arange(len(self.fourier_coeffs))
        ph = np.exp(1j * np.multiply.outer(theta, n))
        return (ph @ np.asarray(self.fourier_coeffs)).real

    def radius_deriv(self, theta):
        """dr/dtheta, analytic from the Fourier series."""
        theta = np.asarray(theta, dtype=float)
        n = np.arange(len(self.fourier_coeffs))
        ph = np.exp(1j * np.multiply.outer(theta, n))
        return (ph @ (1j * n * np.asarray(self.fourier_coeffs))).real

    def point(self, theta):
        """Boundary point z(theta) = r(theta) e^{i theta} as complex."""
        theta = np.asarray(theta, dtype=float)
        return self.radius(theta) * np.exp(1j * theta)

    def speed(self, theta):
        """|z'(theta)| = sqrt(r^2 + r'^2)."""
        return np.hypot(self.radius(theta), self.radius_deriv(theta))

    def arc_length(self, theta):
        """Arc length s(theta) measured from theta = 0, by table lookup."""
        theta = np.mod(np.asarray(theta, dtype=float), 2.0 * np.pi)
        return np.interp(theta, self._theta_table, self._arclen_table)


def _arclength_tables(coeffs):
    theta = np.linspace(0.0, 2.0 * np.pi, _DENSE + 1)
    n = np.arange(len(coeffs))
    ph = np.exp(1j * np.outer(theta, n))
    c = np.asarray(coeffs)
    r = (ph @ c).real
    rp = (ph @ (1j * n * c)).real
    sp = np.hypot(r, rp)
    dth = theta[1] - theta[0]
    # cumulative trapezoid, s(0) = 0
    s = np.concatenate([[0.0], np.cumsum(0.5 * (sp[1:] + sp[:-1]) * dth)])
    return theta, s


def _fit_radius_series(radius_fn, n_coeffs=32):
    """Fit r(theta) samples with a half-spectrum Fourier series."""
    m = 4096
    theta = np.linspace(0.0, 2.0 * np.pi, m, endpoint=False)
    r = radius_fn(theta)
    spec = np.fft.fft(r) / m
    coeffs = np.zeros(n_coeffs, dtype=complex)
    coeffs[0] = spec[0].real
    coeffs[1:] = 2.0 * spec[1:n_coeffs]
    return tuple(coeffs)


def build_boundary(preset_or_coeffs, **kwargs):
    """Construct a BoundaryGeometry from a preset name or coefficient sequence.

    Presets
    -------
    ``circle`` (R0), ``oval`` (a, b semi-axes), ``chest`` (perimeter 1.026 m),
    ``alternative`` (imprecisely digitized chest tank).  Any other input is
    treated as a complex coefficient sequence.

    Raises
    ------
    NonPositiveRadius
        If r(theta) <= 0 anywhere on a 1024-point grid.
    """
    tag = "custom"
    if isinstance(preset_or_coeffs, str):
        tag = preset_or_coeffs
        if tag == "circle":
            coeffs = (complex(kwargs.get("R0", 0.15)),)
        elif tag == "oval":
            a = float(kwargs.get("a", 0.18))
            b = float(kwargs.get("b", 0.12))
            coeffs = _fit_radius_series(
                lambda th: a * b / np.hypot(b * np.cos(th), a * np.sin(th))
            )
        elif tag == "chest":
            coeffs = _CHEST_COEFFS
        elif tag == "alternative":
            coeffs = _ALT_COEFFS
        else:
            raise ValueError(f"unknown boundary preset: {tag!r}")
    else:
        coeffs = tuple(complex(c) for c in preset_or_coeffs)

    n = np.arange(len(coeffs))
    th_check = np.linspace(0.0, 2.0 * np.pi, 1024, endpoint=False)
    r_check = (np.exp(1j * np.outer(th_check, n)) @ np.asarray(coeffs)).real
    if np.min(r_check) <= 0.0:
        raise NonPositiveRadius(
            f"radius function reaches {np.min(r_check):.3e} <= 0"
        )

    theta_t, s_t = _arclength_tables(coeffs)
    return BoundaryGeometry(
        fourier_coeffs=coeffs,
        perimeter=float(s_t[-1]),
        r_enc=float(np.max(r_check)),
        preset_tag=tag,
        _theta_table=theta_t,
        _arclen_table=s_t,
    )


@dataclass(frozen=True)
class ElectrodeLayout:
    """L electrodes on a boundary curve.

    ``angles`` are the center angles theta_l; ``centers`` the complex points
    z_l on the curve; ``area`` is the contact area width x tank height.
    Perturbed layouts that overlap carry ``physical=False``.
    """

    boundary: BoundaryGeometry
    count: int
    angles: np.ndarray
    centers: np.ndarray
    width: float
    height: float
    physical: bool

    @property
    def area(self):
        """Electrode contact area |e_l| = width * height (m^2)."""
        return self.width * self.height

    def arc_gaps(self):
        """Arc-length gaps between consecutive electrodes (sorted by angle)."""
        s = np.sort(self.boundary.arc_length(self.angles))
        d = np.diff(np.concatenate([s, [s[0] + self.boundary.perimeter]]))
        return d - self.width


@dataclass(frozen=True)
class NormalTangent:
    """Unit tangent tau and outward unit normal nu = tau_2 - i tau_1 at a boundary point."""

    nu: complex
    tau: complex


def place_electrodes(boundary, L, width, h_tank, offset_angle=0.0, require_physical=True):
    """Equispace L electrode centers in angle: theta_l = offset + 2 pi (l-1) / L.

    Raises
    ------
    ElectrodesOverlap
        Only when ``require_physical`` and the arc gaps are not all positive.
    """
    if L % 2 != 0:
        raise OddElectrodeCount("electrode count L must be even")
    if width * L > boundary.perimeter:
        raise ValueError("electrodes cannot exceed the boundary perimeter")
    angles = offset_angle + 2.0 * np.pi * np.arange(L) / L
    layout = _layout_at(boundary, angles, width, h_tank)
    if require_physical and not layout.physical:
        raise ElectrodesOverlap("equispaced layout overlaps on this boundary")
    return layout


def _layout_at(boundary, angles, width, h_tank):
    angles = np.asarray(angles, dtype=float)
    centers = boundary.point(angles)
    s = np.sort(boundary.arc_length(angles))
    d = np.diff(np.concatenate([s, [s[0] + boundary.perimeter]]))
    physical = bool(np.all(d - width > 0.0))
    return ElectrodeLayout(
        boundary=boundary,
        count=len(angles),
        angles=angles,
        centers=centers,
        width=float(width),
        height=float(h_tank),
        physical=physical,
    )


def perturb_angles(layout, mode, magnitude, rng_seed=0):
    """Return a layout with perturbed electrode angles.

    ``uniform_shift`` adds the constant ``magnitude`` to every angle;
    ``noisy`` adds i.i.d. uniform noise on [-magnitude, magnitude], seeded.
    Overlapping results are permitted and flagged ``physical=False``.
    """
    if magnitude < 0.0:
        raise ValueError("perturbation magnitude must be >= 0")
    if magnitude == 0.0:
        return layout
    if mode == "uniform_shift":
        delta = np.full(layout.count, magnitude)
    elif mode == "noisy":
        rng = np.random.default_rng(rng_seed)
        delta = rng.uniform(-magnitude, magnitude, size=layout.count)
    else:
        raise ValueError(f"unknown perturbation mode: {mode!r}")
    return _layout_at(
        layout.boundary, layout.angles + delta, layout.width, layout.height
    )


def normal_tangent(boundary, theta, eps=1e-6):
    """Forward-difference unit tangent and outward normal at angle theta.

    tau is the unit secant (z(theta+eps) - z(theta)) / |...| and
    nu = tau_2 - i tau_1, which points outward on a counterclockwise curve.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    z0 = complex(boundary.point(theta))
    z1 = complex(boundary.point(theta + eps))
    d = z1 - z0
    if abs(d) < 1e-300:
        raise DegenerateStep(f"secant vanished at theta={theta}")
    tau = d / abs(d)
    nu = tau.imag - 1j * tau.real
    return NormalTangent(nu=nu, tau=tau)


def outward_normals(boundary, thetas, eps=1e-6):
    """Vectorized outward normals at an array of angles."""
    thetas = np.asarray(thetas, dtype=float)
    z0 = boundary.point(thetas)
    z1 = boundary.point(thetas + eps)
    d = z1 - z0
    mag = np.abs(d)
    if np.any(mag < 1e-300):
        raise DegenerateStep("secant vanished")
    tau = d / mag
    return tau.imag - 1j * tau.real


def rescaled(layout, scale):
    """Electrode centers and perimeter in coordinates divided by ``scale``.

    Used to express the problem on a domain of maximal radius 1.
    Returns (centers, perimeter, normals).
    """
    nu = outward_normals(layout.boundary, layout.angles)
    return layout.centers / scale, layout.boundary.perimeter / scale, nu
