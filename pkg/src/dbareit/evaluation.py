"""Quantitative assessment: regional statistics, dynamic range, rotation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTruth, EmptyRegion, FlatImage, GridMismatch


@dataclass(frozen=True)
class RegionMask:
    """Named pixel region on an image grid (ellipse, polygon, or pixels)."""

    name: str
    pixels: np.ndarray   # boolean (n, n)

    @staticmethod
    def from_ellipse(name, zgrid, center, semi_axes, angle=0.0):
        z = zgrid.nodes
        dx = z.real - center[0]
        dy = z.imag - center[1]
        c, s = np.cos(angle), np.sin(angle)
        u = c * dx + s * dy
        v = -s * dx + c * dy
        pix = (u / semi_axes[0]) ** 2 + (v / semi_axes[1]) ** 2 <= 1.0
        return RegionMask(name=name, pixels=pix & zgrid.mask)

    @staticmethod
    def from_polygon(name, zgrid, vertices):
        z = zgrid.nodes
        x, y = z.real, z.imag
        vx = np.array([v[0] for v in vertices])
        vy = np.array([v[1] for v in vertices])
        inside = np.zeros(x.shape, dtype=bool)
        j = len(vx) - 1
        for i in range(len(vx)):
            cond = (vy[i] > y) != (vy[j] > y)
            xin = (vx[j] - vx[i]) * (y - vy[i]) / (vy[j] - vy[i] + 1e-300) + vx[i]
            inside ^= cond & (x < xin)
            j = i
        return RegionMask(name=name, pixels=inside & zgrid.mask)


def region_stats(image, masks):
    """Per-region average/max/min of the real and imaginary parts.

    Returns {region_name: {"re": (avg, max, min), "im": (avg, max, min)}}.
    """
    out = {}
    for m in masks:
        if m.pixels.shape != image.values.shape:
            raise GridMismatch("region mask grid differs from image grid")
        sel = image.values[m.pixels & image.grid.mask]
        if sel.size == 0:
            raise EmptyRegion(f"region {m.name!r} selects no pixels")
        out[m.name] = {
            "re": (float(sel.real.mean()), float(sel.real.max()), float(sel.real.min())),
            "im": (float(sel.imag.mean()), float(sel.imag.max()), float(sel.imag.min())),
        }
    return out


def dynamic_range(image, true_max, true_min):
    """(recon max - recon min) / (true max - true min) * 100, masked pixels."""
    if not true_max > true_min:
        raise DegenerateTruth("true extrema must satisfy max > min")
    vals = image.values[image.grid.mask].real
    return float((vals.max() - vals.min()) / (true_max - true_min) * 100.0)


_N_SWEEP = 256


def _polar_samples(values, mask, n_radii=24, n_angles=_N_SWEEP, extent=1.05, n=None):
    """Bilinear polar resampling of the real part inside the mask."""
    n = values.shape[0]
    ax_step = 2.0 * extent / (n - 1)
    # largest radius fully inside the mask
    yy, xx = np.nonzero(~mask)
    if len(xx):
        coords = (np.stack([xx, yy], axis=1) * ax_step - extent)
        r_out = np.min(np.hypot(coords[:, 0], coords[:, 1]))
        r_max = max(0.3, 0.92 * r_out)
    else:
        r_max = extent
    radii = np.linspace(0.15 * r_max, r_max, n_radii)
    th = 2.0 * np.pi * np.arange(n_angles) / n_angles
    X = radii[:, None] * np.cos(th)[None, :]
    Y = radii[:, None] * np.sin(th)[None, :]
    fx = (X + extent) / ax_step
    fy = (Y + extent) / ax_step
    ix = np.clip(fx.astype(int), 0, n - 2)
    iy = np.clip(fy.astype(int), 0, n - 2)
    tx = fx - ix
    ty = fy - iy
    v = values.real
    samp = (
        v[iy, ix] * (1 - tx) * (1 - ty)
        + v[iy, ix + 1] * tx * (1 - ty)
        + v[iy + 1, ix] * (1 - tx) * ty
        + v[iy + 1, ix + 1] * tx * ty
    )
    return samp


def rotation_estimate(image_a, image_b):
    """Angle that best rotates image_a onto image_b (polar cross-correlation).

    Positive angles are counterclockwise; resolution 2 pi / 256.

    Raises
    ------
    FlatImage
        If either image lacks contrast inside the mask.
    """
    if image_a.values.shape != image_b.values.shape:
        raise GridMismatch("images on different grids")
    ga, gb = image_a.grid, image_b.grid
    a = _polar_samples(image_a.values, ga.mask, extent=ga.extent)
    b = _polar_samples(image_b.values, gb.mask, extent=gb.extent)
    a = a - a.mean()
    b = b - b.mean()
    if np.std(a) < 1e-12 or np.std(b) < 1e-12:
        raise FlatImage("rotation estimation requires image contrast")
    fa = np.fft.rfft(a, axis=1)
    fb = np.fft.rfft(b, axis=1)
    corr = np.fft.irfft(np.conj(fa) * fb, n=_N_SWEEP, axis=1).sum(axis=0)
    shift = int(np.argmax(corr))
    angle = 2.0 * np.pi * shift / _N_SWEEP
    if angle > np.pi:
        angle -= 2.0 * np.pi
    return angle


def rotate_image(image, angle):
    """Rotate image content counterclockwise by resampling (for tests/compare)."""
    from dataclasses import replace as drep

    g = image.grid
    n = g.n
    step = g.h_z
    z = g.nodes * np.exp(-1j * angle)
    fx = (z.real + g.extent) / step
    fy = (z.imag + g.extent) / step
    ix = np.clip(fx.astype(int), 0, n - 2)
    iy = np.clip(fy.astype(int), 0, n - 2)
    tx = fx - ix
    ty = fy - iy
    v = image.values
    vals = (
        v[iy, ix] * (1 - tx) * (1 - ty)
        + v[iy, ix + 1] * tx * (1 - ty)
        + v[iy + 1, ix] * (1 - tx) * ty
        + v[iy + 1, ix + 1] * tx * ty
    )
    return drep(image, values=vals)


def stats_table_rows(method, scenario, stats, dyn=None):
    """Flatten a region_stats dict into (method, scenario, region, ...) rows."""
    rows = []
    for region, parts in stats.items():
        avg, mx, mn = parts["re"]
        rows.append(
            {
                "method": method,
                "scenario": scenario,
                "region": region,
                "avg": avg,
                "max": mx,
                "min": mn,
                "im_avg": parts["im"][0],
            }
        )
    if dyn is not None:
        rows.append(
            {
                "method": method,
                "scenario": scenario,
                "region": "dynamic_range_percent",
                "avg": dyn,
                "max": "",
                "min": "",
                "im_avg": "",
            }
        )
    return rows


def write_table_csv(rows, path):
    """Table-style CSV: method x scenario x region."""
    import csv

    fields = ["method", "scenario", "region", "avg", "max", "min", "im_avg"]
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
