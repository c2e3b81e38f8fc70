"""Dataset/config file formats, image emission, and run manifests.

Datasets are JSON (lossless float round-trip via repr), image grids are
CSV (one file per Re/Im plane), rendered images are 8-bit grayscale PNG
with the linear value-to-gray mapping recorded in a sidecar JSON.
"""

from __future__ import annotations

import hashlib
import json
import time

import numpy as np

from .errors import ConfigError
from .forward.patterns import CurrentPatternSet, MeasurementFrame
from .geometry import _layout_at, build_boundary

DATASET_VERSION = 1


def _boundary_spec(boundary):
    c = np.asarray(boundary.fourier_coeffs, dtype=complex)
    return {
        "preset": boundary.preset_tag,
        "coeffs_re": c.real.tolist(),
        "coeffs_im": c.imag.tolist(),
        "perimeter": boundary.perimeter,
        "r_enc": boundary.r_enc,
    }


def boundary_from_spec(spec):
    """Boundary from a JSON spec: a preset reference or coefficient lists."""
    if "coeffs_re" in spec:
        from dataclasses import replace

        coeffs = np.asarray(spec["coeffs_re"], dtype=float) + 1j * np.asarray(
            spec.get("coeffs_im", np.zeros(len(spec["coeffs_re"]))), dtype=float
        )
        b = build_boundary(coeffs)
        if "preset" in spec:
            b = replace(b, preset_tag=spec["preset"])
        return b
    preset = spec["preset"]
    kwargs = {k: v for k, v in spec.items() if k not in ("preset",)}
    return build_boundary(preset, **kwargs)


def write_dataset(frame, path, provenance=None):
    """Serialize a measurement frame to the dataset JSON format."""
    V = np.asarray(frame.voltages)
    doc = {
        "version": DATASET_VERSION,
        "label": frame.label,
        "boundary": _boundary_spec(frame.boundary),
        "layout": {
            "angles": frame.layout.angles.tolist(),
            "width": frame.layout.width,
            "height": frame.layout.height,
            "physical": bool(frame.layout.physical),
        },
        "patterns": {
            "basis": frame.patterns.basis_tag,
            "amplitude": frame.patterns.amplitude,
            "matrix": np.asarray(frame.patterns.matrix).tolist(),
        },
        "voltages": {
            "re": V.real.tolist(),
            "im": V.imag.tolist() if np.iscomplexobj(V) else np.zeros_like(V.real).tolist(),
        },
        "frequency": frame.frequency,
        "contact_impedance": frame.contact_impedance,
        "provenance": provenance or {},
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def read_dataset(path):
    """Read and validate a dataset JSON file into a MeasurementFrame."""
    with open(path) as f:
        doc = json.load(f)
    if "version" not in doc:
        raise ConfigError(f"{path}: missing 'version' field")
    for field in ("boundary", "layout", "patterns", "voltages"):
        if field not in doc:
            raise ConfigError(f"{path}: missing '{field}' section")
    boundary = boundary_from_spec(doc["boundary"])
    lay = doc["layout"]
    layout = _layout_at(
        boundary, np.asarray(lay["angles"], dtype=float), lay["width"], lay["height"]
    )
    L = layout.count
    pat = np.asarray(doc["patterns"]["matrix"], dtype=float)
    vre = np.asarray(doc["voltages"]["re"], dtype=float)
    vim = np.asarray(doc["voltages"]["im"], dtype=float)
    if pat.shape != (L, L - 1):
        raise ConfigError(
            f"{path}: patterns matrix shape {pat.shape} != ({L}, {L - 1})"
        )
    if vre.shape != (L, L - 1) or vim.shape != (L, L - 1):
        raise ConfigError(
            f"{path}: voltages shape {vre.shape}/{vim.shape} != ({L}, {L - 1})"
        )
    voltages = vre + 1j * vim if np.any(vim) else vre
    patterns = CurrentPatternSet(
        matrix=pat,
        amplitude=float(doc["patterns"]["amplitude"]),
        basis_tag=doc["patterns"]["basis"],
    )
    return MeasurementFrame(
        patterns=patterns,
        voltages=voltages,
        layout=layout,
        contact_impedance=float(doc.get("contact_impedance", 2.4e-7)),
        frequency=float(doc.get("frequency", 0.0)),
        label=doc.get("label", ""),
    )


# -- image grids --------------------------------------------------------------

def save_image_csv(image, basepath):
    """Write <base>_re.csv, <base>_im.csv, <base>_mask.csv."""
    np.savetxt(f"{basepath}_re.csv", image.values.real, delimiter=",", fmt="%.17e")
    np.savetxt(f"{basepath}_im.csv", image.values.imag, delimiter=",", fmt="%.17e")
    np.savetxt(f"{basepath}_mask.csv", image.grid.mask.astype(int), delimiter=",", fmt="%d")


def load_image_csv(basepath, mode="absolute", method_tag="unknown", extent=1.05):
    """Read an image written by save_image_csv."""
    from .recovery import AdmittivityImage, ZGrid

    re = np.loadtxt(f"{basepath}_re.csv", delimiter=",")
    im = np.loadtxt(f"{basepath}_im.csv", delimiter=",")
    mask = np.loadtxt(f"{basepath}_mask.csv", delimiter=",").astype(bool)
    grid = ZGrid(n=re.shape[0], extent=extent, mask=mask)
    return AdmittivityImage(
        values=re + 1j * im, grid=grid, mode=mode, method_tag=method_tag
    )


def save_image_png(image, path, vmin=None, vmax=None, part="re"):
    """8-bit grayscale PNG: gray = round(255 (v - vmin) / (vmax - vmin)).

    The scale bounds and mapping are recorded in ``<path>.json`` so
    renders of different reconstructions can share one color scale.
    """
    from PIL import Image as PILImage

    v = image.values.real if part == "re" else image.values.imag
    v = np.where(image.grid.mask, v, np.nan)
    finite = v[np.isfinite(v)]
    if vmin is None:
        vmin = float(finite.min())
    if vmax is None:
        vmax = float(finite.max())
    span = max(vmax - vmin, 1e-300)
    gray = np.clip(np.round(255.0 * (v - vmin) / span), 0, 255)
    gray = np.where(np.isfinite(v), gray, 0).astype(np.uint8)
    PILImage.fromarray(gray[::-1, :], mode="L").save(path)
    with open(f"{path}.json", "w") as f:
        json.dump(
            {
                "vmin": vmin,
                "vmax": vmax,
                "part": part,
                "mapping": "gray = round(255 * (value - vmin) / (vmax - vmin))",
                "rows": "top row is +y",
                "mode": image.mode,
                "method": image.method_tag,
            },
            f,
            indent=1,
        )


def save_solver_diagnostics(field, basepath):
    """Per-pixel iteration counts and residuals as CSV grids."""
    np.savetxt(f"{basepath}_iterations.csv", field.iterations, delimiter=",", fmt="%d")
    np.savetxt(f"{basepath}_residuals.csv", field.residuals, delimiter=",", fmt="%.6e")


def save_matrix_csv(matrix, basepath):
    """Complex matrix as a Re/Im CSV pair (DN/ND debugging export)."""
    m = np.asarray(matrix)
    np.savetxt(f"{basepath}_re.csv", m.real, delimiter=",", fmt="%.17e")
    np.savetxt(f"{basepath}_im.csv", np.imag(m) + np.zeros_like(m.real), delimiter=",", fmt="%.17e")


def save_scattering_csv(sdata, basepath):
    """Scattering grids as Re/Im CSV planes."""
    if sdata.kind == "real_t":
        save_matrix_csv(sdata.t, f"{basepath}_t")
    else:
        save_matrix_csv(sdata.s12, f"{basepath}_s12")
        save_matrix_csv(sdata.s21, f"{basepath}_s21")


# -- manifests ----------------------------------------------------------------

def config_hash(config):
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()
    ).hexdigest()


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        h.update(f.read())
    return h.hexdigest()


def write_manifest(path, config, inputs=None, wall_time_s=None):
    """Run manifest: resolved config, its hash, input hashes, version, timing."""
    from . import __version__

    doc = {
        "package_version": __version__,
        "config": config,
        "config_sha256": config_hash(config),
        "inputs": {k: file_hash(v) for k, v in (inputs or {}).items()},
        "wall_time_s": wall_time_s,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
    return doc
