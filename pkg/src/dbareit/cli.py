"""Command-line pipeline: simulate, reconstruct, evaluate.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import dataio, evaluation, recovery
from .errors import DbarEitError, NonConvergence, IllConditioned, SingularSystem, ConfigError
from .forward.patterns import trig_patterns, adjacent_patterns
from .geometry import perturb_angles, place_electrodes

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

RUN_DEFAULTS = {
    "method": "approach2",
    "mode": "absolute",
    "kgrid": {"n": 33, "h_k": 0.4706, "R": 4.0, "threshold": 0.4},
    "zgrid": {"n": 64, "extent": 1.05},
    "solver": {"tol": 1e-6, "max_iter": 200},
    "gamma0": "analytic",
    "calibrate": True,
    "reference_dataset": None,
    "assume_boundary": None,
    "output_dir": ".",
    "threads": 1,
}


def _merge(defaults, override):
    out = dict(defaults)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _load_json(path, what):
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"{what} file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path} is not valid JSON (line {exc.lineno}): {exc.msg}")


def _phantom_from_spec(spec):
    from .forward.cem import Ellipse, Phantom, Polygon

    def cval(v):
        if isinstance(v, (list, tuple)):
            return complex(v[0], v[1])
        return complex(v)

    inclusions = []
    for inc in spec.get("inclusions", []):
        if inc.get("shape", "ellipse") == "ellipse":
            region = Ellipse(
                center=tuple(inc["center"]),
                semi_axes=tuple(inc["semi_axes"]),
                angle=float(inc.get("angle", 0.0)),
            )
        elif inc["shape"] == "polygon":
            region = Polygon(vertices=tuple(tuple(v) for v in inc["vertices"]))
        else:
            raise ConfigError(f"unknown inclusion shape: {inc.get('shape')!r}")
        inclusions.append((region, cval(inc["value"])))
    try:
        return Phantom(background=cval(spec["background"]), inclusions=tuple(inclusions))
    except ValueError as exc:
        raise ConfigError(str(exc))


def regions_to_masks(doc, zgrid, add_background=True):
    """Region file -> list of RegionMask on a pixel grid (scaled coordinates)."""
    masks = []
    for reg in doc["regions"]:
        if reg.get("shape", "ellipse") == "ellipse":
            masks.append(
                evaluation.RegionMask.from_ellipse(
                    reg["name"], zgrid, tuple(reg["center"]),
                    tuple(reg["semi_axes"]), angle=float(reg.get("angle", 0.0)),
                )
            )
        else:
            masks.append(
                evaluation.RegionMask.from_polygon(
                    reg["name"], zgrid, tuple(tuple(v) for v in reg["vertices"])
                )
            )
    names = {m.name for m in masks}
    if add_background and "background" not in names:
        organ = np.zeros_like(zgrid.mask)
        for m in masks:
            organ |= m.pixels
        for _ in range(3):
            d = organ.copy()
            d[1:, :] |= organ[:-1, :]
            d[:-1, :] |= organ[1:, :]
            d[:, 1:] |= organ[:, :-1]
            d[:, :-1] |= organ[:, 1:]
            organ = d
        bg = zgrid.mask & ~organ & (np.abs(zgrid.nodes) < 0.85)
        masks.append(evaluation.RegionMask("background", bg))
    return masks


def cmd_simulate(args):
    from .forward.cem import simulate_frame

    spec = _load_json(args.config, "scenario config")
    for field in ("label", "boundary", "layout", "phantom"):
        if field not in spec:
            raise ConfigError(f"scenario config missing '{field}'")
    t0 = time.time()
    boundary = dataio.boundary_from_spec(spec["boundary"])
    lay_spec = spec["layout"]
    L = int(lay_spec["L"])
    layout = place_electrodes(
        boundary, L, float(lay_spec["width"]), float(lay_spec["height"]),
        offset_angle=float(lay_spec.get("offset_angle", 0.0)),
    )
    pat_spec = spec.get("patterns", {"basis": "trig", "amplitude": 1e-3})
    if pat_spec.get("basis", "trig") == "trig":
        patterns = trig_patterns(L, float(pat_spec.get("amplitude", 1e-3)), angles=layout.angles)
    elif pat_spec["basis"] == "adjacent":
        patterns = adjacent_patterns(L, float(pat_spec.get("amplitude", 1e-3)))
    else:
        raise ConfigError(f"unknown pattern basis {pat_spec.get('basis')!r}")

    physical_layout = layout
    if "perturb" in spec:
        p = spec["perturb"]
        physical_layout = perturb_angles(
            layout, p["mode"], float(p["magnitude"]), rng_seed=int(p.get("seed", 0))
        )
    phantom = _phantom_from_spec(spec["phantom"])
    z_c = float(spec.get("contact_impedance", 2.4e-7))
    frame = simulate_frame(
        boundary,
        physical_layout,
        phantom,
        patterns,
        z_c,
        noise_level=float(spec.get("noise_level", 0.0)),
        seed=int(spec.get("seed", 0)),
        mesh_h=spec.get("mesh_h"),
        edge_refine_levels=int(spec.get("edge_refine_levels", 3)),
        record_layout=layout,
        label=spec["label"],
    )
    os.makedirs(args.out, exist_ok=True)
    base = os.path.join(args.out, spec["label"])
    dataio.write_dataset(frame, base + ".json", provenance={"scenario": spec})

    # rasterized truth on the default pixel grid, in boundary-scaled coordinates
    zgrid = recovery.zgrid_for_boundary(boundary)
    z = zgrid.nodes * boundary.r_enc
    truth_vals = phantom.sample(z.real, z.imag).astype(complex)
    truth = recovery.AdmittivityImage(
        values=np.where(zgrid.mask, truth_vals, phantom.background),
        grid=zgrid, mode="absolute", method_tag="truth",
    )
    dataio.save_image_csv(truth, base + "_truth")

    sc = 1.0 / boundary.r_enc
    regions = []
    for inc in spec["phantom"].get("inclusions", []):
        if inc.get("shape", "ellipse") != "ellipse" or "name" not in inc:
            continue
        regions.append(
            {
                "name": inc["name"],
                "shape": "ellipse",
                "center": [inc["center"][0] * sc, inc["center"][1] * sc],
                "semi_axes": [inc["semi_axes"][0] * sc, inc["semi_axes"][1] * sc],
                "angle": inc.get("angle", 0.0),
            }
        )
    with open(base + "_regions.json", "w") as f:
        json.dump({"frame": "scaled_by_r_enc", "regions": regions}, f, indent=1)
    dataio.write_manifest(
        base + "_manifest.json", spec, inputs={"config": args.config},
        wall_time_s=time.time() - t0,
    )
    print(f"wrote {base}.json (+truth, regions, manifest)")
    return 0


def cmd_reconstruct(args):
    from .reconstructor import DbarReconstructor

    cfg = _merge(RUN_DEFAULTS, _load_json(args.config, "run config") if args.config else {})
    if args.method:
        cfg["method"] = args.method
    if args.mode:
        cfg["mode"] = args.mode
    if args.reference:
        cfg["reference_dataset"] = args.reference
    if args.threads:
        cfg["threads"] = args.threads
    if args.out:
        cfg["output_dir"] = args.out

    t0 = time.time()
    frame = dataio.read_dataset(args.dataset)
    reference = None
    if cfg["mode"] == "difference":
        if not cfg["reference_dataset"]:
            raise ConfigError("difference mode requires a reference dataset")
        reference = dataio.read_dataset(cfg["reference_dataset"])
    assume = None
    if cfg["assume_boundary"]:
        assume = dataio.boundary_from_spec(cfg["assume_boundary"])
    g0 = cfg["gamma0"]
    if isinstance(g0, (list, tuple)):
        g0 = complex(g0[0], g0[1])

    rec = DbarReconstructor(
        method=cfg["method"],
        mode=cfg["mode"],
        kgrid_n=cfg["kgrid"]["n"],
        kgrid_step=cfg["kgrid"]["h_k"],
        cutoff=cfg["kgrid"]["R"],
        threshold=cfg["kgrid"]["threshold"],
        zgrid_n=cfg["zgrid"]["n"],
        zgrid_extent=cfg["zgrid"]["extent"],
        tol=cfg["solver"]["tol"],
        max_iter=cfg["solver"]["max_iter"],
        workers=int(cfg["threads"]),
        gamma0=g0,
        calibrate=cfg["calibrate"],
        reference_frame=reference,
        assume_boundary=assume,
    )
    image = rec.fit_transform(frame)

    outdir = cfg["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    base = os.path.join(outdir, "image")
    dataio.save_image_csv(image, base)
    dataio.save_image_png(image, base + ".png")
    if image.values.imag.any():
        dataio.save_image_png(image, base + "_im.png", part="im")
    dataio.save_solver_diagnostics(rec.cgo_field_, os.path.join(outdir, "solver"))
    inputs = {"dataset": args.dataset}
    if cfg["reference_dataset"]:
        inputs["reference"] = cfg["reference_dataset"]
    manifest_cfg = dict(cfg)
    manifest_cfg["gamma0_estimate"] = [rec.gamma0_.real, rec.gamma0_.imag]
    manifest_cfg["diagnostics"] = {
        k: v for k, v in image.diagnostics.items() if isinstance(v, (int, float))
    }
    dataio.write_manifest(
        os.path.join(outdir, "manifest.json"), manifest_cfg, inputs=inputs,
        wall_time_s=time.time() - t0,
    )
    print(f"wrote {base}_re.csv, {base}.png, manifest.json in {outdir}")
    return 0


def cmd_evaluate(args):
    image = dataio.load_image_csv(args.image)
    report = {}
    if args.regions:
        doc = _load_json(args.regions, "regions")
        masks = regions_to_masks(doc, image.grid)
        report["regions"] = evaluation.region_stats(image, masks)
    if args.truth:
        truth = dataio.load_image_csv(args.truth)
        if truth.values.shape != image.values.shape:
            raise ConfigError("truth and image grids differ")
        tvals = truth.values[truth.grid.mask].real
        report["dynamic_range_percent"] = evaluation.dynamic_range(
            image, float(tvals.max()), float(tvals.min())
        )
        report["truth_extrema"] = [float(tvals.max()), float(tvals.min())]
    if args.compare:
        other = dataio.load_image_csv(args.compare)
        report["rotation_estimate_rad"] = evaluation.rotation_estimate(other, image)
    out = args.out or "metrics.json"
    with open(out, "w") as f:
        json.dump(report, f, indent=1)
    print(f"wrote {out}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dbareit",
        description="D-bar EIT reconstruction: simulate phantoms, reconstruct, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset from a scenario config")
    p_sim.add_argument("--config", required=True, help="scenario JSON")
    p_sim.add_argument("--out", default=".", help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_rec = sub.add_parser("reconstruct", help="reconstruct an admittivity image from a dataset")
    p_rec.add_argument("--dataset", required=True)
    p_rec.add_argument("--config", help="run config JSON (defaults are the standard grids)")
    p_rec.add_argument("--method", choices=["texp", "approach1", "approach2"])
    p_rec.add_argument("--mode", choices=["absolute", "difference"])
    p_rec.add_argument("--reference", help="reference dataset (difference mode)")
    p_rec.add_argument("--out", help="output directory")
    p_rec.add_argument("--seed", type=int, default=0, help="recorded in the manifest")
    p_rec.add_argument("--threads", type=int)
    p_rec.set_defaults(func=cmd_reconstruct)

    p_ev = sub.add_parser("evaluate", help="compute metrics for a reconstructed image")
    p_ev.add_argument("--image", required=True, help="image CSV basepath")
    p_ev.add_argument("--truth", help="truth image CSV basepath")
    p_ev.add_argument("--regions", help="regions JSON")
    p_ev.add_argument("--compare", help="second image basepath for rotation estimation")
    p_ev.add_argument("--out", help="metrics JSON path")
    p_ev.set_defaults(func=cmd_evaluate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NonConvergence, IllConditioned, SingularSystem) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DbarEitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
