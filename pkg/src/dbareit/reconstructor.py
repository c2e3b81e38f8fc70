"""Estimator-style front end composing the full reconstruction pipeline.

DbarReconstructor follows the scikit-learn convention: hyperparameters in
``__init__`` (inherited get_params/set_params), ``fit`` consumes a
measurement frame and computes everything through the scattering data,
``transform`` runs the per-pixel D-bar solves and recovery and returns an
AdmittivityImage.

The absolute matrix method ("approach2") never touches the forward (FEM)
module: its gamma0 scaling and electrode-model calibration come from the
analytic disk reference in ``dnmap``.  The real method and the trace-based
matrix method ("texp", "approach1") simulate a homogeneous-frame DN map on
the assumed geometry in absolute mode, importing the forward solver only
inside that branch.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator

from . import dbar, dnmap, recovery, scattering
from .errors import ConfigError, RealMethodComplexData
from .forward.patterns import change_of_basis, trig_patterns

METHODS = ("texp", "approach1", "approach2")
MODES = ("absolute", "difference")


class DbarReconstructor(BaseEstimator):
    """Reconstruct admittivity images from electrode measurement frames.

    Parameters
    ----------
    method : {"texp", "approach1", "approach2"}
        Real-conductivity method or one of the two complex-admittivity
        matrix methods.
    mode : {"absolute", "difference"}
        Difference mode requires ``reference_frame``.
    kgrid_n, kgrid_step, cutoff, threshold
        Scattering grid: (2^N+1) points per side, step h_k, cutoff radius
        R, and the nonuniform truncation threshold (matrix methods).
    zgrid_n, zgrid_extent
        Pixel grid in the unit-disk frame.
    tol, max_iter, workers
        Per-pixel GMRES controls and thread count for the pixel sweep.
    gamma0 : "analytic", "cem", or complex
        Best-constant admittivity estimate: analytic disk reference (no
        simulation), a CEM reference solve, or a fixed value.
    calibrate : bool
        Apply the electrode-model attenuation calibration to ND data.
    reference_frame : MeasurementFrame, optional
        Reference data for difference imaging.
    assume_boundary, assume_layout : optional
        Override the frame's recorded geometry (wrong-model studies).
    """

    def __init__(
        self,
        method="approach2",
        mode="absolute",
        kgrid_n=33,
        kgrid_step=0.4706,
        cutoff=4.0,
        threshold=0.4,
        zgrid_n=64,
        zgrid_extent=1.05,
        tol=1e-6,
        max_iter=200,
        workers=1,
        gamma0="analytic",
        calibrate=True,
        reference_frame=None,
        assume_boundary=None,
        assume_layout=None,
    ):
        self.method = method
        self.mode = mode
        self.kgrid_n = kgrid_n
        self.kgrid_step = kgrid_step
        self.cutoff = cutoff
        self.threshold = threshold
        self.zgrid_n = zgrid_n
        self.zgrid_extent = zgrid_extent
        self.tol = tol
        self.max_iter = max_iter
        self.workers = workers
        self.gamma0 = gamma0
        self.calibrate = calibrate
        self.reference_frame = reference_frame
        self.assume_boundary = assume_boundary
        self.assume_layout = assume_layout

    # -- pipeline pieces ----------------------------------------------------

    def _validate(self, frame):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "difference" and self.reference_frame is None:
            raise ConfigError("difference mode requires reference_frame")
        if self.method == "texp" and frame.is_complex:
            raise RealMethodComplexData(
                "the real-conductivity method cannot process complex voltages"
            )

    def _assume_geometry(self, frame):
        layout = self.assume_layout if self.assume_layout is not None else frame.layout
        if self.assume_boundary is not None:
            from .geometry import place_electrodes

            layout = place_electrodes(
                self.assume_boundary,
                layout.count,
                layout.width,
                layout.height,
                offset_angle=layout.angles[0],
                require_physical=False,
            )
        return replace(frame, layout=layout)

    def _as_trig(self, frame):
        if frame.patterns.basis_tag == "trig":
            return frame
        target = trig_patterns(
            frame.layout.count, frame.patterns.amplitude, angles=frame.layout.angles
        )
        return change_of_basis(frame, target)

    def _scaled_dn(self, frame, gamma0):
        nd = dnmap.assemble_nd(frame)
        if self.calibrate:
            nd = dnmap.calibrate_nd(nd, frame)
        dn = dnmap.invert_to_dn(nd)
        return dnmap.scale_dn(dn, frame.boundary.r_enc, gamma0)

    def _homogeneous_dn(self, frame):
        """Unit-admittivity DN map on the assumed geometry (CEM simulation)."""
        from .forward.cem import homogeneous_frame

        ref = homogeneous_frame(
            frame.boundary,
            frame.layout,
            frame.contact_impedance,
            frame.patterns,
        )
        return self._scaled_dn(ref, 1.0)

    def _estimate_gamma0(self, frame):
        if isinstance(self.gamma0, (int, float, complex)) and not isinstance(
            self.gamma0, bool
        ):
            return complex(self.gamma0)
        if self.gamma0 == "analytic":
            return dnmap.estimate_gamma0_analytic(frame)
        if self.gamma0 == "cem":
            from .forward.cem import homogeneous_frame

            def simulator(fr):
                return homogeneous_frame(
                    fr.boundary, fr.layout, fr.contact_impedance, fr.patterns
                ).voltages

            return dnmap.estimate_gamma0(frame, simulator)
        raise ConfigError(f"unknown gamma0 policy {self.gamma0!r}")

    # -- estimator API --------------------------------------------------------

    def fit(self, frame, y=None):
        """Assemble DN maps, estimate gamma0, and compute scattering data."""
        self._validate(frame)
        frame = self._as_trig(self._assume_geometry(frame))
        kgrid = scattering.KGrid(self.kgrid_n, self.kgrid_step, self.cutoff)
        gamma0 = self._estimate_gamma0(frame)
        dn = self._scaled_dn(frame, gamma0)
        layout = frame.layout
        if self.mode == "difference":
            ref = self._as_trig(self._assume_geometry(self.reference_frame))
            dn_ref = self._scaled_dn(ref, gamma0)
        if self.method == "texp":
            if self.mode == "absolute":
                sdata = scattering.texp(dn, self._homogeneous_dn(frame), kgrid, layout)
            else:
                sdata = scattering.tdiff(dn, dn_ref, kgrid, layout)
        elif self.method == "approach1":
            if self.mode == "absolute":
                sdata = scattering.psi_exp_scattering(
                    dn, self._homogeneous_dn(frame), kgrid, layout,
                    threshold=self.threshold,
                )
            else:
                sdata = scattering.psi_exp_scattering(
                    dn, dn_ref, kgrid, layout, threshold=self.threshold,
                    mode="difference",
                )
        else:
            if self.mode == "absolute":
                sdata = scattering.sexp(dn, kgrid, layout, threshold=self.threshold)
            else:
                sdata = scattering.sdiff(dn, dn_ref, kgrid, layout, threshold=self.threshold)

        self.frame_ = frame
        self.kgrid_ = kgrid
        self.gamma0_ = gamma0
        self.dn_ = dn
        self.scattering_ = sdata
        self.zgrid_ = recovery.zgrid_for_boundary(
            frame.boundary, n=self.zgrid_n, extent=self.zgrid_extent
        )
        return self

    def transform(self, frame=None):
        """Solve the D-bar equations per pixel and recover the image."""
        if frame is not None and getattr(self, "frame_", None) is None:
            self.fit(frame)
        if not hasattr(self, "scattering_"):
            raise ConfigError("transform called before fit")
        cfg = dbar.SolverConfig(tol=self.tol, max_iter=self.max_iter, workers=self.workers)
        zgrid = self.zgrid_
        if self.method == "texp":
            field = dbar.solve_image(self.scattering_, zgrid, cfg)
            image = recovery.sigma_from_mu(
                field, self.gamma0_, self.mode, zgrid, method_tag="texp"
            )
        else:
            field = dbar.solve_image(
                self.scattering_, zgrid, cfg, pixel_mask=zgrid.dilated_mask()
            )
            q12, q21, ok = recovery.q_from_m(field.values, zgrid.h_z, zgrid.dilated_mask())
            image = recovery.gamma_from_q(
                q12,
                q21,
                self.gamma0_,
                self.mode,
                zgrid,
                mask=zgrid.mask & ok & field.converged,
                method_tag=self.method,
            )
        image.diagnostics.update(
            convergence_fraction=field.convergence_fraction,
            mean_iterations=float(field.iterations[field.solved].mean()),
            max_residual=float(field.residuals[field.solved].max()),
        )
        self.cgo_field_ = field
        self.image_ = image
        return image

    def fit_transform(self, frame, y=None):
        return self.fit(frame).transform()
