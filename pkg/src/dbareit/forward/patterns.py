"""Trigonometric current patterns and measurement frames."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import OddElectrodeCount, RankDeficientPatterns


@dataclass(frozen=True)
class CurrentPatternSet:
    """L x (L-1) matrix of applied electrode currents (amps), one pattern per column."""

    matrix: np.ndarray
    amplitude: float
    basis_tag: str = "trig"

    @property
    def count(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class MeasurementFrame:
    """Currents and voltages for one dataset: L electrodes x (L-1) patterns."""

    patterns: CurrentPatternSet
    voltages: np.ndarray
    layout: "ElectrodeLayout"
    contact_impedance: float
    frequency: float = 0.0
    label: str = ""

    @property
    def boundary(self):
        return self.layout.boundary

    @property
    def is_complex(self):
        return np.iscomplexobj(self.voltages) and np.any(self.voltages.imag != 0.0)


def trig_patterns(L, amplitude=1.0, angles=None):
    """Trigonometric current patterns on L electrodes.

    Column j (1-based) carries A cos(j theta_l) for 1 <= j <= L/2 and
    A sin((j - L/2) theta_l) for L/2 < j <= L-1, evaluated at the electrode
    angles (default theta_l = 2 pi l / L, l = 1..L).  The sine block uses
    positive frequencies 1..L/2-1.

    Raises
    ------
    OddElectrodeCount
        If L is odd.
    """
    if L % 2 != 0:
        raise OddElectrodeCount(f"L={L} must be even for trigonometric patterns")
    if amplitude <= 0.0:
        raise ValueError("amplitude must be positive")
    if angles is None:
        angles = 2.0 * np.pi * np.arange(1, L + 1) / L
    angles = np.asarray(angles, dtype=float)
    half = L // 2
    phi = np.empty((L, L - 1))
    for j in range(1, half + 1):
        phi[:, j - 1] = amplitude * np.cos(j * angles)
    for j in range(half + 1, L):
        phi[:, j - 1] = amplitude * np.sin((j - half) * angles)
    return CurrentPatternSet(matrix=phi, amplitude=float(amplitude), basis_tag="trig")


def adjacent_patterns(L, amplitude=1.0):
    """Bipolar adjacent (skip-0) patterns: +A on electrode l, -A on l+1."""
    phi = np.zeros((L, L - 1))
    for j in range(L - 1):
        phi[j, j] = amplitude
        phi[j + 1, j] = -amplitude
    return CurrentPatternSet(matrix=phi, amplitude=float(amplitude), basis_tag="adjacent")


def change_of_basis(frame, target_patterns, rtol=1e-8):
    """Synthesize the voltages that target patterns would have produced.

    The source patterns must span the same (L-1)-dimensional zero-sum
    space; the forward map is linear in the applied currents, so
    V_target = V_source @ C where Phi_source @ C = Phi_target.

    Raises
    ------
    RankDeficientPatterns
        If the source patterns cannot represent the target ones.
    """
    src = frame.patterns.matrix
    tgt = target_patterns.matrix
    if src.shape != tgt.shape:
        raise RankDeficientPatterns("pattern matrices have mismatched shapes")
    coeffs, _, rank, _ = np.linalg.lstsq(src, tgt, rcond=None)
    if rank < src.shape[1]:
        raise RankDeficientPatterns(f"source patterns have rank {rank} < {src.shape[1]}")
    resid = np.linalg.norm(src @ coeffs - tgt)
    if resid > rtol * max(np.linalg.norm(tgt), 1e-300):
        raise RankDeficientPatterns(
            f"target patterns outside source span (residual {resid:.3e})"
        )
    return replace(
        frame,
        patterns=target_patterns,
        voltages=frame.voltages @ coeffs,
    )
