"""D-bar integral equations in k, solved per image pixel.

The weakly singular Cauchy kernels are applied as discrete circular
convolutions via FFT (Vainikko-style), with the kernel's origin node set
to zero.  Each pixel's system is solved matrix-free with restart-free
GMRES; the conjugation in the real method makes its operator real-linear,
so that solve runs on the stacked [Re; Im] doubled real system, while the
matrix method's k-bar evaluation is a pure grid reflection (an exact index
permutation on the odd-sized symmetric grid) and stays complex-linear.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import GridMismatch, NonConvergence

_KERNEL_FFT_CACHE = {}


def _difference_lattice(n, step):
    c = n // 2
    ax = (np.arange(n) - c) * step
    x, y = np.meshgrid(ax, ax, indexing="xy")
    return x + 1j * y


def _kernel_fft(n, step, conjugate):
    key = (n, round(step, 15), conjugate)
    if key not in _KERNEL_FFT_CACHE:
        w = _difference_lattice(n, step)
        if conjugate:
            w = np.conj(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            kern = np.where(w == 0.0, 0.0, 1.0 / (np.pi * np.where(w == 0.0, 1.0, w)))
        _KERNEL_FFT_CACHE[key] = sfft.fft2(sfft.ifftshift(kern))
    return _KERNEL_FFT_CACHE[key]


def conv_cauchy(f_grid, step, kernel="1/(pi*k)"):
    """Discrete convolution with a Cauchy kernel: step^2 IFFT[FFT(G) FFT(f)].

    ``kernel`` selects 1/(pi k) (alias 1/(pi z)) or the conjugate-variable
    kernel 1/(pi zbar).  The kernel value at the origin node is 0, which is
    removable under the step^2 quadrature weight.
    """
    f = np.asarray(f_grid)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise GridMismatch(f"expected a square grid, got shape {f.shape}")
    name = kernel.replace(" ", "")
    if name in ("1/(pi*k)", "1/(pi*z)", "1/(pik)", "1/(piz)"):
        conj = False
    elif name in ("1/(pi*zbar)", "1/(pizbar)"):
        conj = True
    else:
        raise ValueError(f"unknown kernel: {kernel!r}")
    gf = _kernel_fft(f.shape[0], step, conj)
    return step * step * sfft.ifft2(gf * sfft.fft2(f))


def gmres(matvec, b, tol=1e-6, maxiter=200):
    """Restart-free GMRES with modified Gram-Schmidt Arnoldi.

    Works for real or complex vectors; the projected Hessenberg
    least-squares problem is re-solved per iteration, which is cheap next
    to the FFT matvecs at the iteration counts seen here.  Returns
    (x, relative_residual, iterations); callers re-verify the residual
    against the operator.
    """
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0, 0
    # x0 = 0: initial residual is b itself
    q = [b / bnorm]
    h = np.zeros((maxiter + 1, maxiter), dtype=complex)
    e1 = np.zeros(maxiter + 1, dtype=complex)
    e1[0] = bnorm
    y = None
    it = 0
    for j in range(maxiter):
        w = matvec(q[j]).astype(complex, copy=False)
        for i in range(j + 1):
            h[i, j] = np.vdot(q[i], w)
            w = w - h[i, j] * q[i]
        hh = np.linalg.norm(w)
        h[j + 1, j] = hh
        it = j + 1
        y, res2, _, _ = np.linalg.lstsq(h[: j + 2, : j + 1], e1[: j + 2], rcond=None)
        resid = np.linalg.norm(h[: j + 2, : j + 1] @ y - e1[: j + 2])
        if resid / bnorm < tol or hh < 1e-300:
            break
        q.append(w / hh)
    x = np.tensordot(y, np.asarray(q[: len(y)]), axes=(0, 0))
    if not np.iscomplexobj(b):
        x = x.real
    return x, float(resid / bnorm), it


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 200
    workers: int = 1


@dataclass(frozen=True)
class CGOSolution:
    """Per-pixel CGO solution: only the k=0 value propagates downstream."""

    z: complex
    kind: str                  # "mu_scalar" | "M_matrix"
    value_at_zero: object      # complex or 2x2 complex array
    residual: float
    iterations: int
    converged: bool


def _phase_grids(z, kgrid):
    ax = kgrid.axis
    kx, ky = np.meshgrid(ax, ax, indexing="xy")
    zx, zy = z.real, z.imag
    e_minus = np.exp(-2j * (kx * zx - ky * zy))   # e(z, -k)
    e_bar = np.exp(2j * (kx * zx + ky * zy))      # e(z, conj(k))
    return e_minus, e_bar


def solve_real(t_data, z, config=SolverConfig()):
    """Scalar D-bar solve: mu = 1 + (1/(pi k)) * [ t e(z,-k) conj(mu) / (4 pi kbar) ].

    The conjugation is handled by stacking [Re(mu); Im(mu)] into a doubled
    real vector, on which the operator is linear.
    """
    kgrid = t_data.kgrid
    n = kgrid.n
    k = kgrid.nodes
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_kbar = np.where(k == 0.0, 0.0, 1.0 / np.conj(np.where(k == 0.0, 1.0, k)))
    e_minus, _ = _phase_grids(complex(z), kgrid)
    T = t_data.t * e_minus * inv_kbar / (4.0 * np.pi)

    ones = np.ones((n, n))
    if not np.any(T):
        return CGOSolution(
            z=complex(z), kind="mu_scalar", value_at_zero=1.0 + 0.0j,
            residual=0.0, iterations=0, converged=True,
        )

    h = kgrid.h_k

    def apply_complex(mu):
        return mu - conv_cauchy(T * np.conj(mu), h)

    def matvec(xr):
        mu = (xr[: n * n] + 1j * xr[n * n :]).reshape(n, n)
        w = apply_complex(mu)
        return np.concatenate([w.real.ravel(), w.imag.ravel()])

    b = np.concatenate([ones.ravel(), np.zeros(n * n)])
    x, _, iters = gmres(matvec, b, tol=config.tol, maxiter=config.max_iter)
    res = np.linalg.norm(matvec(x) - b) / np.linalg.norm(b)
    mu = (x[: n * n] + 1j * x[n * n :]).reshape(n, n)
    ok = res <= config.tol
    return CGOSolution(
        z=complex(z), kind="mu_scalar",
        value_at_zero=complex(mu[kgrid.center, kgrid.center]),
        residual=float(res), iterations=iters, converged=bool(ok),
    )


def solve_matrix(s_data, z, config=SolverConfig()):
    """Matrix D-bar solve: two decoupled 2-unknown systems per pixel.

    The k-bar evaluation M(z, kbar) is the row reflection ky -> -ky with no
    value conjugation, so each system is complex-linear and solved with
    complex GMRES.
    """
    kgrid = s_data.kgrid
    n = kgrid.n
    h = kgrid.h_k
    e_minus, e_bar = _phase_grids(complex(z), kgrid)
    w21 = e_minus * s_data.s21
    w12 = e_bar * s_data.s12

    ones = np.ones((n, n), dtype=complex)
    if not (np.any(w12) or np.any(w21)):
        return CGOSolution(
            z=complex(z), kind="M_matrix", value_at_zero=np.eye(2, dtype=complex),
            residual=0.0, iterations=0, converged=True,
        )

    def refl(a):
        return a[::-1, :]

    def solve_pair(wa, wb):
        # X = 1 + C[refl(Y) wa],  Y = C[refl(X) wb]
        def matvec(v):
            X = v[: n * n].reshape(n, n)
            Y = v[n * n :].reshape(n, n)
            rX = X - conv_cauchy(refl(Y) * wa, h)
            rY = Y - conv_cauchy(refl(X) * wb, h)
            return np.concatenate([rX.ravel(), rY.ravel()])

        b = np.concatenate([ones.ravel(), np.zeros(n * n, dtype=complex)])
        x, _, iters = gmres(matvec, b, tol=config.tol, maxiter=config.max_iter)
        res = np.linalg.norm(matvec(x) - b) / np.linalg.norm(b)
        return x[: n * n].reshape(n, n), x[n * n :].reshape(n, n), res, iters

    c = kgrid.center
    # system A: unknowns (M11, M12) driven by (w21, w12)
    M11, M12, res_a, it_a = solve_pair(w21, w12)
    # system B: unknowns (M22, M21) driven by (w12, w21)
    M22, M21, res_b, it_b = solve_pair(w12, w21)
    value = np.array(
        [[M11[c, c], M12[c, c]], [M21[c, c], M22[c, c]]], dtype=complex
    )
    res = max(res_a, res_b)
    iters = max(it_a, it_b)
    return CGOSolution(
        z=complex(z), kind="M_matrix", value_at_zero=value,
        residual=float(res), iterations=iters, converged=bool(res <= config.tol),
    )


@dataclass
class CGOField:
    """CGO k=0 values over a pixel grid, with per-pixel diagnostics."""

    kind: str
    values: np.ndarray        # (n, n) complex or (n, n, 2, 2) complex
    residuals: np.ndarray     # (n, n) float
    iterations: np.ndarray    # (n, n) int
    converged: np.ndarray     # (n, n) bool
    solved: np.ndarray        # (n, n) bool: pixel was attempted

    @property
    def convergence_fraction(self):
        m = self.solved
        return float(np.count_nonzero(self.converged & m)) / max(1, np.count_nonzero(m))


def solve_image(s_data, zgrid, config=SolverConfig(), pixel_mask=None):
    """Independent per-pixel D-bar solves over a z-grid.

    Pure per-pixel computations: results are deterministic and identical
    under serial or thread-parallel execution.  Non-converged pixels are
    recorded, not fatal.
    """
    scalar = s_data.kind == "real_t"
    n = zgrid.n
    mask = zgrid.mask if pixel_mask is None else pixel_mask
    values = (
        np.ones((n, n), dtype=complex)
        if scalar
        else np.tile(np.eye(2, dtype=complex), (n, n, 1, 1))
    )
    residuals = np.zeros((n, n))
    iters = np.zeros((n, n), dtype=int)
    conv = np.ones((n, n), dtype=bool)
    pts = np.argwhere(mask)
    znodes = zgrid.nodes

    def work(idx):
        iy, ix = idx
        if scalar:
            return solve_real(s_data, znodes[iy, ix], config)
        return solve_matrix(s_data, znodes[iy, ix], config)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            sols = list(pool.map(work, pts))
    else:
        sols = [work(idx) for idx in pts]

    for (iy, ix), sol in zip(pts, sols):
        values[iy, ix] = sol.value_at_zero
        residuals[iy, ix] = sol.residual
        iters[iy, ix] = sol.iterations
        conv[iy, ix] = sol.converged

    return CGOField(
        kind="mu_scalar" if scalar else "M_matrix",
        values=values,
        residuals=residuals,
        iterations=iters,
        converged=conv,
        solved=mask.copy(),
    )
