"""Depth stepping of time-expanded wavefields.

One depth step advances the M coefficient planes of a wavefield from layer k
to k+1 in seven stages: (1) n implicit rational-term solves, chained so each
term starts from the previous term's output; (2) double conjugation so the
represented signal vanishes at the window edges; (3) dense bridge to N
frequency planes; (4) pointwise vertical-delay phase with the local velocity
(cheaper in the frequency domain than the equivalent coefficient
convolution); (5) wavenumber filtering per frequency plane with a small set
of reference velocities; (6) bridge back; (7) shift-based first-period
extraction.  On layers where the velocity is constant, stages 1-5 collapse
into one exact spectral propagator.

Sign conventions: stored frequency planes follow the unnormalized-DFT
convention of the bridge (component j evolves like exp(+i*k_j*t)), so a time
delay by tau multiplies component j by exp(-i*k_j*tau).  Downward
continuation is a delay: deeper arrivals are later.  The evanescent branch
of the vertical wavenumber always decays.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.fft import next_fast_len

from lagmig.bridge import TransformMatrix, centered_freqs
from lagmig.laguerre import LaguerreParams, LaguerreSpectrum, eval_laguerre_functions
from lagmig.linsolve import ConvergenceError, DDMConfig, LayerOperator, _cg_kernel, ddm_solve
from lagmig.pade import PadeExpansion
from lagmig.stencil import Layout2D, _apply_stencil, apply_L, taper_mask


@dataclass
class VelocityModel:
    """Gridded velocity c(x, y, z) in m/s with spacings in meters."""

    c: np.ndarray
    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        self.c = np.ascontiguousarray(self.c, dtype=np.float64)
        if self.c.ndim != 3:
            raise ValueError("velocity grid must be (nx, ny, nz)")
        if not np.all(self.c > 0):
            raise ValueError("velocities must be strictly positive")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ValueError("grid spacings must be positive")

    @classmethod
    def from_section(cls, c_xz: np.ndarray, dx: float, dz: float) -> "VelocityModel":
        """2D model: a vertical section stored as ny = 1."""
        c_xz = np.asarray(c_xz, dtype=np.float64)
        return cls(c_xz[:, None, :], dx, dx, dz)

    @property
    def nx(self) -> int:
        return self.c.shape[0]

    @property
    def ny(self) -> int:
        return self.c.shape[1]

    @property
    def nz(self) -> int:
        return self.c.shape[2]

    def layout(self) -> Layout2D:
        return Layout2D(self.nx, self.ny, self.dx, self.dy)

    def layer(self, k: int) -> np.ndarray:
        return np.ascontiguousarray(self.c[:, :, k])

    def layer_homogeneous(self, k: int, rtol: float = 1e-9) -> bool:
        plane = self.c[:, :, k]
        cmax = plane.max()
        return (cmax - plane.min()) <= rtol * cmax


@dataclass
class WavefieldLaguerre:
    """M real coefficient planes of the wavefield at one depth."""

    layout: Layout2D
    params: LaguerreParams
    planes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.planes = np.ascontiguousarray(self.planes, dtype=np.float64)
        expected = (self.params.ncoeff, self.layout.nx, self.layout.ny)
        if self.planes.shape != expected:
            raise ValueError(f"planes shape {self.planes.shape} != {expected}")

    @classmethod
    def zeros(cls, layout: Layout2D, params: LaguerreParams) -> "WavefieldLaguerre":
        return cls(layout, params, np.zeros((params.ncoeff, layout.nx, layout.ny)))

    @classmethod
    def point_source(
        cls,
        layout: Layout2D,
        wavelet: LaguerreSpectrum,
        ix: int,
        iy: int = 0,
        spread: bool = False,
    ) -> "WavefieldLaguerre":
        """Inject a wavelet's coefficients at one surface node.

        With ``spread`` the injection is softened over 3x3 nodes (3x1 in 2D
        mode) with weights from the outer product of [1/2, 1, 1/2].
        """
        w = cls.zeros(layout, wavelet.params)
        if not (0 <= ix < layout.nx and 0 <= iy < layout.ny):
            raise ValueError(f"source node ({ix}, {iy}) outside the grid")
        if not spread:
            w.planes[:, ix, iy] = wavelet.coeffs
            return w
        stamp = np.array([0.5, 1.0, 0.5])
        for a, wa in zip((-1, 0, 1), stamp):
            if not 0 <= ix + a < layout.nx:
                continue
            if layout.ny == 1:
                w.planes[:, ix + a, 0] += wa * wavelet.coeffs
                continue
            for b, wb in zip((-1, 0, 1), stamp):
                if 0 <= iy + b < layout.ny:
                    w.planes[:, ix + a, iy + b] += wa * wb * wavelet.coeffs
        return w

    def copy(self) -> "WavefieldLaguerre":
        return WavefieldLaguerre(self.layout, self.params, self.planes.copy())


@dataclass
class WavefieldFourier:
    """N complex frequency planes of the wavefield at one depth."""

    layout: Layout2D
    nfreq: int
    window: float
    planes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.planes = np.ascontiguousarray(self.planes, dtype=np.complex128)
        expected = (self.nfreq, self.layout.nx, self.layout.ny)
        if self.planes.shape != expected:
            raise ValueError(f"planes shape {self.planes.shape} != {expected}")

    def freqs(self) -> np.ndarray:
        return centered_freqs(self.nfreq, self.window)

    def copy(self) -> "WavefieldFourier":
        return WavefieldFourier(self.layout, self.nfreq, self.window, self.planes.copy())


# ---------------------------------------------------------------------------
# block operations along the coefficient axis


def _convolve_block(block: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Convolve every column of (M, npix) with a 1D kernel, truncated to M rows."""
    m = block.shape[0]
    size = next_fast_len(m + len(kernel) - 1)
    fb = np.fft.rfft(block, size, axis=0)
    fk = np.fft.rfft(kernel, size)
    return np.fft.irfft(fb * fk[:, None], size, axis=0)[:m]


def _correlate_block(block: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """out[j] = sum_m block[m] * kernel[m + j] per column, j = 0..M-1."""
    m = block.shape[0]
    full = _convolve_block_full(block[::-1], kernel)
    return full[m - 1 : 2 * m - 1]


def _convolve_block_full(block: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    m = block.shape[0]
    size = next_fast_len(m + len(kernel) - 1)
    fb = np.fft.rfft(block, size, axis=0)
    fk = np.fft.rfft(kernel, size)
    return np.fft.irfft(fb * fk[:, None], size, axis=0)[: m + len(kernel) - 1]


def _diff_block(block: np.ndarray) -> np.ndarray:
    return np.diff(block, axis=0, prepend=0.0)


class StepWorkspace:
    """Precomputed bridge matrix and window-edge kernels shared across layers."""

    def __init__(self, params: LaguerreParams, nfreq: int):
        self.params = params
        self.nfreq = nfreq
        self.matrix = TransformMatrix(params, nfreq)
        x = params.eta * params.window
        self.window_kernel = eval_laguerre_functions(x, 2 * params.ncoeff - 1)

    def shift_block(self, block: np.ndarray) -> np.ndarray:
        """Delay every column by one window length."""
        m = self.params.ncoeff
        return _convolve_block(_diff_block(block), self.window_kernel[:m])

    def conjugate_block(self, block: np.ndarray) -> np.ndarray:
        return _correlate_block(_diff_block(block), self.window_kernel)

    def remove_periodicity(self, block: np.ndarray) -> np.ndarray:
        return block - self.shift_block(block)

    def q2_block(self, block: np.ndarray) -> np.ndarray:
        return self.conjugate_block(self.conjugate_block(block))

    def to_fourier(self, block: np.ndarray) -> np.ndarray:
        """(M, npix) real coefficients -> (N, npix) frequency values."""
        scale = self.nfreq * self.params.eta / self.params.window
        return scale * (self.matrix.mat.conj().T @ block)

    def from_fourier(self, block: np.ndarray, imag_tol: float = 1e-5) -> np.ndarray:
        """(N, npix) frequency values -> (M, npix) real coefficients."""
        raw = self.matrix.mat @ (block / self.nfreq)
        residue = np.linalg.norm(raw.imag)
        scale = np.linalg.norm(raw.real)
        if residue > imag_tol * max(scale, 1e-300):
            raise ValueError(
                f"imaginary residue {residue:.3e} exceeds {imag_tol:.1e} of {scale:.3e}"
            )
        return np.ascontiguousarray(raw.real)


# ---------------------------------------------------------------------------
# transport steps


def transport_step_laguerre(
    w: WavefieldLaguerre, c_plane: np.ndarray, dz: float
) -> WavefieldLaguerre:
    """Vertical-delay step in the coefficient domain.

    Per grid point, convolve the differenced coefficient sequence with basis
    values at eta*dz/c; the sampled-basis kernel is built once per distinct
    velocity value, so layered models pay one kernel per layer velocity.
    """
    c_plane = np.asarray(c_plane, dtype=np.float64)
    if np.any(c_plane <= 0):
        raise ValueError("velocities must be positive")
    m = w.params.ncoeff
    npix = w.layout.npoints
    flat_c = c_plane.ravel()
    block = w.planes.reshape(m, npix)
    out = np.empty_like(block)
    diffed = _diff_block(block)
    for cval in np.unique(flat_c):
        cols = flat_c == cval
        kernel = eval_laguerre_functions(w.params.eta * dz / cval, m)
        out[:, cols] = _convolve_block(diffed[:, cols], kernel)
    return WavefieldLaguerre(w.layout, w.params, out.reshape(w.planes.shape))


def transport_step_fourier(
    wf: WavefieldFourier, c_plane: np.ndarray, dz: float
) -> WavefieldFourier:
    """Vertical-delay step in the frequency domain: unimodular phase per point."""
    c_plane = np.asarray(c_plane, dtype=np.float64)
    if np.any(c_plane <= 0):
        raise ValueError("velocities must be positive")
    tau = dz / c_plane
    out = wf.planes * np.exp(-1j * np.multiply.outer(wf.freqs(), tau))
    return WavefieldFourier(wf.layout, wf.nfreq, wf.window, out)


# ---------------------------------------------------------------------------
# implicit rational-term (diffraction) step


@dataclass
class SolveConfig:
    """Inner linear-solver settings for the implicit depth solves."""

    eps: float = 1e-6
    maxiter: int = 1000
    ddm: DDMConfig | None = None


@njit(cache=True)
def _diffraction_sweep(planes, c_plane, eta, gamma, beta, dz, inv_dx2, inv_dy2, eps, maxiter):
    """Solve the implicit order-chain for one rational term, in place.

    planes[m] enters holding the layer-k coefficients and leaves holding the
    layer-(k+1) coefficients.  Prefix sums over already-solved orders are
    maintained incrementally with compensated accumulation, so each order
    costs two stencil applications plus one CG solve.

    Returns the maximum CG iteration count, or -(m+1) if order m failed to
    converge.
    """
    m_count, nx, ny = planes.shape
    theta = np.empty((nx, ny))
    diag = np.empty((nx, ny))
    f_v = np.empty((nx, ny))
    f_lv = np.empty((nx, ny))
    f_lp = np.empty((nx, ny))
    f_phi2 = np.empty((nx, ny))
    for i in range(nx):
        for j in range(ny):
            c = c_plane[i, j]
            th = gamma + beta * eta * dz / (4.0 * c)
            theta[i, j] = th
            diag[i, j] = eta * eta / (4.0 * c * c * th)
            f_v[i, j] = eta * eta / (4.0 * c * c)
            f_lv[i, j] = beta * dz * eta / (4.0 * c) - gamma
            f_lp[i, j] = beta * dz * eta / (2.0 * c)
            f_phi2[i, j] = eta * eta / (c * c)

    p1 = np.zeros((nx, ny))
    d0 = np.zeros((nx, ny))
    d1 = np.zeros((nx, ny))
    comp1 = np.zeros((nx, ny))
    comp0 = np.zeros((nx, ny))
    compd = np.zeros((nx, ny))
    lv = np.empty((nx, ny))
    lp = np.empty((nx, ny))
    rhs = np.empty((nx, ny))
    no_history = np.empty(0)

    max_iters = 0
    for m in range(m_count):
        v = planes[m].copy()
        _apply_stencil(v, lv, inv_dx2, inv_dy2)
        _apply_stencil(p1, lp, inv_dx2, inv_dy2)
        for i in range(nx):
            for j in range(ny):
                rhs[i, j] = (
                    f_v[i, j] * v[i, j]
                    + f_lv[i, j] * lv[i, j]
                    + f_lp[i, j] * lp[i, j]
                    - f_phi2[i, j] * (m * d0[i, j] - d1[i, j])
                ) / theta[i, j]
        w, iters = _cg_kernel(diag, rhs, inv_dx2, inv_dy2, eps, maxiter, no_history)
        if iters > maxiter:
            return -(m + 1)
        if iters > max_iters:
            max_iters = iters
        for i in range(nx):
            for j in range(ny):
                s = w[i, j] + v[i, j]
                y = s - comp1[i, j]
                t = p1[i, j] + y
                comp1[i, j] = (t - p1[i, j]) - y
                p1[i, j] = t

                dlt = w[i, j] - v[i, j]
                y = dlt - comp0[i, j]
                t = d0[i, j] + y
                comp0[i, j] = (t - d0[i, j]) - y
                d0[i, j] = t

                y = m * dlt - compd[i, j]
                t = d1[i, j] + y
                compd[i, j] = (t - d1[i, j]) - y
                d1[i, j] = t
        planes[m] = w
    return max_iters


def diffraction_step(
    w: WavefieldLaguerre,
    c_plane: np.ndarray,
    gamma: float,
    beta: float,
    dz: float,
    solve: SolveConfig | None = None,
):
    """One rational term of the square-root expansion, implicit in depth.

    The coefficient planes are solved in increasing order m; the prefix
    operators at order m only involve orders below m, which is what makes the
    chain well posed.  Every order solves the same symmetric positive
    definite operator d(x, y) - L.

    Returns (advanced wavefield, max CG iterations over orders).
    """
    solve = solve or SolveConfig()
    c_plane = np.ascontiguousarray(c_plane, dtype=np.float64)
    if c_plane.shape != (w.layout.nx, w.layout.ny):
        raise ValueError("velocity plane shape mismatch")
    planes = w.planes.copy()
    eta = w.params.eta
    if solve.ddm is None:
        result = _diffraction_sweep(
            planes,
            c_plane,
            eta,
            gamma,
            beta,
            dz,
            1.0 / w.layout.dx**2,
            1.0 / w.layout.dy**2,
            solve.eps,
            solve.maxiter,
        )
        if result < 0:
            raise ConvergenceError(
                f"implicit solve failed at order m={-result - 1} "
                f"(gamma={gamma:.4f}, maxiter={solve.maxiter})"
            )
        return WavefieldLaguerre(w.layout, w.params, planes), int(result)
    return _diffraction_step_ddm(w, planes, c_plane, gamma, beta, dz, solve)


def _diffraction_step_ddm(w, planes, c_plane, gamma, beta, dz, solve):
    """Python-level order loop with subdomain solves; used when DDM is on."""
    eta = w.params.eta
    theta = gamma + beta * eta * dz / (4.0 * c_plane)
    op = LayerOperator(w.layout, eta**2 / (4.0 * c_plane**2 * theta))
    f_v = eta**2 / (4.0 * c_plane**2)
    f_lv = beta * dz * eta / (4.0 * c_plane) - gamma
    f_lp = beta * dz * eta / (2.0 * c_plane)
    f_phi2 = eta**2 / c_plane**2
    p1 = np.zeros_like(c_plane)
    d0 = np.zeros_like(c_plane)
    d1 = np.zeros_like(c_plane)
    max_iters = 0
    for m in range(w.params.ncoeff):
        v = planes[m].copy()
        rhs = (
            f_v * v
            + f_lv * apply_L(v, w.layout)
            + f_lp * apply_L(p1, w.layout)
            - f_phi2 * (m * d0 - d1)
        ) / theta
        sol, iters = ddm_solve(op, rhs, solve.ddm, eps=solve.eps, maxiter=solve.maxiter)
        max_iters = max(max_iters, iters)
        p1 += sol + v
        d0 += sol - v
        d1 += m * (sol - v)
        planes[m] = sol
    return WavefieldLaguerre(w.layout, w.params, planes), max_iters


def split_step(
    w: WavefieldLaguerre,
    c_plane: np.ndarray,
    pade: PadeExpansion | None,
    dz: float,
    solve: SolveConfig | None = None,
) -> WavefieldLaguerre:
    """Transport then the n rational terms, entirely in the coefficient domain.

    Each term starts from the previous term's advanced field.  ``pade=None``
    is pure vertical transport.
    """
    out = transport_step_laguerre(w, c_plane, dz)
    if pade is None:
        return out
    for gamma, beta in zip(pade.gamma, pade.beta):
        out, _ = diffraction_step(out, c_plane, gamma, beta, dz, solve)
    return out


# ---------------------------------------------------------------------------
# spectral-domain propagation and filtering


def _vertical_factors(freq: float, chi: float, dz: float, k2: np.ndarray, phase: bool):
    """Per-wavenumber multiplier for one frequency plane.

    Propagating part (|k| < |w|/chi): unimodular exp(-i*(w/chi)*sqrt(1-X)*dz)
    when ``phase``, else 1.  Evanescent part always decays like
    exp(-(|w|/chi)*sqrt(X-1)*dz); at w = 0 that limit is exp(-|k|*dz).
    """
    if freq == 0.0:
        fac = np.exp(-np.sqrt(k2) * dz)
        return fac.astype(np.complex128) if phase else fac
    x = chi * chi * k2 / (freq * freq)
    prop = x < 1.0
    decay = np.exp(-abs(freq) / chi * np.sqrt(np.where(prop, 0.0, x - 1.0)) * dz)
    if not phase:
        return np.where(prop, 1.0, decay)
    shift = np.exp(-1j * freq / chi * np.sqrt(np.where(prop, 1.0 - x, 0.0)) * dz)
    return np.where(prop, shift, decay.astype(np.complex128))


def _k2_grid(layout: Layout2D) -> np.ndarray:
    kx = 2.0 * np.pi * np.fft.fftfreq(layout.nx, layout.dx)
    ky = (
        2.0 * np.pi * np.fft.fftfreq(layout.ny, layout.dy)
        if layout.ny > 1
        else np.zeros(1)
    )
    return np.add.outer(kx**2, ky**2)


def homogeneous_layer_step(wf: WavefieldFourier, chi: float, dz: float) -> WavefieldFourier:
    """Exact constant-velocity continuation of all frequency planes.

    2D spatial FFT per plane, multiply by the analytic vertical factor
    (unimodular in the propagating cone, decaying beyond), inverse FFT.
    Magnitudes of propagating components are preserved exactly.
    """
    if chi <= 0:
        raise ValueError("velocity must be positive")
    k2 = _k2_grid(wf.layout)
    freqs = wf.freqs()
    spec = np.fft.fft2(wf.planes, axes=(1, 2))
    for p in range(wf.nfreq):
        spec[p] *= _vertical_factors(freqs[p], chi, dz, k2, phase=True)
    return WavefieldFourier(
        wf.layout, wf.nfreq, wf.window, np.fft.ifft2(spec, axes=(1, 2))
    )


@dataclass(frozen=True)
class FilterBank:
    """Strictly increasing reference velocities for wavenumber filtering."""

    velocities: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.velocities, dtype=np.float64)
        if v.size == 0:
            raise ValueError("filter bank must hold at least one velocity")
        if np.any(np.diff(v) <= 0):
            raise ValueError("filter velocities must be strictly increasing")
        object.__setattr__(self, "velocities", v)

    def bin_indices(self, c_plane: np.ndarray) -> np.ndarray:
        """Bin l covers chi_l <= c < chi_(l+1); the last bin is open-ended."""
        idx = np.searchsorted(self.velocities, c_plane, side="right") - 1
        return np.clip(idx, 0, len(self.velocities) - 1)


def build_filter_velocities(c_plane: np.ndarray, count: int) -> FilterBank:
    """Reference velocities for one layer.

    count 1: the layer minimum.  count 2: minimum and mean.  count 3 or 4:
    arithmetic ladder chi_l = min + (l-1)*dchi with dchi = (max-min)/3.5 and,
    for count 4, the top velocity raised to min + 3.2*dchi.  A homogeneous
    plane degenerates to a single velocity whatever the requested count.
    """
    if count < 1 or count > 4:
        raise ValueError("supported filter bank sizes are 1..4")
    c_plane = np.asarray(c_plane, dtype=np.float64)
    cmin = float(c_plane.min())
    cmax = float(c_plane.max())
    if cmax - cmin <= 1e-9 * cmax:
        return FilterBank(np.array([cmin]))
    if count == 1:
        vels = [cmin]
    elif count == 2:
        vels = [cmin, float(c_plane.mean())]
    else:
        dchi = (cmax - cmin) / 3.5
        vels = [cmin + l * dchi for l in range(count - 1)]
        vels.append(cmin + (3.2 if count == 4 else count - 1) * dchi)
    arr = np.array(sorted(set(vels)))
    return FilterBank(arr)


def filter_plane(
    wf: WavefieldFourier, bank: FilterBank, c_plane: np.ndarray, dz: float
) -> WavefieldFourier:
    """Attenuate evanescent wavenumbers, selecting the filter per grid point.

    Every frequency plane is filtered once per bank velocity (gain 1 inside
    |k| < |w|/chi, analytic decay outside); each grid point then takes the
    copy belonging to its local-velocity bin.
    """
    c_plane = np.asarray(c_plane, dtype=np.float64)
    if c_plane.shape != (wf.layout.nx, wf.layout.ny):
        raise ValueError("velocity plane shape mismatch")
    bins = bank.bin_indices(c_plane)
    present = np.unique(bins)
    k2 = _k2_grid(wf.layout)
    freqs = wf.freqs()
    out = np.empty_like(wf.planes)
    spec = np.fft.fft2(wf.planes, axes=(1, 2))
    masks = [bins == l for l in present]
    for p in range(wf.nfreq):
        for l, mask in zip(present, masks):
            gain = _vertical_factors(freqs[p], bank.velocities[l], dz, k2, phase=False)
            filtered = np.fft.ifft2(spec[p] * gain)
            out[p][mask] = filtered[mask]
    return WavefieldFourier(wf.layout, wf.nfreq, wf.window, out)


# ---------------------------------------------------------------------------
# the full depth step


@dataclass
class StepConfig:
    """Everything one depth step needs besides the wavefield and the layer."""

    pade: PadeExpansion
    nfreq: int
    filter_count: int = 2  # 0 disables spectral filtering
    solve: SolveConfig = field(default_factory=SolveConfig)
    homog_shortcut: bool = True
    imag_tol: float = 1e-5


def algorithm1_step(
    w: WavefieldLaguerre,
    c_plane: np.ndarray,
    dz: float,
    cfg: StepConfig,
    workspace: StepWorkspace | None = None,
):
    """Advance one depth layer; returns the new coefficient planes, the
    filtered frequency planes at the new depth, and the max solver iterations.

    Heterogeneous layers run the full seven-stage pipeline; a homogeneous
    layer (max-min velocity spread below 1e-9 relative) replaces stages 1-5
    with the exact spectral propagator, whose evanescent branch already
    performs the filtering.
    """
    if workspace is None:
        workspace = StepWorkspace(w.params, cfg.nfreq)
    c_plane = np.ascontiguousarray(c_plane, dtype=np.float64)
    m = w.params.ncoeff
    npix = w.layout.npoints
    shape3 = (cfg.nfreq, w.layout.nx, w.layout.ny)

    cmax = c_plane.max()
    homogeneous = (cmax - c_plane.min()) <= 1e-9 * cmax
    max_iters = 0

    if homogeneous and cfg.homog_shortcut:
        block = workspace.q2_block(w.planes.reshape(m, npix))
        fblock = workspace.to_fourier(block)
        wf = WavefieldFourier(w.layout, cfg.nfreq, w.params.window, fblock.reshape(shape3))
        wf = homogeneous_layer_step(wf, float(c_plane.mean()), dz)
    else:
        work = w.planes.copy()
        field_w = WavefieldLaguerre(w.layout, w.params, work)
        for gamma, beta in zip(cfg.pade.gamma, cfg.pade.beta):
            field_w, iters = diffraction_step(field_w, c_plane, gamma, beta, dz, cfg.solve)
            max_iters = max(max_iters, iters)
        block = workspace.q2_block(field_w.planes.reshape(m, npix))
        fblock = workspace.to_fourier(block)
        delay = np.exp(-1j * np.multiply.outer(workspace.matrix.freqs, dz / c_plane.ravel()))
        fblock *= delay
        wf = WavefieldFourier(w.layout, cfg.nfreq, w.params.window, fblock.reshape(shape3))
        if cfg.filter_count > 0:
            bank = build_filter_velocities(c_plane, cfg.filter_count)
            wf = filter_plane(wf, bank, c_plane, dz)

    raw = workspace.from_fourier(wf.planes.reshape(cfg.nfreq, npix), cfg.imag_tol)
    clean = workspace.remove_periodicity(raw)
    w_next = WavefieldLaguerre(w.layout, w.params, clean.reshape(w.planes.shape))
    return w_next, wf, max_iters


# ---------------------------------------------------------------------------
# diagnostics and the depth-marching driver


def synthesize_plane(w: WavefieldLaguerre, t: float) -> np.ndarray:
    """Evaluate the wavefield at one time instant over the whole plane."""
    basis = eval_laguerre_functions(w.params.eta * t, w.params.ncoeff)
    return w.params.eta * np.tensordot(basis, w.planes, axes=1)


def wavefield_energy(depth_planes, params: LaguerreParams, t: float) -> np.ndarray:
    """Per-depth energy sum |u(x, y, t)|^2 over a stack of coefficient planes."""
    basis = params.eta * eval_laguerre_functions(params.eta * t, params.ncoeff)
    out = np.empty(len(depth_planes))
    for k, planes in enumerate(depth_planes):
        if isinstance(planes, WavefieldLaguerre):
            planes = planes.planes
        snap = np.tensordot(basis, planes, axes=1)
        out[k] = float(np.sum(snap * snap))
    return out


@dataclass
class TaperSpec:
    """Absorbing-strip widths (nodes) applied after every depth step."""

    width_x: int = 0
    width_y: int = 0
    strength: float = 0.92


class DepthExtrapolator:
    """Marches a wavefield down through a velocity model layer by layer.

    Precomputes the bridge matrix, the window-edge kernels, and the taper
    mask once; exposes one `step` per layer and a `run` loop that streams
    the per-depth results to a callback (for imaging or snapshot capture).
    """

    def __init__(
        self,
        model: VelocityModel,
        params: LaguerreParams,
        cfg: StepConfig,
        taper: TaperSpec | None = None,
    ):
        self.model = model
        self.params = params
        self.cfg = cfg
        self.layout = model.layout()
        self.workspace = StepWorkspace(params, cfg.nfreq)
        taper = taper or TaperSpec()
        if taper.width_x > 0 or (taper.width_y > 0 and model.ny > 1):
            self.taper_mask = taper_mask(
                self.layout, taper.width_x, taper.width_y, taper.strength
            )
        else:
            self.taper_mask = None
        self.iteration_log: list[int] = []

    def step(self, w: WavefieldLaguerre, k: int):
        """Advance from layer k to k+1 using the layer-k velocities."""
        w_next, wf, iters = algorithm1_step(
            w, self.model.layer(k), self.model.dz, self.cfg, self.workspace
        )
        self.iteration_log.append(iters)
        if self.taper_mask is not None:
            w_next.planes *= self.taper_mask
        return w_next, wf

    def run(self, w0: WavefieldLaguerre, nsteps: int | None = None, on_layer=None):
        """March ``nsteps`` layers (default: through the whole model).

        ``on_layer(k, w, wf)`` is called after each step with the new depth
        index k (1-based: the field now sits at layer k), the coefficient
        planes, and the frequency planes.  Returns the final wavefield.
        """
        nsteps = self.model.nz - 1 if nsteps is None else nsteps
        w = w0
        for k in range(nsteps):
            w, wf = self.step(w, k)
            if on_layer is not None:
                on_layer(k + 1, w, wf)
        return w
