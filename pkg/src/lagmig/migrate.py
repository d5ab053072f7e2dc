"""Prestack shot-record depth migration.

Source and receiver wavefields are continued downward with the same depth
stepper and combined per layer into two images: a crosscorrelation image
(robust to noise, physical dimension of energy) and a deconvolution image
(dimensionless reflectivity estimate, regularized against division by small
source amplitudes).

The receiver field is back-propagated by time-reversing the recorded traces
and running the ordinary downward (delay) stepper on them; the true upgoing
field at depth is the complex conjugate of the machine field, which is
applied when the frequency planes are handed to the imaging conditions.
Time reversal here is the grid-exact one (sample j maps to N - j mod N),
which conjugates the DFT coefficients exactly.
"""

from dataclasses import dataclass, field

import numpy as np

from lagmig.bridge import FourierSpectrum, TransformMatrix, to_centered_order
from lagmig.extrapolate import (
    DepthExtrapolator,
    StepConfig,
    TaperSpec,
    VelocityModel,
    WavefieldFourier,
    WavefieldLaguerre,
    homogeneous_layer_step,
)
from lagmig.laguerre import LaguerreParams, LaguerreSpectrum


@dataclass
class ShotGather:
    """One shot record: source node, source signature, receiver traces."""

    source_ix: int
    source_iy: int
    wavelet: np.ndarray
    traces: np.ndarray
    rec_ix: np.ndarray
    rec_iy: np.ndarray
    dt: float

    def __post_init__(self):
        self.wavelet = np.asarray(self.wavelet, dtype=np.float64)
        self.traces = np.atleast_2d(np.asarray(self.traces, dtype=np.float64))
        self.rec_ix = np.atleast_1d(np.asarray(self.rec_ix, dtype=np.int64))
        self.rec_iy = np.atleast_1d(np.asarray(self.rec_iy, dtype=np.int64))
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.traces.shape != (len(self.rec_ix), len(self.wavelet)):
            raise ValueError(
                f"traces shape {self.traces.shape} != (receivers, samples) "
                f"({len(self.rec_ix)}, {len(self.wavelet)})"
            )
        if len(self.rec_iy) != len(self.rec_ix):
            raise ValueError("receiver coordinate arrays must have equal length")

    @property
    def nsamp(self) -> int:
        return len(self.wavelet)

    @property
    def window(self) -> float:
        return self.nsamp * self.dt

    def scaled(self, factor: float) -> "ShotGather":
        return ShotGather(
            self.source_ix,
            self.source_iy,
            factor * self.wavelet,
            factor * self.traces,
            self.rec_ix.copy(),
            self.rec_iy.copy(),
            self.dt,
        )


def _time_reverse(traces: np.ndarray) -> np.ndarray:
    """t -> L - t on the periodic sample grid; conjugates DFT coefficients."""
    return np.roll(traces[:, ::-1], 1, axis=1)


def _expand_traces_block(traces, params: LaguerreParams, matrix: TransformMatrix):
    """Laguerre coefficients of many traces at once: (M, ntrace)."""
    spectra = to_centered_order(np.fft.fft(traces, axis=1).T)
    raw = (matrix.mat @ spectra) / matrix.nfreq
    return raw.real


@dataclass
class ImageAccumulator:
    """Per-node image sums over shots and frequencies."""

    nx: int
    ny: int
    nz: int
    crosscorr: np.ndarray = field(default=None, repr=False)
    deconv: np.ndarray = field(default=None, repr=False)
    eps_scale: float = 1e-3
    eps_floor: float = 1e-30

    def __post_init__(self):
        if self.crosscorr is None:
            self.crosscorr = np.zeros((self.nx, self.ny, self.nz))
        if self.deconv is None:
            self.deconv = np.zeros((self.nx, self.ny, self.nz))

    def add_layer(self, k: int, s_planes: np.ndarray, r_planes: np.ndarray):
        self.crosscorr[:, :, k] += imaging_ic(s_planes, r_planes)
        self.deconv[:, :, k] += imaging_id(s_planes, r_planes, self.eps_scale, self.eps_floor)


def imaging_ic(s_planes: np.ndarray, r_planes: np.ndarray) -> np.ndarray:
    """Crosscorrelation condition: sum over frequencies of Re(R * conj(S)).

    Over a Hermitian frequency set the sum is real up to round-off; only the
    real part is accumulated (images are real).
    """
    if s_planes.shape != r_planes.shape:
        raise ValueError("source/receiver plane stacks differ in shape")
    return np.einsum("pij,pij->ij", r_planes, s_planes.conj()).real


def imaging_id(
    s_planes: np.ndarray,
    r_planes: np.ndarray,
    eps_scale: float = 1e-3,
    eps_floor: float = 1e-30,
) -> np.ndarray:
    """Deconvolution condition: sum of R * conj(S) / (|S|^2 + eps) per frequency.

    eps is recomputed per call (per shot and depth) as eps_scale times the
    maximum of |S|^2 over the plane and all frequencies, floored at a tiny
    positive value so an all-zero source contributes zero instead of NaN.
    Scaling both fields jointly by any factor leaves the result unchanged,
    because eps co-scales with |S|^2.
    """
    if s_planes.shape != r_planes.shape:
        raise ValueError("source/receiver plane stacks differ in shape")
    power = s_planes.real**2 + s_planes.imag**2
    eps = max(eps_scale * float(power.max()), eps_floor)
    return np.sum((r_planes * s_planes.conj()).real / (power + eps), axis=0)


def extrapolate_shot(
    gather: ShotGather,
    model: VelocityModel,
    params: LaguerreParams,
    cfg: StepConfig,
    taper: TaperSpec | None = None,
    nsteps: int | None = None,
):
    """Step source and receiver fields down together, yielding (k, S, R).

    S and R are (nfreq, nx, ny) frequency-plane stacks at depth layer k
    (k = 1..nsteps); R is already conjugated to the true upgoing field, so
    the imaging conditions can be applied as written.
    """
    layout = model.layout()
    if not np.isclose(gather.window, params.window):
        raise ValueError(
            f"gather window {gather.window} != expansion window {params.window}"
        )
    if gather.nsamp != cfg.nfreq:
        raise ValueError(f"gather has {gather.nsamp} samples, config expects {cfg.nfreq}")
    if np.any(gather.rec_ix < 0) or np.any(gather.rec_ix >= layout.nx):
        raise ValueError("receiver x index outside the model grid")
    if np.any(gather.rec_iy < 0) or np.any(gather.rec_iy >= layout.ny):
        raise ValueError("receiver y index outside the model grid")

    driver = DepthExtrapolator(model, params, cfg, taper)
    matrix = driver.workspace.matrix

    src_coeffs = driver.workspace.remove_periodicity(
        _expand_traces_block(gather.wavelet[None, :], params, matrix)
    )[:, 0]
    w_src = WavefieldLaguerre.point_source(
        layout, LaguerreSpectrum(params, src_coeffs), gather.source_ix, gather.source_iy
    )

    rec_coeffs = driver.workspace.remove_periodicity(
        _expand_traces_block(_time_reverse(gather.traces), params, matrix)
    )
    w_rec = WavefieldLaguerre.zeros(layout, params)
    for t, (ix, iy) in enumerate(zip(gather.rec_ix, gather.rec_iy)):
        w_rec.planes[:, ix, iy] += rec_coeffs[:, t]

    nsteps = model.nz - 1 if nsteps is None else nsteps
    for k in range(nsteps):
        w_src, wf_src = driver.step(w_src, k)
        w_rec, wf_rec = driver.step(w_rec, k)
        yield k + 1, wf_src.planes, np.conj(wf_rec.planes)


def migrate_shot(
    gather: ShotGather,
    model: VelocityModel,
    params: LaguerreParams,
    cfg: StepConfig,
    accum: ImageAccumulator,
    taper: TaperSpec | None = None,
):
    """Accumulate one shot's contribution into both images."""
    for k, s_planes, r_planes in extrapolate_shot(gather, model, params, cfg, taper):
        accum.add_layer(k, s_planes, r_planes)
    return accum


def migrate_shots(
    gathers,
    model: VelocityModel,
    params: LaguerreParams,
    cfg: StepConfig,
    taper: TaperSpec | None = None,
) -> ImageAccumulator:
    """Migrate shots in the given (fixed) order; accumulation is deterministic."""
    accum = ImageAccumulator(model.nx, model.ny, model.nz)
    for gather in gathers:
        migrate_shot(gather, model, params, cfg, accum, taper)
    return accum


def born_reflector_gather(
    model: VelocityModel,
    reflectivity: np.ndarray,
    source_ix: int,
    source_iy: int,
    wavelet: np.ndarray,
    dt: float,
) -> ShotGather:
    """Single-scattering synthetic gather via analytic per-layer continuation.

    The source spectrum is continued down layer by layer with the exact
    constant-velocity propagator (every layer must be laterally homogeneous),
    scaled by the reflectivity at each depth, and the scattered contributions
    are continued back up and recorded at every surface node.  This modeling
    path never touches the expansion-coefficient machinery, so it is an
    independent data source for migration tests.
    """
    layout = model.layout()
    reflectivity = np.asarray(reflectivity, dtype=np.float64)
    if reflectivity.shape != (model.nx, model.ny, model.nz):
        raise ValueError("reflectivity grid must match the model")
    for k in range(model.nz):
        if not model.layer_homogeneous(k):
            raise ValueError("analytic modeling needs laterally homogeneous layers")
    wavelet = np.asarray(wavelet, dtype=np.float64)
    nfreq = len(wavelet)
    window = nfreq * dt

    spectrum = to_centered_order(np.fft.fft(wavelet))
    planes = np.zeros((nfreq, model.nx, model.ny), dtype=np.complex128)
    planes[:, source_ix, source_iy] = spectrum
    down = WavefieldFourier(layout, nfreq, window, planes)

    scattered = []  # (depth index, planes at that depth)
    for k in range(model.nz - 1):
        down = homogeneous_layer_step(down, float(model.layer(k).mean()), model.dz)
        refl = reflectivity[:, :, k + 1]
        if np.any(refl != 0.0):
            scattered.append((k + 1, down.planes * refl))

    total = np.zeros((nfreq, model.nx, model.ny), dtype=np.complex128)
    for k_src, planes_up in scattered:
        up = WavefieldFourier(layout, nfreq, window, planes_up.copy())
        for k in range(k_src - 1, -1, -1):
            up = homogeneous_layer_step(up, float(model.layer(k).mean()), model.dz)
        total += up.planes

    from lagmig.bridge import to_dft_order

    traces_f = to_dft_order(total.reshape(nfreq, -1))
    traces = np.fft.ifft(traces_f, axis=0).real.T
    ix, iy = np.meshgrid(np.arange(model.nx), np.arange(model.ny), indexing="ij")
    return ShotGather(
        source_ix,
        source_iy,
        wavelet,
        traces,
        ix.ravel(),
        iy.ravel(),
        dt,
    )
