"""Conversions between Fourier and Laguerre series coefficients.

The forward map rests on one identity: the Laguerre coefficients of a complex
exponential exp(i*k*t) on t in [0, inf) are

    integral_0^inf exp(i*k*t) l_m(eta*t) dt = (-eta/2 - i*k)^m / (eta/2 - i*k)^(m+1),

so expanding a band-limited L-periodic interpolant sum_j c_j exp(i*k_j*t)
amounts to one dense matrix product with the matrix holding those values
column by column.  Because every exponential lives on the whole half line,
the result carries a fictitious period L; two removal schemes are provided
(a time-shift correction and double conjugation), both of which reduce the
expansion to the first period.

Index conventions, fixed here once and covered by tests:

* ``FourierSpectrum.coeffs[j]`` is the plain unnormalized DFT value
  sum_n exp(-2*pi*i*n*p/N) f_n reordered so that entry j belongs to the
  centered angular frequency k_j = (2*pi/L) * (j - (N+1)//2).  The signal
  convention is f(t) = (1/N) * sum_j coeffs[j] * exp(i*k_j*t), i.e. the
  Fourier-series coefficients are coeffs/N.
* The transform matrix is applied to the series coefficients coeffs/N; the
  inverse map returns unnormalized-DFT-convention values, which makes
  forward/inverse exact mutual inverses for band-limited signals supported
  inside (0, L).  (The factor N*eta/L in the inverse is required for that
  round trip; see ``laguerre_to_fourier``.)
"""

from dataclasses import dataclass, field

import numpy as np

from lagmig.laguerre import (
    LaguerreParams,
    LaguerreSpectrum,
    eval_laguerre_functions,
    laguerre_convolve,
    laguerre_correlate,
)


def centered_freqs(nfreq: int, window: float) -> np.ndarray:
    """Angular frequencies k_j = (2*pi/L)(j - (N+1)//2), j = 0..N-1."""
    j = np.arange(nfreq)
    return 2.0 * np.pi / window * (j - (nfreq + 1) // 2)


def to_centered_order(dft_values: np.ndarray) -> np.ndarray:
    """Reorder plain DFT output so entry j matches ``centered_freqs``.

    Entry j of the result is DFT bin (j - (N+1)//2) mod N.  This is the one
    place the DFT bin <-> centered frequency mapping is defined; everything
    else goes through it.
    """
    n = dft_values.shape[0]
    return np.roll(dft_values, (n + 1) // 2, axis=0)


def to_dft_order(centered_values: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_centered_order`."""
    n = centered_values.shape[0]
    return np.roll(centered_values, -((n + 1) // 2), axis=0)


@dataclass
class FourierSpectrum:
    """Centered-order unnormalized DFT coefficients of N samples on [0, L)."""

    nfreq: int
    window: float
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (self.nfreq,):
            raise ValueError(
                f"expected {self.nfreq} coefficients, got shape {self.coeffs.shape}"
            )

    @classmethod
    def from_samples(cls, samples, window: float) -> "FourierSpectrum":
        samples = np.asarray(samples)
        coeffs = to_centered_order(np.fft.fft(samples))
        out = cls(len(samples), window, coeffs)
        if np.isrealobj(samples):
            out.assert_hermitian()
        return out

    def to_samples(self) -> np.ndarray:
        return np.fft.ifft(to_dft_order(self.coeffs))

    def freqs(self) -> np.ndarray:
        return centered_freqs(self.nfreq, self.window)

    def assert_hermitian(self, tol: float = 1e-8):
        """Real time samples pair bins at +-k as complex conjugates."""
        k = self.freqs()
        scale = np.max(np.abs(self.coeffs)) or 1.0
        for j, kj in enumerate(k):
            partner = np.nonzero(np.isclose(k, -kj))[0]
            if partner.size:
                mismatch = abs(self.coeffs[j] - np.conj(self.coeffs[partner[0]]))
                if mismatch > tol * scale:
                    raise ValueError(
                        f"Hermitian symmetry violated at bin {j}: {mismatch:.2e}"
                    )


class TransformMatrix:
    """Dense matrix mapping Fourier-series coefficients to Laguerre coefficients.

    Entries are generated row by row with the recurrence

        row 0:   1 / (eta/2 - i*k_j)
        row m+1: row m * (-eta/2 - i*k_j) / (eta/2 - i*k_j)

    whose ratio has modulus exactly 1, so entry magnitudes stay constant down
    each column (no overflow or underflow for any order count).
    """

    def __init__(self, params: LaguerreParams, nfreq: int):
        if nfreq < 1:
            raise ValueError("nfreq must be >= 1")
        self.params = params
        self.nfreq = nfreq
        self.freqs = centered_freqs(nfreq, params.window)
        half_eta = 0.5 * params.eta
        base = half_eta - 1j * self.freqs
        ratio = (-half_eta - 1j * self.freqs) / base
        mat = np.empty((params.ncoeff, nfreq), dtype=np.complex128)
        mat[0] = 1.0 / base
        for m in range(params.ncoeff - 1):
            mat[m + 1] = mat[m] * ratio
        self.mat = mat
        self.mat.setflags(write=False)

    def _check_compatible(self, spectrum: FourierSpectrum):
        if spectrum.nfreq != self.nfreq:
            raise ValueError(f"spectrum has N={spectrum.nfreq}, matrix expects {self.nfreq}")
        if not np.isclose(spectrum.window, self.params.window):
            raise ValueError(
                f"spectrum window {spectrum.window} != matrix window {self.params.window}"
            )


def _to_real(values: np.ndarray, imag_tol: float) -> np.ndarray:
    residue = np.linalg.norm(values.imag)
    scale = np.linalg.norm(values.real)
    if residue > imag_tol * max(scale, 1e-300):
        raise ValueError(
            f"imaginary residue {residue:.3e} exceeds {imag_tol:.1e} of the real norm "
            f"{scale:.3e}; input spectrum is not Hermitian"
        )
    return np.ascontiguousarray(values.real)


def fourier_to_laguerre(
    spectrum: FourierSpectrum, matrix: TransformMatrix, imag_tol: float = 1e-6
) -> np.ndarray:
    """Raw Laguerre coefficients of the L-periodic interpolant of a spectrum.

    Returns V @ (coeffs/N) with the imaginary residue checked and dropped
    (real signals only).  The result represents the periodic extension of the
    sampled signal on the whole half line; apply one of the periodicity
    removal schemes to keep the first period only.
    """
    matrix._check_compatible(spectrum)
    raw = matrix.mat @ (spectrum.coeffs / spectrum.nfreq)
    return _to_real(raw, imag_tol)


def laguerre_to_fourier(spec: LaguerreSpectrum, matrix: TransformMatrix) -> FourierSpectrum:
    """Fourier coefficients of a signal vanishing at t = 0 and t >= L.

    Computes (N*eta/L) * V^H @ coeffs.  The scaling makes this the exact
    band-limited inverse of :func:`fourier_to_laguerre`: the adjoint alone
    returns L/(N*eta) times the stored-convention coefficients, as the basis
    normalization integral_0^inf l_m(eta t) l_n(eta t) dt = delta/eta shows.

    The caller must ensure the represented signal is supported inside (0, L),
    normally by applying the double conjugation first; otherwise the adjoint
    picks up the tail the Fourier basis cannot represent.
    """
    if spec.params.ncoeff != matrix.params.ncoeff:
        raise ValueError(
            f"spectrum has M={spec.params.ncoeff}, matrix expects {matrix.params.ncoeff}"
        )
    scale = matrix.nfreq * matrix.params.eta / matrix.params.window
    coeffs = scale * (matrix.mat.conj().T @ spec.coeffs)
    return FourierSpectrum(matrix.nfreq, matrix.params.window, coeffs)


def _difference_sequence(coeffs: np.ndarray) -> np.ndarray:
    return np.diff(np.asarray(coeffs, dtype=np.float64), prepend=0.0)


def shift_right(coeffs, tau: float, params: LaguerreParams) -> np.ndarray:
    """Delay operator: coefficients of f(t - tau), tau >= 0.

    out[m] = sum_j (coeffs[m-j] - coeffs[m-j-1]) * l_j(eta*tau), a linear
    convolution of the differenced sequence with sampled basis values.
    tau = 0 is the identity (the differences telescope).
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    kernel = eval_laguerre_functions(params.eta * tau, params.ncoeff)
    return laguerre_convolve(_difference_sequence(coeffs), kernel)


def conjugate(coeffs, tau: float, params: LaguerreParams) -> np.ndarray:
    """Conjugation operator: out[j] = sum_m (coeffs[m] - coeffs[m-1]) * l_{m+j}(eta*tau).

    Applied twice with tau = L it suppresses the represented signal for
    t >= L while leaving it nearly unchanged on (0, L), which is what the
    Fourier-side inverse requires.  Computed as a linear correlation against
    basis values up to order 2M-2.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    m = params.ncoeff
    kernel = eval_laguerre_functions(params.eta * tau, 2 * m - 1)
    return laguerre_correlate(_difference_sequence(coeffs), kernel)


def remove_periodicity_shift(raw, params: LaguerreParams) -> np.ndarray:
    """First-period extraction: raw - shift_right(raw, L).

    The periodic expansion minus its own copy delayed by one period leaves
    the first period and cancels the rest.  One convolution.
    """
    return np.asarray(raw, dtype=np.float64) - shift_right(raw, params.window, params)


def remove_periodicity_q2(raw, params: LaguerreParams) -> np.ndarray:
    """First-period extraction by double conjugation at tau = L.  Two correlations."""
    return conjugate(conjugate(raw, params.window, params), params.window, params)


def expand_trace(
    samples, params: LaguerreParams, matrix: TransformMatrix | None = None
) -> LaguerreSpectrum:
    """Laguerre expansion of N uniform samples on [0, L).

    Pipeline: DFT, centered reorder, dense matrix product, shift-based
    periodicity removal.  Pass a prebuilt matrix when expanding many traces.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if matrix is None:
        matrix = TransformMatrix(params, len(samples))
    spectrum = FourierSpectrum.from_samples(samples, params.window)
    raw = fourier_to_laguerre(spectrum, matrix)
    return LaguerreSpectrum(params, remove_periodicity_shift(raw, params))
