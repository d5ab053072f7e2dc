"""Laguerre basis: evaluation, series synthesis, prefix operators, FFT convolution.

Time signals f(t) on [0, inf) are represented by real coefficient sequences

    coeffs[m] = integral_0^inf f(t) * l_m(eta*t) dt,      m = 0..M-1,

where l_m(x) = exp(-x/2) * L_m(x) are the Laguerre functions (L_m the Laguerre
polynomial).  With this normalization the pair is exact:

    f(t) = eta * sum_m coeffs[m] * l_m(eta*t),

since integral_0^inf l_m(eta*t) l_n(eta*t) dt = delta_mn / eta.

Time derivatives act triangularly on the coefficients: the coefficients of
f'(t) are (eta/2)*coeffs + phi1(coeffs) and of f''(t) are
(eta**2/4)*coeffs + phi2(coeffs), valid for signals with f(0) = f'(0) = 0 and
decay at infinity.  phi1/phi2 are prefix sums, computed in O(M) with
compensated accumulation.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy.fft import next_fast_len


@dataclass(frozen=True)
class LaguerreParams:
    """Expansion parameters: scale eta (1/s), coefficient count, time window (s).

    A series with ``ncoeff`` terms resolves signals on [0, window] only while
    eta*window stays below roughly 4*ncoeff (the basis functions oscillate on
    x in (0, 4m) and decay beyond); a warning is emitted outside that regime.
    """

    eta: float
    ncoeff: int
    window: float

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.ncoeff < 1:
            raise ValueError(f"ncoeff must be >= 1, got {self.ncoeff}")
        if self.window <= 0:
            raise ValueError(f"window must be positive, got {self.window}")
        if self.eta * self.window > 4.0 * self.ncoeff:
            warnings.warn(
                f"eta*window = {self.eta * self.window:.1f} exceeds 4*ncoeff = "
                f"{4 * self.ncoeff}; the series cannot resolve the full window",
                stacklevel=2,
            )


@dataclass
class LaguerreSpectrum:
    """Real Laguerre coefficients of a time signal (units: signal * seconds)."""

    params: LaguerreParams
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (self.params.ncoeff,):
            raise ValueError(
                f"expected {self.params.ncoeff} coefficients, got shape {self.coeffs.shape}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficients must be finite")


def eval_laguerre_functions(x, count: int) -> np.ndarray:
    """Evaluate l_0(x) .. l_{count-1}(x), l_m(x) = exp(-x/2) * L_m(x).

    Uses the three-term recurrence

        l_{m+1}(x) = ((2m + 1 - x) l_m(x) - m l_{m-1}(x)) / (m + 1)

    seeded with l_0 = exp(-x/2), which keeps every intermediate bounded
    (|l_m(x)| <= 1 for x >= 0) instead of evaluating the factorially
    growing polynomials directly.  The seed is carried as a mantissa with a
    separate power-of-two exponent: for x beyond ~1400, exp(-x/2) underflows
    to zero in double precision while mid-order values are O(1), and a plain
    recurrence would lose them all.

    Parameters
    ----------
    x : float or ndarray
        Nonnegative evaluation points.
    count : int
        Number of basis functions.

    Returns
    -------
    ndarray of shape (count,) + shape(x).
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    if count < 1:
        raise ValueError("count must be >= 1")
    shape = x.shape
    x = np.atleast_1d(x).ravel()

    log2e = np.log2(np.e)
    expo = np.rint(-0.5 * x * log2e)
    mant_prev = np.exp2(-0.5 * x * log2e - expo)  # l_0 scaled into [~0.7, 1.5]
    expo = expo.astype(np.int64)

    out = np.empty((count, x.size), dtype=np.float64)
    out[0] = np.ldexp(mant_prev, expo)
    if count > 1:
        mant = (1.0 - x) * mant_prev
        out[1] = np.ldexp(mant, expo)
        for m in range(1, count - 1):
            mant, mant_prev = ((2 * m + 1 - x) * mant - m * mant_prev) / (m + 1), mant
            big = np.abs(mant) > 2.0**400
            if np.any(big):
                mant[big] = np.ldexp(mant[big], -400)
                mant_prev[big] = np.ldexp(mant_prev[big], -400)
                expo[big] += 400
            out[m + 1] = np.ldexp(mant, expo)
    return out.reshape((count,) + shape)


def synthesize(spec: LaguerreSpectrum, times) -> np.ndarray:
    """Evaluate the truncated series eta * sum_m coeffs[m] * l_m(eta*t)."""
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    basis = eval_laguerre_functions(spec.params.eta * times, spec.params.ncoeff)
    return spec.params.eta * np.tensordot(spec.coeffs, basis, axes=1)


def _kahan_cumsum_exclusive(values: np.ndarray) -> np.ndarray:
    """Exclusive prefix sums (out[m] = sum of values[:m]) with compensation."""
    out = np.empty(len(values), dtype=np.float64)
    total = 0.0
    comp = 0.0
    for m, v in enumerate(values):
        out[m] = total
        y = v - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return out


def phi1_all(coeffs, eta: float) -> np.ndarray:
    """Full first prefix operator: out[m] = eta * sum_{k<m} coeffs[k]."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return eta * _kahan_cumsum_exclusive(coeffs)


def phi2_all(coeffs, eta: float) -> np.ndarray:
    """Full second prefix operator: out[m] = eta^2 * sum_{k<m} (m-k) coeffs[k].

    Computed as eta^2 * (m * S0[m] - S1[m]) with S0[m] = sum_{k<m} coeffs[k]
    and S1[m] = sum_{k<m} k*coeffs[k]: two compensated prefix-sum passes, O(M).
    The splitting matters because errors in low-index coefficients are
    amplified by the factor (m - k).
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    m = np.arange(len(coeffs), dtype=np.float64)
    s0 = _kahan_cumsum_exclusive(coeffs)
    s1 = _kahan_cumsum_exclusive(m * coeffs)
    return eta * eta * (m * s0 - s1)


def phi1(coeffs, m: int, eta: float) -> float:
    """Single entry of the first prefix operator: eta * sum_{k<m} coeffs[k]."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if not 0 <= m <= len(coeffs):
        raise IndexError(f"m = {m} out of range for {len(coeffs)} coefficients")
    return eta * math.fsum(coeffs[:m])


def phi2(coeffs, m: int, eta: float) -> float:
    """Single entry of the second prefix operator: eta^2 * sum_{k<m} (m-k) coeffs[k]."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if not 0 <= m <= len(coeffs):
        raise IndexError(f"m = {m} out of range for {len(coeffs)} coefficients")
    k = np.arange(min(m, len(coeffs)), dtype=np.float64)
    return eta * eta * math.fsum((m - k) * coeffs[:m])


def laguerre_convolve(a, b) -> np.ndarray:
    """Linear convolution of two real sequences, truncated to len(a) terms.

    Zero-padded FFT, O(M log M); agrees with the direct double sum to
    round-off.  This is the workhorse behind the time-shift operator and the
    pointwise transport solution, where ``b`` holds sampled basis values.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = len(a)
    size = next_fast_len(len(a) + len(b) - 1)
    fa = np.fft.rfft(a, size)
    fb = np.fft.rfft(b, size)
    return np.fft.irfft(fa * fb, size)[:n]


def laguerre_correlate(a, kernel) -> np.ndarray:
    """out[j] = sum_m a[m] * kernel[m + j] for j = 0..len(a)-1.

    ``kernel`` must extend to index len(a) + len(a) - 2 or shorter entries are
    treated as zero.  Used by the conjugation operator, where the kernel holds
    basis values up to order 2M-2.
    """
    a = np.asarray(a, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    n = len(a)
    full = laguerre_convolve_full(a[::-1], kernel)
    out = np.zeros(n, dtype=np.float64)
    avail = min(n, len(full) - (n - 1))
    out[:avail] = full[n - 1 : n - 1 + avail]
    return out


def laguerre_convolve_full(a, b) -> np.ndarray:
    """Full linear convolution (length len(a)+len(b)-1) via zero-padded FFT."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    size = next_fast_len(len(a) + len(b) - 1)
    fa = np.fft.rfft(a, size)
    fb = np.fft.rfft(b, size)
    return np.fft.irfft(fa * fb, size)[: len(a) + len(b) - 1]
