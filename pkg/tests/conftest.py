import numpy as np


def ricker(f0, delay, n, dt):
    t = np.arange(n) * dt
    a = (np.pi * f0 * (t - delay)) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


def xcorr_lag(a, b):
    """Integer sample lag maximizing the crosscorrelation of a against b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    full = np.correlate(a, b, mode="full")
    return int(np.argmax(full)) - (len(b) - 1)
