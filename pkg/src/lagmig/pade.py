"""Rational expansion of sqrt(1 - X) used to localize the one-way operator.

X stands for the squared ratio of horizontal to total slowness; X = 0 is
vertical propagation, X -> 1 grazing incidence, X > 1 evanescent.  Each term
of the expansion becomes one implicit depth sub-step, so the term count n
trades accuracy at wide angles against solver work.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PadeExpansion:
    """sqrt(1 - X) ~ 1 - sum_s beta[s] * X / (1 - gamma[s] * X), real coefficients."""

    nterms: int
    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        if self.nterms < 1:
            raise ValueError("nterms must be >= 1")
        if len(self.gamma) != self.nterms or len(self.beta) != self.nterms:
            raise ValueError("coefficient arrays must have nterms entries")
        if np.any(self.gamma <= 0) or np.any(self.gamma >= 1):
            raise ValueError("gamma coefficients must lie in (0, 1)")
        if np.any(self.beta <= 0) or np.any(self.beta > 1):
            raise ValueError("beta coefficients must lie in (0, 1]")

    def poles(self) -> np.ndarray:
        """Pole locations X = 1/gamma_s, all beyond the propagating regime X < 1."""
        return 1.0 / self.gamma

    def evaluate(self, x) -> np.ndarray:
        """Evaluate the rational approximation of sqrt(1 - X) on a grid."""
        x = np.asarray(x, dtype=np.float64)
        acc = np.ones_like(x)
        for g, b in zip(self.gamma, self.beta):
            acc = acc - b * x / (1.0 - g * x)
        return acc


def square_root_expansion(nterms: int) -> PadeExpansion:
    """Closed-form real coefficient family.

    beta_s = 2/(2n+1) * sin^2(s*pi/(2n+1)),  gamma_s = cos^2(s*pi/(2n+1)).

    This is the diagonal rational approximant of sqrt(1 - X): it matches the
    Taylor series through X^(2n) and keeps all poles 1/gamma_s in X > 1.
    Deterministic and reproducible, unlike least-squares-fitted families.
    """
    if nterms < 1:
        raise ValueError("nterms must be >= 1")
    s = np.arange(1, nterms + 1, dtype=np.float64)
    angle = s * np.pi / (2 * nterms + 1)
    beta = 2.0 / (2 * nterms + 1) * np.sin(angle) ** 2
    gamma = np.cos(angle) ** 2
    return PadeExpansion(nterms, gamma, beta)


def dispersion_error(expansion: PadeExpansion, x_grid) -> np.ndarray:
    """Pointwise sqrt(1 - X) minus the rational approximation.

    Grid points at a pole of the expansion are rejected; the caller can get
    the pole locations from ``expansion.poles()``.
    """
    x = np.asarray(x_grid, dtype=np.float64)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("dispersion diagnostic is defined on X in [0, 1]")
    for pole in expansion.poles():
        if np.any(np.abs(x - pole) < 1e-12 * max(pole, 1.0)):
            raise ValueError(f"grid touches pole at X = {pole}")
    return np.sqrt(1.0 - x) - expansion.evaluate(x)
