"""Reference estimators: DCT interpolation of pilot phases and the white-increment EKS."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import TooFewPilots
from .increments import DEFAULT_THETA1_VARIANCE
from .map import pilot_ml_phases
from .kalman import SmootherResult, build_augmented_model, eks_smooth
from .signal import ObservationBlock


@dataclass(frozen=True)
class DctOptions:
    """``retained_coefficients=None`` keeps ``ceil(n_pilots / 2)`` coefficients."""

    retained_coefficients: int | None = None

    def resolve(self, n_pilots: int) -> int:
        r = self.retained_coefficients
        if r is None:
            r = math.ceil(n_pilots / 2)
        if not 1 <= r <= n_pilots:
            raise ValueError(f"retained_coefficients must lie in [1, {n_pilots}], got {r}")
        return r


def dct_estimate(obs: ObservationBlock, options: DctOptions | None = None) -> np.ndarray:
    """Low-pass DCT interpolation of the unwrapped pilot ML phases.

    The pilot phase sequence is transformed with a type-II DCT, truncated to its
    first coefficients, and the truncated cosine series is evaluated at the
    fractional pilot-index position of every symbol in the block.
    """
    opts = options or DctOptions()
    if obs.n_pilots < 2:
        raise TooFewPilots("DCT interpolation needs at least two pilots")
    idx, phases = pilot_ml_phases(obs)
    n = idx.size
    retained = opts.resolve(n)

    coeffs = scipy.fft.dct(phases, type=2)[:retained]
    # Block positions mapped piecewise-linearly onto pilot-index space.
    u = np.interp(np.arange(len(obs)), idx, np.arange(n))
    basis = np.cos(np.pi * np.outer(2.0 * u + 1.0, np.arange(retained)) / (2.0 * n))
    weights = np.full(retained, 1.0 / n)
    weights[0] = 0.5 / n
    return basis @ (weights * coeffs)


def white_eks(
    obs: ObservationBlock,
    increment_variance: float,
    theta1_variance: float = DEFAULT_THETA1_VARIANCE,
) -> SmootherResult:
    """EKS that assumes white (Wiener) increments of the given variance."""
    return eks_smooth(obs, build_augmented_model([0.0], increment_variance), theta1_variance)
