"""
Symbol detection from phase estimates and the iterative estimation/detection loop.

Each data symbol gets a posterior over the constellation given the derotated
sample ``y_k exp(-j theta_k)``; its mean and variance become the soft symbol
``(s_hat_k, sigma_eps2_k)`` fed back to the phase estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .signal import Constellation, ObservationBlock, make_observation


@dataclass(frozen=True)
class SoftDecision:
    mean: complex
    variance: float
    hard: int


@dataclass(frozen=True)
class SoftDecisions:
    """Per-symbol soft decisions, stored column-wise."""

    mean: np.ndarray
    variance: np.ndarray
    hard: np.ndarray
    probabilities: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.mean)

    def __getitem__(self, k) -> SoftDecision:
        return SoftDecision(complex(self.mean[k]), float(self.variance[k]), int(self.hard[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))


def posterior_soft_symbols(
    y,
    phases,
    constellation: Constellation,
    noise_variance: float,
    pilot_mask,
    pilot_symbols,
) -> SoftDecisions:
    """Posterior mean/variance/argmax of each symbol under a uniform prior.

    Data positions use ``p(s | y_k) ~ exp(-|y_k exp(-j theta_k) - s|^2 / sigma2)``.
    Pilot positions return the known symbol with zero variance.
    """
    y = np.asarray(y, dtype=complex)
    phases = np.asarray(phases, dtype=float)
    pilot_mask = np.asarray(pilot_mask, dtype=bool)
    pilot_symbols = np.asarray(pilot_symbols, dtype=complex)
    if not (y.shape == phases.shape == pilot_mask.shape == pilot_symbols.shape):
        raise DimensionMismatch("y, phases, pilot mask and pilot symbols must share a shape")
    points = constellation.points
    derotated = y * np.exp(-1j * phases)
    logits = -np.abs(derotated[:, None] - points[None, :]) ** 2 / noise_variance
    logits -= logits.max(axis=1, keepdims=True)
    prob = np.exp(logits)
    prob /= prob.sum(axis=1, keepdims=True)

    hard = np.argmax(prob, axis=1)
    mean = prob @ points
    variance = np.sum(prob * np.abs(points[None, :] - mean[:, None]) ** 2, axis=1)

    if pilot_mask.any():
        pilot_idx = constellation.index_of(pilot_symbols[pilot_mask])
        prob[pilot_mask] = 0.0
        prob[pilot_mask, pilot_idx] = 1.0
        hard[pilot_mask] = pilot_idx
        mean[pilot_mask] = pilot_symbols[pilot_mask]
        variance[pilot_mask] = 0.0
    return SoftDecisions(mean, variance, hard, prob)


@dataclass(frozen=True)
class PhaseEstimate:
    """What an estimator returns inside the detection loop."""

    phases: np.ndarray
    newton_iterations: int | None = None
    converged: bool = True


@dataclass(frozen=True)
class IterationRecord:
    phases: np.ndarray
    hard: np.ndarray
    observation: ObservationBlock
    newton_iterations: int | None
    converged: bool


@dataclass(frozen=True)
class LoopOutcome:
    phases: np.ndarray
    hard: np.ndarray
    iterations: list[IterationRecord]


def initial_observation(y, pilot_mask, pilot_symbols, noise_variance) -> ObservationBlock:
    """Block before any detection: data positions carry ``s_hat = 0``, ``sigma_eps2 = 1``."""
    pilot_mask = np.asarray(pilot_mask, dtype=bool)
    soft = np.where(pilot_mask, pilot_symbols, 0.0)
    sigma_eps = np.where(pilot_mask, 0.0, 1.0)
    return make_observation(y, soft, sigma_eps, noise_variance, pilot_mask)


def iterate(
    y,
    pilot_mask,
    pilot_symbols,
    estimator,
    n_iterations: int,
    constellation: Constellation,
    noise_variance: float,
) -> LoopOutcome:
    """Alternate phase estimation and soft detection ``n_iterations`` times.

    ``estimator`` is any callable ``estimator(obs, previous=None)`` mapping an
    :class:`ObservationBlock` to a :class:`PhaseEstimate` (see
    :mod:`pnest.estimators`). ``previous`` is the phase estimate of the prior
    iteration (``None`` on the first pass); estimators may use it as a
    starting point or ignore it.
    """
    if n_iterations < 1:
        raise ValueError("n_iterations must be at least 1")
    obs = initial_observation(y, pilot_mask, pilot_symbols, noise_variance)
    records = []
    previous = None
    for _ in range(n_iterations):
        est = estimator(obs, previous=previous)
        previous = est.phases
        soft = posterior_soft_symbols(
            obs.received, est.phases, constellation, noise_variance, obs.pilot_mask, pilot_symbols
        )
        records.append(
            IterationRecord(est.phases, soft.hard, obs, est.newton_iterations, est.converged)
        )
        obs = make_observation(
            obs.received, soft.mean, soft.variance, noise_variance, obs.pilot_mask
        )
    last = records[-1]
    return LoopOutcome(last.phases, last.hard, records)
