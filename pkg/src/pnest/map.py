"""
Soft-input MAP estimation of a block of phase-noise samples.

The log-posterior (up to a constant) is::

    l(theta) = sum_k (2 / s2_k) Re{y_k conj(s_k) exp(-j theta_k)} - theta^T C^-1 theta / 2

with ``s2_k`` the effective noise variance of sample ``k``. It is maximized by
Newton-Raphson started from a linear interpolation of per-pilot ML phases.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, NoPilots, SingularHessian, SingularMatrix
from .increments import PriorCovariance
from .signal import ObservationBlock

MAX_HALVINGS = 20


class StepDamping(str, enum.Enum):
    NONE = "none"
    BACKTRACKING = "backtracking"


@dataclass(frozen=True)
class MapOptions:
    gradient_tolerance: float = 1e-6
    max_iterations: int = 50
    step_damping: StepDamping = StepDamping.BACKTRACKING

    def __post_init__(self):
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class EstimateResult:
    phases: np.ndarray
    error_variances: np.ndarray
    iterations_used: int
    converged: bool
    final_gradient_norm: float
    log_posterior_trace: tuple[float, ...] = ()


def _check(phases, obs: ObservationBlock, prior: PriorCovariance) -> np.ndarray:
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (prior.dim,) or len(obs) != prior.dim:
        raise DimensionMismatch(
            f"phases {phases.shape}, block {len(obs)} and prior {prior.dim} disagree"
        )
    return phases


def _correlation(phases, obs):
    """``y_k conj(s_k) exp(-j theta_k)`` and the per-sample weight ``2 / s2_k``."""
    z = obs.received * np.conj(obs.soft_symbols) * np.exp(-1j * phases)
    return z, 2.0 / obs.effective_noise


def log_posterior(phases, obs: ObservationBlock, prior: PriorCovariance) -> float:
    phases = _check(phases, obs, prior)
    z, weight = _correlation(phases, obs)
    return float(weight @ z.real - 0.5 * prior.quadratic_form(phases))


def gradient(phases, obs: ObservationBlock, prior: PriorCovariance) -> np.ndarray:
    phases = _check(phases, obs, prior)
    z, weight = _correlation(phases, obs)
    return weight * z.imag - prior.apply_inverse(phases)


def hessian(phases, obs: ObservationBlock, prior: PriorCovariance) -> np.ndarray:
    phases = _check(phases, obs, prior)
    z, weight = _correlation(phases, obs)
    h = -prior.precision.copy()
    h[np.diag_indices_from(h)] -= weight * z.real
    return h


UNWRAP_HALF_WINDOW = 2


def pilot_ml_phases(obs: ObservationBlock) -> tuple[np.ndarray, np.ndarray]:
    """Pilot positions and their unwrapped ML phases ``arg(y conj(s))``.

    Each raw phase is moved to the 2*pi branch closest to a reference: the
    unwrapped angle of the sum of ``y conj(s)`` over the neighbouring
    ``2 * UNWRAP_HALF_WINDOW + 1`` pilots. A single noisy pilot then stays a
    local outlier instead of shifting every later pilot by 2*pi.
    """
    idx = np.flatnonzero(obs.pilot_mask)
    if idx.size == 0:
        raise NoPilots("at least one pilot symbol is required")
    z = obs.received[idx] * np.conj(obs.soft_symbols[idx])
    phases = np.angle(z)
    if idx.size > 1:
        csum = np.concatenate(([0.0], np.cumsum(z)))
        pos = np.arange(idx.size)
        lo = np.maximum(pos - UNWRAP_HALF_WINDOW, 0)
        hi = np.minimum(pos + UNWRAP_HALF_WINDOW + 1, idx.size)
        reference = np.unwrap(np.angle(csum[hi] - csum[lo]))
        phases = phases + 2.0 * np.pi * np.round((reference - phases) / (2.0 * np.pi))
    return idx, phases


def ml_pilot_init(obs: ObservationBlock) -> np.ndarray:
    """Linear interpolation of the unwrapped per-pilot ML phases.

    Outside the first/last pilot the estimate is held constant.
    """
    idx, pilot_phase = pilot_ml_phases(obs)
    if idx.size == 1:
        return np.full(len(obs), pilot_phase[0])
    return np.interp(np.arange(len(obs)), idx, pilot_phase)


def _newton_step(curvature_diag, precision, grad):
    """Solve ``(-H) step = g``; fall back to clipped curvature where -H is indefinite."""
    neg_h = precision.copy()
    neg_h[np.diag_indices_from(neg_h)] += curvature_diag
    try:
        return sla.cho_solve(sla.cho_factor(neg_h, lower=True), grad)
    except np.linalg.LinAlgError:
        pass
    # Away from the concave region: keep an ascent direction.
    neg_h = precision.copy()
    neg_h[np.diag_indices_from(neg_h)] += np.maximum(curvature_diag, 0.0)
    try:
        return sla.cho_solve(sla.cho_factor(neg_h, lower=True), grad)
    except np.linalg.LinAlgError:
        raise SingularHessian("Newton system could not be solved") from None


def _newton(theta, obs, prior, opts):
    """Damped Newton ascent from ``theta``.

    Returns ``(theta, ell, iterations, converged, grad_norm, trace)``; when not
    converged ``theta`` is the best iterate seen.
    """
    precision = prior.precision
    backtrack = StepDamping(opts.step_damping) is StepDamping.BACKTRACKING
    ell = log_posterior(theta, obs, prior)
    best_theta, best_ell = theta, ell
    trace = [ell]
    iterations = 0
    converged = False
    while True:
        z, weight = _correlation(theta, obs)
        grad = weight * z.imag - prior.apply_inverse(theta)
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm < opts.gradient_tolerance:
            converged = True
            break
        if iterations >= opts.max_iterations:
            break
        step = _newton_step(weight * z.real, precision, grad)
        candidate = theta + step
        cand_ell = log_posterior(candidate, obs, prior)
        if backtrack:
            slack = 1e-12 * (1.0 + abs(ell))
            halvings = 0
            while cand_ell < ell - slack and halvings < MAX_HALVINGS:
                step = 0.5 * step
                candidate = theta + step
                cand_ell = log_posterior(candidate, obs, prior)
                halvings += 1
            if cand_ell < ell - slack:
                iterations += 1
                break
        theta, ell = candidate, cand_ell
        trace.append(ell)
        iterations += 1
        if ell >= best_ell:
            best_theta, best_ell = theta, ell

    if not converged:
        theta, ell = best_theta, best_ell
        grad_norm = float(np.max(np.abs(gradient(theta, obs, prior))))
    return theta, ell, iterations, converged, grad_norm, trace


def estimate_map(
    obs: ObservationBlock,
    prior: PriorCovariance,
    options: MapOptions | None = None,
    reference_phases=None,
) -> EstimateResult:
    """Newton-Raphson maximization of the log-posterior from :func:`ml_pilot_init`.

    Stops when ``max|g| < gradient_tolerance``. When the iteration budget runs
    out the best iterate seen is returned with ``converged=False``.

    Parameters
    ----------
    reference_phases
        Optional known point, typically the estimate of the previous detection
        iteration. If Newton from the pilot initialization ends at a lower
        log-posterior than this point it has stopped in an inferior local
        maximum, and the iteration is restarted from ``reference_phases``.
        ``iterations_used`` then counts both runs.
    """
    opts = options or MapOptions()
    start = _check(ml_pilot_init(obs), obs, prior)
    theta, ell, iterations, converged, grad_norm, trace = _newton(start, obs, prior, opts)

    if reference_phases is not None:
        ref = _check(reference_phases, obs, prior).copy()
        ref_ell = log_posterior(ref, obs, prior)
        if ref_ell > ell + 1e-12 * (1.0 + abs(ell)):
            theta2, ell2, it2, conv2, norm2, trace2 = _newton(ref, obs, prior, opts)
            iterations += it2
            trace += trace2
            if ell2 >= ell:
                theta, ell, converged, grad_norm = theta2, ell2, conv2, norm2

    return EstimateResult(
        phases=theta,
        error_variances=soft_bcrb(obs, prior),
        iterations_used=iterations,
        converged=converged,
        final_gradient_norm=grad_norm,
        log_posterior_trace=tuple(trace),
    )


def soft_information(obs: ObservationBlock, prior: PriorCovariance) -> np.ndarray:
    """``-H~ = 2 diag(|s_k|^2 / s2_k) + C^-1``, the deterministic curvature."""
    info = prior.precision.copy()
    info[np.diag_indices_from(info)] += 2.0 * np.abs(obs.soft_symbols) ** 2 / obs.effective_noise
    return info


def soft_bcrb(obs: ObservationBlock, prior: PriorCovariance) -> np.ndarray:
    """Diagonal of ``(2 diag(|s_k|^2 / s2_k) + C^-1)^-1``: per-sample phase MSE bound."""
    if len(obs) != prior.dim:
        raise DimensionMismatch("block and prior dimensions disagree")
    try:
        lower = sla.cholesky(soft_information(obs, prior), lower=True)
    except np.linalg.LinAlgError:
        raise SingularMatrix("Bayesian information matrix is not positive definite") from None
    inv_lower = sla.solve_triangular(lower, np.eye(prior.dim), lower=True)
    return np.sum(inv_lower**2, axis=0)


def error_covariance_check(
    obs: ObservationBlock,
    prior: PriorCovariance,
    true_phases=None,
    n_trials: int = 100_000,
    seed=None,
    batch: int = 20_000,
):
    """Monte-Carlo ``E[g(theta) g(theta)^T]`` at the true phases versus ``-H~``.

    The gradient at the true phases is ``2 Im{conj(s_k) w_k} / s2_k - C^-1 theta``
    with ``w_k ~ CN(0, s2_k)``. When ``true_phases`` is given it is held fixed
    and only the noise is redrawn; when ``None`` the phases are drawn from the
    prior as well, which is the average over which ``E[g] = 0`` holds.

    Returns
    -------
    empirical, predicted : ndarray, shape (K, K)
    """
    rng = np.random.default_rng(seed)
    k = prior.dim
    s = obs.soft_symbols
    s2 = obs.effective_noise
    if true_phases is not None:
        fixed_prior_term = prior.apply_inverse(np.asarray(true_phases, dtype=float))
    else:
        prior_lower = sla.cholesky(prior.entries, lower=True)
    acc = np.zeros((k, k))
    remaining = int(n_trials)
    while remaining > 0:
        n = min(batch, remaining)
        w = np.sqrt(s2 / 2.0) * (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))
        g = 2.0 * np.imag(np.conj(s) * w) / s2
        if true_phases is not None:
            g -= fixed_prior_term
        else:
            theta = prior_lower @ rng.standard_normal((k, n))
            g -= prior.apply_inverse(theta).T
        acc += g.T @ g
        remaining -= n
    return acc / n_trials, soft_information(obs, prior)
