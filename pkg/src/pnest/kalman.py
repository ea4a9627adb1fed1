"""
Extended Kalman smoothing of phase noise with AR-modelled colored increments.

The increments are approximated by an AR(p) process and stacked with the phase
into the state ``x_k = [theta_k, zeta_k, zeta_{k-1}, ..., zeta_{k-p}]``, which
evolves linearly as ``x_k = F x_{k-1} + Delta_{k-1}``. Observations
``y_k = s_k exp(j theta_k) + w_k`` are linearized around the predicted phase and
processed as real 2-vectors with covariance ``(s2_k / 2) I``. A forward
extended Kalman filter is followed by a Rauch-Tung-Striebel backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericalBreakdown, UnstableAr
from .increments import DEFAULT_THETA1_VARIANCE, _ar_is_stationary
from .signal import ObservationBlock

# Smallest eigenvalue tolerated in a state covariance after symmetrization.
PSD_FLOOR = -1e-10


@dataclass(frozen=True)
class AugmentedStateModel:
    order: int
    transition: np.ndarray
    process_noise: np.ndarray
    ar_coeffs: np.ndarray
    innovation_variance: float

    @property
    def state_dim(self) -> int:
        return self.order + 2

    def stationary_increment_covariance(self) -> np.ndarray:
        """Stationary covariance of ``[zeta_k, ..., zeta_{k-p}]`` (discrete Lyapunov)."""
        sub_f = self.transition[1:, 1:]
        sub_q = self.process_noise[1:, 1:]
        cov = sla.solve_discrete_lyapunov(sub_f, sub_q)
        return 0.5 * (cov + cov.T)


def build_augmented_model(ar_coeffs, innovation_variance: float) -> AugmentedStateModel:
    """Transition ``F`` and process noise ``Q`` of the augmented state.

    Row 0 of ``F`` is ``[1, 1, 0, ..., 0]``, row 1 is ``[0, a_1, ..., a_p, 0]`` and
    the remaining rows shift the increment history down by one.
    """
    coeffs = np.atleast_1d(np.asarray(ar_coeffs, dtype=float))
    if not _ar_is_stationary(coeffs):
        raise UnstableAr(f"AR coefficients {coeffs.tolist()} are not stationary")
    if innovation_variance < 0:
        raise UnstableAr("innovation variance must be non-negative")
    p = len(coeffs)
    n = p + 2
    f = np.zeros((n, n))
    f[0, 0] = f[0, 1] = 1.0
    f[1, 1:p + 1] = coeffs
    for row in range(2, n):
        f[row, row - 1] = 1.0
    q = np.zeros((n, n))
    q[1, 1] = innovation_variance
    return AugmentedStateModel(p, f, q, coeffs, float(innovation_variance))


@dataclass(frozen=True)
class SmootherResult:
    phases: np.ndarray
    phase_variances: np.ndarray
    filtered_states: np.ndarray
    smoothed_states: np.ndarray
    filtered_phase_variances: np.ndarray


def _symmetrize(p):
    return 0.5 * (p + p.T)


def _check_covariances(stack, stage):
    """Raise if any covariance in ``stack`` is non-finite or clearly indefinite."""
    if not np.all(np.isfinite(stack)):
        bad = int(np.flatnonzero(~np.isfinite(stack).all(axis=(1, 2)))[0])
        raise NumericalBreakdown(f"non-finite {stage} covariance at step {bad}")
    low = np.linalg.eigvalsh(stack)[:, 0]
    if np.any(low < PSD_FLOOR):
        bad = int(np.flatnonzero(low < PSD_FLOOR)[0])
        raise NumericalBreakdown(
            f"{stage} covariance lost positive semidefiniteness at step {bad}"
        )


def _smoother_gains(f, p_filt, p_pred):
    """RTS gains ``P_f[k] F^T P_p[k+1]^-1`` for all steps at once."""
    cross = f @ p_filt[:-1]
    try:
        return np.transpose(np.linalg.solve(p_pred[1:], cross), (0, 2, 1))
    except np.linalg.LinAlgError:
        pass
    # A singular predicted covariance (e.g. zero innovation variance): use the
    # least-squares solution step by step.
    return np.stack(
        [np.linalg.lstsq(pp, c, rcond=None)[0].T for pp, c in zip(p_pred[1:], cross)]
    )


def eks_smooth(
    obs: ObservationBlock,
    model: AugmentedStateModel,
    theta1_variance: float = DEFAULT_THETA1_VARIANCE,
    initial_phase: float | None = None,
) -> SmootherResult:
    """Soft-input extended Kalman smoother over one block.

    Parameters
    ----------
    initial_phase
        Prior mean of ``theta_1``. Its variance ``theta1_variance`` is large, so
        the value only matters as the first linearization point. Defaults to
        the ML phase of the first pilot (0 when the block has no pilots).
    """
    k_len = len(obs)
    n = model.state_dim
    f, q = model.transition, model.process_noise
    if initial_phase is None:
        pilots = np.flatnonzero(obs.pilot_mask)
        initial_phase = (
            float(np.angle(obs.received[pilots[0]] * np.conj(obs.soft_symbols[pilots[0]])))
            if pilots.size
            else 0.0
        )

    x = np.zeros(n)
    x[0] = initial_phase
    p = np.zeros((n, n))
    p[0, 0] = theta1_variance
    p[1:, 1:] = model.stationary_increment_covariance()

    x_pred = np.empty((k_len, n))
    p_pred = np.empty((k_len, n, n))
    x_filt = np.empty((k_len, n))
    p_filt = np.empty((k_len, n, n))
    meas_var = obs.effective_noise / 2.0

    for k in range(k_len):
        if k > 0:
            x = f @ x
            p = _symmetrize(f @ p @ f.T + q)
        x_pred[k], p_pred[k] = x, p

        s = obs.soft_symbols[k]
        if s != 0:
            predicted = s * np.exp(1j * x[0])
            residual = obs.received[k] - predicted
            # Jacobian of (Re, Im) of s exp(j theta) w.r.t. theta is (-Im, Re).
            h = np.array([-predicted.imag, predicted.real])
            innov = np.array([residual.real, residual.imag])
            # H = h e_0^T and S = P00 h h^T + r I reduce the 2-D update to a
            # rank-one correction along P[:, 0].
            h2 = h @ h
            denom = meas_var[k] + p[0, 0] * h2
            col = p[:, 0].copy()
            x = x + col * (h @ innov) / denom
            p = p - np.outer(col, col) * (h2 / denom)
            # Row/column 0 equal col * r / denom exactly; writing them that way
            # avoids cancellation when P00 is huge (diffuse theta_1 prior).
            p[:, 0] = p[0, :] = col * (meas_var[k] / denom)
            p = _symmetrize(p)
        x_filt[k], p_filt[k] = x, p

    _check_covariances(p_pred, "predicted")
    _check_covariances(p_filt, "filtered")

    x_smooth = x_filt.copy()
    p_smooth = p_filt.copy()
    if k_len > 1:
        gains = _smoother_gains(f, p_filt, p_pred)
        for k in range(k_len - 2, -1, -1):
            gain = gains[k]
            x_smooth[k] = x_filt[k] + gain @ (x_smooth[k + 1] - x_pred[k + 1])
            p_smooth[k] = _symmetrize(
                p_filt[k] + gain @ (p_smooth[k + 1] - p_pred[k + 1]) @ gain.T
            )
        _check_covariances(p_smooth, "smoothed")

    return SmootherResult(
        phases=x_smooth[:, 0].copy(),
        phase_variances=p_smooth[:, 0, 0].copy(),
        filtered_states=x_filt,
        smoothed_states=x_smooth,
        filtered_phase_variances=p_filt[:, 0, 0].copy(),
    )
