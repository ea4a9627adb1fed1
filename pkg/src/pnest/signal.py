"""
Constellations, pilot layouts and the received-signal model.

The receiver sees ``y[k] = s[k] exp(j theta[k]) + w[k]`` with circularly
symmetric complex Gaussian ``w`` of variance ``sigma2``. For estimation each
symbol is replaced by a soft surrogate ``s_hat[k] + eps[k]`` with
``eps ~ CN(0, sigma_eps2[k])``, which folds into an effective noise variance
``sigma2 + sigma_eps2[k]``.

SNR convention: constellations have unit average energy, so
``SNR = 1 / sigma2`` throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentBlock, UnsupportedOrder


def snr_db_to_noise_variance(snr_db: float) -> float:
    return 10.0 ** (-float(snr_db) / 10.0)


@dataclass(frozen=True)
class Constellation:
    points: np.ndarray
    bit_labels: np.ndarray

    @property
    def order(self) -> int:
        return len(self.points)

    def index_of(self, symbols: np.ndarray) -> np.ndarray:
        """Nearest-point index for each symbol."""
        symbols = np.asarray(symbols)
        return np.argmin(np.abs(symbols[..., None] - self.points) ** 2, axis=-1)


def _gray(n: int) -> np.ndarray:
    i = np.arange(n)
    return i ^ (i >> 1)


def gray_qam(order: int) -> Constellation:
    """Square Gray-mapped QAM with unit average energy (M in {4, 16, 64})."""
    if order not in (4, 16, 64):
        raise UnsupportedOrder(f"QAM order {order} not supported (use 4, 16 or 64)")
    side = math.isqrt(order)
    bits = side.bit_length() - 1
    levels = 2 * np.arange(side) - (side - 1)
    gray = _gray(side)
    real, imag = np.meshgrid(levels, levels, indexing="ij")
    points = (real + 1j * imag).ravel().astype(complex)
    labels = ((gray[:, None] << bits) | gray[None, :]).ravel()
    points /= np.sqrt(np.mean(np.abs(points) ** 2))
    return Constellation(points, labels)


@dataclass(frozen=True)
class PilotPattern:
    block_length: int
    pilot_indices: tuple[int, ...]  # 1-based

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.block_length, dtype=bool)
        m[np.asarray(self.pilot_indices, dtype=int) - 1] = True
        return m

    @property
    def density(self) -> float:
        return len(self.pilot_indices) / self.block_length


def uniform_pilots(block_length: int, density: float) -> PilotPattern:
    """Evenly spaced pilots that always include the first and last symbol."""
    k = int(block_length)
    if k < 2:
        raise ValueError("block length must be at least 2")
    if not 0 < density <= 1:
        raise ValueError("pilot density must lie in (0, 1]")
    count = min(k, max(2, math.ceil(density * k - 1e-9)))
    positions = np.round(np.linspace(1, k, count)).astype(int)
    return PilotPattern(k, tuple(int(p) for p in positions))


def random_symbols(constellation: Constellation, n: int, seed=None) -> np.ndarray:
    """Uniformly drawn constellation indices."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, constellation.order, size=n)


def transmit(symbols, trajectory, noise_variance: float, seed=None) -> np.ndarray:
    """Apply phase noise and AWGN: ``y = s exp(j theta) + w``."""
    symbols = np.asarray(symbols, dtype=complex)
    theta = np.asarray(getattr(trajectory, "values", trajectory), dtype=float)
    if symbols.shape != theta.shape:
        raise ValueError("symbols and phase trajectory must have equal length")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(noise_variance / 2.0)
    noise = scale * (rng.standard_normal(symbols.shape) + 1j * rng.standard_normal(symbols.shape))
    return symbols * np.exp(1j * theta) + noise


@dataclass(frozen=True)
class ObservationBlock:
    """One block of received samples with their soft-symbol statistics."""

    received: np.ndarray
    soft_symbols: np.ndarray
    symbol_uncertainty: np.ndarray
    channel_noise_variance: float
    pilot_mask: np.ndarray

    def __post_init__(self):
        k = len(self.received)
        for name in ("soft_symbols", "symbol_uncertainty", "pilot_mask"):
            if len(getattr(self, name)) != k:
                raise InconsistentBlock(f"{name} has length {len(getattr(self, name))}, expected {k}")
        if np.any(self.symbol_uncertainty < 0):
            raise InconsistentBlock("symbol uncertainty must be non-negative")
        if np.any(self.symbol_uncertainty[self.pilot_mask] != 0):
            raise InconsistentBlock("pilot positions must have zero symbol uncertainty")
        if np.any(self.effective_noise <= 0):
            raise InconsistentBlock("effective noise variance must be positive")

    def __len__(self):
        return len(self.received)

    @property
    def effective_noise(self) -> np.ndarray:
        return self.channel_noise_variance + self.symbol_uncertainty

    @property
    def n_pilots(self) -> int:
        return int(np.count_nonzero(self.pilot_mask))


def make_observation(y, soft, sigma_eps, sigma2, pilot_mask) -> ObservationBlock:
    y = np.asarray(y, dtype=complex)
    soft = np.asarray(soft, dtype=complex)
    sigma_eps = np.broadcast_to(np.asarray(sigma_eps, dtype=float), y.shape).copy()
    pilot_mask = np.asarray(pilot_mask, dtype=bool)
    return ObservationBlock(y, soft, sigma_eps, float(sigma2), pilot_mask)


def data_aided_observation(y, symbols, sigma2) -> ObservationBlock:
    """All positions known: soft symbols equal the transmitted ones."""
    y = np.asarray(y, dtype=complex)
    return make_observation(y, symbols, 0.0, sigma2, np.ones(len(y), dtype=bool))
