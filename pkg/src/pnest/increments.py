"""
Phase-increment models, the phase-noise prior covariance and trajectory sampling.

The phase noise is a random walk ``theta[k] = theta[k-1] + zeta[k-1]`` whose
increments ``zeta`` form a stationary zero-mean Gaussian process with
autocorrelation ``R(l)``. Three increment models are supported:

white
    ``R(0) = variance`` and zero elsewhere (the discrete Wiener model).
autoregressive
    ``zeta[k] = sum_i alpha[i] zeta[k-i] + delta[k]`` with white ``delta`` of
    variance ``innovation_variance``.
tabulated
    ``R(l)`` read from a table, extended beyond the last lag by a tail rule.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import InvalidModel, NotPositiveDefinite, SingularAutocorrelation

# Tolerance for the PSD check of Toeplitz(R), relative to R(0).
PSD_TOLERANCE = 1e-12

DEFAULT_THETA1_VARIANCE = 1e4
REFERENCE_INCREMENT_VARIANCE = 1e-3
REFERENCE_ALPHA = 0.9


class IncrementKind(str, enum.Enum):
    WHITE = "white"
    AUTOREGRESSIVE = "ar"
    TABULATED = "table"


class TailRule(str, enum.Enum):
    ZERO_BEYOND_TABLE = "zero"
    GEOMETRIC_DECAY = "geometric"


def _ar_is_stationary(coeffs: Sequence[float]) -> bool:
    if len(coeffs) == 0:
        return True
    roots = np.roots(np.concatenate(([1.0], -np.asarray(coeffs, dtype=float))))
    return bool(np.all(np.abs(roots) < 1.0))


def _ar_autocorrelation_head(coeffs: np.ndarray, innovation_variance: float) -> np.ndarray:
    """R(0..p) of an AR(p) process from the Yule-Walker equations.

    Solves the (p+1) linear equations
    ``R(l) - sum_i alpha_i R(|l-i|) = innovation_variance * [l == 0]`` directly,
    which keeps it independent of the Levinson-Durbin recursion in :func:`fit_ar`.
    """
    p = len(coeffs)
    a = np.zeros((p + 1, p + 1))
    for lag in range(p + 1):
        a[lag, lag] += 1.0
        for i, alpha in enumerate(coeffs, start=1):
            a[lag, abs(lag - i)] -= alpha
    rhs = np.zeros(p + 1)
    rhs[0] = innovation_variance
    return np.linalg.solve(a, rhs)


@dataclass(frozen=True)
class PhaseIncrementModel:
    """Autocorrelation model of the phase increments.

    Build instances with :meth:`white`, :meth:`autoregressive`, :meth:`ar1`,
    :meth:`tabulated` or :meth:`from_file` rather than the raw constructor.
    """

    kind: IncrementKind
    variance: float
    ar_coeffs: tuple[float, ...] = ()
    innovation_variance: float | None = None
    table: tuple[float, ...] = ()
    tail_rule: TailRule = TailRule.ZERO_BEYOND_TABLE
    _head: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.variance) or self.variance <= 0:
            raise InvalidModel(f"increment variance must be positive, got {self.variance}")
        if self.kind is IncrementKind.AUTOREGRESSIVE:
            if self.innovation_variance is None or self.innovation_variance < 0:
                raise InvalidModel("AR model needs a non-negative innovation variance")
            if not _ar_is_stationary(self.ar_coeffs):
                raise InvalidModel(f"AR coefficients {self.ar_coeffs} are not stationary")
        if self.kind is IncrementKind.TABULATED:
            if len(self.table) == 0 or self.table[0] != self.variance:
                raise InvalidModel("table must start with R(0) equal to the variance")

    @classmethod
    def white(cls, variance: float) -> "PhaseIncrementModel":
        return cls(IncrementKind.WHITE, float(variance))

    @classmethod
    def autoregressive(
        cls, ar_coeffs: Iterable[float], innovation_variance: float
    ) -> "PhaseIncrementModel":
        coeffs = tuple(float(a) for a in ar_coeffs)
        if not _ar_is_stationary(coeffs):
            raise InvalidModel(f"AR coefficients {coeffs} are not stationary")
        if innovation_variance <= 0:
            raise InvalidModel("AR innovation variance must be positive")
        head = _ar_autocorrelation_head(np.array(coeffs), float(innovation_variance))
        return cls(
            IncrementKind.AUTOREGRESSIVE,
            float(head[0]),
            ar_coeffs=coeffs,
            innovation_variance=float(innovation_variance),
            _head=tuple(head),
        )

    @classmethod
    def ar1(
        cls, variance: float = REFERENCE_INCREMENT_VARIANCE, alpha: float = REFERENCE_ALPHA
    ) -> "PhaseIncrementModel":
        """AR(1) increments with a prescribed total variance ``R(0)``."""
        return cls.autoregressive([alpha], variance * (1.0 - alpha**2))

    @classmethod
    def tabulated(
        cls, values: Iterable[float], tail_rule: TailRule | str = TailRule.ZERO_BEYOND_TABLE
    ) -> "PhaseIncrementModel":
        table = tuple(float(v) for v in values)
        if not table:
            raise InvalidModel("empty autocorrelation table")
        return cls(IncrementKind.TABULATED, table[0], table=table, tail_rule=TailRule(tail_rule))

    @classmethod
    def from_file(
        cls, path: str | Path, tail_rule: TailRule | str = TailRule.ZERO_BEYOND_TABLE
    ) -> "PhaseIncrementModel":
        """Load a tabulated model: one ``lag value`` pair per line, ``#`` comments."""
        return cls.tabulated(load_table(path), tail_rule)

    def autocorrelation(self, n_lags: int) -> np.ndarray:
        """Return ``R(0), ..., R(n_lags - 1)``."""
        return _autocorrelation_sequence(self, int(n_lags)).copy()

    def check_positive_semidefinite(self, n: int) -> None:
        """Raise :class:`NotPositiveDefinite` unless Toeplitz(R(0..n-1)) is PSD."""
        if n < 1:
            return
        eig_min = np.linalg.eigvalsh(sla.toeplitz(self.autocorrelation(n)))[0]
        if eig_min < -PSD_TOLERANCE * self.variance:
            raise NotPositiveDefinite(
                f"autocorrelation is not positive semidefinite at length {n} "
                f"(smallest eigenvalue {eig_min:.3e})"
            )


@functools.lru_cache(maxsize=256)
def _autocorrelation_sequence(model: PhaseIncrementModel, n: int) -> np.ndarray:
    r = np.zeros(max(n, 0))
    if n <= 0:
        return r
    if model.kind is IncrementKind.WHITE:
        r[0] = model.variance
    elif model.kind is IncrementKind.AUTOREGRESSIVE:
        head = np.asarray(model._head)
        p = len(model.ar_coeffs)
        m = min(n, p + 1)
        r[:m] = head[:m]
        for lag in range(p + 1, n):
            r[lag] = sum(a * r[lag - i] for i, a in enumerate(model.ar_coeffs, start=1))
    else:
        table = np.asarray(model.table)
        m = min(n, len(table))
        r[:m] = table[:m]
        if n > len(table) and model.tail_rule is TailRule.GEOMETRIC_DECAY and len(table) >= 2:
            last, prev = table[-1], table[-2]
            ratio = last / prev if prev != 0 else 0.0
            if abs(ratio) < 1.0:
                steps = np.arange(1, n - len(table) + 1)
                r[len(table):] = last * ratio**steps
    r.setflags(write=False)
    return r


def autocorrelation(model: PhaseIncrementModel, lag: int) -> float:
    """``R(lag)`` with the symmetric extension ``R(-l) = R(l)``."""
    lag = abs(int(lag))
    return float(_autocorrelation_sequence(model, lag + 1)[lag])


def load_table(path: str | Path) -> list[float]:
    values: dict[int, float] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidModel(f"{path}:{lineno}: expected 'lag value', got {raw!r}")
        try:
            lag, value = int(parts[0]), float(parts[1])
        except ValueError as exc:
            raise InvalidModel(f"{path}:{lineno}: {exc}") from None
        if lag != len(values):
            raise InvalidModel(f"{path}:{lineno}: lags must be consecutive from 0, got {lag}")
        values[lag] = value
    if not values:
        raise InvalidModel(f"{path}: no autocorrelation entries")
    return [values[i] for i in range(len(values))]


# ---------------------------------------------------------------------------
# Prior covariance


def _cholesky(matrix: np.ndarray, what: str) -> np.ndarray:
    try:
        return sla.cholesky(matrix, lower=True)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(f"{what} is not positive definite") from None


@functools.lru_cache(maxsize=64)
def _increment_cholesky(model: PhaseIncrementModel, n: int) -> np.ndarray:
    model.check_positive_semidefinite(n)
    factor = _cholesky(sla.toeplitz(model.autocorrelation(n)), "increment covariance")
    factor.setflags(write=False)
    return factor


class PriorCovariance:
    """Gaussian prior ``N(0, C)`` of a block of ``K`` phase samples.

    ``entries`` holds ``C`` itself. Products with ``C^-1`` go through the
    increment representation ``theta = theta1 * 1 + cumsum(zeta)``: with ``D``
    the first-difference operator, ``C^-1 = D^T blockdiag(1/s1, T^-1) D`` where
    ``T`` is the Toeplitz increment covariance. ``T`` is far better
    conditioned than ``C`` once ``s1 = theta1_variance`` is large.
    """

    def __init__(self, entries, theta1_variance, increment_factor):
        self.entries = entries
        self.theta1_variance = float(theta1_variance)
        self._increment_factor = increment_factor
        self.precision = self._build_precision()

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def _difference_solve(self, diffs):
        if self._increment_factor is None:
            return diffs
        return sla.cho_solve((self._increment_factor, True), diffs)

    def apply_inverse(self, theta: np.ndarray) -> np.ndarray:
        """``C^-1 @ theta``; ``theta`` may be ``(K,)`` or ``(K, n)``."""
        theta = np.asarray(theta, dtype=float)
        v = np.empty_like(theta)
        v[0] = theta[0] / self.theta1_variance
        if self.dim > 1:
            v[1:] = self._difference_solve(np.diff(theta, axis=0))
        out = v.copy()
        out[:-1] -= v[1:]
        return out

    def quadratic_form(self, theta: np.ndarray) -> float:
        """``theta^T C^-1 theta``."""
        theta = np.asarray(theta, dtype=float)
        q = theta[0] ** 2 / self.theta1_variance
        if self.dim > 1:
            d = np.diff(theta)
            q += float(d @ self._difference_solve(d))
        return float(q)

    def _build_precision(self) -> np.ndarray:
        k = self.dim
        lam = np.zeros((k, k))
        lam[0, 0] = 1.0 / self.theta1_variance
        if k > 1:
            lam[1:, 1:] = self._difference_solve(np.eye(k - 1))
        diff = np.eye(k) - np.eye(k, k=-1)
        p = diff.T @ lam @ diff
        return 0.5 * (p + p.T)

    def __repr__(self):
        return f"PriorCovariance(dim={self.dim}, theta1_variance={self.theta1_variance:g})"


def build_prior_covariance(
    model: PhaseIncrementModel, block_length: int, theta1_variance: float = DEFAULT_THETA1_VARIANCE
) -> PriorCovariance:
    """Covariance of ``theta[1..K]`` under the random-walk prior.

    ``C[m, m'] = s1 + sum_{l<m} sum_{l'<m'} R(l - l')`` (1-based), computed as a
    two-dimensional cumulative sum of the increment Toeplitz matrix.
    """
    k = int(block_length)
    if k < 1:
        raise InvalidModel("block length must be at least 1")
    if not theta1_variance > 0:
        raise InvalidModel("theta1_variance must be positive")
    factor = None
    if model.kind is IncrementKind.WHITE:
        # Double sum collapses to (min(m, m') - 1) * R(0).
        lags = np.arange(k)
        entries = float(theta1_variance) + np.minimum.outer(lags, lags) * model.variance
    else:
        entries = np.full((k, k), float(theta1_variance))
        if k > 1:
            toeplitz = sla.toeplitz(model.autocorrelation(k - 1))
            entries[1:, 1:] += np.cumsum(np.cumsum(toeplitz, axis=0), axis=1)
            # the two cumulative sums round differently above and below the diagonal
            entries = 0.5 * (entries + entries.T)
    if k > 1:
        factor = _increment_cholesky(model, k - 1)
    # Symmetric factorization of C itself is the construction-time PD check.
    _cholesky(entries, "prior covariance")
    return PriorCovariance(entries, theta1_variance, factor)


# ---------------------------------------------------------------------------
# Sampling


@dataclass(frozen=True)
class PhaseTrajectory:
    values: np.ndarray

    def __len__(self):
        return len(self.values)


def sample_increments(model: PhaseIncrementModel, n: int, rng: np.random.Generator, size=None):
    """Jointly Gaussian increments with covariance Toeplitz(R), shape ``(n,)`` or ``(size, n)``."""
    if n <= 0:
        return np.zeros((0,) if size is None else (size, 0))
    factor = _increment_cholesky(model, n)
    z = rng.standard_normal(n if size is None else (size, n))
    return z @ factor.T


def sample_trajectory(
    model: PhaseIncrementModel,
    block_length: int,
    theta1_variance: float = DEFAULT_THETA1_VARIANCE,
    seed=None,
) -> PhaseTrajectory:
    """Draw one phase trajectory of length ``block_length``.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`.
    """
    k = int(block_length)
    if k < 1:
        raise InvalidModel("block length must be at least 1")
    rng = np.random.default_rng(seed)
    theta1 = np.sqrt(theta1_variance) * rng.standard_normal()
    zeta = sample_increments(model, k - 1, rng)
    values = theta1 + np.concatenate(([0.0], np.cumsum(zeta)))
    return PhaseTrajectory(values)


# ---------------------------------------------------------------------------
# AR fitting


def fit_ar(model: PhaseIncrementModel, order: int) -> tuple[np.ndarray, float]:
    """Order-``p`` AR approximation of the increments by Levinson-Durbin.

    Returns
    -------
    ar_coeffs : ndarray, shape (p,)
        Predictor coefficients, ``zeta[k] ~ sum_i ar_coeffs[i-1] zeta[k-i]``.
    innovation_variance : float
        One-step prediction-error variance.
    """
    p = int(order)
    if p < 1:
        raise InvalidModel("AR order must be at least 1")
    r = model.autocorrelation(p + 1)
    coeffs, error = levinson_durbin(r, p)
    return coeffs, error


def levinson_durbin(r: np.ndarray, order: int) -> tuple[np.ndarray, float]:
    """Solve the Yule-Walker system for autocorrelation ``r[0..order]``."""
    a = np.zeros(0)
    error = float(r[0])
    if not error > 0:
        raise SingularAutocorrelation("R(0) must be positive")
    for m in range(1, order + 1):
        reflection = (r[m] - a @ r[m - 1:0:-1]) / error
        a = np.concatenate((a - reflection * a[::-1], [reflection]))
        error *= 1.0 - reflection**2
        if not error > 0:
            raise SingularAutocorrelation(
                f"prediction-error variance became non-positive at order {m}"
            )
    return a, float(error)
