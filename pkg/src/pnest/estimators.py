"""Estimator adapters with a common ``obs -> PhaseEstimate`` call signature."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .baselines import DctOptions, dct_estimate, white_eks
from .detection import PhaseEstimate
from .increments import PhaseIncrementModel, PriorCovariance, fit_ar
from .kalman import AugmentedStateModel, build_augmented_model, eks_smooth
from .map import MapOptions, estimate_map
from .signal import ObservationBlock


@dataclass(frozen=True)
class MapEstimator:
    prior: PriorCovariance
    options: MapOptions = MapOptions()
    name: str = "map"

    def __call__(self, obs: ObservationBlock, previous=None) -> PhaseEstimate:
        res = estimate_map(obs, self.prior, self.options, reference_phases=previous)
        return PhaseEstimate(res.phases, res.iterations_used, res.converged)


@dataclass(frozen=True)
class ModifiedEks:
    model: AugmentedStateModel
    theta1_variance: float
    name: str = "eks"

    @classmethod
    def fitted(cls, increments: PhaseIncrementModel, order: int, theta1_variance: float):
        coeffs, innovation = fit_ar(increments, order)
        return cls(build_augmented_model(coeffs, innovation), theta1_variance, f"eks_p{order}")

    def __call__(self, obs: ObservationBlock, previous=None) -> PhaseEstimate:
        return PhaseEstimate(eks_smooth(obs, self.model, self.theta1_variance).phases)


@dataclass(frozen=True)
class WhiteEks:
    increment_variance: float
    theta1_variance: float
    name: str = "white_eks"

    def __call__(self, obs: ObservationBlock, previous=None) -> PhaseEstimate:
        return PhaseEstimate(white_eks(obs, self.increment_variance, self.theta1_variance).phases)


@dataclass(frozen=True)
class DctEstimator:
    options: DctOptions = DctOptions()
    name: str = "dct"

    def __call__(self, obs: ObservationBlock, previous=None) -> PhaseEstimate:
        return PhaseEstimate(dct_estimate(obs, self.options))


@dataclass(frozen=True)
class ZeroEstimator:
    """No phase correction at all; only useful as an AWGN reference."""

    name: str = "zero"

    def __call__(self, obs: ObservationBlock, previous=None) -> PhaseEstimate:
        return PhaseEstimate(np.zeros(len(obs)))


_EKS_SPEC = re.compile(r"^eks(?::|_p)(\d+)$")
ESTIMATOR_NAMES = ("map", "eks:<p>", "white_eks", "dct", "zero")


def parse_estimator_spec(spec: str) -> tuple[str, int | None]:
    """``'eks:3'`` -> ``('eks', 3)``; plain names map to ``(name, None)``."""
    spec = spec.strip().lower()
    m = _EKS_SPEC.match(spec)
    if m:
        order = int(m.group(1))
        if not 1 <= order <= 10:
            raise ValueError(f"EKS AR order must lie in 1..10, got {order}")
        return "eks", order
    if spec in ("map", "white_eks", "dct", "zero"):
        return spec, None
    raise ValueError(f"unknown estimator {spec!r}; expected one of {', '.join(ESTIMATOR_NAMES)}")


def estimator_label(spec: str) -> str:
    name, order = parse_estimator_spec(spec)
    return f"eks_p{order}" if name == "eks" else name


def make_estimator(
    spec: str,
    increments: PhaseIncrementModel,
    prior: PriorCovariance,
    map_options: MapOptions | None = None,
    dct_options: DctOptions | None = None,
):
    name, order = parse_estimator_spec(spec)
    if name == "map":
        return MapEstimator(prior, map_options or MapOptions())
    if name == "eks":
        return ModifiedEks.fitted(increments, order, prior.theta1_variance)
    if name == "white_eks":
        return WhiteEks(increments.variance, prior.theta1_variance)
    if name == "dct":
        return DctEstimator(dct_options or DctOptions())
    return ZeroEstimator()
