"""
Monte-Carlo harness for MSE, MSE-vs-BCRB and SER experiments.

Every trial draws its randomness from ``SeedSequence([master_seed, snr_index,
trial_index])``, so results do not depend on the trial count, the worker count
or the order in which trials finish.
"""

from __future__ import annotations

import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..detection import iterate
from ..errors import PhaseNoiseError
from ..estimators import estimator_label, make_estimator
from ..increments import build_prior_covariance, sample_trajectory
from ..map import soft_bcrb
from ..signal import gray_qam, snr_db_to_noise_variance, transmit, uniform_pilots
from .config import Experiment, ExperimentConfig

log = logging.getLogger(__name__)

METRICS = ("mse_rad2", "bcrb_rad2", "ser", "avg_iterations", "failure_rate")


@dataclass(frozen=True, order=True)
class ResultRow:
    experiment: str
    estimator: str
    snr_db: float
    metric: str
    value: float
    n_trials: int
    seed: int


@dataclass
class _Context:
    cfg: ExperimentConfig
    constellation: object
    pilot_mask: np.ndarray
    increments: object
    prior: object
    estimators: dict


@functools.lru_cache(maxsize=4)
def _context(cfg: ExperimentConfig) -> _Context:
    increments = cfg.increments()
    prior = build_prior_covariance(increments, cfg.block_length, cfg.theta1_variance)
    estimators = {
        estimator_label(spec): make_estimator(
            spec, increments, prior, cfg.map_options(), cfg.dct_options()
        )
        for spec in cfg.estimators
    }
    return _Context(
        cfg,
        gray_qam(cfg.constellation_order),
        uniform_pilots(cfg.block_length, cfg.pilot_density).mask,
        increments,
        prior,
        estimators,
    )


def phase_errors(estimate, truth, wrap: bool = False) -> np.ndarray:
    """Estimation error with the block-common 2*pi ambiguity removed.

    With ``wrap=True`` every sample error is reduced to ``(-pi, pi]`` instead.
    """
    err = np.asarray(estimate) - np.asarray(truth)
    if wrap:
        return np.angle(np.exp(1j * err))
    return err - 2.0 * np.pi * np.round(np.mean(err) / (2.0 * np.pi))


@dataclass
class _TrialRecord:
    sq_err: np.ndarray | None
    symbol_errors: np.ndarray | None
    newton_iterations: np.ndarray | None
    converged: np.ndarray | None
    bcrb: np.ndarray | None = None


def trial_seeds(master_seed: int, snr_index: int, trial_index: int):
    return np.random.SeedSequence([master_seed, snr_index, trial_index]).spawn(3)


def _run_trial(cfg: ExperimentConfig, snr_index: int, trial_index: int) -> dict:
    ctx = _context(cfg)
    k = cfg.block_length
    noise_var = snr_db_to_noise_variance(cfg.snr_grid_db[snr_index])
    traj_seed, sym_seed, noise_seed = trial_seeds(cfg.master_seed, snr_index, trial_index)

    truth = sample_trajectory(ctx.increments, k, cfg.sampling_theta1_variance, traj_seed).values
    sym_idx = np.random.default_rng(sym_seed).integers(0, ctx.constellation.order, size=k)
    symbols = ctx.constellation.points[sym_idx]
    y = transmit(symbols, truth, noise_var, noise_seed)
    mask = ctx.pilot_mask
    pilot_symbols = np.where(mask, symbols, 0.0)
    n_iter = 1 if cfg.data_aided else cfg.n_detection_iterations

    out = {}
    for label, estimator in ctx.estimators.items():
        try:
            loop = iterate(y, mask, pilot_symbols, estimator, n_iter, ctx.constellation, noise_var)
        except PhaseNoiseError as exc:
            log.debug("trial %d snr %d: %s failed: %s", trial_index, snr_index, label, exc)
            out[label] = _TrialRecord(None, None, None, None)
            continue
        errs = phase_errors(loop.phases, truth, cfg.wrap_errors)
        sym_errors = np.array(
            [np.count_nonzero(rec.hard[~mask] != sym_idx[~mask]) for rec in loop.iterations]
        )
        newton = np.array(
            [np.nan if r.newton_iterations is None else r.newton_iterations for r in loop.iterations]
        )
        converged = np.array([r.converged for r in loop.iterations])
        bcrb = None
        if label == "map":
            bcrb = soft_bcrb(loop.iterations[-1].observation, ctx.prior)
        out[label] = _TrialRecord(errs**2, sym_errors, newton, converged, bcrb)
    return out


def _run_chunk(cfg: ExperimentConfig, snr_index: int, start: int, stop: int):
    return snr_index, start, [_run_trial(cfg, snr_index, t) for t in range(start, stop)]


@dataclass
class EstimatorTrials:
    """Per-trial outcomes of one estimator at one SNR (failed trials are NaN)."""

    sq_err: np.ndarray  # (trials, K)
    symbol_errors: np.ndarray  # (trials, detection iterations)
    newton_iterations: np.ndarray  # (trials, detection iterations)
    converged: np.ndarray  # (trials, detection iterations)
    failed: np.ndarray  # (trials,)
    bcrb: np.ndarray | None = None  # (trials, K)

    @property
    def n_trials(self) -> int:
        return len(self.failed)

    @property
    def trial_mse(self) -> np.ndarray:
        return np.mean(self.sq_err[~self.failed], axis=1)

    def mse(self) -> tuple[float, float]:
        """Mean squared error over samples and successful trials, with its standard error."""
        per_trial = self.trial_mse
        if per_trial.size == 0:
            return math.nan, math.nan
        stderr = per_trial.std(ddof=1) / math.sqrt(per_trial.size) if per_trial.size > 1 else math.nan
        return float(per_trial.mean()), float(stderr)

    def ser(self, data_symbols: int, iteration: int = -1) -> tuple[float, float]:
        ok = ~self.failed
        total = data_symbols * np.count_nonzero(ok)
        if total == 0:
            return math.nan, math.nan
        p = float(self.symbol_errors[ok, iteration].sum()) / total
        return p, math.sqrt(max(p * (1 - p), 0.0) / total)

    def mean_bcrb(self) -> float:
        return float(np.mean(self.bcrb[~self.failed]))

    def mean_newton_iterations(self) -> float:
        vals = self.newton_iterations[~self.failed]
        return float(np.mean(vals)) if vals.size else math.nan

    def convergence_rate(self) -> float:
        return float(np.mean(self.converged[~self.failed]))


@dataclass
class SimulationResult:
    config: ExperimentConfig
    data_symbols_per_block: int
    trials: dict = field(default_factory=dict)  # (snr_db, label) -> EstimatorTrials

    def __getitem__(self, key) -> EstimatorTrials:
        return self.trials[key]


def simulate(cfg: ExperimentConfig, parallel: int = 1, chunk_size: int = 25) -> SimulationResult:
    n_trials = cfg.trials
    labels = cfg.estimator_labels()
    mask = uniform_pilots(cfg.block_length, cfg.pilot_density).mask
    n_iter = 1 if cfg.data_aided else cfg.n_detection_iterations
    records = {i: [None] * n_trials for i in range(len(cfg.snr_grid_db))}

    jobs = [
        (cfg, snr_index, start, min(start + chunk_size, n_trials))
        for snr_index in range(len(cfg.snr_grid_db))
        for start in range(0, n_trials, chunk_size)
    ]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            done = list(pool.map(_run_chunk, *zip(*jobs)))
    else:
        done = [_run_chunk(*job) for job in jobs]
    for snr_index, start, chunk in done:
        records[snr_index][start:start + len(chunk)] = chunk

    result = SimulationResult(cfg, int(np.count_nonzero(~mask)))
    k = cfg.block_length
    for snr_index, snr_db in enumerate(cfg.snr_grid_db):
        for label in labels:
            recs = [r[label] for r in records[snr_index]]
            failed = np.array([r.sq_err is None for r in recs])
            sq = np.full((n_trials, k), np.nan)
            sym = np.zeros((n_trials, n_iter), dtype=np.int64)
            newton = np.full((n_trials, n_iter), np.nan)
            conv = np.zeros((n_trials, n_iter), dtype=bool)
            bcrb = np.full((n_trials, k), np.nan) if label == "map" else None
            for t, r in enumerate(recs):
                if r.sq_err is None:
                    continue
                sq[t], sym[t], newton[t], conv[t] = r.sq_err, r.symbol_errors, r.newton_iterations, r.converged
                if bcrb is not None:
                    bcrb[t] = r.bcrb
            result.trials[(snr_db, label)] = EstimatorTrials(sq, sym, newton, conv, failed, bcrb)
    return result


def rows_from_result(result: SimulationResult) -> list[ResultRow]:
    cfg = result.config
    exp = cfg.experiment.value
    n = cfg.trials
    rows = []

    def add(label, snr, metric, value):
        if not math.isnan(value):
            rows.append(ResultRow(exp, label, float(snr), metric, float(value), n, cfg.master_seed))

    for (snr, label), tr in result.trials.items():
        add(label, snr, "failure_rate", float(np.mean(tr.failed)))
        if label == "map":
            add(label, snr, "avg_iterations", tr.mean_newton_iterations())
        if cfg.experiment is Experiment.SER:
            add(label, snr, "ser", tr.ser(result.data_symbols_per_block)[0])
        else:
            add(label, snr, "mse_rad2", tr.mse()[0])
            if tr.bcrb is not None:
                add("bcrb", snr, "bcrb_rad2", tr.mean_bcrb())
    return sorted(rows)


def run(cfg: ExperimentConfig, parallel: int = 1) -> list[ResultRow]:
    """Simulate ``cfg`` and summarize it as sorted result rows."""
    return rows_from_result(simulate(cfg, parallel=parallel))


def bcrb_profiles(result: SimulationResult) -> dict[float, tuple[np.ndarray, np.ndarray]]:
    """Per-sample-index MAP MSE and mean BCRB at each SNR (for MSE-vs-BCRB plots)."""
    out = {}
    for (snr, label), tr in result.trials.items():
        if label == "map":
            ok = ~tr.failed
            out[snr] = (np.mean(tr.sq_err[ok], axis=0), np.mean(tr.bcrb[ok], axis=0))
    return out
