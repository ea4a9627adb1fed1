"""CSV and plot-data writers for simulation results."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

from .harness import ResultRow

CSV_HEADER = ("experiment", "estimator", "snr_db", "metric", "value", "n_trials", "seed")


def _fmt(value: float) -> str:
    # repr() is the shortest string that round-trips a float exactly.
    return repr(float(value))


def emit_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow(
                (r.experiment, r.estimator, _fmt(r.snr_db), r.metric, _fmt(r.value), r.n_trials, r.seed)
            )


def read_csv(path) -> list[ResultRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [
            ResultRow(exp, est, float(snr), metric, float(value), int(n), int(seed))
            for exp, est, snr, metric, value, n, seed in reader
        ]


def emit_plot_data(rows, directory) -> list[Path]:
    """One whitespace-separated ``snr_db value`` file per (experiment, estimator, metric)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    series = defaultdict(list)
    for r in rows:
        series[(r.experiment, r.estimator, r.metric)].append((r.snr_db, r.value))
    written = []
    for (exp, est, metric), points in sorted(series.items()):
        path = directory / f"{exp}_{est}_{metric}.dat"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# snr_db {metric}\n")
            for snr, value in sorted(points):
                fh.write(f"{_fmt(snr)} {_fmt(value)}\n")
        written.append(path)
    return written


def emit_profiles(profiles, directory) -> list[Path]:
    """Per-sample MAP MSE and BCRB for each SNR, ``index mse bcrb`` per line."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for snr, (mse, bcrb) in sorted(profiles.items()):
        path = directory / f"profile_snr{_fmt(snr)}.dat"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# index mse_rad2 bcrb_rad2\n")
            for k, (m, b) in enumerate(zip(mse, bcrb), start=1):
                fh.write(f"{k} {_fmt(m)} {_fmt(b)}\n")
        written.append(path)
    return written
