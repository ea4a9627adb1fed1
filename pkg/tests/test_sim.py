import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnest.errors import ConfigError
from pnest.sim import cli
from pnest.sim.config import Experiment, load_config, parse_config
from pnest.sim.harness import ResultRow, phase_errors, rows_from_result, run, simulate
from pnest.sim.output import CSV_HEADER, emit_csv, read_csv

SMALL = """
experiment = mse
block_length = 31
pilot_density = 0.21
snr_grid_db = 10, 20
estimators = map, eks:1, white_eks, dct
n_trials = 6
master_seed = 7
"""


def test_defaults():
    cfg = parse_config("")
    assert cfg.experiment is Experiment.MSE
    assert cfg.block_length == 101 and cfg.constellation_order == 16
    assert cfg.trials == 500
    assert cfg.estimator_labels() == ["map", "eks_p1", "white_eks", "dct"]


def test_ser_default_trials_reach_symbol_target():
    cfg = parse_config("experiment = ser\npilot_density = 0.21")
    data = 101 - 22
    assert cfg.trials == math.ceil(2e5 / data)
    assert cfg.trials * data >= 2e5


@pytest.mark.parametrize(
    "text, line, field",
    [
        ("bogus = 1", 1, "bogus"),
        ("\nblock_length = 10\nblock_length = 11", 3, "block_length"),
        ("n_trials = 2.5", 1, "n_trials"),
        ("map_backtracking = maybe", 1, "map_backtracking"),
        ("experiment = fig9", 1, "experiment"),
    ],
)
def test_parse_errors_report_line_and_field(text, line, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line and info.value.field == field
    assert f"line {line}" in str(info.value)


@pytest.mark.parametrize(
    "text, field",
    [
        ("pilot_density = 0", "pilot_density"),
        ("estimators = map, eks:1, eks_p1", "estimators"),
        ("estimators = magic", "estimators"),
        ("experiment = mse_vs_bcrb\nestimators = dct", "estimators"),
        ("constellation_order = 32", "constellation_order"),
        ("ar_alpha = 1.5", "increment_model"),
        ("increment_model = ar", "ar_coeffs"),
        ("increment_model = table\nincrement_table = missing.txt", "increment_model"),
    ],
)
def test_validation_errors(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


def test_table_path_is_relative_to_config(tmp_path):
    (tmp_path / "r.txt").write_text("0 1e-3\n1 5e-4\n")
    (tmp_path / "exp.cfg").write_text("increment_model = table\nincrement_table = r.txt\n")
    cfg = load_config(tmp_path / "exp.cfg")
    np.testing.assert_allclose(cfg.increments().autocorrelation(3), [1e-3, 5e-4, 0])


def test_shipped_configs_validate():
    from pathlib import Path

    configs = sorted((Path(__file__).parent.parent / "configs").glob("*.cfg"))
    assert configs
    for path in configs:
        assert cli.main(["validate", "--config", str(path)]) == 0


def test_phase_errors_remove_common_cycle():
    truth = np.array([0.1, 0.2, 0.3])
    est = truth + 2 * np.pi + np.array([0.01, -0.01, 0.0])
    np.testing.assert_allclose(phase_errors(est, truth), [0.01, -0.01, 0.0], atol=1e-12)
    np.testing.assert_allclose(phase_errors(truth + 3.0, truth, wrap=True), 3.0 - 0 * truth)
    np.testing.assert_allclose(phase_errors(truth + 3.5, truth, wrap=True), 3.5 - 2 * np.pi)


def test_run_produces_all_metrics():
    rows = run(parse_config(SMALL))
    keys = {(r.estimator, r.snr_db, r.metric) for r in rows}
    for est in ("map", "eks_p1", "white_eks", "dct"):
        for snr in (10.0, 20.0):
            assert (est, snr, "mse_rad2") in keys
            assert (est, snr, "failure_rate") in keys
    assert ("map", 10.0, "avg_iterations") in keys
    assert rows == sorted(rows)
    assert all(r.n_trials == 6 and r.seed == 7 for r in rows)


def test_trials_are_counter_based():
    # a longer run shares its first trials with a shorter one
    cfg = parse_config(SMALL)
    short = simulate(cfg)
    long = simulate(cfg.with_overrides(n_trials=10))
    for key, tr in short.trials.items():
        np.testing.assert_array_equal(tr.sq_err, long.trials[key].sq_err[:6])


def test_parallel_equals_serial():
    cfg = parse_config(SMALL)
    a = rows_from_result(simulate(cfg, parallel=1, chunk_size=2))
    b = rows_from_result(simulate(cfg, parallel=2, chunk_size=2))
    assert a == b


def test_failures_are_counted_not_fatal(monkeypatch):
    from pnest.errors import SingularHessian
    from pnest.sim import harness

    calls = {"n": 0}
    dct = harness.make_estimator("dct", None, None)

    def flaky(obs, previous=None):
        calls["n"] += 1
        if calls["n"] % 2:
            raise SingularHessian("forced")
        return dct(obs)

    monkeypatch.setattr(harness, "make_estimator", lambda *a, **k: flaky)
    harness._context.cache_clear()
    try:
        cfg = parse_config("block_length = 21\npilot_density = 0.3\nestimators = dct\nn_trials = 4\nsnr_grid_db = 10\nn_detection_iterations = 1")
        rows = run(cfg)
    finally:
        harness._context.cache_clear()
    by_metric = {r.metric: r.value for r in rows}
    assert by_metric["failure_rate"] == 0.5
    assert math.isfinite(by_metric["mse_rad2"])


def test_bcrb_rows_for_mse_vs_bcrb():
    cfg = parse_config(SMALL).with_overrides(
        experiment=Experiment.MSE_VS_BCRB, pilot_density=1.0, estimators=("map",)
    )
    rows = run(cfg)
    bcrb = [r for r in rows if r.estimator == "bcrb"]
    assert {r.metric for r in bcrb} == {"bcrb_rad2"} and len(bcrb) == 2


def test_ser_rows():
    cfg = parse_config(SMALL).with_overrides(experiment=Experiment.SER, n_trials=2)
    rows = run(cfg)
    ser = [r for r in rows if r.metric == "ser"]
    assert len(ser) == 8 and all(0 <= r.value <= 1 for r in ser)


row_strategy = st.builds(
    ResultRow,
    experiment=st.sampled_from(["mse", "ser", "mse_vs_bcrb"]),
    estimator=st.sampled_from(["map", "eks_p1", "dct", "bcrb"]),
    snr_db=st.floats(-50, 50, allow_nan=False),
    metric=st.sampled_from(["mse_rad2", "ser", "bcrb_rad2"]),
    value=st.floats(allow_nan=False, allow_infinity=False),
    n_trials=st.integers(1, 10**6),
    seed=st.integers(0, 2**32),
)


@settings(max_examples=50, deadline=None)
@given(rows=st.lists(row_strategy, max_size=20))
def test_csv_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "r.csv"
    emit_csv(rows, path)
    assert read_csv(path) == rows
    assert path.read_bytes().count(b"\r") == 0


def test_csv_header(tmp_path):
    emit_csv([], tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == ",".join(CSV_HEADER) + "\n"


def test_cli_run_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(SMALL)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--trials", "2", "--seed", "3"]) == 0
    rows = read_csv(out / "results.csv")
    assert rows and all(r.n_trials == 2 and r.seed == 3 for r in rows)
    assert (out / "mse_map_mse_rad2.dat").exists()


def test_cli_bcrb_profiles(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("experiment = mse_vs_bcrb\nblock_length = 11\nestimators = map\nsnr_grid_db = 20\nn_trials = 2\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "profile_snr20.0.dat").read_text().splitlines()
    assert len(lines) == 12


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("block_length = ten\n")
    assert cli.main(["validate", "--config", str(bad)]) == 1
    assert "line 1" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path)]) == 1
    good = tmp_path / "good.cfg"
    good.write_text(SMALL)
    assert cli.main(["run", "--config", str(good), "--out", str(tmp_path / "o"), "--parallel", "0"]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "--config", str(good), "--out", str(blocker / "sub"), "--trials", "1"]) == 2
