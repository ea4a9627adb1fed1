"""Monte-Carlo experiment harness."""

from .config import Experiment, ExperimentConfig, load_config, parse_config
from .harness import ResultRow, SimulationResult, run, simulate
from .output import emit_csv, emit_plot_data, read_csv
