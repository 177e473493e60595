"""Experiment commands: run, compare, ablate, inspect and partition.

Each *_cmd function logs its own failures and returns a process exit code;
the functions they wrap return plain results for programmatic use.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

import src.ablations  # noqa: F401  (registers the ablation axes)
from src.ablation_handler import execute_ablation, list_ablations
from src.config import ConfigError, ExperimentConfig
from src.constants import SCENARIOS
from src.datagen import DatagenError, export_partition_summary, label_entropy, max_class_proportion
from src.federation import FederationError, build_clients, run_experiment
from src.helpers import print_h_bar
from src.metrics import (
    SPLITS_COLUMNS,
    SUMMARY_COLUMNS,
    MetricsLog,
    format_float,
    read_rows,
    write_metrics_csv,
    write_rows,
    write_splits_csv,
)
from src.model import ModelError
from src.selection import SelectionError

logger = logging.getLogger("harness")

# Failures a command reports as exit code 1 rather than a traceback
EXPERIMENT_ERRORS = (ConfigError, DatagenError, ModelError, SelectionError, FederationError, OSError, ValueError)

ABLATION_COLUMNS = [
    "setting", "n_seeds", "mean_accuracy", "std_accuracy", "training_invocations",
    "sim_split_ms", "sim_train_ms",
]


class HarnessError(Exception):
    pass


@dataclass
class StrategySummary:
    strategy: str
    n_seeds: int
    mean_accuracy: float
    std_accuracy: float
    training_invocations: int
    sim_train_ms: float
    sim_split_ms: float

    @classmethod
    def from_logs(cls, strategy: str, logs: Sequence[MetricsLog]) -> "StrategySummary":
        if not logs:
            raise HarnessError(f"No completed runs to summarize for {strategy}")
        accuracies = np.array([log.final_accuracy for log in logs])
        return cls(
            strategy=strategy,
            n_seeds=len(logs),
            mean_accuracy=float(accuracies.mean()),
            std_accuracy=float(accuracies.std()),
            training_invocations=sum(log.training_invocations for log in logs),
            sim_train_ms=float(np.mean([log.total_train_ms for log in logs])),
            sim_split_ms=float(np.mean([log.total_split_ms for log in logs])),
        )

    def to_row(self) -> Dict[str, str]:
        return {
            "strategy": self.strategy,
            "n_seeds": str(self.n_seeds),
            "mean_accuracy": format_float(self.mean_accuracy),
            "std_accuracy": format_float(self.std_accuracy),
            "training_invocations": str(self.training_invocations),
        }


@dataclass
class AblationRow:
    setting: str
    summary: StrategySummary

    def to_row(self) -> Dict[str, str]:
        return {
            "setting": self.setting,
            "n_seeds": str(self.summary.n_seeds),
            "mean_accuracy": format_float(self.summary.mean_accuracy),
            "std_accuracy": format_float(self.summary.std_accuracy),
            "training_invocations": str(self.summary.training_invocations),
            "sim_split_ms": format_float(self.summary.sim_split_ms),
            "sim_train_ms": format_float(self.summary.sim_train_ms),
        }


def run_seeds(config: ExperimentConfig, output_dir: Optional[Path] = None) -> List[MetricsLog]:
    """
    Run the experiment once per configured seed.

    With an output_dir, each seed's metrics/splits CSVs are written as soon as
    that seed finishes, so earlier seeds survive a later failure.
    """
    logs = []
    for seed in config.seeds:
        log = run_experiment(config, seed)
        if output_dir is not None:
            write_metrics_csv(log, output_dir / f"metrics_{seed}.csv")
            write_splits_csv(log, output_dir / f"splits_{seed}.csv")
        logs.append(log)
    return logs


def run_cmd(config: ExperimentConfig) -> int:
    output_dir = Path(config.output.output_dir)
    logger.info(f"\nRunning '{config.name}' ({config.strategy.value}) on seeds {list(config.seeds)}")
    try:
        logs = run_seeds(config, output_dir)
        summary = StrategySummary.from_logs(config.strategy.value, logs)
        write_rows(output_dir / "summary.csv", SUMMARY_COLUMNS, [summary.to_row()])
    except EXPERIMENT_ERRORS as e:
        logger.error(f"Run failed: {e}")
        return 1
    print_h_bar()
    logger.info(
        f"Final accuracy {summary.mean_accuracy:.4f} ± {summary.std_accuracy:.4f} "
        f"over {summary.n_seeds} seed(s); results in {output_dir}"
    )
    return 0


def compare_strategies(
    config: ExperimentConfig,
    strategies: Sequence[str],
    output_dir: Optional[Path] = None,
) -> Dict[str, Union[StrategySummary, Exception]]:
    """Run each strategy on the same seeds; a failing strategy is recorded and the rest still run"""
    if not strategies:
        raise HarnessError("compare needs at least one strategy")
    outcomes: Dict[str, Union[StrategySummary, Exception]] = {}
    for name in strategies:
        try:
            strategy_config = config.with_overrides({"strategy": name})
            logs = run_seeds(strategy_config, output_dir / name if output_dir is not None else None)
            outcomes[name] = StrategySummary.from_logs(name, logs)
        except EXPERIMENT_ERRORS as e:
            logger.error(f"Strategy {name} failed: {e}")
            outcomes[name] = e
    return outcomes


def compare_cmd(config: ExperimentConfig, strategies: Sequence[str]) -> int:
    output_dir = Path(config.output.output_dir)
    try:
        outcomes = compare_strategies(config, strategies, output_dir)
    except HarnessError as e:
        logger.error(str(e))
        return 1
    summaries = [s for s in outcomes.values() if isinstance(s, StrategySummary)]
    if summaries:
        write_rows(output_dir / "comparison.csv", SUMMARY_COLUMNS, [s.to_row() for s in summaries])

    print_h_bar()
    for name, outcome in outcomes.items():
        if isinstance(outcome, StrategySummary):
            logger.info(
                f"{name:<14} {outcome.mean_accuracy:.4f} ± {outcome.std_accuracy:.4f}  "
                f"({outcome.training_invocations} trainings)"
            )
        else:
            logger.info(f"{name:<14} failed: {outcome}")
    return 0 if len(summaries) == len(outcomes) else 1


def run_ablation(axis: str, config: ExperimentConfig, output_dir: Optional[Path] = None) -> List[AblationRow]:
    settings = execute_ablation(axis, config)
    if settings is None:
        raise HarnessError(f"Unknown ablation axis '{axis}', expected one of: {', '.join(list_ablations())}")
    rows = []
    for label, setting_config in settings:
        logger.info(f"Ablation {axis}={label}")
        logs = run_seeds(setting_config, output_dir / f"{axis}_{label}" if output_dir is not None else None)
        rows.append(AblationRow(label, StrategySummary.from_logs(setting_config.strategy.value, logs)))
    return rows


def ablation_cmd(axis: str, config: ExperimentConfig) -> int:
    output_dir = Path(config.output.output_dir)
    try:
        rows = run_ablation(axis, config, output_dir)
        write_rows(output_dir / f"ablation_{axis}.csv", ABLATION_COLUMNS, [r.to_row() for r in rows])
    except (HarnessError, *EXPERIMENT_ERRORS) as e:
        logger.error(f"Ablation failed: {e}")
        return 1
    print_h_bar()
    for row in rows:
        logger.info(
            f"{axis}={row.setting:<10} accuracy {row.summary.mean_accuracy:.4f} ± {row.summary.std_accuracy:.4f}  "
            f"trainings {row.summary.training_invocations}  split {row.summary.sim_split_ms:.1f} ms"
        )
    return 0


def inspect_cmd(path: Union[str, Path]) -> int:
    """Pretty-print a splits CSV, one line per iteration"""
    try:
        rows = read_rows(path)
    except OSError as e:
        logger.error(f"Cannot read {path}: {e}")
        return 1
    if rows and set(rows[0]) != set(SPLITS_COLUMNS):
        logger.error(f"{path} is not a splits file (columns: {', '.join(rows[0])})")
        return 1

    logger.info(f"\n{path}: {len(rows)} iteration(s)")
    print_h_bar()
    for row in rows:
        head = f"r{row['round']:>3} t{row['iteration']}  hard {row['hard_size']:>3} -> {row['next_hard_size']:<3}"
        if row["tau_split"]:
            logger.info(
                f"{head} tau={row['tau_split']} window=[{row['k_q1']},{row['k_q3']})  "
                f"var intra={row['var_intra']} inter={row['var_inter']} total={row['var_total']}"
                f"{'  (terminal)' if row['terminal'] == 'true' else ''}"
            )
            logger.info(f"        sorted ids: {row['sorted_ids']}")
        else:
            logger.info(f"{head} no split")
    return 0


def partition_cmd(config: ExperimentConfig, seed: int, path: Optional[Union[str, Path]] = None) -> int:
    """Write the per-client partition summary for one seed"""
    path = Path(path) if path is not None else Path(config.output.output_dir) / f"partition_{seed}.csv"
    try:
        clients = build_clients(config, seed)
        export_partition_summary(clients, path)
    except EXPERIMENT_ERRORS as e:
        logger.error(f"Partition failed: {e}")
        return 1

    entropies = [label_entropy(c.train) for c in clients]
    dominance = [max_class_proportion(c.train) for c in clients]
    logger.info(
        f"{len(clients)} clients, sizes {min(c.size for c in clients)}-{max(c.size for c in clients)}, "
        f"mean label entropy {np.mean(entropies):.3f} nats, mean top-class share {np.mean(dominance):.3f}"
    )
    logger.info(f"Partition summary written to {path}")
    return 0


def list_scenarios_cmd() -> int:
    logger.info("\nScenario presets:")
    for name, preset in SCENARIOS.items():
        alphas = ", ".join(f"{a:g}" for a in preset["alpha_list"])
        logger.info(f"  {name:<12} alpha={{{alphas}}}  clients={preset['n_clients']}  K={preset['clients_per_round']}")
    return 0
