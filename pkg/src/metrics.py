"""Per-round and per-iteration run records and their CSV writers."""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from src.constants import CSV_FLOAT_FORMAT
from src.types import ModelParams, SplitDecision

logger = logging.getLogger("metrics")

METRICS_COLUMNS = [
    "round", "accuracy", "mean_loss", "iterations", "clients_trained",
    "participants", "sim_train_ms", "sim_split_ms",
]
SPLITS_COLUMNS = [
    "round", "iteration", "hard_size", "sorted_ids", "magnitudes", "sizes",
    "k_q1", "k_q3", "tau_split", "var_intra", "var_inter", "var_total",
    "next_hard_size", "terminal",
]
SUMMARY_COLUMNS = ["strategy", "n_seeds", "mean_accuracy", "std_accuracy", "training_invocations"]
# Wall-clock columns; excluded when comparing runs for determinism
TIMING_COLUMNS = ("sim_train_ms", "sim_split_ms")


def format_float(value: float) -> str:
    return CSV_FLOAT_FORMAT % value


def format_list(values: Iterable[Any]) -> str:
    return " ".join(format_float(v) if isinstance(v, float) else str(v) for v in values)


@dataclass
class IterationRecord:
    round_index: int
    iteration: int
    trained: List[int]
    split: Optional[SplitDecision]
    next_hard_size: int
    terminal: bool
    mean_loss: float
    sim_train_ms: float = 0.0
    sim_split_ms: float = 0.0

    @property
    def hard_size(self) -> int:
        return len(self.trained)

    def to_row(self) -> Dict[str, str]:
        row = {
            "round": str(self.round_index),
            "iteration": str(self.iteration),
            "hard_size": str(self.hard_size),
            "next_hard_size": str(self.next_hard_size),
            "terminal": "true" if self.terminal else "false",
        }
        s = self.split
        if s is None:
            row.update({c: "" for c in SPLITS_COLUMNS if c not in row})
        else:
            row.update({
                "sorted_ids": format_list(s.sorted_ids),
                "magnitudes": format_list(float(m) for m in s.magnitudes),
                "sizes": format_list(s.sizes),
                "k_q1": str(s.k_q1),
                "k_q3": str(s.k_q3),
                "tau_split": str(s.tau_split),
                "var_intra": format_float(s.var_intra),
                "var_inter": format_float(s.var_inter),
                "var_total": format_float(s.var_total),
            })
        return row


@dataclass
class RoundMetrics:
    round_index: int
    accuracy: float
    mean_loss: float
    iterations: int
    clients_trained: int
    participants: List[int]
    sim_train_ms: float
    sim_split_ms: float

    def to_row(self) -> Dict[str, str]:
        return {
            "round": str(self.round_index),
            "accuracy": format_float(self.accuracy),
            "mean_loss": format_float(self.mean_loss),
            "iterations": str(self.iterations),
            "clients_trained": str(self.clients_trained),
            "participants": format_list(self.participants),
            "sim_train_ms": format_float(self.sim_train_ms),
            "sim_split_ms": format_float(self.sim_split_ms),
        }


@dataclass
class MetricsLog:
    strategy: str
    seed: int
    initial_accuracy: float
    rounds: List[RoundMetrics] = field(default_factory=list)
    iterations: List[IterationRecord] = field(default_factory=list)
    final_params: Optional[ModelParams] = None

    @property
    def final_accuracy(self) -> float:
        return self.rounds[-1].accuracy if self.rounds else self.initial_accuracy

    @property
    def training_invocations(self) -> int:
        return sum(r.clients_trained for r in self.rounds)

    @property
    def total_train_ms(self) -> float:
        return sum(r.sim_train_ms for r in self.rounds)

    @property
    def total_split_ms(self) -> float:
        return sum(r.sim_split_ms for r in self.rounds)

    @property
    def participant_trace(self) -> List[List[int]]:
        """Clients trained in each round, in ascending id order"""
        return [list(r.participants) for r in self.rounds]


def write_rows(path: Union[str, Path], fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    logger.debug(f"Wrote {path}")
    return path


def write_metrics_csv(log: MetricsLog, path: Union[str, Path]) -> Path:
    return write_rows(path, METRICS_COLUMNS, (r.to_row() for r in log.rounds))


def write_splits_csv(log: MetricsLog, path: Union[str, Path]) -> Path:
    return write_rows(path, SPLITS_COLUMNS, (it.to_row() for it in log.iterations))


def read_rows(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
