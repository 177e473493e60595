import json
import logging
import os
import re
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.constants import EXPERIMENTS_DIR, OUTPUT_DIR_ENV_VAR, SCENARIOS

logger = logging.getLogger("config")


class ConfigError(Exception):
    """Base exception for experiment configuration errors"""
    pass


class ConfigParseError(ConfigError):
    """Raised when a config file cannot be read as a JSON object"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ConfigValidationError(ConfigError):
    """Raised with every violation found, not just the first"""

    def __init__(self, violations: List[str]):
        self.violations = violations
        super().__init__("Invalid configuration:\n" + "\n".join(f"  - {v}" for v in violations))


class Strategy(str, Enum):
    RANDOM = "random"
    POC = "poc"
    OORT = "oort"
    HIERARCHICAL = "hierarchical"


class UpdateSignal(str, Enum):
    GRADIENT = "gradient"
    LOSS = "loss"
    BIAS = "bias"
    WEIGHT = "weight"


class QuartileRange(str, Enum):
    Q1_Q3 = "q1_q3"
    FULL = "full"
    ZERO_Q3 = "zero_q3"
    Q1_END = "q1_end"


class FLAlgorithm(str, Enum):
    FEDAVG = "fedavg"
    FEDPROX = "fedprox"


class Optimizer(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


class ModelKind(str, Enum):
    SOFTMAX = "softmax"
    MLP = "mlp"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TrainConfig(_Section):
    epochs: int = Field(2, gt=0)
    batch_size: int = Field(64, gt=0)
    learning_rate: float = Field(0.1, ge=0)
    lr_decay: float = Field(0.5, gt=0, le=1)
    decay_every: int = Field(20, gt=0)
    mu: float = Field(0.1, ge=0)
    optimizer: Optimizer = Optimizer.SGD
    seed: int = Field(0, ge=0, lt=2**64)

    def learning_rate_for_round(self, round_index: int) -> float:
        """Server-side step decay: lr * lr_decay ** (round // decay_every)"""
        return self.learning_rate * self.lr_decay ** (round_index // self.decay_every)


class PartitionPlan(_Section):
    n_clients: int = Field(gt=0)
    alpha_groups: Tuple[float, ...]
    seed: int = Field(0, ge=0, lt=2**64)
    train_fraction: float = Field(0.8, gt=0, lt=1)

    @field_validator("alpha_groups")
    @classmethod
    def _alphas_positive(cls, v):
        if not v:
            raise ValueError("alpha_groups must be non-empty")
        if any(a <= 0 for a in v):
            raise ValueError("every alpha must be > 0")
        return tuple(float(a) for a in v)

    @property
    def remainder_clients(self) -> int:
        """Clients beyond the even split; they join the last alpha group"""
        return self.n_clients % len(self.alpha_groups)


class FederationSection(_Section):
    rounds: int = Field(100, ge=0)
    max_iterations: int = Field(5, ge=1)
    clients_per_round: int = Field(10, ge=1)
    eta: int = Field(4, ge=1)
    fl_algorithm: FLAlgorithm = FLAlgorithm.FEDAVG
    eval_participants_only: bool = False
    workers: int = Field(1, ge=1)
    checkpoint_every: int = Field(0, ge=0)


class DataSection(_Section):
    scenario: Optional[str] = None
    n_clients: int = Field(50, gt=0)
    alpha_list: Tuple[float, ...] = (0.001, 0.01, 0.1, 0.5, 1.0)
    n_classes: int = Field(10, ge=2)
    dim: int = Field(20, ge=2)
    n_samples: int = Field(10000, gt=0)
    class_separation: float = Field(4.0, gt=0)
    train_fraction: float = Field(0.8, gt=0, lt=1)
    model: ModelKind = ModelKind.SOFTMAX
    hidden_dim: int = Field(32, gt=0)

    @field_validator("scenario")
    @classmethod
    def _known_scenario(cls, v):
        if v is not None and v not in SCENARIOS:
            raise ValueError(f"unknown scenario '{v}', expected one of: {', '.join(SCENARIOS)}")
        return v

    @field_validator("alpha_list")
    @classmethod
    def _alphas_positive(cls, v):
        if not v:
            raise ValueError("alpha_list must be non-empty")
        if any(a <= 0 for a in v):
            raise ValueError("every alpha must be > 0")
        return v

    @model_validator(mode="after")
    def _enough_samples(self):
        errors = []
        if self.n_samples < self.n_classes:
            errors.append("n_samples must be >= n_classes")
        if self.n_samples < 2 * self.n_clients:
            # Below this every client could hold a single, train-only sample
            errors.append("n_samples must be >= 2 * n_clients so some client keeps a test sample")
        if errors:
            raise ValueError("; ".join(errors))
        return self


class SelectionSection(_Section):
    update_signal: UpdateSignal = UpdateSignal.GRADIENT
    quartile_range: QuartileRange = QuartileRange.Q1_Q3
    count_weighted_clusters: bool = False
    poc_candidates: Optional[int] = Field(None, ge=1)
    oort_epsilon: float = Field(0.1, ge=0, lt=1)


class OutputSection(_Section):
    output_dir: str = "results"


class ExperimentConfig(_Section):
    name: str = "experiment"
    strategy: Strategy
    seeds: Tuple[int, ...] = (0,)
    federation: FederationSection = FederationSection()
    training: TrainConfig = TrainConfig()
    data: DataSection = DataSection()
    selection: SelectionSection = SelectionSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="before")
    @classmethod
    def _apply_scenario(cls, values: Any) -> Any:
        """Fill alpha_list / n_clients / clients_per_round from a preset unless given explicitly"""
        if not isinstance(values, dict):
            return values
        data = values.get("data")
        if not isinstance(data, dict) or data.get("scenario") not in SCENARIOS:
            return values
        preset = SCENARIOS[data["scenario"]]
        data = dict(data)
        data.setdefault("alpha_list", list(preset["alpha_list"]))
        data.setdefault("n_clients", preset["n_clients"])
        federation = dict(values.get("federation") or {})
        federation.setdefault("clients_per_round", preset["clients_per_round"])
        return {**values, "data": data, "federation": federation}

    @field_validator("seeds")
    @classmethod
    def _seeds_valid(cls, v):
        if not v:
            raise ValueError("at least one seed is required")
        if any(s < 0 or s >= 2**64 for s in v):
            raise ValueError("seeds must be unsigned 64-bit integers")
        return v

    @model_validator(mode="after")
    def _cross_section_checks(self):
        errors = []
        if self.federation.clients_per_round > self.data.n_clients:
            errors.append("federation.clients_per_round must be <= data.n_clients")
        if self.strategy == Strategy.POC:
            d = self.poc_candidates
            if d < self.federation.clients_per_round:
                errors.append("selection.poc_candidates (d) must be >= federation.clients_per_round (m)")
            if d > self.data.n_clients:
                errors.append("selection.poc_candidates (d) must be <= data.n_clients")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    @property
    def poc_candidates(self) -> int:
        if self.selection.poc_candidates is not None:
            return self.selection.poc_candidates
        return min(2 * self.federation.clients_per_round, self.data.n_clients)

    @property
    def effective_mu(self) -> float:
        """The proximal coefficient only applies under FedProx"""
        return self.training.mu if self.federation.fl_algorithm == FLAlgorithm.FEDPROX else 0.0

    def partition_plan(self, seed: int) -> PartitionPlan:
        return PartitionPlan(
            n_clients=self.data.n_clients,
            alpha_groups=tuple(self.data.alpha_list),
            seed=seed,
            train_fraction=self.data.train_fraction,
        )

    def with_overrides(self, overrides: Dict[str, Any]) -> "ExperimentConfig":
        """Return a re-validated copy with dotted-key overrides applied"""
        return build_config(apply_overrides(self.model_dump(mode="json"), overrides))


class _DuplicateKey(Exception):
    def __init__(self, key: str):
        self.key = key
        super().__init__(key)


def _reject_duplicates(pairs: List[Tuple[str, Any]]) -> Dict[str, Any]:
    seen: Dict[str, Any] = {}
    for key, value in pairs:
        if key in seen:
            raise _DuplicateKey(key)
        seen[key] = value
    return seen


_KEY_SUFFIX = re.compile(r"\s*:")


def _locate(text: str, key: str) -> Tuple[Optional[int], Optional[int]]:
    """Line and column of the first repeated `key` inside a single object"""
    # One key set per open object; None marks an array
    stack: List[Optional[set]] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == '"':
            end = i + 1
            while end < len(text) and text[end] != '"':
                end += 2 if text[end] == "\\" else 1
            if end >= len(text):
                break
            if stack and stack[-1] is not None and _KEY_SUFFIX.match(text, end + 1):
                name = json.loads(text[i:end + 1])
                if name == key and name in stack[-1]:
                    line = text.count("\n", 0, i) + 1
                    return line, i - (text.rfind("\n", 0, i) + 1) + 1
                stack[-1].add(name)
            i = end + 1
            continue
        if ch == "{":
            stack.append(set())
        elif ch == "[":
            stack.append(None)
        elif ch in "}]" and stack:
            stack.pop()
        i += 1
    return None, None


def load_config_dict(text: str) -> Dict[str, Any]:
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"Invalid JSON: {e.msg}", e.lineno, e.colno) from e
    except _DuplicateKey as e:
        line, column = _locate(text, e.key)
        raise ConfigParseError(f"Duplicate key '{e.key}'", line, column) from e
    if not isinstance(data, dict):
        raise ConfigParseError("Config must be a JSON object")
    return data


def coerce_value(raw: str) -> Any:
    """Interpret a flag value as JSON when possible, else as a plain string"""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_assignments(assignments: List[str]) -> Dict[str, Any]:
    """['federation.eta=3', ...] -> {'federation.eta': 3, ...}"""
    overrides: Dict[str, Any] = {}
    for item in assignments:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigParseError(f"Expected section.field=value, got '{item}'")
        overrides[key.strip()] = coerce_value(raw.strip())
    return overrides


def experiment_path(name: str) -> Path:
    return Path(EXPERIMENTS_DIR) / f"{name}.json"


def apply_overrides(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = json.loads(json.dumps(data))
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = merged
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigParseError(f"Cannot override '{dotted}': '{part}' is not a section")
        node[parts[-1]] = value
    return merged


def build_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        violations = []
        for err in e.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "config"
            violations.append(f"{loc}: {err['msg']}")
        raise ConfigValidationError(violations) from e


def parse_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Load an experiment config from a JSON file and/or flag overrides.

    Args:
        path: JSON file with sections; None starts from defaults only
        overrides: dotted keys (e.g. "federation.eta") mapped to values

    Returns:
        ExperimentConfig: fully validated config with defaults applied

    Raises:
        ConfigParseError: unreadable file, malformed JSON or duplicate keys
        ConfigValidationError: every field-level violation found
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError as e:
            raise ConfigParseError(f"Config file not found: {path}") from e
        data = load_config_dict(text)
        logger.debug(f"Loaded config from {path}")

    overrides = dict(overrides or {})
    load_dotenv()
    env_output = os.getenv(OUTPUT_DIR_ENV_VAR)
    if env_output and "output.output_dir" not in overrides:
        overrides["output.output_dir"] = env_output

    return build_config(apply_overrides(data, overrides))
