from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np


@dataclass
class LabeledDataset:
    """Feature matrix plus integer class labels in {0..n_classes-1}"""
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"features row count ({self.features.shape[0]}) does not match labels ({self.labels.shape[0]})"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.features[indices], self.labels[indices], self.n_classes)


@dataclass
class ClientDataset:
    client_id: int
    alpha: float
    train: LabeledDataset
    test: LabeledDataset

    @property
    def size(self) -> int:
        """|D_train|, the aggregation weight of this client"""
        return len(self.train)


Layer = Tuple[np.ndarray, np.ndarray]


@dataclass
class ModelParams:
    """Ordered (weight, bias) pairs; the last pair is the classification layer"""
    layers: List[Layer]

    @property
    def final_layer(self) -> Layer:
        return self.layers[-1]

    @property
    def shapes(self) -> List[Tuple[int, int]]:
        return [tuple(w.shape) for w, _ in self.layers]

    def copy(self) -> "ModelParams":
        return ModelParams([(w.copy(), b.copy()) for w, b in self.layers])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) and np.all(np.isfinite(b)) for w, b in self.layers)

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in self.layers])


@dataclass
class GradientUpdate:
    """Final-layer delta (global minus local) and its Frobenius-based magnitude"""
    deltas: List[np.ndarray]
    magnitude: float

    @property
    def weight_delta(self) -> np.ndarray:
        return self.deltas[0]

    @property
    def bias_delta(self) -> np.ndarray:
        return self.deltas[1]


@dataclass(frozen=True)
class ClientSummary:
    client_id: int
    magnitude: float
    size: int
    loss: float = 0.0

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError(f"client {self.client_id}: size must be positive")
        if self.magnitude < 0:
            raise ValueError(f"client {self.client_id}: magnitude must be non-negative")


@dataclass
class SplitDecision:
    sorted_ids: List[int]
    magnitudes: List[float]
    sizes: List[int]
    running_sums: List[int]
    k_q1: int
    k_q3: int
    tau_split: int
    easy_ids: List[int]
    hard_ids: List[int]
    var_intra: float
    var_inter: float
    var_total: float
    terminal: bool = False


@dataclass
class ClientState:
    """Server-side view of a client: its data and its latest reported summary"""
    data: ClientDataset
    magnitude: Optional[float] = None
    loss: Optional[float] = None
    times_trained: int = 0

    @property
    def client_id(self) -> int:
        return self.data.client_id

    @property
    def size(self) -> int:
        return self.data.size


@dataclass
class RoundState:
    round_index: int
    iteration_index: int
    global_params: ModelParams
    sample: List[int] = field(default_factory=list)
    hard_set: List[int] = field(default_factory=list)
    history: List[SplitDecision] = field(default_factory=list)
