from typing import Any, Dict

import numpy as np
import pytest

from src.config import ExperimentConfig, build_config
from src.types import ClientSummary


def small_config_dict(**sections: Dict[str, Any]) -> Dict[str, Any]:
    """A population small enough for a round to train in milliseconds"""
    data = {
        "name": "small",
        "strategy": "hierarchical",
        "seeds": [0],
        "federation": {"rounds": 2, "max_iterations": 3, "clients_per_round": 6, "eta": 2},
        "training": {"epochs": 1, "batch_size": 32, "learning_rate": 0.1},
        "data": {
            "n_clients": 12,
            "alpha_list": [0.1, 1.0],
            "n_classes": 4,
            "dim": 5,
            "n_samples": 600,
        },
    }
    for key, value in sections.items():
        if isinstance(value, dict):
            data[key] = {**data.get(key, {}), **value}
        else:
            data[key] = value
    return data


def small_config(**sections: Dict[str, Any]) -> ExperimentConfig:
    return build_config(small_config_dict(**sections))


@pytest.fixture
def config() -> ExperimentConfig:
    return small_config()


@pytest.fixture
def output_config(tmp_path) -> ExperimentConfig:
    return small_config(output={"output_dir": str(tmp_path / "out")}, seeds=[0, 1])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def summaries(magnitudes, sizes=None, losses=None):
    sizes = sizes if sizes is not None else [1] * len(magnitudes)
    losses = losses if losses is not None else [0.0] * len(magnitudes)
    return [ClientSummary(i, float(m), int(s), float(l)) for i, (m, s, l) in enumerate(zip(magnitudes, sizes, losses))]
