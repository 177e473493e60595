import logging
from typing import List

from src.config import ExperimentConfig
from src.strategies.base_strategy import BaseStrategy
from src.types import RoundState

logger = logging.getLogger("strategies.hierarchical")


class HierarchicalStrategy(BaseStrategy):
    """
    Start from the round's uniform K-sample, then repeatedly retrain only the
    hard cluster (high update magnitude) until it falls below eta or T
    iterations have run.
    """

    @property
    def name(self) -> str:
        return "hierarchical"

    @property
    def is_iterative(self) -> bool:
        return True

    def validate_config(self, config: ExperimentConfig) -> ExperimentConfig:
        if config.federation.eta < 1:
            raise ValueError("federation.eta must be >= 1")
        if config.federation.max_iterations < 1:
            raise ValueError("federation.max_iterations must be >= 1")
        return config

    def select(self, server, state: RoundState, seed: int) -> List[int]:
        return list(state.sample)
