import logging
from typing import List

from src.config import ExperimentConfig
from src.strategies.base_strategy import BaseStrategy
from src.types import RoundState

logger = logging.getLogger("strategies.random")


class RandomStrategy(BaseStrategy):
    @property
    def name(self) -> str:
        return "random"

    @property
    def is_iterative(self) -> bool:
        return False

    def validate_config(self, config: ExperimentConfig) -> ExperimentConfig:
        return config

    def select(self, server, state: RoundState, seed: int) -> List[int]:
        # The round's uniform K-sample is already the selection
        return list(state.sample)
