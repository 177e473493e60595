import logging
from typing import List

from src.config import ExperimentConfig
from src.selection import oort_select
from src.strategies.base_strategy import BaseStrategy
from src.types import RoundState

logger = logging.getLogger("strategies.oort")


class OortStrategy(BaseStrategy):
    """Statistical utility only (size * last reported loss); system terms do not exist in simulation"""

    @property
    def name(self) -> str:
        return "oort"

    @property
    def is_iterative(self) -> bool:
        return False

    def validate_config(self, config: ExperimentConfig) -> ExperimentConfig:
        if not 0 <= config.selection.oort_epsilon < 1:
            raise ValueError("selection.oort_epsilon must lie in [0, 1)")
        return config

    def select(self, server, state: RoundState, seed: int) -> List[int]:
        summaries = server.reported_summaries()
        chosen = oort_select(
            summaries,
            self.config.federation.clients_per_round,
            self.config.selection.oort_epsilon,
            seed,
        )
        logger.debug(f"Round {state.round_index}: Oort chose {chosen}")
        return chosen
