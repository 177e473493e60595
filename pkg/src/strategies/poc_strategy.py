import logging
from typing import List

from src.config import ExperimentConfig
from src.selection import poc_select
from src.strategies.base_strategy import BaseStrategy
from src.types import RoundState

logger = logging.getLogger("strategies.poc")


class PowerOfChoiceStrategy(BaseStrategy):
    """Sample d candidates, score them with the current global model, keep the m = K lossiest"""

    @property
    def name(self) -> str:
        return "poc"

    @property
    def is_iterative(self) -> bool:
        return False

    def validate_config(self, config: ExperimentConfig) -> ExperimentConfig:
        d = config.poc_candidates
        m = config.federation.clients_per_round
        if not m <= d <= config.data.n_clients:
            raise ValueError(f"PoC needs m ({m}) <= d ({d}) <= n_clients ({config.data.n_clients})")
        return config

    def select(self, server, state: RoundState, seed: int) -> List[int]:
        summaries = server.current_loss_summaries(state.global_params)
        chosen = poc_select(summaries, self.config.poc_candidates, self.config.federation.clients_per_round, seed)
        logger.debug(f"Round {state.round_index}: PoC chose {chosen}")
        return chosen
