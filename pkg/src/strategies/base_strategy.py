import logging
from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, List

from src.config import ExperimentConfig
from src.types import RoundState

if TYPE_CHECKING:
    from src.federation import FederatedServer


class BaseStrategy(ABC):
    def __init__(self, config: ExperimentConfig):
        try:
            # Strategy-specific checks on top of the schema validation
            self.config = self.validate_config(config)
        except Exception as e:
            logging.error("Could not initialize the selection strategy")
            raise e

    @property
    @abstractmethod
    def name(self) -> str:
        pass

    @property
    @abstractmethod
    def is_iterative(self) -> bool:
        """
        True when a round keeps re-splitting and retraining the hard set;
        False for single selection + single training pass per round.
        """
        pass

    @abstractmethod
    def validate_config(self, config: ExperimentConfig) -> ExperimentConfig:
        """
        Validate the fields this strategy depends on.

        Args:
            config: the full experiment config

        Returns:
            ExperimentConfig: the config if valid

        Raises:
            ValueError: if a required field is out of range for this strategy
        """

    @abstractmethod
    def select(self, server: "FederatedServer", state: RoundState, seed: int) -> List[int]:
        """
        Choose the clients that train first in this round.

        Args:
            server: gives access to client summaries and the current model
            state: the round state; state.sample holds the round's uniform K-sample
            seed: selection seed for this round

        Returns:
            List[int]: client ids to train
        """
        pass
