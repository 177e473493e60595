import logging
from typing import Dict, List, Type

from src.config import ExperimentConfig, Strategy
from src.strategies.base_strategy import BaseStrategy
from src.strategies.hierarchical_strategy import HierarchicalStrategy
from src.strategies.oort_strategy import OortStrategy
from src.strategies.poc_strategy import PowerOfChoiceStrategy
from src.strategies.random_strategy import RandomStrategy

logger = logging.getLogger("strategy_manager")

_STRATEGIES: Dict[Strategy, Type[BaseStrategy]] = {
    Strategy.RANDOM: RandomStrategy,
    Strategy.POC: PowerOfChoiceStrategy,
    Strategy.OORT: OortStrategy,
    Strategy.HIERARCHICAL: HierarchicalStrategy,
}


def _class_name_to_type(name: Strategy) -> Type[BaseStrategy]:
    try:
        return _STRATEGIES[Strategy(name)]
    except (KeyError, ValueError):
        raise KeyError(f"Unknown strategy: {name}")


def create_strategy(config: ExperimentConfig) -> BaseStrategy:
    strategy_class = _class_name_to_type(config.strategy)
    return strategy_class(config)


def list_strategies() -> List[str]:
    return [s.value for s in _STRATEGIES]
