import logging
from typing import Callable, Dict, List, Optional, Tuple

from src.config import ExperimentConfig

logger = logging.getLogger("ablation_handler")

# An ablation maps a base config to its labelled variants
AblationSettings = List[Tuple[str, ExperimentConfig]]

ablation_registry: Dict[str, Callable[[ExperimentConfig], AblationSettings]] = {}


def register_ablation(axis_name):
    def decorator(func):
        ablation_registry[axis_name] = func
        return func
    return decorator


def list_ablations() -> List[str]:
    return sorted(ablation_registry)


def execute_ablation(axis_name: str, config: ExperimentConfig) -> Optional[AblationSettings]:
    if axis_name in ablation_registry:
        return ablation_registry[axis_name](config)
    else:
        logger.error(f"Ablation axis {axis_name} not found")
        return None
