"""Ablation axes; importing this module registers them."""
from src.ablation_handler import AblationSettings, register_ablation
from src.config import ExperimentConfig, FLAlgorithm, QuartileRange, Strategy, UpdateSignal

ETA_VALUES = (2, 3, 4)
MAX_ITERATION_VALUES = (1, 3, 5)


def _hierarchical(config: ExperimentConfig, key: str, value) -> ExperimentConfig:
    return config.with_overrides({"strategy": Strategy.HIERARCHICAL.value, key: value})


@register_ablation("update_signal")
def update_signal_settings(config: ExperimentConfig) -> AblationSettings:
    return [(s.value, _hierarchical(config, "selection.update_signal", s.value)) for s in UpdateSignal]


@register_ablation("quartile_range")
def quartile_range_settings(config: ExperimentConfig) -> AblationSettings:
    return [(q.value, _hierarchical(config, "selection.quartile_range", q.value)) for q in QuartileRange]


@register_ablation("eta")
def eta_settings(config: ExperimentConfig) -> AblationSettings:
    return [(str(eta), _hierarchical(config, "federation.eta", eta)) for eta in ETA_VALUES]


@register_ablation("max_iterations")
def max_iterations_settings(config: ExperimentConfig) -> AblationSettings:
    # T=1 is a single pass over the uniform sample
    return [(str(t), _hierarchical(config, "federation.max_iterations", t)) for t in MAX_ITERATION_VALUES]


@register_ablation("fl_algorithm")
def fl_algorithm_settings(config: ExperimentConfig) -> AblationSettings:
    return [(a.value, config.with_overrides({"federation.fl_algorithm": a.value})) for a in FLAlgorithm]
