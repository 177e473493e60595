import json
from pathlib import Path

import pytest

from src.config import (
    ConfigParseError,
    ConfigValidationError,
    FLAlgorithm,
    QuartileRange,
    Strategy,
    apply_overrides,
    build_config,
    experiment_path,
    load_config_dict,
    parse_assignments,
    parse_config,
)
from src.constants import OUTPUT_DIR_ENV_VAR, SCENARIOS
from tests.conftest import small_config

EXPERIMENTS = Path(__file__).resolve().parent.parent / "experiments"


@pytest.fixture(autouse=True)
def _no_output_env(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV_VAR, raising=False)


def _write(tmp_path, data) -> Path:
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_minimal_config_gets_defaults(tmp_path):
    config = parse_config(_write(tmp_path, {"strategy": "hierarchical"}))
    assert config.strategy == Strategy.HIERARCHICAL
    assert config.federation.rounds == 100
    assert config.federation.clients_per_round == 10
    assert config.federation.eta == 4
    assert config.federation.max_iterations == 5
    assert config.training.mu == 0.1
    assert config.federation.fl_algorithm == FLAlgorithm.FEDAVG
    assert config.selection.quartile_range == QuartileRange.Q1_Q3
    assert config.seeds == (0,)


def test_strategy_is_required():
    with pytest.raises(ConfigValidationError) as info:
        parse_config()
    assert any(v.startswith("strategy") for v in info.value.violations)


def test_violation_names_the_field(tmp_path):
    with pytest.raises(ConfigValidationError) as info:
        parse_config(_write(tmp_path, {"strategy": "random", "federation": {"eta": 0}}))
    assert "federation.eta" in str(info.value)


def test_every_violation_is_reported(tmp_path):
    data = {"strategy": "random", "federation": {"eta": 0}, "training": {"epochs": 0, "learning_rate": -1}}
    with pytest.raises(ConfigValidationError) as info:
        parse_config(_write(tmp_path, data))
    fields = {v.split(":")[0] for v in info.value.violations}
    assert {"federation.eta", "training.epochs", "training.learning_rate"} <= fields


def test_unknown_keys_are_rejected(tmp_path):
    with pytest.raises(ConfigValidationError) as info:
        parse_config(_write(tmp_path, {"strategy": "random", "federation": {"bogus": 1}}))
    assert "federation.bogus" in str(info.value)


def test_duplicate_key_reports_its_line(tmp_path):
    path = tmp_path / "dup.json"
    path.write_text('{\n  "strategy": "random",\n  "strategy": "poc"\n}\n', encoding="utf-8")
    with pytest.raises(ConfigParseError) as info:
        parse_config(path)
    assert info.value.line == 3
    assert "strategy" in str(info.value)


@pytest.mark.parametrize("text, line, column", [
    ('{\n  "name": "rounds",\n  "federation": {\n    "rounds": 1,\n    "rounds": 2\n  }\n}', 5, 5),
    ('{\n  "training": {"seed": 1},\n  "data": {\n    "seed": 2, "seed": 3\n  }\n}', 4, 16),
    ('{"tags": ["eta", "eta"], "strategy": "random",\n "strategy": "oort"}', 2, 2),
])
def test_duplicate_position_points_at_the_repeat(text, line, column):
    with pytest.raises(ConfigParseError) as info:
        load_config_dict(text)
    assert (info.value.line, info.value.column) == (line, column)


def test_malformed_json_reports_its_line():
    with pytest.raises(ConfigParseError) as info:
        load_config_dict('{\n  "strategy": "random",\n}')
    assert info.value.line == 3


def test_config_must_be_an_object():
    with pytest.raises(ConfigParseError):
        load_config_dict("[1, 2]")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigParseError):
        parse_config(tmp_path / "nope.json")


def test_scenario_fills_unset_values():
    config = build_config({"strategy": "random", "data": {"scenario": "extreme"}})
    assert config.data.alpha_list == SCENARIOS["extreme"]["alpha_list"]
    assert config.data.n_clients == 100
    assert config.federation.clients_per_round == 5


def test_explicit_values_beat_the_scenario():
    config = build_config({
        "strategy": "random",
        "data": {"scenario": "graded", "n_clients": 60},
        "federation": {"clients_per_round": 6},
    })
    assert config.data.n_clients == 60
    assert config.federation.clients_per_round == 6
    assert config.data.alpha_list == SCENARIOS["graded"]["alpha_list"]


def test_unknown_scenario():
    with pytest.raises(ConfigValidationError) as info:
        build_config({"strategy": "random", "data": {"scenario": "nowhere"}})
    assert "data.scenario" in str(info.value)


def test_sample_cannot_exceed_population():
    with pytest.raises(ConfigValidationError):
        build_config({"strategy": "random", "data": {"n_clients": 5}, "federation": {"clients_per_round": 6}})


def test_population_needs_two_samples_per_client():
    with pytest.raises(ConfigValidationError) as info:
        build_config({"strategy": "random", "data": {"n_clients": 40, "n_samples": 79, "n_classes": 2}})
    assert "2 * n_clients" in str(info.value)
    build_config({"strategy": "random", "data": {"n_clients": 40, "n_samples": 80, "n_classes": 2}})


def test_poc_candidates_must_cover_the_sample():
    with pytest.raises(ConfigValidationError) as info:
        build_config({"strategy": "poc", "selection": {"poc_candidates": 3}})
    assert "poc_candidates" in str(info.value)
    assert small_config(strategy="poc").poc_candidates == 12
    assert small_config(strategy="poc", data={"n_clients": 40}).poc_candidates == 12


def test_output_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_DIR_ENV_VAR, str(tmp_path / "env-out"))
    assert parse_config(None, {"strategy": "random"}).output.output_dir == str(tmp_path / "env-out")
    explicit = parse_config(None, {"strategy": "random", "output.output_dir": "elsewhere"})
    assert explicit.output.output_dir == "elsewhere"


def test_overrides_apply_over_file(tmp_path):
    path = _write(tmp_path, {"strategy": "random", "federation": {"eta": 3}})
    config = parse_config(path, {"federation.eta": 2, "strategy": "oort"})
    assert config.federation.eta == 2
    assert config.strategy == Strategy.OORT


def test_override_through_a_value_is_rejected():
    with pytest.raises(ConfigParseError):
        apply_overrides({"strategy": "random"}, {"strategy.kind": 1})


def test_parse_assignments():
    parsed = parse_assignments([
        "federation.eta=3", "selection.quartile_range=full", "seeds=[1, 2]", "federation.eval_participants_only=true",
    ])
    assert parsed == {
        "federation.eta": 3,
        "selection.quartile_range": "full",
        "seeds": [1, 2],
        "federation.eval_participants_only": True,
    }
    with pytest.raises(ConfigParseError):
        parse_assignments(["federation.eta"])


def test_with_overrides_revalidates(config):
    changed = config.with_overrides({"federation.eta": 3})
    assert changed.federation.eta == 3
    assert config.federation.eta == 2
    with pytest.raises(ConfigValidationError):
        config.with_overrides({"federation.eta": 0})


def test_learning_rate_schedule():
    training = build_config({"strategy": "random"}).training
    assert training.learning_rate_for_round(0) == 0.1
    assert training.learning_rate_for_round(19) == 0.1
    assert training.learning_rate_for_round(20) == 0.05
    assert training.learning_rate_for_round(45) == 0.025


def test_mu_only_applies_to_fedprox(config):
    assert config.effective_mu == 0.0
    assert config.with_overrides({"federation.fl_algorithm": "fedprox"}).effective_mu == 0.1


def test_partition_plan(config):
    plan = config.partition_plan(seed=9)
    assert plan.n_clients == 12
    assert plan.alpha_groups == (0.1, 1.0)
    assert plan.seed == 9
    assert plan.remainder_clients == 0


@pytest.mark.parametrize("name", ["graded", "extreme-fedprox", "quick", "mlp-ladder"])
def test_shipped_experiments_parse(name):
    config = parse_config(EXPERIMENTS / f"{name}.json")
    assert config.name == name
    assert config.federation.clients_per_round <= config.data.n_clients


def test_experiment_path():
    assert experiment_path("graded") == Path("experiments") / "graded.json"
