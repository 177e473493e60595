from src.constants.scenarios import SCENARIOS

OUTPUT_DIR_ENV_VAR = "FEDTIER_OUTPUT_DIR"

EXPERIMENTS_DIR = "experiments"
GENERAL_CONFIG = "general.json"

# Quartile fractions of the running dataset-size sum, as (numerator, denominator)
Q1_FRACTION = (1, 4)
Q3_FRACTION = (3, 4)

ADAM_DEFAULTS = {
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
}

MAX_PARTITION_REDRAWS = 10

CSV_FLOAT_FORMAT = "%.6g"

# Keys mixed with the experiment seed so each random stream is independent of the others
SEED_STREAMS = {
    "data": 0,
    "partition": 1,
    "init": 2,
    "sample": 3,
    "select": 4,
}

__all__ = [
    "SCENARIOS",
    "OUTPUT_DIR_ENV_VAR",
    "EXPERIMENTS_DIR",
    "GENERAL_CONFIG",
    "Q1_FRACTION",
    "Q3_FRACTION",
    "ADAM_DEFAULTS",
    "MAX_PARTITION_REDRAWS",
    "CSV_FLOAT_FORMAT",
    "SEED_STREAMS",
]
