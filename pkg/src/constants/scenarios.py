# Label-skew scenarios: clients are split into len(alpha_list) contiguous groups,
# group i drawing its Dirichlet class proportions with alpha_list[i].
# clients_per_round follows each scenario's sampling rate.
SCENARIOS = {
    "graded": {
        "alpha_list": (0.001, 0.01, 0.1, 0.5, 1.0),
        "n_clients": 50,
        "clients_per_round": 10,
    },
    "skewed-0.5": {
        "alpha_list": (0.001, 0.002, 0.005, 0.01, 0.5),
        "n_clients": 50,
        "clients_per_round": 10,
    },
    "skewed-0.1": {
        "alpha_list": (0.001, 0.002, 0.005, 0.01, 0.1),
        "n_clients": 50,
        "clients_per_round": 10,
    },
    "mixed-0.5": {
        "alpha_list": (0.001, 0.002, 0.005, 0.01, 0.5),
        "n_clients": 100,
        "clients_per_round": 5,
    },
    "mixed-0.2": {
        "alpha_list": (0.001, 0.002, 0.005, 0.01, 0.2),
        "n_clients": 100,
        "clients_per_round": 5,
    },
    "extreme": {
        "alpha_list": (0.001,),
        "n_clients": 100,
        "clients_per_round": 5,
    },
    "moderate": {
        "alpha_list": (0.1, 0.1, 0.1, 0.3, 0.3),
        "n_clients": 100,
        "clients_per_round": 10,
    },
    "ladder": {
        "alpha_list": (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5),
        "n_clients": 100,
        "clients_per_round": 10,
    },
    "wide": {
        "alpha_list": (0.1,),
        "n_clients": 250,
        "clients_per_round": 32,
    },
    "very-wide": {
        "alpha_list": (0.1,),
        "n_clients": 500,
        "clients_per_round": 29,
    },
}
