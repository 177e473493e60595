import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import ExperimentConfig, ModelKind, UpdateSignal
from src.constants import SEED_STREAMS
from src.datagen import dirichlet_partition, generate_synthetic_dataset
from src.helpers import derive_seed
from src.metrics import IterationRecord, MetricsLog, RoundMetrics
from src.model import (
    ModelError,
    client_seed,
    component_magnitudes,
    evaluate,
    evaluate_loss,
    init_params,
    local_train,
    save_checkpoint,
)
from src.selection import random_select, split_clients
from src.strategy_manager import create_strategy
from src.types import ClientDataset, ClientState, ClientSummary, GradientUpdate, ModelParams, RoundState

logger = logging.getLogger("federation")


class FederationError(Exception):
    """Base exception for round orchestration errors"""
    pass


class AggregationError(FederationError):
    pass


class ClientTrainingError(FederationError):
    """Local training failed for one client; the cause is chained"""

    def __init__(self, round_index: int, iteration: int, client_id: int, cause: Exception):
        self.round_index = round_index
        self.iteration = iteration
        self.client_id = client_id
        super().__init__(
            f"Client {client_id} failed in round {round_index}, iteration {iteration}: {cause}"
        )


@dataclass
class ClientResult:
    params: ModelParams
    loss: float
    update: GradientUpdate


def aggregate(updates: Sequence[Tuple[ModelParams, int]]) -> ModelParams:
    """
    Size-weighted average of client parameters.

    Terms are accumulated in the order given; callers pass clients in
    ascending id order so the floating-point reduction is reproducible.

    Raises:
        AggregationError: no updates, non-positive sizes or mismatched shapes
    """
    if not updates:
        raise AggregationError("Cannot aggregate an empty list of updates")
    reference = updates[0][0]
    for params, size in updates:
        if size <= 0:
            raise AggregationError(f"Aggregation weight must be positive, got {size}")
        if len(params.layers) != len(reference.layers) or any(
            w.shape != rw.shape or b.shape != rb.shape
            for (w, b), (rw, rb) in zip(params.layers, reference.layers)
        ):
            raise AggregationError(f"Shape mismatch: {params.shapes} vs {reference.shapes}")
    if len(updates) == 1:
        return reference.copy()

    total = float(sum(size for _, size in updates))
    layers = []
    for i, (rw, rb) in enumerate(reference.layers):
        w = np.zeros_like(rw)
        b = np.zeros_like(rb)
        for params, size in updates:
            coef = size / total
            w += coef * params.layers[i][0]
            b += coef * params.layers[i][1]
        layers.append((w, b))
    return ModelParams(layers)


def build_clients(config: ExperimentConfig, seed: int) -> List[ClientDataset]:
    """Synthetic pool and Dirichlet partition for a seed; independent of the strategy"""
    data = config.data
    pool = generate_synthetic_dataset(
        data.n_classes, data.dim, data.n_samples, data.class_separation,
        derive_seed(seed, SEED_STREAMS["data"]),
    )
    return dirichlet_partition(pool, config.partition_plan(derive_seed(seed, SEED_STREAMS["partition"])))


class FederatedServer:
    """
    Owns the client population, the global model and the client registry for one seed.

    The pool, partition and initial model depend only on the seed, so every
    strategy sees the same clients for a given seed.
    """

    def __init__(self, config: ExperimentConfig, seed: int, workers: Optional[int] = None):
        self.config = config
        self.seed = seed
        self.workers = workers or config.federation.workers
        self.strategy = create_strategy(config)

        data = config.data
        clients = build_clients(config, seed)
        hidden = (data.hidden_dim,) if data.model == ModelKind.MLP else ()
        self.initial_params = init_params(data.dim, data.n_classes, hidden, derive_seed(seed, SEED_STREAMS["init"]))
        self.global_params = self.initial_params.copy()

        # Reported losses start at each client's loss under the initial model
        self.clients: Dict[int, ClientState] = {
            c.client_id: ClientState(c, loss=evaluate_loss(self.initial_params, c.train)) for c in clients
        }
        self.iteration_records: List[IterationRecord] = []
        logger.debug(f"Server ready: {len(self.clients)} clients, strategy {self.strategy.name}, seed {seed}")

    @property
    def client_ids(self) -> List[int]:
        return sorted(self.clients)

    def reported_summaries(self) -> List[ClientSummary]:
        """Latest magnitude/loss each client reported, in id order"""
        return [
            ClientSummary(s.client_id, s.magnitude or 0.0, s.size, s.loss or 0.0)
            for s in (self.clients[k] for k in self.client_ids)
        ]

    def current_loss_summaries(self, params: ModelParams) -> List[ClientSummary]:
        """Every client's training loss under params, scored fresh"""
        return [
            ClientSummary(k, 0.0, self.clients[k].size, evaluate_loss(params, self.clients[k].data.train))
            for k in self.client_ids
        ]

    def _train_one(self, client_id: int, params: ModelParams, round_index: int, iteration: int) -> ClientResult:
        cfg = self.config.training.model_copy(update={
            "learning_rate": self.config.training.learning_rate_for_round(round_index),
            "mu": self.config.effective_mu,
            "seed": client_seed(self.seed, round_index, iteration, client_id),
        })
        try:
            local, loss, update = local_train(params, self.clients[client_id].data.train, cfg)
        except ModelError as e:
            raise ClientTrainingError(round_index, iteration, client_id, e) from e
        return ClientResult(local, loss, update)

    def train_clients(
        self,
        client_ids: Sequence[int],
        params: ModelParams,
        round_index: int,
        iteration: int,
    ) -> Dict[int, ClientResult]:
        """Train each client from params; results come back keyed by id whatever the worker count"""
        ids = sorted(client_ids)
        if self.workers > 1 and len(ids) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(lambda k: self._train_one(k, params, round_index, iteration), ids))
        else:
            results = [self._train_one(k, params, round_index, iteration) for k in ids]
        return dict(zip(ids, results))

    def _signal(self, result: ClientResult) -> float:
        signal = self.config.selection.update_signal
        if signal == UpdateSignal.LOSS:
            return result.loss
        if signal == UpdateSignal.GRADIENT:
            return result.update.magnitude
        weight, bias = component_magnitudes(result.update)
        return bias if signal == UpdateSignal.BIAS else weight

    def run_iteration(self, state: RoundState, split: bool = True) -> Tuple[RoundState, bool]:
        """
        Train the hard set from the state's global model, aggregate, then split.

        Args:
            state: round state whose hard_set is trained this iteration
            split: False for single-pass strategies; the iteration is then terminal

        Returns:
            (next state carrying the aggregated model and next hard set, terminated)

        Raises:
            ClientTrainingError: a client's local training diverged
            AggregationError: the aggregated model is not finite
        """
        if not state.hard_set:
            raise FederationError(f"Round {state.round_index}: hard set is empty")
        fed = self.config.federation
        r, t = state.round_index, state.iteration_index
        hard = sorted(state.hard_set)

        start = time.perf_counter()
        results = self.train_clients(hard, state.global_params, r, t)
        train_ms = (time.perf_counter() - start) * 1000.0

        new_params = aggregate([(results[k].params, self.clients[k].size) for k in hard])
        if not new_params.is_finite():
            raise AggregationError(f"Round {r}, iteration {t}: aggregated model is not finite")

        for k in hard:
            client = self.clients[k]
            client.magnitude = results[k].update.magnitude
            client.loss = results[k].loss
            client.times_trained += 1

        decision = None
        next_hard: List[int] = []
        split_ms = 0.0
        if split and len(hard) >= 2:
            summaries = [
                ClientSummary(k, self._signal(results[k]), self.clients[k].size, results[k].loss) for k in hard
            ]
            start = time.perf_counter()
            decision = split_clients(
                summaries,
                self.config.selection.quartile_range,
                self.config.selection.count_weighted_clusters,
            )
            split_ms = (time.perf_counter() - start) * 1000.0
            next_hard = sorted(decision.hard_ids)
            terminated = decision.terminal or len(next_hard) < fed.eta or t + 1 >= fed.max_iterations
            logger.debug(
                f"Round {r}, iteration {t}: tau={decision.tau_split} "
                f"(k_q1={decision.k_q1}, k_q3={decision.k_q3}), hard set {len(hard)} -> {len(next_hard)}"
            )
        else:
            terminated = True

        self.iteration_records.append(IterationRecord(
            round_index=r,
            iteration=t,
            trained=hard,
            split=decision,
            next_hard_size=len(next_hard),
            terminal=terminated,
            mean_loss=float(np.mean([results[k].loss for k in hard])),
            sim_train_ms=train_ms,
            sim_split_ms=split_ms,
        ))
        history = state.history + ([decision] if decision is not None else [])
        next_state = RoundState(r, t + 1, new_params, sample=state.sample, hard_set=next_hard, history=history)
        return next_state, terminated

    def run_round(self, round_index: int) -> RoundMetrics:
        """Select, run iterations until termination and carry the final model into the next round"""
        k = self.config.federation.clients_per_round
        sample = random_select(self.client_ids, k, derive_seed(self.seed, SEED_STREAMS["sample"], round_index))
        state = RoundState(round_index, 0, self.global_params, sample=sample)
        selected = self.strategy.select(self, state, derive_seed(self.seed, SEED_STREAMS["select"], round_index))
        state.hard_set = sorted(selected)

        first_record = len(self.iteration_records)
        terminated = False
        while not terminated:
            state, terminated = self.run_iteration(state, split=self.strategy.is_iterative)
        self.global_params = state.global_params

        records = self.iteration_records[first_record:]
        participants = sorted({c for rec in records for c in rec.trained})
        tests = [self.clients[c].data.test for c in self.client_ids]
        if self.config.federation.eval_participants_only:
            own = [self.clients[c].data.test for c in participants]
            if any(len(t) for t in own):
                tests = own
            else:
                logger.warning(f"Round {round_index}: participants hold no test samples, evaluating on every client")
        return RoundMetrics(
            round_index=round_index,
            accuracy=evaluate(self.global_params, tests),
            mean_loss=float(np.mean([rec.mean_loss for rec in records])),
            iterations=len(records),
            clients_trained=sum(rec.hard_size for rec in records),
            participants=participants,
            sim_train_ms=sum(rec.sim_train_ms for rec in records),
            sim_split_ms=sum(rec.sim_split_ms for rec in records),
        )

    def _maybe_checkpoint(self, round_index: int) -> None:
        every = self.config.federation.checkpoint_every
        if every and (round_index + 1) % every == 0:
            path = Path(self.config.output.output_dir) / f"checkpoint_{self.seed}_r{round_index + 1}.bin"
            save_checkpoint(self.global_params, path)
            logger.info(f"Saved checkpoint {path}")

    def run_experiment(self) -> MetricsLog:
        """Run every configured round from the initial model; R=0 returns the initial model untouched"""
        log = MetricsLog(
            strategy=self.strategy.name,
            seed=self.seed,
            initial_accuracy=evaluate(self.global_params, [c.data.test for c in self.clients.values()]),
        )
        for r in range(self.config.federation.rounds):
            metrics = self.run_round(r)
            log.rounds.append(metrics)
            logger.info(
                f"[{self.strategy.name} seed={self.seed}] round {r + 1}/{self.config.federation.rounds}: "
                f"accuracy={metrics.accuracy:.4f}, iterations={metrics.iterations}, trained={metrics.clients_trained}"
            )
            self._maybe_checkpoint(r)
        log.iterations = list(self.iteration_records)
        log.final_params = self.global_params.copy()
        return log


def run_experiment(config: ExperimentConfig, seed: int, workers: Optional[int] = None) -> MetricsLog:
    return FederatedServer(config, seed, workers).run_experiment()
