"""Synchronous federated training rounds with sparsified uploads.

One round: the server broadcasts the global parameters to the selected
clients, each client runs local SGD on its partition, uploads a
(possibly sparsified) update, and the server forms the data-weighted
average of the reconstructed client models. Communication is metered
through the wire codec: downlink as one dense encoding per selected
client, uplink as the actual encoded size of each upload.

Two sparsification sites are supported:

* "uploaded_delta" (default): clients run plain dense SGD locally and
  sparsify the total round delta (w_local - w_global) for upload. This
  is the site that actually saves uplink bytes.
* "local_gradient": every batch gradient is sparsified and the
  sparsified gradient is applied locally; the full local model is
  uploaded (dense cost).

Determinism: every stochastic choice draws from a generator seeded by
(experiment_seed, stream tag, ...) so results do not depend on client
scheduling; aggregation always combines updates in ascending client_id
order. RNG stream tags: 1 client selection, 2 client training, 10 data
generation, 11 train/test split, 12 partitioning.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import model as model_ops
from .config import CsvDataConfig, ExperimentConfig, SyntheticDataConfig
from .data import Dataset, gen_synthetic, load_csv, normalize, train_test_split
from .model import ModelSpec
from .partition import Partition, partition_dataset
from .sparsify import SparseUpdate, SparsityPolicy, densify, encode, encoded_size, sparsify

_SELECT_TAG = 1
_CLIENT_TAG = 2
_DATA_TAG = 10
_SPLIT_TAG = 11
_PARTITION_TAG = 12


class TrainingDiverged(RuntimeError):
    """A client produced non-finite parameters during local training."""


@dataclass(frozen=True)
class TrainingConfig:
    rounds: int
    local_epochs: int
    learning_rate: float
    batch_size: int
    policy: SparsityPolicy
    participation: float = 1.0
    sparsify_site: str = "uploaded_delta"

    def __post_init__(self):
        if self.rounds < 1 or self.local_epochs < 1:
            raise ValueError("rounds and local_epochs must be >= 1")
        # lr 0 is allowed here (conservation checks rely on it); the
        # user-facing ExperimentConfig requires lr > 0.
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0.0 < self.participation <= 1.0):
            raise ValueError("participation must be in (0, 1]")
        if self.sparsify_site not in ("uploaded_delta", "local_gradient"):
            raise ValueError(f"unknown sparsify_site {self.sparsify_site!r}")


@dataclass
class ClientState:
    client_id: int
    partition: Partition


@dataclass
class ClientUpdate:
    """One client's upload plus its bookkeeping.

    In uploaded_delta mode, `update` holds the sparsified round delta
    (what goes on the wire) and `retained_params` the client's exact
    post-training parameter values at update.indices. The server
    reconstruction prev + densify(delta) is evaluated through those
    exact values: per retained coordinate the two are equal in real
    arithmetic, but only the substitution keeps the dense-policy case
    bit-identical to uncompressed training.

    In local_gradient mode the full local model travels in `new_params`.
    """

    client_id: int
    sample_count: int
    site: str
    update: SparseUpdate | None = None
    retained_params: np.ndarray | None = None
    new_params: np.ndarray | None = None
    uplink_bytes: int = 0


@dataclass
class RoundMetrics:
    round: int
    global_loss: float
    top1_accuracy: float
    uplink_bytes: int
    downlink_bytes: int
    elapsed_s: float

    CSV_FIELDS = ("round", "global_loss", "top1_accuracy",
                  "uplink_bytes", "downlink_bytes")

    def csv_row(self) -> str:
        """Deterministic row for metrics.csv (wall time deliberately excluded)."""
        return (f"{self.round},{self.global_loss!r},{self.top1_accuracy!r},"
                f"{self.uplink_bytes},{self.downlink_bytes}")


@dataclass
class ServerState:
    global_params: np.ndarray
    round: int = 0
    history: list[RoundMetrics] = field(default_factory=list)


def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def client_local_train(client: ClientState, global_params: np.ndarray,
                       cfg: TrainingConfig, model_spec: ModelSpec,
                       dataset: Dataset, rng: np.random.Generator,
                       round_index: int = 0) -> ClientUpdate:
    """Run local SGD from the broadcast parameters and build the upload.

    uploaded_delta: plain SGD on the local copy; alongside it the round
    delta is accumulated directly from the applied steps, so a single
    step's delta is exactly -lr * gradient. The delta is sparsified with
    cfg.policy at the end.

    local_gradient: each batch gradient is sparsified first and the
    sparsified gradient is applied; the dense local model is uploaded.
    """
    idx = client.partition.sample_indices
    if idx.shape[0] == 0:
        raise ValueError(f"client {client.client_id} has an empty partition")
    inputs = dataset.inputs[idx]
    labels = dataset.labels[idx]
    w = np.array(global_params, dtype=np.float64, copy=True)
    delta = np.zeros_like(w) if cfg.sparsify_site == "uploaded_delta" else None

    for epoch in range(cfg.local_epochs):
        for batch_no, batch in enumerate(_minibatches(idx.shape[0], cfg.batch_size, rng)):
            grad = model_ops.backward(model_spec, w, inputs[batch], labels[batch])
            if cfg.sparsify_site == "local_gradient":
                seed = int(rng.integers(2 ** 63)) if cfg.policy.kind == "random" else None
                step = cfg.learning_rate * densify(sparsify(grad, cfg.policy, seed))
                w = w - step
            else:
                step = cfg.learning_rate * grad
                w = w - step
                delta -= step
            if not np.isfinite(w).all():
                raise TrainingDiverged(
                    f"client {client.client_id}: non-finite parameters in round "
                    f"{round_index}, epoch {epoch}, batch {batch_no}"
                )

    if cfg.sparsify_site == "local_gradient":
        return ClientUpdate(
            client_id=client.client_id,
            sample_count=int(idx.shape[0]),
            site=cfg.sparsify_site,
            new_params=w,
            uplink_bytes=encoded_size(w.shape[0]),
        )
    seed = int(rng.integers(2 ** 63)) if cfg.policy.kind == "random" else None
    update = sparsify(delta, cfg.policy, seed,
                      round=round_index, client_id=client.client_id)
    return ClientUpdate(
        client_id=client.client_id,
        sample_count=int(idx.shape[0]),
        site=cfg.sparsify_site,
        update=update,
        retained_params=w[update.indices].copy(),
        uplink_bytes=len(encode(update)),
    )


def reconstruct_params(update: ClientUpdate, prev: np.ndarray) -> np.ndarray:
    """The client model the server aggregates for this upload.

    uploaded_delta: prev + densify(delta), evaluated exactly through the
    carried parameter values when available (see ClientUpdate); falls
    back to the additive form for wire-decoded updates.
    """
    if update.site == "local_gradient":
        if update.new_params is None:
            raise ValueError("local_gradient update is missing new_params")
        if update.new_params.shape != prev.shape:
            raise ValueError(
                f"client {update.client_id} params have shape "
                f"{update.new_params.shape}, expected {prev.shape}"
            )
        return update.new_params
    if update.update is None:
        raise ValueError("uploaded_delta update is missing its sparse delta")
    if update.update.dim != prev.shape[0]:
        raise ValueError(
            f"client {update.client_id} delta has dim {update.update.dim}, "
            f"expected {prev.shape[0]}"
        )
    if update.retained_params is None:
        return prev + densify(update.update)
    out = prev.copy()
    out[update.update.indices] = update.retained_params
    return out


def aggregate(updates: list[ClientUpdate], prev: np.ndarray) -> np.ndarray:
    """Data-weighted model average sum_i (n_i / n) * w_i.

    Updates are combined in ascending client_id order regardless of the
    list order. A zero sample count is rejected rather than ignored.
    When every reconstructed model is identical the average is that
    model exactly (this keeps lr = 0 rounds a strict no-op).
    """
    if not updates:
        raise ValueError("aggregate needs at least one update")
    for u in updates:
        if u.sample_count <= 0:
            raise ValueError(f"client {u.client_id} has sample_count {u.sample_count}")
    ordered = sorted(updates, key=lambda u: u.client_id)
    total = sum(u.sample_count for u in ordered)
    models = [reconstruct_params(u, prev) for u in ordered]
    if all(np.array_equal(m, models[0]) for m in models[1:]):
        return models[0].copy()
    acc = np.zeros_like(prev)
    for u, m in zip(ordered, models):
        acc += (u.sample_count / total) * m
    return acc


def global_loss(model_spec: ModelSpec, params: np.ndarray, dataset: Dataset,
                partitions: list[Partition]) -> float:
    """Weighted sum of per-client mean cross-entropy, weights |D_i| / |D|."""
    if not partitions:
        raise ValueError("global_loss needs at least one partition")
    total = sum(len(p) for p in partitions)
    if any(len(p) == 0 for p in partitions):
        raise ValueError("global_loss over an empty partition")
    value = 0.0
    for p in partitions:
        idx = p.sample_indices
        value += (len(p) / total) * model_ops.loss(
            model_spec, params, dataset.inputs[idx], dataset.labels[idx])
    return value


def _selection_count(participation: float, n_clients: int) -> int:
    return max(1, math.ceil(participation * n_clients - 1e-9))


def run_round(server: ServerState, clients: list[ClientState], cfg: TrainingConfig,
              model_spec: ModelSpec, train_ds: Dataset, test_ds: Dataset,
              experiment_seed: int) -> RoundMetrics:
    """Execute one communication round and append its metrics.

    Selects ceil(participation * N) clients uniformly (seeded by round),
    meters the dense broadcast per selected client as downlink, trains
    each selected client serially, aggregates, then evaluates: loss over
    the client training partitions, top-1 accuracy on the test set.
    """
    t0 = time.perf_counter()
    t = server.round
    n = len(clients)
    k = _selection_count(cfg.participation, n)
    select_rng = np.random.default_rng([experiment_seed, _SELECT_TAG, t])
    selected = sorted(int(i) for i in select_rng.choice(n, size=k, replace=False))

    dim = server.global_params.shape[0]
    downlink = k * encoded_size(dim)
    updates = []
    for cid in selected:
        rng = np.random.default_rng([experiment_seed, _CLIENT_TAG, cid, t])
        updates.append(client_local_train(
            clients[cid], server.global_params, cfg, model_spec, train_ds, rng,
            round_index=t))
    uplink = sum(u.uplink_bytes for u in updates)

    new_params = aggregate(updates, server.global_params)
    if not np.isfinite(new_params).all():
        raise TrainingDiverged(f"aggregated parameters non-finite in round {t}")

    partitions = [c.partition for c in clients]
    loss_value = global_loss(model_spec, new_params, train_ds, partitions)
    accuracy = model_ops.evaluate(model_spec, new_params, test_ds.inputs, test_ds.labels)

    metrics = RoundMetrics(
        round=t,
        global_loss=loss_value,
        top1_accuracy=accuracy,
        uplink_bytes=uplink,
        downlink_bytes=downlink,
        elapsed_s=time.perf_counter() - t0,
    )
    server.global_params = new_params
    server.round = t + 1
    server.history.append(metrics)
    return metrics


@dataclass
class ExperimentResult:
    history: list[RoundMetrics]
    final_params: np.ndarray
    model_spec: ModelSpec
    partitions: list[Partition]
    final_accuracy: float
    final_global_loss: float
    total_uplink_bytes: int
    total_downlink_bytes: int
    wall_time_s: float


def build_dataset(config: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """Materialize the configured dataset and its train/test split."""
    if isinstance(config.dataset, SyntheticDataConfig):
        ds = gen_synthetic(
            config.dataset.classes, config.dataset.per_class,
            config.dataset.input_dim, config.dataset.separation,
            [config.seed, _DATA_TAG])
        train, test = train_test_split(ds, config.test_fraction,
                                       [config.seed, _SPLIT_TAG])
        return train, test
    assert isinstance(config.dataset, CsvDataConfig)
    ds = load_csv(config.dataset.path, config.dataset.input_dim,
                  config.dataset.classes, skip_header=config.dataset.skip_header)
    train, test = train_test_split(ds, config.test_fraction,
                                   [config.seed, _SPLIT_TAG])
    if config.dataset.normalize:
        train, stats = normalize(train)
        test = stats.apply(test)
    return train, test


def training_config(config: ExperimentConfig) -> TrainingConfig:
    return TrainingConfig(
        rounds=config.rounds,
        local_epochs=config.local_epochs,
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        policy=config.policy,
        participation=config.participation,
        sparsify_site=config.sparsify_site,
    )


def run_experiment(config: ExperimentConfig, on_round=None) -> ExperimentResult:
    """End-to-end run: data, split, partition, T rounds. Deterministic
    given config.seed (clients train serially)."""
    start = time.perf_counter()
    train_ds, test_ds = build_dataset(config)
    partitions = partition_dataset(train_ds.labels, config.clients, config.alpha,
                                   [config.seed, _PARTITION_TAG])
    spec = ModelSpec(
        layer_sizes=(train_ds.input_dim, *config.model.hidden, train_ds.class_count),
        activation=config.model.activation,
        seed=config.seed,
    )
    cfg = training_config(config)
    server = ServerState(global_params=model_ops.init_params(spec))
    clients = [ClientState(p.client_id, p) for p in partitions]
    for _ in range(config.rounds):
        metrics = run_round(server, clients, cfg, spec, train_ds, test_ds, config.seed)
        if on_round is not None:
            on_round(metrics)
    last = server.history[-1]
    return ExperimentResult(
        history=server.history,
        final_params=server.global_params,
        model_spec=spec,
        partitions=partitions,
        final_accuracy=last.top1_accuracy,
        final_global_loss=last.global_loss,
        total_uplink_bytes=sum(m.uplink_bytes for m in server.history),
        total_downlink_bytes=sum(m.downlink_bytes for m in server.history),
        wall_time_s=time.perf_counter() - start,
    )
