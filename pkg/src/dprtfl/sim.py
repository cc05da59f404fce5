"""Deterministic federated round loop with scripted faults.

One round:

1. Apply the round's fault events and resolve the coordinator (ARRP). A newly
   elected coordinator restores the global model from the checkpoint log.
2. Every active client trains locally from the global model.
3. Each client computes its delta, privatizes it, and commits to it with a
   keyed hash. Corruption faults scale the privatized delta either before
   signing (a malicious client) or after (tampering in transit).
4. The coordinator drops updates whose proofs fail and applies the
   size-weighted mean of the rest.
5. The new global model is screened for moment anomalies and checkpointed.
6. Test metrics are computed and server early stopping is updated.

The whole run is a pure function of the config: every random stream is
seeded from ``master_seed`` through ``derive_seed``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import arrp, dss, ebcd, ldp, tcm, zkip
from .config import FaultKind, SimConfig, derive_seed
from .data import ClientData, PartitionSpec, generate_synthetic, ingest_csv, partition, train_test_split
from .earlystop import EarlyStopper, Mode
from .errors import NoActiveClientsError, NoUpdatesError, SimulationError, UndefinedMetricError
from .metrics import accuracy, auc_roc, f1, to_predictions
from .model import ParamVector, l2_norm
from .tcm import SERVER_ID, Action, Contributor
from .trainer import Dataset, TrainConfig, log_loss, predict_proba, train

log = logging.getLogger(__name__)

DATA_SEED = "data"
SPLIT_SEED = "split"
SERVER_VAL_SEED = "server-val"
PARTITION_SEED = "partition"
TRAIN_SEED = "train"
NOISE_SEED = "noise"


@dataclass
class RoundMetrics:
    round: int
    accuracy: float
    f1: float
    auc: Optional[float]
    mean_noise_sigma: float
    aggregated_delta_l2: float
    zkip_failures: int
    ebcd_variance: float
    ebcd_skewness: float
    ebcd_kurtosis: float
    ebcd_alert: bool
    server_alive: bool
    coordinator_id: int
    tcm_entry_count: int
    server_best_val_acc: float
    active_client_count: int


@dataclass
class FederatedData:
    clients: list
    server_val: Dataset
    test: Dataset

    @property
    def dim(self) -> int:
        return self.test.dim

    def pooled_client_data(self) -> Dataset:
        parts = []
        for c in self.clients:
            parts.append(c.train)
            if c.val is not None:
                parts.append(c.val)
        return Dataset.concat(parts)


@dataclass
class SimResult:
    final_model: ParamVector
    history: list
    manifold: tcm.Manifold
    round_models: list = field(default_factory=list)
    coordinators: list = field(default_factory=list)
    stop_reason: str = "completed"


def prepare_data(cfg: SimConfig) -> FederatedData:
    seed = cfg.master_seed
    if cfg.data.source == "csv":
        train_all, test = ingest_csv(
            cfg.data.application_csv, cfg.data.credit_csv, seed=derive_seed(seed, SERVER_ID, 0, SPLIT_SEED)
        )
    else:
        full = generate_synthetic(
            cfg.data.n, cfg.data.d, cfg.data.class_balance,
            derive_seed(seed, SERVER_ID, 0, DATA_SEED), cfg.data.separation,
        )
        train_all, test = train_test_split(full, derive_seed(seed, SERVER_ID, 0, SPLIT_SEED), cfg.data.test_fraction)
    pool, server_val = train_test_split(
        train_all, derive_seed(seed, SERVER_ID, 0, SERVER_VAL_SEED), cfg.data.server_val_fraction
    )
    spec = PartitionSpec(
        num_clients=cfg.num_clients,
        dirichlet_alpha=cfg.dirichlet_alpha,
        seed=derive_seed(seed, SERVER_ID, 0, PARTITION_SEED),
        val_fraction=cfg.val_fraction,
    )
    return FederatedData(partition(pool, spec), server_val, test)


def _client_config(cfg: SimConfig, client_id: int, round: int) -> TrainConfig:
    t = cfg.train
    return TrainConfig(t.epochs, t.learning_rate, t.batch_size, t.l2_reg,
                       derive_seed(cfg.master_seed, client_id, round, TRAIN_SEED))


def local_update(cfg: SimConfig, client_id: int, round: int, client: ClientData, start: ParamVector) -> ParamVector:
    """Train one client, stopping on stalled validation loss and keeping the best epoch."""
    tcfg = _client_config(cfg, client_id, round)
    if client.val is None:
        return train(start, client.train, tcfg)
    stopper = EarlyStopper(Mode.MINIMIZE, cfg.client_patience, cfg.min_delta)
    stopper.observe(log_loss(start, client.val), start)

    def on_epoch(epoch, params):
        return stopper.observe(log_loss(params, client.val), params)

    local = train(start, client.train, tcfg, on_epoch)
    return stopper.best_state if stopper.should_stop else local


def evaluate(params: ParamVector, data: Dataset) -> tuple[float, float, Optional[float]]:
    probs = predict_proba(params, data.features)
    preds = to_predictions(probs)
    try:
        auc = auc_roc(probs, data.labels)
    except UndefinedMetricError:
        auc = None
    return accuracy(preds, data.labels), f1(preds, data.labels), auc


def _restore(m: tcm.Manifold, target_round: int) -> ParamVector:
    if target_round < 0:
        return m.entries[0].global_params
    return tcm.rollback(m, target_round)


@dataclass
class _Update:
    client_id: int
    delta: np.ndarray
    proof: zkip.IntegrityProof
    report: ldp.NoiseReport
    weight: int


def run(cfg: SimConfig, data: Optional[FederatedData] = None) -> SimResult:
    """Run the federated simulation described by ``cfg``.

    If every participant (server and all clients) is down in some round the
    run ends there; the returned history covers the completed rounds. Any
    unexpected failure raises ``SimulationError`` carrying the partial result.
    """
    if data is None:
        data = prepare_data(cfg)
    secret = zkip.SharedSecret(cfg.secret)
    global_model = ParamVector.zeros(data.dim)
    manifold = tcm.Manifold()
    manifold.append(0, global_model, SERVER_ID, Action.GENESIS)
    result = SimResult(global_model, [], manifold)

    all_clients = set(range(cfg.num_clients))
    crashed: set = set()
    role = arrp.RoleState(active_clients=set(all_clients))
    baseline = ebcd.EbcdBaseline(tolerance_factor=cfg.ebcd_tolerance)
    server_stop = EarlyStopper(Mode.MAXIMIZE, cfg.server_patience, cfg.min_delta)

    try:
        for r in range(cfg.num_rounds):
            dropped, corrupt = set(), {}
            for ev in cfg.faults.at(r):
                if ev.target == SERVER_ID:
                    role.server_alive = ev.kind is not FaultKind.CRASH
                elif ev.kind is FaultKind.CRASH:
                    crashed.add(ev.target)
                elif ev.kind is FaultKind.RECOVER:
                    crashed.discard(ev.target)
                elif ev.kind is FaultKind.DROPOUT:
                    dropped.add(ev.target)
                else:
                    corrupt[ev.target] = ev
            role.active_clients = all_clients - crashed - dropped

            # (1) coordinator resolution
            if role.server_alive and role.coordinator != SERVER_ID:
                arrp.on_server_recovery(role)
                manifold.append(r, global_model, SERVER_ID, Action.ELECTION)
            if arrp.detect_failure(role, arrp.coordinator_heartbeat(role)):
                try:
                    new_id = arrp.elect(role, failed=crashed | dropped)
                except NoActiveClientsError:
                    log.warning("round %d: no surviving participants, stopping", r)
                    result.stop_reason = "no surviving participants"
                    break
                manifold.append(r, global_model, new_id, Action.ELECTION)
                global_model = _restore(manifold, r - cfg.rollback_depth)
                manifold.append(r, global_model, new_id, Action.RECOVERY_ROLLBACK)
            role.check_invariants()
            coordinator = role.coordinator
            result.coordinators.append(coordinator)

            # (2)-(3) local training, privatization, commitment
            updates = []
            initial_models = []
            for k in sorted(role.active_clients):
                client = data.clients[k]
                local = local_update(cfg, k, r, client, global_model)
                if not baseline.established:
                    initial_models.append(local)
                delta = dss.compute_delta(local, global_model)
                private, report = ldp.privatize(delta, cfg.privacy, derive_seed(cfg.master_seed, k, r, NOISE_SEED))
                ev = corrupt.get(k)
                if ev is not None and ev.kind is FaultKind.CORRUPT_SIGNED:
                    private = private * ev.scale
                proof = zkip.generate_proof(private, secret, k, r)
                if ev is not None and ev.kind is FaultKind.CORRUPT_TAMPERED:
                    private = private * ev.scale
                weight = client.size if cfg.weight_by == "local" else client.train.n
                updates.append(_Update(k, private, proof, report, weight))
            if initial_models:
                baseline = ebcd.establish_baseline(initial_models, cfg.ebcd_tolerance)

            # (4) verification and aggregation
            passed = {u.client_id: zkip.verify_proof(u.delta, u.proof, secret) for u in updates}
            if cfg.ebcd_screen_clients and baseline.established:
                for u in updates:
                    if passed[u.client_id]:
                        alert, _ = ebcd.check(dss.apply_delta(global_model, u.delta), baseline)
                        if alert:
                            log.info("round %d: client %d update screened out", r, u.client_id)
                            passed[u.client_id] = False
            zkip_failures = sum(not zkip.verify_proof(u.delta, u.proof, secret) for u in updates)
            contributors = [
                Contributor(u.client_id, u.weight, u.report.sigma, passed[u.client_id]) for u in updates
            ]
            sigmas = [u.report.sigma for u in updates]
            mean_sigma = float(np.mean(sigmas)) if sigmas else 0.0
            try:
                agg = dss.aggregate([(u.client_id, u.delta, u.weight) for u in updates if passed[u.client_id]])
            except NoUpdatesError:
                agg = None

            # (5) anomaly screening and checkpointing
            if agg is None:
                delta_norm = 0.0
                manifold.append(r, global_model, coordinator, Action.SKIPPED_ROUND, contributors)
                if baseline.established:
                    alert, stats = ebcd.check(global_model, baseline)
                else:
                    alert, stats = False, ebcd.compute_moments(global_model)
            else:
                delta_norm = l2_norm(agg)
                candidate = dss.apply_delta(global_model, agg)
                alert, stats = ebcd.check(candidate, baseline)
                manifold.append(r, candidate, coordinator, Action.AGGREGATE, contributors)
                if alert and cfg.ebcd_rollback:
                    log.info("round %d: EBCD alert, rolling back", r)
                    global_model = _restore(manifold, r - cfg.rollback_depth)
                    manifold.append(r, global_model, coordinator, Action.RECOVERY_ROLLBACK)
                else:
                    if alert:
                        log.info("round %d: EBCD alert", r)
                    global_model = candidate

            # (6) metrics and server early stopping
            acc, f1_score, auc = evaluate(global_model, data.test)
            val_acc, _, _ = evaluate(global_model, data.server_val)
            stop = server_stop.observe(val_acc, global_model)
            if stop:
                best_acc, best_model = server_stop.best()
                global_model = best_model
                manifold.append(r, global_model, coordinator, Action.RECOVERY_ROLLBACK)
            result.round_models.append(global_model)
            result.history.append(RoundMetrics(
                round=r,
                accuracy=acc,
                f1=f1_score,
                auc=auc,
                mean_noise_sigma=mean_sigma,
                aggregated_delta_l2=delta_norm,
                zkip_failures=int(zkip_failures),
                ebcd_variance=stats.variance,
                ebcd_skewness=stats.skewness,
                ebcd_kurtosis=stats.kurtosis,
                ebcd_alert=bool(alert),
                server_alive=role.server_alive,
                coordinator_id=coordinator,
                tcm_entry_count=len(manifold),
                server_best_val_acc=server_stop.best_value,
                active_client_count=len(role.active_clients),
            ))
            if stop:
                result.stop_reason = f"server early stop at round {r}"
                break
    except Exception as exc:
        result.final_model = global_model
        raise SimulationError(f"simulation failed: {exc}", partial=result) from exc

    result.final_model = global_model
    return result


def histories_equal(a: list, b: list) -> bool:
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        for name in x.__dataclass_fields__:
            u, v = getattr(x, name), getattr(y, name)
            if isinstance(u, float) and isinstance(v, float):
                if np.float64(u).tobytes() != np.float64(v).tobytes():
                    return False
            elif u != v:
                return False
    return True


def replay_check(cfg: SimConfig) -> bool:
    a, b = run(cfg), run(cfg)
    return histories_equal(a.history, b.history) and a.final_model.bitwise_equal(b.final_model)


def centralized_baseline(cfg: SimConfig, data: Optional[FederatedData] = None) -> tuple[ParamVector, float]:
    """Train one model on the pooled client data for rounds * client_epochs epochs.

    Returns the model and its test accuracy; the reference point for the
    federated run's utility.
    """
    if data is None:
        data = prepare_data(cfg)
    t = cfg.train
    tcfg = TrainConfig(max(1, cfg.num_rounds * t.epochs), t.learning_rate, t.batch_size, t.l2_reg,
                       derive_seed(cfg.master_seed, SERVER_ID, 0, TRAIN_SEED))
    model = train(ParamVector.zeros(data.dim), data.pooled_client_data(), tcfg)
    return model, evaluate(model, data.test)[0]
