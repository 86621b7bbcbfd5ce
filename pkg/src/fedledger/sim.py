"""Round-driven federation of sensor-fed learner nodes over the ledger.

Each round every node, in fixed order: securely aggregates one batch per
sensor, absorbs any peer payloads that changed on the ledger since it last
looked, trains on the aggregated batch, and — policy permitting — uploads
its serialized buffer as a prototype transaction.  An epoch is one full
pass of every node over its local stream.

Determinism: all randomness flows from the experiment seed through named
SeedSequence streams, and the exported metrics use a simulated clock (a
fixed per-operation cost model), so identical config+seed reproduces the
metrics CSV byte for byte.  Real wall times are measured separately and
reported only in the run summary.
"""

import hashlib
import logging
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import wire
from .data import NON_IID, DatasetSpec, load_csv, partition, split_train_val
from .errors import ArgumentError, ConfigError
from .ilvq import IlvqModel, Sample
from .kernels import min_mse
from .ledger import Address, GasSchedule, Ledger, decimal_str
from .secure_agg import AggregationSession, QuantizationConfig, aggregate_samples

log = logging.getLogger("fedledger.sim")

CENTRALIZED = "centralized"
FEDERATED_UNLIMITED = "federated_unlimited"
FEDERATED_LIMITED = "federated_limited"
POLICIES = (CENTRALIZED, FEDERATED_UNLIMITED, FEDERATED_LIMITED)

ATTACK_NONE = "none"
ATTACK_LABEL_FLIP = "label_flip"
ATTACK_INVERSION = "inversion"
ATTACKS = (ATTACK_NONE, ATTACK_LABEL_FLIP, ATTACK_INVERSION)

METRICS_HEADER = "epoch,node,accuracy,tx,bytes,gas,eth,elapsed_ms"


@dataclass
class AttackSpec:
    kind: str = ATTACK_NONE
    malicious_fraction: float = 0.0


@dataclass
class CostModel:
    """Fixed per-operation costs backing the simulated clock (microseconds,
    except the per-transaction charge, which models chain inclusion)."""

    train_step_us: int = 40
    absorb_proto_us: int = 40
    agg_slot_us: int = 80
    eval_sample_us: int = 5
    tx_ms: int = 170


@dataclass
class SimulationConfig:
    dataset: DatasetSpec
    nodes: int = 4
    sensors_per_node: int = 1
    batch_size: int = 8
    epochs: int = 10
    policy: str = FEDERATED_LIMITED
    trust_ratio: float = 0.95
    payload_bytes: int = 2104
    seed: int = 1
    attack: AttackSpec = field(default_factory=AttackSpec)
    val_ratio: float = 0.10
    partition_mode: str = NON_IID
    dirichlet_alpha: float = 0.5
    alpha_winner: float = 0.9
    alpha_runner: float = 0.1
    agg_threshold: int = 2
    agg_parties: int = 3
    agg_redundancy: int = 1
    quant_scale_bits: int = 20
    schedule: GasSchedule = field(default_factory=GasSchedule)
    recompute_all_thresholds: bool = False
    cost: CostModel = field(default_factory=CostModel)

    def validate(self) -> None:
        def bad(fieldpath, msg):
            raise ConfigError(msg, field=fieldpath)

        if self.nodes < 1:
            bad("topology.nodes", "need at least one node")
        if self.sensors_per_node < 1:
            bad("topology.sensors_per_node", "need at least one sensor per node")
        if self.batch_size < 1:
            bad("topology.batch_size", "batch size must be positive")
        if self.epochs < 1:
            bad("topology.epochs", "need at least one epoch")
        if self.policy not in POLICIES:
            bad("policy.mode", f"unknown policy {self.policy!r}")
        if not (0.0 < self.trust_ratio <= 1.0):
            bad("policy.trust_ratio", "trust ratio must lie in (0,1]")
        if not (0.0 < self.val_ratio < 1.0):
            bad("policy.val_ratio", "validation ratio must lie in (0,1)")
        if self.payload_bytes < 1:
            bad("ledger.payload_bytes", "payload constant must be positive")
        if self.attack.kind not in ATTACKS:
            bad("attack.kind", f"unknown attack {self.attack.kind!r}")
        if not (0.0 <= self.attack.malicious_fraction <= 1.0):
            bad("attack.malicious_fraction", "fraction must lie in [0,1]")
        if not (1 <= self.agg_threshold <= self.agg_parties):
            bad("topology.agg_threshold", "need 1 <= t <= parties")
        if self.agg_redundancy < 0:
            bad("topology.agg_redundancy", "redundancy must be >= 0")
        if not (1 <= self.quant_scale_bits <= 40):
            bad("topology.quant_scale_bits", "scale bits must lie in [1,40]")


@dataclass
class NodeState:
    node_id: int
    address: Address
    model: IlvqModel
    train_samples: list[Sample]
    val_samples: list[Sample]
    malicious: bool = False
    best_accuracy: float = 0.0
    tx_total: int = 0
    tx_epoch: int = 0
    gas_spent: Fraction = Fraction(0)
    eth_spent: Fraction = Fraction(0)
    sim_elapsed_us: int = 0
    seen_payloads: dict[str, bytes] = field(default_factory=dict)

    def accuracy(self) -> float:
        if len(self.model) == 0:
            return 0.0
        return self.model.evaluate(self.val_samples)


@dataclass
class NodeEpochRow:
    epoch: int
    node: int
    accuracy: float
    tx: int
    bytes: int
    gas: Fraction
    eth: Fraction
    elapsed_ms: int


@dataclass
class EpochMetrics:
    epoch: int
    rows: list[NodeEpochRow]
    mean_accuracy: float
    transactions: int
    bytes: int
    cumulative_gas: Fraction
    cumulative_eth: Fraction
    wall_ms: float = 0.0


@dataclass
class InversionReport:
    """Per-sample nearest-payload reconstruction error statistics."""

    candidates: int
    min_mse: Optional[float]
    below_0_1: int
    below_0_01: int


def flip_labels(stream: Sequence[Sample], n_classes: int) -> list[Sample]:
    """Total deterministic label flip: y -> (y+1) mod k (1-y for binary)."""
    return [Sample(x=s.x, y=(int(s.y) + 1) % n_classes) for s in stream]


def trust_gate(
    policy: str, trust_ratio: float, node: NodeState, candidate_accuracy: float
) -> bool:
    """Decide whether a node's updated buffer is worth a transaction.

    The gated policy shares when the candidate holds at least
    ``trust_ratio`` of the node's best validation accuracy so far, and
    ratchets the best upward on success."""
    if policy == CENTRALIZED:
        return False
    if policy == FEDERATED_UNLIMITED:
        node.best_accuracy = max(node.best_accuracy, candidate_accuracy)
        return True
    if candidate_accuracy >= trust_ratio * node.best_accuracy:
        node.best_accuracy = max(node.best_accuracy, candidate_accuracy)
        return True
    return False


def inversion_attack(
    payloads: Sequence[bytes], originals: Sequence[Sample]
) -> InversionReport:
    """Score how well shared prototype vectors reconstruct training features."""
    if not originals:
        raise ArgumentError("need original samples to score against")
    vectors = []
    for payload in payloads:
        vectors.extend(p.vector for p in wire.decode_prototypes(payload))
    if not vectors:
        return InversionReport(candidates=0, min_mse=None, below_0_1=0, below_0_01=0)
    cands = np.stack(vectors)
    feats = np.stack([s.x for s in originals])
    per_sample = min_mse(feats, cands)
    return InversionReport(
        candidates=len(vectors),
        min_mse=float(per_sample.min()),
        below_0_1=int((per_sample < 0.1).sum()),
        below_0_01=int((per_sample < 0.01).sum()),
    )


class Simulation:
    """One experiment instance: topology, ledger, node states, metrics."""

    def __init__(self, config: SimulationConfig, samples: Optional[list[Sample]] = None):
        config.validate()
        self.config = config
        self.samples = samples if samples is not None else load_csv(config.dataset)
        labels = {int(s.y) for s in self.samples}
        self.n_classes = len(labels)
        self.dim = self.samples[0].x.shape[0]

        self.quant = QuantizationConfig(scale=1 << config.quant_scale_bits)
        self.session = AggregationSession(
            sensors=config.sensors_per_node,
            parties=config.agg_parties,
            threshold=config.agg_threshold,
            redundancy=config.agg_redundancy,
        )

        n_nodes = 1 if config.policy == CENTRALIZED else config.nodes
        self.nodes = self._build_nodes(n_nodes)
        self.ledger = self._deploy_ledger()
        self.global_round = 0
        self.epoch = 0
        self._epoch_streams: list[list[Sample]] = []
        self._epoch_pos: list[int] = []
        self._epoch_wall_start = 0.0
        self._start_epoch()

        stride = config.sensors_per_node * config.batch_size
        if all(len(n.train_samples) < stride for n in self.nodes):
            raise ConfigError(
                "every node's stream is shorter than sensors*batch; no round can run",
                field="topology.batch_size",
            )

    # -- construction -----------------------------------------------------

    def _build_nodes(self, n_nodes: int) -> list[NodeState]:
        cfg = self.config
        parts = partition(
            self.samples, n_nodes, cfg.partition_mode, seed=cfg.seed, alpha=cfg.dirichlet_alpha
        )
        malicious = self._pick_malicious(n_nodes)
        nodes = []
        for i in range(n_nodes):
            local = [self.samples[j] for j in parts.assignments[i]]
            train, val = split_train_val(local, cfg.val_ratio, seed=[cfg.seed, 101, i])
            if not val:
                raise ConfigError(
                    f"node {i} received an empty validation set", field="policy.val_ratio"
                )
            if i in malicious:
                train = flip_labels(train, self.n_classes)
            nodes.append(
                NodeState(
                    node_id=i,
                    address=Address.derive(f"sim:{cfg.seed}:node:{i}"),
                    model=IlvqModel(
                        dim=self.dim,
                        alpha_winner=cfg.alpha_winner,
                        alpha_runner=cfg.alpha_runner,
                        recompute_all_thresholds=cfg.recompute_all_thresholds,
                    ),
                    train_samples=train,
                    val_samples=val,
                    malicious=i in malicious,
                )
            )
        return nodes

    def _pick_malicious(self, n_nodes: int) -> set[int]:
        atk = self.config.attack
        if atk.kind != ATTACK_LABEL_FLIP or atk.malicious_fraction <= 0:
            return set()
        count = int(round(atk.malicious_fraction * n_nodes))
        rng = np.random.default_rng([self.config.seed, 7])
        return set(rng.choice(n_nodes, size=count, replace=False).tolist())

    def _deploy_ledger(self) -> Ledger:
        cfg = self.config
        admin = Address.derive(f"sim:{cfg.seed}:admin")
        oracle_owner = Address.derive(f"sim:{cfg.seed}:oracle-owner")
        ledger = Ledger.deploy(cfg.schedule, admin, oracle_owner)
        for node in self.nodes:
            ledger.set_owner(admin, node.address)
        ledger.set_oracle_instance_address(admin, ledger.oracle.address)
        return ledger

    # -- stream plumbing ----------------------------------------------------

    def _start_epoch(self) -> None:
        self.epoch += 1
        cfg = self.config
        self._epoch_streams = []
        self._epoch_pos = []
        for node in self.nodes:
            rng = np.random.default_rng([cfg.seed, 11, self.epoch, node.node_id])
            order = rng.permutation(len(node.train_samples))
            self._epoch_streams.append([node.train_samples[j] for j in order])
            self._epoch_pos.append(0)
            node.tx_epoch = 0
        self._epoch_wall_start = time.perf_counter()

    def rounds_per_epoch(self) -> int:
        stride = self.config.sensors_per_node * self.config.batch_size
        return max(len(n.train_samples) // stride for n in self.nodes)

    def _next_sensor_batches(self, node_idx: int) -> Optional[list[list[Sample]]]:
        cfg = self.config
        stride = cfg.sensors_per_node * cfg.batch_size
        pos = self._epoch_pos[node_idx]
        stream = self._epoch_streams[node_idx]
        if pos + stride > len(stream):
            return None
        chunk = stream[pos : pos + stride]
        self._epoch_pos[node_idx] = pos + stride
        return [
            chunk[s * cfg.batch_size : (s + 1) * cfg.batch_size]
            for s in range(cfg.sensors_per_node)
        ]

    # -- the core loop -----------------------------------------------------

    def run_round(self) -> EpochMetrics:
        """Advance every node one batch round; returns the epoch snapshot."""
        cfg = self.config
        self.global_round += 1
        self.ledger.round = self.global_round

        for idx, node in enumerate(self.nodes):
            batches = self._next_sensor_batches(idx)
            if batches is None:
                continue

            rng = np.random.default_rng(
                [cfg.seed, 13, self.epoch, self.global_round, node.node_id]
            )
            aggregated = aggregate_samples(batches, self.session, self.quant, rng)
            node.sim_elapsed_us += (
                cfg.sensors_per_node * cfg.batch_size * cfg.cost.agg_slot_us
            )

            if cfg.policy != CENTRALIZED:
                self._absorb_peers(node)

            for s in aggregated:
                node.model.train_step(s)
            node.sim_elapsed_us += len(aggregated) * cfg.cost.train_step_us

            self._maybe_share(node)

        return self.epoch_metrics()

    def _absorb_peers(self, node: NodeState) -> None:
        """Ingest peer payloads, skipping any that did not change since the
        node last absorbed them (re-replaying identical prototypes would
        distort the model and waste the round)."""
        cfg = self.config
        for owner, payload in self.ledger.see_all_with_owners(node.address):
            digest = hashlib.blake2b(payload, digest_size=16).digest()
            if node.seen_payloads.get(owner.hex) == digest:
                continue
            protos = wire.decode_prototypes(payload)
            node.model.absorb_prototypes(protos)
            node.seen_payloads[owner.hex] = digest
            node.sim_elapsed_us += len(protos) * cfg.cost.absorb_proto_us

    def _maybe_share(self, node: NodeState) -> None:
        cfg = self.config
        if cfg.policy == CENTRALIZED:
            return
        candidate_accuracy = node.accuracy()
        node.sim_elapsed_us += len(node.val_samples) * cfg.cost.eval_sample_us
        if not trust_gate(cfg.policy, cfg.trust_ratio, node, candidate_accuracy):
            return
        receipt = self.ledger.add_prototype(node.address, wire.encode_model(node.model))
        if receipt.ok:
            node.tx_total += 1
            node.tx_epoch += 1
            node.gas_spent += receipt.gas_used
            node.eth_spent += receipt.eth_cost
            node.sim_elapsed_us += cfg.cost.tx_ms * 1000
        else:  # recorded, never fatal to the round
            log.info("share rejected for node %d: %s", node.node_id, receipt.error)

    def run_epoch(self) -> EpochMetrics:
        """All rounds of the current epoch; finishes with fresh accuracies."""
        metrics = self.epoch_metrics()
        for _ in range(self.rounds_per_epoch()):
            metrics = self.run_round()
        metrics.wall_ms = (time.perf_counter() - self._epoch_wall_start) * 1e3
        if self.epoch < self.config.epochs:
            self._start_epoch()
        return metrics

    def epoch_metrics(self) -> EpochMetrics:
        cfg = self.config
        rows = []
        for node in self.nodes:
            rows.append(
                NodeEpochRow(
                    epoch=self.epoch,
                    node=node.node_id,
                    accuracy=node.accuracy(),
                    tx=node.tx_epoch,
                    bytes=node.tx_epoch * cfg.payload_bytes,
                    gas=node.gas_spent,
                    eth=node.eth_spent,
                    elapsed_ms=node.sim_elapsed_us // 1000,
                )
            )
        accs = [r.accuracy for r in rows]
        return EpochMetrics(
            epoch=self.epoch,
            rows=rows,
            mean_accuracy=float(np.mean(accs)),
            transactions=sum(r.tx for r in rows),
            bytes=sum(r.bytes for r in rows),
            cumulative_gas=self.ledger.total_gas(),
            cumulative_eth=self.ledger.total_eth(),
        )

    # -- run-level reporting -------------------------------------------------

    def shared_payloads(self) -> list[bytes]:
        return [
            bytes(r.args[0])
            for r in self.ledger.receipts
            if r.op == "add_prototype" and r.ok
        ]

    def training_features(self) -> list[Sample]:
        return [s for node in self.nodes for s in node.train_samples]

    def tx_per_node(self) -> float:
        return float(np.mean([n.tx_total for n in self.nodes]))


@dataclass
class ExperimentResult:
    config: SimulationConfig
    metrics: list[EpochMetrics]
    wall_seconds: float
    inversion: Optional[InversionReport]
    tx_per_node: float
    final_mean_accuracy: float

    def metrics_csv(self) -> str:
        lines = [METRICS_HEADER]
        for em in self.metrics:
            for r in em.rows:
                lines.append(
                    f"{r.epoch},{r.node},{r.accuracy:.6f},{r.tx},{r.bytes},"
                    f"{r.gas},{decimal_str(r.eth)},{r.elapsed_ms}"
                )
        return "\n".join(lines) + "\n"

    def summary_text(self) -> str:
        cfg = self.config
        sched = cfg.schedule
        em = self.metrics[-1]
        mb_per_node = cfg.payload_bytes * self.tx_per_node / 1e6
        wall_per_epoch = self.wall_seconds / max(1, len(self.metrics))
        lines = [
            f"policy: {cfg.policy}",
            f"dataset: {cfg.dataset.name}",
            f"nodes: {len(em.rows)}  sensors/node: {cfg.sensors_per_node}  "
            f"batch: {cfg.batch_size}  epochs: {cfg.epochs}  seed: {cfg.seed}",
            f"final mean accuracy: {self.final_mean_accuracy:.4f}",
            f"transactions/node: {self.tx_per_node:.2f}",
            f"overhead MB/node: {mb_per_node:.5f} ({cfg.payload_bytes} B/tx)",
            f"wall seconds total: {self.wall_seconds:.2f}  per epoch: {wall_per_epoch:.2f}",
            f"ledger gas total: {em.cumulative_gas}  eth total: {decimal_str(em.cumulative_eth)}",
            f"deployment cost: {decimal_str(sched.eth_for('deploy'))} ETH",
        ]
        if self.inversion is not None:
            inv = self.inversion
            mse = "n/a" if inv.min_mse is None else f"{inv.min_mse:.6f}"
            lines.append(
                f"inversion: candidates={inv.candidates} min_mse={mse} "
                f"below_0.1={inv.below_0_1} below_0.01={inv.below_0_01}"
            )
        return "\n".join(lines) + "\n"


def run_experiment(
    config: SimulationConfig,
    out_dir: Optional[Path] = None,
    samples: Optional[list[Sample]] = None,
) -> ExperimentResult:
    """Execute all configured epochs; optionally write metrics.csv and
    summary.txt into ``out_dir``."""
    started = time.perf_counter()
    sim = Simulation(config, samples=samples)
    metrics = [sim.run_epoch() for _ in range(config.epochs)]
    wall = time.perf_counter() - started

    inversion = None
    if config.attack.kind == ATTACK_INVERSION:
        inversion = inversion_attack(sim.shared_payloads(), sim.training_features())

    result = ExperimentResult(
        config=config,
        metrics=metrics,
        wall_seconds=wall,
        inversion=inversion,
        tx_per_node=sim.tx_per_node(),
        final_mean_accuracy=metrics[-1].mean_accuracy,
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.csv").write_text(result.metrics_csv())
        (out_dir / "summary.txt").write_text(result.summary_text())
    return result
