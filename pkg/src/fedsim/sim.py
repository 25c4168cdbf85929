"""End-to-end federated sign-descent training under simulated outages.

Each round every worker computes its full-batch local gradient, quantizes it
(optionally through the stochastic sign encoder), and transmits the packed
signs over its fading uplink; the server majority-votes the delivered
packets and broadcasts the sign step.  Time advances by the configured round
latency (the straggler convention: plans are built to meet it), and energy
is accounted from each worker's plan.

Randomness is fully splittable: every (worker, round, purpose) triple owns
an independent stream derived from the global seed, so runs replay
bit-exactly regardless of execution order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import datasets
from .config import (
    channel_from_config,
    devices_from_config,
    energy_budgets_from_config,
)
from .model import accuracy, init_weights, loss_accuracy_gradient
from .optimize import (
    PerfMaxResult,
    WorkerPlan,
    full_power_plan,
    make_plan,
    perf_rate,
    solve_energy_single,
    solve_perf,
)
from .signs import (
    StochasticSignConfig,
    apply_sign_update,
    flip_probabilities,
    majority_vote,
    sign_quantize,
    stochastic_sign_encode,
)
from .wireless import apply_channel

__all__ = [
    "PURPOSE_ENCODE",
    "PURPOSE_CHANNEL",
    "PURPOSE_BATCH",
    "PURPOSE_PARTITION",
    "worker_stream",
    "select_round_outage_target",
    "RoundRecord",
    "ExperimentResult",
    "ExperimentRunner",
    "run_experiment",
    "prepare_data",
]

PURPOSE_ENCODE = 0
PURPOSE_CHANNEL = 1
PURPOSE_BATCH = 2
PURPOSE_PARTITION = 3

# the encoder needs an assumed outage strictly below one half; plans whose
# outage reaches that regime carry no usable sign information anyway
_ENCODER_OUTAGE_CAP = 0.5 - 1e-9


def worker_stream(
    seed: int, worker: int, round_index: int, purpose: int
) -> np.random.Generator:
    """Independent random stream for one (worker, round, purpose) triple."""
    return np.random.default_rng([int(seed), int(worker), int(round_index), int(purpose)])


def select_round_outage_target(gradient, b: float, floor: float = 1e-4) -> float:
    """Largest outage the stochastic encoder tolerates without clamping any
    coordinate of this gradient: min_i(1/2 - b |g_i|), floored at ``floor``
    to keep the energy problem well posed."""
    if b < 0.0:
        raise ValueError(f"b must be nonnegative, got {b}")
    gradient = np.asarray(gradient, dtype=np.float64)
    target = 0.5 - b * float(np.max(np.abs(gradient))) if gradient.size else 0.5
    return max(float(floor), target)


@dataclass(frozen=True)
class RoundRecord:
    """Per-round ledger entry.

    Train loss/accuracy are measured on the model entering the round (a free
    byproduct of the gradient pass); test accuracy is measured on the model
    leaving it, None on rounds where evaluation is skipped.
    """

    round_index: int
    model_time: float
    train_loss: float
    train_accuracy: float
    test_accuracy: float | None
    round_energy: float
    clamp_count: int
    outages: tuple[bool, ...]
    energies: tuple[float, ...]

    def to_row(self) -> dict:
        row = {
            "round": self.round_index,
            "model_time": self.model_time,
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "test_accuracy": self.test_accuracy,
            "round_energy": self.round_energy,
            "clamp_count": self.clamp_count,
        }
        for m, flag in enumerate(self.outages):
            row[f"outage_w{m}"] = int(flag)
        for m, e in enumerate(self.energies):
            row[f"energy_w{m}"] = e
        return row


@dataclass
class ExperimentResult:
    records: list[RoundRecord]
    summary: dict
    plans: tuple[WorkerPlan, ...]
    perf_solution: PerfMaxResult | None = None
    weights: np.ndarray | None = field(default=None, repr=False)


@lru_cache(maxsize=2)
def _cached_split(data_dir: str, split: str, feature_scale: float) -> datasets.LabeledDataset:
    return datasets.load_dataset(data_dir, split, feature_scale)


def prepare_data(cfg: dict) -> tuple[datasets.LabeledDataset, datasets.LabeledDataset]:
    """Resolve the dataset directory and load both splits, synthesizing the
    corpus first when configured and the files are absent."""
    data_dir = datasets.resolve_data_dir(cfg["data.dir"])
    base = Path(data_dir) / "train-images-idx3-ubyte"
    present = base.exists() or base.with_name(base.name + ".gz").exists()
    if cfg["data.synthesize_if_missing"] and not present:
        datasets.generate_synthetic(data_dir)
    scale = cfg["train.feature_scale"]
    return (
        _cached_split(str(data_dir), "train", scale),
        _cached_split(str(data_dir), "test", scale),
    )


class ExperimentRunner:
    """Holds the mutable training state and advances it one round at a time.

    ``plans`` is a plain list and may be replaced between steps by tests that
    need a doctored operating point (for example a certain-outage channel).
    """

    def __init__(
        self,
        cfg: dict,
        train_data: datasets.LabeledDataset,
        test_data: datasets.LabeledDataset,
        seed: int | None = None,
    ):
        self.cfg = cfg
        self.seed = cfg["seed"] if seed is None else int(seed)
        self.devices = devices_from_config(cfg)
        self.channel = channel_from_config(cfg)
        self.num_workers = cfg["train.num_workers"]
        self.mode = cfg["train.mode"]
        self.eta = cfg["train.eta"]
        self.b = cfg["train.b"]
        self.p_min = cfg["train.p_min"]
        self.test_data = test_data

        self.perf_solution: PerfMaxResult | None = None
        self.latency = self._resolve_latency(cfg)
        self.total_rounds = int(np.floor(cfg["train.T_total"] / self.latency))
        if self.total_rounds < 1:
            raise ValueError(
                f"round latency {self.latency} does not fit in the horizon "
                f"{cfg['train.T_total']}"
            )

        rng = worker_stream(self.seed, 0, 0, PURPOSE_PARTITION)
        maker = (
            datasets.partition_by_label
            if cfg["train.partition"] == "by_label"
            else datasets.partition_iid
        )
        shards = maker(
            train_data.labels, self.num_workers, cfg["train.samples_per_worker"], rng
        )
        self.local = [train_data.subset(idx) for idx in shards]

        self.plans, self.fallback_flags = self._initial_plans(cfg)
        self.fallback_rounds = [0] * self.num_workers
        self.weights = init_weights(train_data.features.shape[1], 10)
        self.round_index = 0
        self.records: list[RoundRecord] = []

    def _resolve_latency(self, cfg: dict) -> float:
        latency = cfg["train.T_l"]
        if latency == "optimize":
            self.perf_solution = solve_perf(
                self.devices,
                self.channel,
                cfg["train.T_total"],
                energy_budgets_from_config(cfg),
            )
            return self.perf_solution.latency
        return float(latency)

    def _fixed_targets(self, cfg: dict) -> list[float]:
        target = cfg["train.p_out_target"]
        if isinstance(target, list):
            if len(target) != self.num_workers:
                raise ValueError(
                    "train.p_out_target list length must equal train.num_workers"
                )
            return [float(t) for t in target]
        return [float(target)] * self.num_workers

    def _plan_with_fallback(self, worker: int, target: float) -> tuple[WorkerPlan, bool]:
        """Solve one worker's energy problem, falling back to full power when
        the target is unreachable.  Returns (plan, used_fallback)."""
        dev = self.devices[worker]
        plan, ok, _ = solve_energy_single(dev, self.channel, self.latency, target)
        if not ok and not self.cfg["train.allow_fallback"]:
            raise ValueError(
                f"worker {worker}: outage target {target} infeasible at "
                f"latency {self.latency} and fallback is disabled"
            )
        return plan, not ok

    def _initial_plans(self, cfg: dict) -> tuple[list[WorkerPlan], list[bool]]:
        plan_mode = cfg["train.plan"]
        if plan_mode == "full_power":
            return (
                [full_power_plan(d, self.channel, self.latency) for d in self.devices],
                [False] * self.num_workers,
            )
        if plan_mode == "perf":
            if self.perf_solution is not None:
                return list(self.perf_solution.plans), [False] * self.num_workers
            rates = [
                b / cfg["train.T_total"] for b in energy_budgets_from_config(cfg)
            ]
            plans = [
                make_plan(
                    d,
                    self.channel,
                    d.f_max,
                    perf_rate(d, self.channel, self.latency, er),
                    d.P_max,
                )
                for d, er in zip(self.devices, rates)
            ]
            return plans, [False] * self.num_workers
        # energy planning; per-round targets under alg2/from_b are computed
        # from the first gradients, so start from placeholder plans
        if cfg["train.p_out_target"] == "from_b":
            return (
                [full_power_plan(d, self.channel, self.latency) for d in self.devices],
                [False] * self.num_workers,
            )
        plans, flags = [], []
        for m, target in enumerate(self._fixed_targets(cfg)):
            plan, fb = self._plan_with_fallback(m, target)
            plans.append(plan)
            flags.append(fb)
        if all(flags) and not cfg["train.allow_fallback"]:
            raise ValueError("every worker is infeasible and fallback is disabled")
        return plans, flags

    def _worker_batch(self, worker: int) -> datasets.LabeledDataset:
        ds = self.local[worker]
        batch = self.cfg["train.batch_size"]
        if batch is None or batch >= len(ds):
            return ds
        rng = worker_stream(self.seed, worker, self.round_index, PURPOSE_BATCH)
        return ds.subset(rng.choice(len(ds), size=batch, replace=False))

    def _replan_from_gradient(self, worker: int, gradient: np.ndarray) -> None:
        target = select_round_outage_target(gradient, self.b, self.p_min)
        plan, fb = self._plan_with_fallback(worker, target)
        self.plans[worker] = plan
        self.fallback_flags[worker] = fb

    def step(self) -> RoundRecord:
        """Run one communication round and append its record."""
        replanning = (
            self.mode == "alg2"
            and self.cfg["train.p_out_target"] == "from_b"
            and self.cfg["train.plan"] == "energy"
            and (self.cfg["train.replan"] == "every_round" or self.round_index == 0)
        )
        losses, accs = [], []
        delivered, outages = [], []
        clamp_total = 0
        for m in range(self.num_workers):
            batch = self._worker_batch(m)
            loss, acc, grad = loss_accuracy_gradient(
                self.weights, batch.features, batch.labels
            )
            losses.append(loss)
            accs.append(acc)
            if replanning:
                self._replan_from_gradient(m, grad)
            if self.fallback_flags[m]:
                self.fallback_rounds[m] += 1
            if self.mode == "alg2":
                enc = StochasticSignConfig(
                    self.b, min(self.plans[m].outage, _ENCODER_OUTAGE_CAP)
                )
                _, clamped = flip_probabilities(grad, enc)
                clamp_total += clamped
                packet = stochastic_sign_encode(
                    grad, enc, worker_stream(self.seed, m, self.round_index, PURPOSE_ENCODE)
                )
            else:
                packet = sign_quantize(grad)
            got, outage = apply_channel(
                packet,
                self.plans[m].outage,
                worker_stream(self.seed, m, self.round_index, PURPOSE_CHANNEL),
            )
            delivered.append(got)
            outages.append(outage)

        vote = majority_vote(delivered)
        self.weights = apply_sign_update(self.weights, vote, self.eta)
        self.round_index += 1

        evaluate = (
            self.round_index % self.cfg["train.eval_every"] == 0
            or self.round_index == self.total_rounds
        )
        test_acc = (
            accuracy(self.weights, self.test_data.features, self.test_data.labels)
            if evaluate
            else None
        )
        energies = tuple(p.round_energy for p in self.plans)
        record = RoundRecord(
            round_index=self.round_index,
            model_time=self.round_index * self.latency,
            train_loss=float(np.mean(losses)),
            train_accuracy=float(np.mean(accs)),
            test_accuracy=test_acc,
            round_energy=float(sum(energies)),
            clamp_count=clamp_total,
            outages=tuple(outages),
            energies=energies,
        )
        self.records.append(record)
        return record

    def run(self) -> ExperimentResult:
        while self.round_index < self.total_rounds:
            self.step()
        return self._finish()

    def _finish(self) -> ExperimentResult:
        final_losses, final_accs = [], []
        for ds in self.local:
            loss, acc, _ = loss_accuracy_gradient(
                self.weights, ds.features, ds.labels, want_gradient=False
            )
            final_losses.append(loss)
            final_accs.append(acc)
        final_test = accuracy(
            self.weights, self.test_data.features, self.test_data.labels
        )
        per_worker_energy = [
            float(sum(r.energies[m] for r in self.records))
            for m in range(self.num_workers)
        ]
        summary = {
            "mode": self.mode,
            "plan": self.cfg["train.plan"],
            "seed": self.seed,
            "latency": self.latency,
            "rounds": self.total_rounds,
            "model_time": self.total_rounds * self.latency,
            "final_train_loss": float(np.mean(final_losses)),
            "final_train_accuracy": float(np.mean(final_accs)),
            "final_test_accuracy": final_test,
            "per_worker_energy": per_worker_energy,
            "mean_worker_energy": float(np.mean(per_worker_energy)),
            "total_energy": float(np.sum(per_worker_energy)),
            "fallback_rounds": list(self.fallback_rounds),
            "total_clamped": int(sum(r.clamp_count for r in self.records)),
            "final_plans": [p.to_dict() for p in self.plans],
        }
        return ExperimentResult(
            records=self.records,
            summary=summary,
            plans=tuple(self.plans),
            perf_solution=self.perf_solution,
            weights=self.weights,
        )


def run_experiment(
    cfg: dict,
    train_data: datasets.LabeledDataset | None = None,
    test_data: datasets.LabeledDataset | None = None,
    seed: int | None = None,
) -> ExperimentResult:
    """Train one configuration end to end and return its ledger."""
    if train_data is None or test_data is None:
        train_data, test_data = prepare_data(cfg)
    return ExperimentRunner(cfg, train_data, test_data, seed=seed).run()
