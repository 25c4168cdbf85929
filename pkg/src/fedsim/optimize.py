"""Resource allocation solvers for the wireless sign-descent system.

Two problems are solved per configuration:

* energy minimization: pick per-worker (frequency, rate, power) minimizing
  per-round energy subject to a round latency cap and an outage target; power
  and frequency are eliminated in closed form, leaving a one-dimensional
  convex problem in the rate solved by projected subgradient descent;

* performance maximization: pick the round latency maximizing the
  vote-quality-per-sqrt-time objective subject to per-worker energy budgets
  prorated over the training horizon, via a difference-of-convex iteration
  whose convex subproblems are solved by bisection on the derivative.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict, field
from typing import Sequence

import numpy as np

from .wireless import (
    ChannelModel,
    DeviceModel,
    comm_energy,
    comm_time,
    compute_energy,
    compute_time,
    outage_probability,
    power_for_outage,
)

__all__ = [
    "WorkerPlan",
    "TraceRow",
    "EnergyMinResult",
    "PerfMaxResult",
    "make_plan",
    "full_power_plan",
    "rate_bounds",
    "energy_feasible",
    "relaxed_frequency_rate",
    "optimal_power",
    "optimal_frequency",
    "reduced_energy_objective",
    "solve_energy_single",
    "solve_energy",
    "energy_grid_oracle",
    "perf_rate",
    "energy_limited_workers",
    "perf_objective",
    "dc_convex_part",
    "dc_concave_part",
    "solve_perf",
]

# rates above this contribute an astronomically large but finite surrogate
# outage, avoiding float overflow in 2**r near the domain boundary
_RATE_CAP = 500.0


@dataclass(frozen=True)
class WorkerPlan:
    """Operating point of one worker with its derived per-round costs."""

    frequency: float
    rate: float
    power: float
    outage: float
    compute_time: float
    comm_time: float
    compute_energy: float
    comm_energy: float

    @property
    def round_time(self) -> float:
        return self.compute_time + self.comm_time

    @property
    def round_energy(self) -> float:
        return self.compute_energy + self.comm_energy

    def to_dict(self) -> dict:
        d = asdict(self)
        d["round_time"] = self.round_time
        d["round_energy"] = self.round_energy
        return d


@dataclass(frozen=True)
class TraceRow:
    """One solver iteration: the current iterate, its objective, and the
    step taken to reach it."""

    iteration: int
    iterate: float
    objective: float
    step: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EnergyMinResult:
    """Outcome of per-round energy minimization across all workers."""

    feasible: bool
    worker_feasible: tuple[bool, ...]
    plans: tuple[WorkerPlan, ...]
    round_energy: float
    round_time: float
    traces: tuple[tuple[TraceRow, ...], ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "worker_feasible": list(self.worker_feasible),
            "plans": [p.to_dict() for p in self.plans],
            "round_energy": self.round_energy,
            "round_time": self.round_time,
        }


@dataclass(frozen=True)
class PerfMaxResult:
    """Outcome of the latency optimization over the training horizon."""

    latency: float
    objective: float
    plans: tuple[WorkerPlan, ...]
    rounds: int
    iterations: int
    converged: bool
    trace: tuple[TraceRow, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "latency": self.latency,
            "objective": self.objective,
            "plans": [p.to_dict() for p in self.plans],
            "rounds": self.rounds,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def make_plan(
    dev: DeviceModel, ch: ChannelModel, frequency: float, rate: float, power: float
) -> WorkerPlan:
    """Assemble a plan and its derived costs from raw decision variables."""
    if not (dev.f_min <= frequency <= dev.f_max * (1.0 + 1e-12)):
        raise ValueError(f"frequency {frequency} outside [{dev.f_min}, {dev.f_max}]")
    if not (dev.P_min <= power * (1.0 + 1e-12) and power <= dev.P_max * (1.0 + 1e-12)):
        raise ValueError(f"power {power} outside [{dev.P_min}, {dev.P_max}]")
    return WorkerPlan(
        frequency=frequency,
        rate=rate,
        power=power,
        outage=outage_probability(rate, power, ch),
        compute_time=compute_time(dev, frequency),
        comm_time=comm_time(ch, rate),
        compute_energy=compute_energy(dev, frequency),
        comm_energy=comm_energy(ch, rate, power),
    )


def rate_bounds(
    dev: DeviceModel, ch: ChannelModel, latency: float, target_outage: float
) -> tuple[float, float, float]:
    """The three rate bounds of the energy problem: the rate below which the
    outage target needs less than P_min (r1), the rate above which it needs
    more than P_max (r2), and the smallest latency-feasible rate at f_max
    (r3).  The feasible interval is [max(r1, r3), r2].
    """
    if latency <= 0.0:
        raise ValueError(f"latency must be positive, got {latency}")
    if not (0.0 < target_outage < 1.0):
        raise ValueError(f"target_outage must be in (0, 1), got {target_outage}")
    slack = latency - compute_time(dev, dev.f_max)
    if slack <= 0.0:
        raise ValueError(
            f"latency {latency} is not above the minimum computation time "
            f"{compute_time(dev, dev.f_max)}"
        )
    log_term = -np.log1p(-target_outage) / (ch.N0 * ch.B)
    r1 = float(np.log2(1.0 + dev.P_min * log_term))
    r2 = float(np.log2(1.0 + dev.P_max * log_term))
    r3 = ch.packet_bits / (ch.B * slack)
    return r1, r2, r3


def energy_feasible(
    dev: DeviceModel, ch: ChannelModel, latency: float, target_outage: float
) -> bool:
    """Whether the latency cap and outage target can hold simultaneously."""
    if latency <= compute_time(dev, dev.f_max):
        return False
    _, r2, r3 = rate_bounds(dev, ch, latency, target_outage)
    return r3 <= r2


def relaxed_frequency_rate(dev: DeviceModel, ch: ChannelModel, latency: float) -> float:
    """Rate above which even f_min meets the latency cap (diagnostic)."""
    slack = latency - compute_time(dev, dev.f_min)
    if slack <= 0.0:
        return float("inf")
    return ch.packet_bits / (ch.B * slack)


def full_power_plan(dev: DeviceModel, ch: ChannelModel, latency: float) -> WorkerPlan:
    """Fallback plan when the outage target is unreachable: fastest CPU, the
    lowest latency-feasible rate, and full transmit power."""
    _, _, r3 = rate_bounds(dev, ch, latency, 0.5)
    return make_plan(dev, ch, dev.f_max, r3, dev.P_max)


def optimal_power(
    dev: DeviceModel, ch: ChannelModel, target_outage: float, rate: float
) -> float:
    """Smallest power hitting the outage target at this rate; valid on the
    rate interval where it lands inside [P_min, P_max]."""
    power = power_for_outage(rate, target_outage, ch)
    if not (dev.P_min <= power * (1.0 + 1e-9) and power <= dev.P_max * (1.0 + 1e-9)):
        raise ValueError(
            f"rate {rate} needs power {power} outside [{dev.P_min}, {dev.P_max}]"
        )
    return float(min(power, dev.P_max))


def optimal_frequency(
    dev: DeviceModel, ch: ChannelModel, latency: float, rate: float
) -> float:
    """Slowest admissible CPU frequency once the rate fixes the comm time."""
    slack = latency - comm_time(ch, rate)
    if slack <= 0.0:
        raise ValueError(f"rate {rate} leaves no computation time within {latency}")
    f = max(dev.c * dev.D / slack, dev.f_min)
    if f > dev.f_max * (1.0 + 1e-9):
        raise ValueError(f"rate {rate} requires frequency {f} above f_max")
    return float(min(f, dev.f_max))


def reduced_energy_objective(
    dev: DeviceModel, ch: ChannelModel, latency: float, target_outage: float, rate: float
) -> float:
    """Per-round energy after eliminating power and frequency at a fixed rate.

    Power is the smallest value hitting the outage target exactly; frequency
    is the slowest value meeting the latency cap.
    """
    slack = latency - comm_time(ch, rate)
    if slack <= 0.0:
        return float("inf")
    f = max(dev.c * dev.D / slack, dev.f_min)
    power = power_for_outage(rate, target_outage, ch)
    return compute_energy(dev, f) + comm_energy(ch, rate, power)


def solve_energy_single(
    dev: DeviceModel,
    ch: ChannelModel,
    latency: float,
    target_outage: float,
    iterations: int = 500,
    record_trace: bool = False,
) -> tuple[WorkerPlan, bool, tuple[TraceRow, ...]]:
    """Minimize one worker's per-round energy under latency and outage caps.

    The reduced one-dimensional objective over the feasible rate interval is
    convex; it is minimized by projected subgradient descent moving a step
    length of 0.1 * width / sqrt(k) along the negative subgradient direction,
    keeping the best iterate seen (the direction is normalized so the step
    length is scale-free).  When the interval is empty the full-power
    fallback plan is returned with feasible=False.
    """
    r1, r2, r3 = rate_bounds(dev, ch, latency, target_outage)
    r_lo, r_hi = max(r1, r3), r2
    if r_lo > r_hi:
        return full_power_plan(dev, ch, latency), False, ()

    width = r_hi - r_lo
    obj = lambda r: reduced_energy_objective(dev, ch, latency, target_outage, r)
    trace: list[TraceRow] = []
    if width == 0.0:
        best_r = r_lo
    else:
        fd = max(1e-9, 1e-7 * width)
        r = 0.5 * (r_lo + r_hi)
        best_r, best_val = r, obj(r)
        if record_trace:
            trace.append(TraceRow(0, r, best_val, 0.0))
        for k in range(1, iterations + 1):
            hi = min(r + fd, r_hi)
            lo = max(r - fd, r_lo)
            grad = (obj(hi) - obj(lo)) / (hi - lo)
            step = 0.1 * width / np.sqrt(k)
            new_r = float(np.clip(r - step * np.sign(grad), r_lo, r_hi))
            val = obj(new_r)
            if record_trace:
                trace.append(TraceRow(k, new_r, val, new_r - r))
            r = new_r
            if val < best_val:
                best_r, best_val = r, val

    f = optimal_frequency(dev, ch, latency, best_r)
    power = power_for_outage(best_r, target_outage, ch)
    power = float(np.clip(power, dev.P_min, dev.P_max))
    return make_plan(dev, ch, f, best_r, power), True, tuple(trace)


def solve_energy(
    devices: Sequence[DeviceModel],
    ch: ChannelModel,
    latency: float,
    target_outage: float,
    iterations: int = 500,
    record_trace: bool = False,
) -> EnergyMinResult:
    """Per-round energy minimization across workers.

    The problem separates across workers, so each distinct device model is
    solved once and the plans are reused.
    """
    if len(devices) == 0:
        raise ValueError("need at least one device")
    cache: dict[DeviceModel, tuple[WorkerPlan, bool, tuple[TraceRow, ...]]] = {}
    plans, flags, traces = [], [], []
    for dev in devices:
        if dev not in cache:
            cache[dev] = solve_energy_single(
                dev, ch, latency, target_outage, iterations, record_trace
            )
        plan, ok, trace = cache[dev]
        plans.append(plan)
        flags.append(ok)
        traces.append(trace)
    return EnergyMinResult(
        feasible=all(flags),
        worker_feasible=tuple(flags),
        plans=tuple(plans),
        round_energy=float(sum(p.round_energy for p in plans)),
        round_time=float(max(p.round_time for p in plans)),
        traces=tuple(traces),
    )


def energy_grid_oracle(
    dev: DeviceModel,
    ch: ChannelModel,
    latency: float,
    target_outage: float,
    grid_points: int = 10_000,
) -> tuple[float, float]:
    """Brute-force reference: evaluate the reduced objective on a uniform
    rate grid over the feasible interval and return (best rate, best energy).
    """
    r1, r2, r3 = rate_bounds(dev, ch, latency, target_outage)
    r_lo, r_hi = max(r1, r3), r2
    if r_lo > r_hi:
        raise ValueError("infeasible problem has no grid oracle")
    grid = np.linspace(r_lo, r_hi, grid_points)
    vals = [reduced_energy_objective(dev, ch, latency, target_outage, r) for r in grid]
    k = int(np.argmin(vals))
    return float(grid[k]), float(vals[k])


def _perf_branches(
    dev: DeviceModel, ch: ChannelModel, latency: float, energy_rate: float
) -> tuple[float, float]:
    """Energy-limited and time-limited rate lower bounds at full power and
    fastest CPU, for a per-round energy budget of energy_rate * latency."""
    e_comm = energy_rate * latency - compute_energy(dev, dev.f_max)
    t_comm = latency - compute_time(dev, dev.f_max)
    if e_comm <= 0.0 or t_comm <= 0.0:
        raise ValueError(
            f"latency {latency} leaves no communication budget for this device"
        )
    eb = dev.P_max * ch.packet_bits / (ch.B * e_comm)
    tb = ch.packet_bits / (ch.B * t_comm)
    return eb, tb


def perf_rate(
    dev: DeviceModel, ch: ChannelModel, latency: float, energy_rate: float
) -> float:
    """Outage-minimizing rate at a given latency: the larger of the
    energy-limited and time-limited lower bounds, transmitting at full power
    and computing at f_max."""
    eb, tb = _perf_branches(dev, ch, latency, energy_rate)
    return max(eb, tb)


def energy_limited_workers(
    devices: Sequence[DeviceModel],
    ch: ChannelModel,
    latency: float,
    energy_rates: Sequence[float],
) -> np.ndarray:
    """Boolean mask of workers whose rate is pinned by the energy budget
    rather than the latency cap."""
    out = []
    for dev, er in zip(devices, energy_rates, strict=True):
        eb, tb = _perf_branches(dev, ch, latency, er)
        out.append(eb >= tb)
    return np.array(out, dtype=bool)


def _surrogate_outage(dev: DeviceModel, ch: ChannelModel, rate: float) -> float:
    rate = min(rate, _RATE_CAP)
    return (2.0**rate - 1.0) * ch.N0 * ch.B / dev.P_max


def _surrogate_outage_derivative(
    dev: DeviceModel, ch: ChannelModel, latency: float, energy_rate: float
) -> float:
    """d/dT of the surrogate outage along the active rate branch."""
    eb, tb = _perf_branches(dev, ch, latency, energy_rate)
    rate = max(eb, tb)
    if rate >= _RATE_CAP:
        return 0.0
    if eb >= tb:
        e_comm = energy_rate * latency - compute_energy(dev, dev.f_max)
        drate = -dev.P_max * ch.packet_bits * energy_rate / (ch.B * e_comm**2)
    else:
        t_comm = latency - compute_time(dev, dev.f_max)
        drate = -ch.packet_bits / (ch.B * t_comm**2)
    return float(np.log(2.0) * 2.0**rate * ch.N0 * ch.B / dev.P_max * drate)


def perf_objective(
    devices: Sequence[DeviceModel],
    ch: ChannelModel,
    latency: float,
    energy_rates: Sequence[float],
    surrogate: bool = False,
) -> float:
    """Vote-quality objective (M - 2 sum_m p_m) / sqrt(latency) with each
    worker at its outage-minimizing operating point."""
    total = 0.0
    for dev, er in zip(devices, energy_rates, strict=True):
        rate = perf_rate(dev, ch, latency, er)
        if surrogate:
            total += _surrogate_outage(dev, ch, rate)
        else:
            total += outage_probability(min(rate, _RATE_CAP), dev.P_max, ch)
    m = len(devices)
    return float((m - 2.0 * total) / np.sqrt(latency))


def dc_convex_part(
    devices: Sequence[DeviceModel],
    ch: ChannelModel,
    latency: float,
    energy_rates: Sequence[float],
) -> float:
    """Convex part of the minimization objective: 2 sum_m p~_m(T) / sqrt(T)
    with p~ the surrogate outage at the outage-minimizing rate."""
    total = 0.0
    for dev, er in zip(devices, energy_rates, strict=True):
        total += _surrogate_outage(dev, ch, perf_rate(dev, ch, latency, er))
    return float(2.0 * total / np.sqrt(latency))


def dc_concave_part(num_workers: int, latency: float) -> float:
    """Subtracted convex function M / sqrt(T) of the DC decomposition."""
    if latency <= 0.0:
        raise ValueError(f"latency must be positive, got {latency}")
    return float(num_workers / np.sqrt(latency))


def _convex_part_derivative(
    devices: Sequence[DeviceModel],
    ch: ChannelModel,
    latency: float,
    energy_rates: Sequence[float],
) -> float:
    total = 0.0
    for dev, er in zip(devices, energy_rates, strict=True):
        rate = perf_rate(dev, ch, latency, er)
        p = _surrogate_outage(dev, ch, rate)
        dp = _surrogate_outage_derivative(dev, ch, latency, er)
        total += 2.0 * dp / np.sqrt(latency) - p / latency**1.5
    return float(total)


def _perf_domain(
    devices: Sequence[DeviceModel],
    ch: ChannelModel,
    total_time: float,
    energy_rates: Sequence[float],
) -> tuple[float, float]:
    lo = 0.0
    for dev, er in zip(devices, energy_rates, strict=True):
        lo = max(lo, compute_time(dev, dev.f_max))
        lo = max(lo, compute_energy(dev, dev.f_max) / er)
    lo = lo * (1.0 + 1e-9) + 1e-15
    if lo >= total_time:
        raise ValueError("no latency in the domain fits within the horizon")
    return lo, total_time


def solve_perf(
    devices: Sequence[DeviceModel],
    ch: ChannelModel,
    total_time: float,
    energy_budgets: Sequence[float],
    max_iterations: int = 100,
    latency_tol: float = 1e-6,
    bisect_tol: float = 1e-9,
    record_trace: bool = False,
) -> PerfMaxResult:
    """Maximize the vote-quality-per-sqrt-time objective over the round
    latency.

    The minimization form splits into a convex part (scaled surrogate outage
    sum) minus the convex function M / sqrt(T); each iteration linearizes the
    subtracted part at the current latency and solves the resulting convex
    subproblem by bisection on its derivative (the subtracted part has the
    closed-form slope -M / (2 T^1.5)).  Iteration stops when the latency
    moves less than ``latency_tol``.
    """
    if total_time <= 0.0:
        raise ValueError(f"total_time must be positive, got {total_time}")
    if len(devices) == 0:
        raise ValueError("need at least one device")
    budgets = [float(b) for b in energy_budgets]
    if len(budgets) != len(devices):
        raise ValueError("energy_budgets and devices lengths differ")
    if min(budgets) <= 0.0:
        raise ValueError("energy budgets must be positive")
    energy_rates = [b / total_time for b in budgets]
    m = len(devices)
    t_lo, t_hi = _perf_domain(devices, ch, total_time, energy_rates)

    def dc_objective(t: float) -> float:
        return dc_convex_part(devices, ch, t, energy_rates) - dc_concave_part(m, t)

    latency = float(np.clip(2.0 * max(compute_time(d, d.f_max) for d in devices), t_lo, t_hi))
    trace: list[TraceRow] = []
    if record_trace:
        trace.append(TraceRow(0, latency, dc_objective(latency), 0.0))
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        slope = -m / (2.0 * latency**1.5)

        def phi(t: float) -> float:
            return _convex_part_derivative(devices, ch, t, energy_rates) - slope

        lo, hi = t_lo, t_hi
        if phi(lo) >= 0.0:
            nxt = lo
        elif phi(hi) <= 0.0:
            nxt = hi
        else:
            while hi - lo > bisect_tol:
                mid = 0.5 * (lo + hi)
                if phi(mid) < 0.0:
                    lo = mid
                else:
                    hi = mid
            nxt = 0.5 * (lo + hi)
        if record_trace:
            trace.append(TraceRow(iterations, nxt, dc_objective(nxt), nxt - latency))
        if abs(nxt - latency) < latency_tol:
            latency = nxt
            converged = True
            break
        latency = nxt

    plans = tuple(
        make_plan(dev, ch, dev.f_max, perf_rate(dev, ch, latency, er), dev.P_max)
        for dev, er in zip(devices, energy_rates, strict=True)
    )
    return PerfMaxResult(
        latency=float(latency),
        objective=perf_objective(devices, ch, latency, energy_rates),
        plans=plans,
        rounds=int(np.floor(total_time / latency)),
        iterations=iterations,
        converged=converged,
        trace=tuple(trace),
    )
