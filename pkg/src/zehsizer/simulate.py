"""Forward simulation of the saturated battery under the greedy dispatch policy.

The battery state of charge follows

    pre_k = retention * soc_{k-1} + injection_k

where injection_k is PV generation minus consumption for the step.  The
physical policy then charges as much as the capacity band and the rate limit
allow and discharges exactly as needed: the realized state is pre_k clamped to

    [max(alpha_lo*cap, soc_{k-1} - rate*cap), min(alpha_hi*cap, soc_{k-1} + rate*cap)].

Whatever the clamp cuts off becomes grid export (spill) when charging or
backup generation (deficit) when discharging, so the per-step accounting
identity  retention*soc_{k-1} + injection_k == soc_k + spill_k - deficit_k
holds exactly, including when the rate limit is the binding constraint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BatteryParams, SizingProblemSpec, Trajectory

__all__ = ["SimStepResult", "InvalidStateError", "step", "simulate", "net_injection"]


class InvalidStateError(ValueError):
    """The provided state of charge is outside the battery's admissible band."""


@dataclass(frozen=True)
class SimStepResult:
    soc_after: float
    spill: float
    deficit: float


def step(
    soc_prev: float,
    a: float,
    y: float,
    x: float,
    capacity: float,
    params: BatteryParams,
) -> SimStepResult:
    """Advance the battery one step for PV area `a`, yield `y`, demand `x`."""
    lo = params.alpha_lo * capacity
    hi = params.alpha_hi * capacity
    if capacity < 0:
        raise InvalidStateError(f"capacity must be nonnegative, got {capacity}")
    if not lo - 1e-12 <= soc_prev <= hi + 1e-12:
        raise InvalidStateError(
            f"soc_prev={soc_prev} outside admissible band [{lo}, {hi}]"
        )
    pre = params.retention * soc_prev + a * y - x
    move = params.rate_frac * capacity
    floor = max(lo, soc_prev - move)
    ceil = min(hi, soc_prev + move)
    soc = pre
    if soc > ceil:
        soc = ceil
    elif soc < floor:
        soc = floor
    diff = pre - soc
    if diff >= 0.0:
        return SimStepResult(soc, diff, 0.0)
    return SimStepResult(soc, 0.0, -diff)


def net_injection(a, spec: SizingProblemSpec) -> np.ndarray:
    """Per-step net energy entering the system: sum_i a_i*Y_i - X_i."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape[0] != spec.num_households:
        raise ValueError(
            f"expected {spec.num_households} areas, got {a.shape[0]}"
        )
    net = np.zeros(spec.num_steps)
    for area, hh in zip(a, spec.households):
        net += area * hh.pv_yield - hh.consumption
    return net


def simulate(a, capacity: float, spec: SizingProblemSpec):
    """Run the greedy policy over the full horizon and price the outcome.

    Returns (trajectory, cost) where cost is the original investment-plus-
    dispatch objective: pi_pv*sum(a) + pi_b*capacity + pi_r*total spill
    + pi_g*total deficit.  Community instances are aggregated into a single
    pooled injection series before simulation.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    net = net_injection(a, spec)
    traj = _simulate_net(net, capacity, spec.battery)
    prices = spec.prices
    cost = (
        prices.pi_pv * float(a.sum())
        + prices.pi_b * capacity
        + prices.pi_r * float(traj.spill.sum())
        + prices.pi_g * float(traj.deficit.sum())
    )
    return traj, cost


def _simulate_net(net: np.ndarray, capacity: float, params: BatteryParams) -> Trajectory:
    k = net.shape[0]
    soc = np.empty(k + 1)
    spill = np.zeros(k)
    deficit = np.zeros(k)
    # Plain-float inner loop: this routine is called once per grid-oracle cell,
    # so per-step overhead dominates the oracle's runtime.
    lo = params.alpha_lo * capacity
    hi = params.alpha_hi * capacity
    move = params.rate_frac * capacity
    gamma = params.retention
    state = params.init_frac * capacity
    soc[0] = state
    net_list = net.tolist()
    for i in range(k):
        pre = gamma * state + net_list[i]
        floor = state - move
        if floor < lo:
            floor = lo
        ceil = state + move
        if ceil > hi:
            ceil = hi
        if pre > ceil:
            spill[i] = pre - ceil
            state = ceil
        elif pre < floor:
            deficit[i] = floor - pre
            state = floor
        else:
            state = pre
        soc[i + 1] = state
    return Trajectory(soc=soc, spill=spill, deficit=deficit)


def dispatch_cost(traj: Trajectory, a_total: float, capacity: float, prices) -> float:
    """Price an arbitrary trajectory with the same terms `simulate` uses."""
    return (
        prices.pi_pv * a_total
        + prices.pi_b * capacity
        + prices.pi_r * float(traj.spill.sum())
        + prices.pi_g * float(traj.deficit.sum())
    )
