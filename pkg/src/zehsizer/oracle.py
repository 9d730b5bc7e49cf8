"""Brute-force verification oracle and executable equivalence checks.

The oracle evaluates the original saturated-dynamics cost over a Cartesian
(panel area, capacity) grid, one greedy simulation per cell, and is the
independent reference the LP relaxation is checked against:

* the LP optimum must not exceed the grid optimum plus a one-cell allowance
  (upper-bound property of the relaxation);
* for strictly positive overflow prices, simulating the LP's sizing must
  reproduce the LP objective (the relaxation is tight there);
* optimal solutions whose state of charge saturates a band edge admit
  cost-neutral reshufflings of the overflow series (non-uniqueness), which
  `find_perturbation` constructs explicitly and re-verifies.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .formulation import build_lp, extract_solution, max_row_violation, pack_point
from .model import (
    HouseholdSeries,
    Mode,
    SizingProblemSpec,
    SizingSolution,
    SolveStatus,
    TimeGrid,
    Trajectory,
)
from .simplex import SolverConfig, solve
from .simulate import net_injection, simulate

__all__ = [
    "GridSpec",
    "GridSearchResult",
    "PerturbationWitness",
    "Theorem1Report",
    "GreedyEqualityReport",
    "default_capacity_ceiling",
    "grid_search",
    "check_theorem1",
    "check_greedy_equality",
    "find_perturbation",
    "timing_benchmark",
]


@dataclass(frozen=True)
class GridSpec:
    a_points: int = 81
    c_points: int = 81
    a_range: tuple[float, float] | None = None  # defaults to [0, a_max]
    c_range: tuple[float, float] | None = None  # defaults to [0, heuristic ceiling]

    def __post_init__(self):
        if self.a_points < 2 or self.c_points < 2:
            raise ValueError("need at least two grid points per axis")


@dataclass(frozen=True)
class GridSearchResult:
    status: SolveStatus
    best_area: float
    best_capacity: float
    best_cost: float
    a_values: np.ndarray
    c_values: np.ndarray
    cost_surface: np.ndarray  # shape (a_points, c_points), unfiltered costs


@dataclass(frozen=True)
class PerturbationWitness:
    index: int  # time step j whose overflow is shifted one step earlier
    kind: str  # "spill" or "deficit"
    delta: float  # signed change applied at step j (negative by construction)
    trajectory: Trajectory
    cost_delta: float


@dataclass(frozen=True)
class Theorem1Report:
    lp_objective: float
    oracle_cost: float
    slack: float
    margin: float
    passed: bool
    best_area: float
    best_capacity: float


@dataclass(frozen=True)
class GreedyEqualityReport:
    lp_objective: float
    simulated_cost: float
    rel_error: float
    passed: bool


def default_capacity_ceiling(spec: SizingProblemSpec) -> float:
    """Search ceiling for the capacity axis.

    Twice the largest single-step net surplus at the full panel cap, scaled
    by a tenth of the horizon; a deliberate overestimate so the grid brackets
    any plausible optimum.
    """
    a_full = np.full(spec.num_households, spec.a_max)
    net = net_injection(a_full, spec)
    peak = max(float(net.max(initial=0.0)), 0.0)
    if peak <= 0.0:
        peak = 1.0
    return 2.0 * peak * spec.num_steps / 10.0


def grid_search(spec: SizingProblemSpec, grid: GridSpec | None = None) -> GridSearchResult:
    """Exhaustively evaluate the original cost over an (area, capacity) grid.

    Ties are broken toward the smaller capacity, then the smaller area.  With
    the net-zero constraint on, areas that cannot balance consumption are
    excluded; if none survive the result is flagged infeasible.
    """
    if spec.mode is not Mode.INDIVIDUAL and spec.num_households > 3:
        raise ValueError("the grid oracle is limited to individual or tiny pooled instances")
    if grid is None:
        grid = GridSpec()
    a_lo, a_hi = grid.a_range if grid.a_range is not None else (0.0, spec.a_max)
    c_lo, c_hi = grid.c_range if grid.c_range is not None else (0.0, default_capacity_ceiling(spec))
    if not (a_hi > a_lo and c_hi > c_lo):
        raise ValueError("empty grid range")
    a_values = np.linspace(a_lo, a_hi, grid.a_points)
    c_values = np.linspace(c_lo, c_hi, grid.c_points)

    total_yield = sum(hh.total_yield for hh in spec.households)
    total_demand = sum(hh.total_consumption for hh in spec.households)

    bat = spec.battery
    prices = spec.prices
    gamma = bat.retention
    k = spec.num_steps
    base_per_hh = [
        (hh.pv_yield.tolist(), hh.consumption.tolist()) for hh in spec.households
    ]

    surface = np.empty((grid.a_points, grid.c_points))
    best = None  # (cost, capacity, area)
    for ia, a in enumerate(a_values):
        # Per-area net series, shared across the capacity sweep.
        net = [0.0] * k
        for y, x in base_per_hh:
            for t in range(k):
                net[t] += a * y[t] - x[t]
        # In pooled mode every household carries the same candidate area.
        zeh_ok = (not spec.enforce_zeh) or a * total_yield >= total_demand
        invest = prices.pi_pv * a * spec.num_households
        for ic, cap in enumerate(c_values):
            lo = bat.alpha_lo * cap
            hi = bat.alpha_hi * cap
            move = bat.rate_frac * cap
            state = bat.init_frac * cap
            spill = 0.0
            deficit = 0.0
            for t in range(k):
                pre = gamma * state + net[t]
                floor = state - move
                if floor < lo:
                    floor = lo
                ceil = state + move
                if ceil > hi:
                    ceil = hi
                if pre > ceil:
                    spill += pre - ceil
                    state = ceil
                elif pre < floor:
                    deficit += floor - pre
                    state = floor
                else:
                    state = pre
            cost = invest + prices.pi_b * cap + prices.pi_r * spill + prices.pi_g * deficit
            surface[ia, ic] = cost
            if zeh_ok:
                key = (cost, cap, a)
                if best is None or key < best:
                    best = key
    if best is None:
        return GridSearchResult(
            status=SolveStatus.INFEASIBLE,
            best_area=float("nan"),
            best_capacity=float("nan"),
            best_cost=float("nan"),
            a_values=a_values,
            c_values=c_values,
            cost_surface=surface,
        )
    cost, cap, a = best
    return GridSearchResult(
        status=SolveStatus.OPTIMAL,
        best_area=a,
        best_capacity=cap,
        best_cost=cost,
        a_values=a_values,
        c_values=c_values,
        cost_surface=surface,
    )


def _solve_lp(spec: SizingProblemSpec, config: SolverConfig | None = None) -> SizingSolution:
    lp, vmap = build_lp(spec)
    return extract_solution(solve(lp, config), vmap, spec)


def check_theorem1(
    spec: SizingProblemSpec,
    grid: GridSpec | None = None,
    solution: SizingSolution | None = None,
) -> Theorem1Report:
    """Relaxation bound: LP optimum <= grid optimum + one-grid-cell allowance."""
    if solution is None:
        solution = _solve_lp(spec)
    result = grid_search(spec, grid)
    if solution.status is not SolveStatus.OPTIMAL or result.status is not SolveStatus.OPTIMAL:
        both_infeasible = (
            solution.status is SolveStatus.INFEASIBLE
            and result.status is SolveStatus.INFEASIBLE
        )
        return Theorem1Report(
            lp_objective=solution.objective,
            oracle_cost=result.best_cost,
            slack=0.0,
            margin=0.0,
            passed=both_infeasible,
            best_area=result.best_area,
            best_capacity=result.best_capacity,
        )
    delta_a = float(result.a_values[1] - result.a_values[0])
    delta_c = float(result.c_values[1] - result.c_values[0])
    prices = spec.prices
    slack = prices.pi_pv * delta_a + (
        prices.pi_b + spec.num_steps * (abs(prices.pi_r) + prices.pi_g)
    ) * delta_c
    margin = result.best_cost + slack - solution.objective
    return Theorem1Report(
        lp_objective=solution.objective,
        oracle_cost=result.best_cost,
        slack=slack,
        margin=margin,
        passed=margin >= 0.0,
        best_area=result.best_area,
        best_capacity=result.best_capacity,
    )


def check_greedy_equality(
    spec: SizingProblemSpec,
    solution: SizingSolution | None = None,
    rel_tol: float = 1e-6,
) -> GreedyEqualityReport:
    """Tightness at positive overflow prices: simulate(a*, cbar*) == LP value."""
    if not (spec.prices.pi_r > 0 and spec.prices.pi_g > 0):
        raise ValueError("greedy equality requires pi_r > 0 and pi_g > 0")
    if solution is None:
        solution = _solve_lp(spec)
    if solution.status is not SolveStatus.OPTIMAL:
        raise ValueError(f"expected an optimal LP solution, got {solution.status}")
    _, cost = simulate(solution.pv_area, solution.capacity, spec)
    rel = abs(cost - solution.objective) / (1.0 + abs(solution.objective))
    return GreedyEqualityReport(
        lp_objective=solution.objective,
        simulated_cost=cost,
        rel_error=rel,
        passed=rel <= rel_tol,
    )


def find_perturbation(
    solution: SizingSolution,
    spec: SizingProblemSpec,
    tol: float = 1e-9,
) -> PerturbationWitness | None:
    """Construct a cost-neutral overflow shift certifying non-uniqueness.

    Looks for a step j where the state of charge saturates the upper band
    edge while the previous step is strictly inside (and generated no backup
    energy), or the mirrored pattern at the lower edge; the overflow at j can
    then be partially moved to j-1.  The shift is exactly cost-neutral only
    with lossless storage, so for retention < 1 no step qualifies and None is
    returned.
    """
    if solution.status is not SolveStatus.OPTIMAL:
        raise ValueError("find_perturbation requires an optimal solution")
    traj = solution.trajectory
    if traj is None:
        return None
    bat = spec.battery
    if bat.retention != 1.0:
        return None
    cap = solution.capacity
    if cap <= tol:
        return None
    lo = bat.alpha_lo * cap
    hi = bat.alpha_hi * cap
    move = bat.rate_frac * cap
    soc = traj.soc
    spill = traj.spill
    deficit = traj.deficit
    k = spec.num_steps

    for j in range(2, k + 1):
        s_prev = soc[j - 1]
        rate_up_prev = move - (soc[j - 1] - soc[j - 2])
        rate_dn_prev = move - (soc[j - 2] - soc[j - 1])
        rate_up_here = move - (soc[j] - soc[j - 1])
        rate_dn_here = move - (soc[j - 1] - soc[j])

        if (
            abs(soc[j] - hi) <= tol
            and s_prev > lo + tol
            and deficit[j - 2] <= tol
            and spill[j - 1] > tol
            and min(rate_dn_prev, rate_up_here) > tol
        ):
            room = min(
                spill[j - 1] / bat.retention,
                s_prev - lo,
                rate_dn_prev,
                rate_up_here,
            )
            delta = room / 2.0
            if delta <= tol:
                continue
            new_spill = spill.copy()
            new_soc = soc.copy()
            new_spill[j - 2] += delta
            new_spill[j - 1] -= bat.retention * delta
            new_soc[j - 1] -= delta
            new_traj = Trajectory(soc=new_soc, spill=new_spill, deficit=deficit.copy())
            cost_delta = spec.prices.pi_r * delta * (1.0 - bat.retention)
            return _verified_witness(
                solution, spec, j, "spill", -delta, new_traj, cost_delta
            )

        if (
            abs(soc[j] - lo) <= tol
            and s_prev < hi - tol
            and spill[j - 2] <= tol
            and deficit[j - 1] > tol
            and min(rate_up_prev, rate_dn_here) > tol
        ):
            room = min(
                deficit[j - 1] / bat.retention,
                hi - s_prev,
                rate_up_prev,
                rate_dn_here,
            )
            delta = room / 2.0
            if delta <= tol:
                continue
            new_deficit = deficit.copy()
            new_soc = soc.copy()
            new_deficit[j - 2] += delta
            new_deficit[j - 1] -= bat.retention * delta
            new_soc[j - 1] += delta
            new_traj = Trajectory(soc=new_soc, spill=spill.copy(), deficit=new_deficit)
            cost_delta = spec.prices.pi_g * delta * (1.0 - bat.retention)
            return _verified_witness(
                solution, spec, j, "deficit", -delta, new_traj, cost_delta
            )
    return None


def _verified_witness(solution, spec, j, kind, delta, new_traj, cost_delta):
    lp, vmap = build_lp(spec)
    z = pack_point(vmap, solution.pv_area, solution.capacity, new_traj)
    violation = max_row_violation(lp, z)
    if violation > 1e-9:
        raise RuntimeError(
            f"perturbation construction broke feasibility (violation {violation})"
        )
    return PerturbationWitness(
        index=j, kind=kind, delta=delta, trajectory=new_traj, cost_delta=cost_delta
    )


def timing_benchmark(
    spec: SizingProblemSpec,
    horizons,
    grid: GridSpec | None = None,
    config: SolverConfig | None = None,
) -> list[tuple[int, float, float]]:
    """Wall-time comparison of the LP path against the grid oracle per horizon.

    Each horizon takes the first K steps of the instance; rows come back as
    (K, lp_seconds, oracle_seconds).
    """
    horizons = list(horizons)
    if horizons != sorted(horizons):
        raise ValueError("horizons must be ascending")
    if horizons and horizons[-1] > spec.num_steps:
        raise ValueError("horizon exceeds the available data")
    rows = []
    for k in horizons:
        sub_households = tuple(
            replace_series(hh, k) for hh in spec.households
        )
        sub = SizingProblemSpec(
            mode=spec.mode,
            households=sub_households,
            battery=spec.battery,
            prices=spec.prices,
            a_max=spec.a_max,
            enforce_zeh=spec.enforce_zeh,
            grid=TimeGrid(num_steps=k, step_hours=spec.grid.step_hours),
        )
        t0 = time.perf_counter()
        lp, vmap = build_lp(sub)
        outcome = solve(lp, config)
        lp_seconds = time.perf_counter() - t0
        if outcome.status is not SolveStatus.OPTIMAL:
            raise RuntimeError(f"benchmark LP at K={k} ended {outcome.status}")
        t0 = time.perf_counter()
        grid_search(sub, grid)
        oracle_seconds = time.perf_counter() - t0
        rows.append((k, lp_seconds, oracle_seconds))
    return rows


def replace_series(hh: HouseholdSeries, k: int) -> HouseholdSeries:
    return HouseholdSeries(
        household_id=hh.household_id,
        consumption=hh.consumption[:k],
        pv_yield=hh.pv_yield[:k],
    )
