"""Construction of the relaxed sizing LP and extraction of solutions.

The saturation in the battery recursion is absorbed by splitting the
overflow into two nonnegative series (grid export and backup generation),
which turns the sizing problem into a plain LP:

    minimize  pi_pv*sum(a_i) + pi_b*cbar + sum_k (pi_r*spill_k + pi_g*deficit_k)

subject to, for k = 1..K,

    soc_k + spill_k - deficit_k - gamma*soc_{k-1} - sum_i a_i*Y_{k-1,i} = -sum_i X_{k-1,i}
    alpha_lo*cbar <= soc_k <= alpha_hi*cbar
    |soc_k - soc_{k-1}| <= rate*cbar

with soc_0 substituted by init_frac*cbar, bounds 0 <= a_i <= a_max,
cbar >= 0, spill, deficit >= 0, soc free, and optionally the net-zero row
sum_i a_i * sum_k Y_{k,i} >= sum_i sum_k X_{k,i}.

Variable order is a_1..a_N, cbar, soc_1..soc_K, spill_1..spill_K,
deficit_1..deficit_K; inequality rows are grouped by kind (hi, lo, rate-up,
rate-down, then the optional net-zero row).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import (
    SizingProblemSpec,
    SizingSolution,
    SolveStatus,
    Trajectory,
    require_convex_prices,
)

__all__ = [
    "VariableMap",
    "StandardFormLP",
    "ConsistencyError",
    "build_lp",
    "extract_solution",
    "pack_point",
    "max_row_violation",
]


class ConsistencyError(RuntimeError):
    """Solver output disagrees with an independent recomputation."""


@dataclass(frozen=True)
class VariableMap:
    """Bijection between LP columns and problem quantities."""

    n_households: int
    num_steps: int

    @property
    def n_vars(self) -> int:
        return self.n_households + 1 + 3 * self.num_steps

    @property
    def area(self) -> range:
        return range(0, self.n_households)

    @property
    def capacity(self) -> int:
        return self.n_households

    @property
    def soc(self) -> range:
        base = self.n_households + 1
        return range(base, base + self.num_steps)

    @property
    def spill(self) -> range:
        base = self.n_households + 1 + self.num_steps
        return range(base, base + self.num_steps)

    @property
    def deficit(self) -> range:
        base = self.n_households + 1 + 2 * self.num_steps
        return range(base, base + self.num_steps)

    def var_names(self) -> list[str]:
        names = [f"a_{i + 1}" for i in range(self.n_households)]
        names.append("Cbar")
        names += [f"C_{k + 1}" for k in range(self.num_steps)]
        names += [f"phip_{k + 1}" for k in range(self.num_steps)]
        names += [f"phim_{k + 1}" for k in range(self.num_steps)]
        return names


@dataclass
class StandardFormLP:
    """min c@z  s.t.  a_eq@z = b_eq,  a_ub@z <= b_ub,  lower <= z <= upper."""

    c: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    a_ub: sp.csr_matrix
    b_ub: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    eq_names: list[str] | None = None
    ub_names: list[str] | None = None

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    def validate(self) -> None:
        n = self.n_vars
        for mat, rhs, label in ((self.a_eq, self.b_eq, "eq"), (self.a_ub, self.b_ub, "ub")):
            if mat.shape[1] != n:
                raise ValueError(f"{label} matrix has wrong column count")
            if mat.shape[0] != rhs.shape[0]:
                raise ValueError(f"{label} rhs length mismatch")
            coo = mat.tocoo()
            if coo.nnz and not np.all(np.isfinite(coo.data)):
                raise ValueError(f"{label} matrix has non-finite entries")
            pairs = coo.row.astype(np.int64) * n + coo.col.astype(np.int64)
            if np.unique(pairs).shape[0] != coo.nnz:
                raise ValueError(f"{label} matrix has duplicate (row, col) entries")
            if not np.all(np.isfinite(rhs)):
                raise ValueError(f"{label} rhs has non-finite entries")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective has non-finite entries")
        if np.any(self.lower > self.upper):
            raise ValueError("crossed variable bounds")


def build_lp(spec: SizingProblemSpec) -> tuple[StandardFormLP, VariableMap]:
    """Assemble the relaxed sizing LP for an individual or pooled instance."""
    require_convex_prices(spec.prices)
    k = spec.num_steps
    if k < 1:
        raise ValueError("zero-length series")
    n_hh = spec.num_households
    vmap = VariableMap(n_households=n_hh, num_steps=k)
    n = vmap.n_vars

    bat = spec.battery
    gamma = bat.retention
    beta = bat.init_frac
    a_hi = bat.alpha_hi
    a_lo = bat.alpha_lo
    rate = bat.rate_frac
    prices = spec.prices

    c = np.zeros(n)
    c[list(vmap.area)] = prices.pi_pv
    c[vmap.capacity] = prices.pi_b
    c[list(vmap.spill)] = prices.pi_r
    c[list(vmap.deficit)] = prices.pi_g

    yields = np.stack([hh.pv_yield for hh in spec.households])
    demand = np.stack([hh.consumption for hh in spec.households])
    pooled_demand = demand.sum(axis=0)

    soc0 = vmap.soc.start
    sp0 = vmap.spill.start
    df0 = vmap.deficit.start
    cap = vmap.capacity

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    def put(r, col, v):
        rows.append(r)
        cols.append(col)
        vals.append(v)

    # Dynamics rows, one per step.
    for j in range(k):
        put(j, soc0 + j, 1.0)
        put(j, sp0 + j, 1.0)
        put(j, df0 + j, -1.0)
        if j == 0:
            put(j, cap, -gamma * beta)
        else:
            put(j, soc0 + j - 1, -gamma)
        for i in range(n_hh):
            y = yields[i, j]
            if y != 0.0:
                put(j, i, -y)
    b_eq = -pooled_demand
    a_eq = sp.coo_matrix((vals, (rows, cols)), shape=(k, n)).tocsr()
    eq_names = [f"r_dyn_{j + 1}" for j in range(k)]

    rows, cols, vals = [], [], []
    r = 0
    ub_names: list[str] = []
    b_ub_parts: list[float] = []
    # Band rows: soc_k <= alpha_hi*cbar and soc_k >= alpha_lo*cbar.
    for j in range(k):
        put(r, soc0 + j, 1.0)
        put(r, cap, -a_hi)
        b_ub_parts.append(0.0)
        ub_names.append(f"r_hi_{j + 1}")
        r += 1
    for j in range(k):
        put(r, soc0 + j, -1.0)
        put(r, cap, a_lo)
        b_ub_parts.append(0.0)
        ub_names.append(f"r_lo_{j + 1}")
        r += 1
    # Rate rows; step 1 measures the move from the substituted initial charge.
    for j in range(k):
        put(r, soc0 + j, 1.0)
        if j == 0:
            put(r, cap, -(beta + rate))
        else:
            put(r, soc0 + j - 1, -1.0)
            put(r, cap, -rate)
        b_ub_parts.append(0.0)
        ub_names.append(f"r_rup_{j + 1}")
        r += 1
    for j in range(k):
        put(r, soc0 + j, -1.0)
        if j == 0:
            if beta - rate != 0.0:
                put(r, cap, beta - rate)
        else:
            put(r, soc0 + j - 1, 1.0)
            put(r, cap, -rate)
        b_ub_parts.append(0.0)
        ub_names.append(f"r_rdn_{j + 1}")
        r += 1
    if spec.enforce_zeh:
        for i in range(n_hh):
            total_yield = float(yields[i].sum())
            if total_yield != 0.0:
                put(r, i, -total_yield)
        b_ub_parts.append(-float(demand.sum()))
        ub_names.append("r_zeh")
        r += 1
    a_ub = sp.coo_matrix((vals, (rows, cols)), shape=(r, n)).tocsr()
    b_ub = np.array(b_ub_parts)

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    lower[list(vmap.area)] = 0.0
    upper[list(vmap.area)] = spec.a_max
    lower[cap] = 0.0
    lower[list(vmap.spill)] = 0.0
    lower[list(vmap.deficit)] = 0.0
    # soc columns stay free; the band rows above bound them through cbar.

    lp = StandardFormLP(
        c=c,
        a_eq=a_eq,
        b_eq=b_eq,
        a_ub=a_ub,
        b_ub=b_ub,
        lower=lower,
        upper=upper,
        eq_names=eq_names,
        ub_names=ub_names,
    )
    return lp, vmap


def pack_point(
    vmap: VariableMap,
    a,
    capacity: float,
    traj: Trajectory,
) -> np.ndarray:
    """Assemble an LP point from problem-space quantities (soc_0 is dropped)."""
    z = np.zeros(vmap.n_vars)
    z[list(vmap.area)] = np.atleast_1d(np.asarray(a, dtype=float))
    z[vmap.capacity] = capacity
    z[list(vmap.soc)] = traj.soc[1:]
    z[list(vmap.spill)] = traj.spill
    z[list(vmap.deficit)] = traj.deficit
    return z


def max_row_violation(lp: StandardFormLP, z: np.ndarray) -> float:
    """Largest absolute constraint violation of `z` over all rows and bounds."""
    worst = 0.0
    if lp.a_eq.shape[0]:
        worst = float(np.abs(lp.a_eq @ z - lp.b_eq).max())
    if lp.a_ub.shape[0]:
        worst = max(worst, float(np.maximum(lp.a_ub @ z - lp.b_ub, 0.0).max()))
    worst = max(worst, float(np.maximum(lp.lower - z, 0.0).max(initial=0.0)))
    worst = max(worst, float(np.maximum(z - lp.upper, 0.0).max(initial=0.0)))
    return worst


def extract_solution(outcome, vmap: VariableMap, spec: SizingProblemSpec) -> SizingSolution:
    """Turn a raw solver outcome into a SizingSolution.

    The objective is recomputed from the primal vector and must agree with the
    solver's reported value to 1e-8 relative; disagreement means the solver and
    the formulation have diverged and is raised as an error rather than
    papered over.
    """
    status = outcome.status
    if status is not SolveStatus.OPTIMAL:
        return SizingSolution(
            pv_area=np.zeros(spec.num_households),
            capacity=0.0,
            trajectory=None,
            objective=float("nan"),
            status=status,
            iterations=outcome.iterations,
            wall_time=outcome.wall_time,
        )
    z = outcome.primal
    if z.shape[0] != vmap.n_vars:
        raise ConsistencyError(
            f"primal vector has {z.shape[0]} entries, expected {vmap.n_vars}"
        )
    lp_cost = _objective(z, vmap, spec)
    scale = 1.0 + abs(outcome.objective)
    if abs(lp_cost - outcome.objective) > 1e-8 * scale:
        raise ConsistencyError(
            f"recomputed objective {lp_cost} differs from solver value "
            f"{outcome.objective}"
        )
    capacity = float(z[vmap.capacity])
    soc = np.empty(vmap.num_steps + 1)
    soc[0] = spec.battery.init_frac * capacity
    soc[1:] = z[list(vmap.soc)]
    traj = Trajectory(
        soc=soc,
        spill=np.maximum(z[list(vmap.spill)], 0.0),
        deficit=np.maximum(z[list(vmap.deficit)], 0.0),
    )
    return SizingSolution(
        pv_area=z[list(vmap.area)].copy(),
        capacity=capacity,
        trajectory=traj,
        objective=lp_cost,
        status=status,
        iterations=outcome.iterations,
        wall_time=outcome.wall_time,
    )


def _objective(z: np.ndarray, vmap: VariableMap, spec: SizingProblemSpec) -> float:
    prices = spec.prices
    return (
        prices.pi_pv * float(z[list(vmap.area)].sum())
        + prices.pi_b * float(z[vmap.capacity])
        + prices.pi_r * float(z[list(vmap.spill)].sum())
        + prices.pi_g * float(z[list(vmap.deficit)].sum())
    )
