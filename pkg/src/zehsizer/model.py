"""Domain types for the PV/battery sizing problem and small scalar helpers.

Everything downstream (simulation, LP construction, the oracle, reporting)
speaks in terms of these types.  All of them are frozen dataclasses holding
read-only numpy arrays, so instances can be shared freely between workers.

Units: energies are kWh per time step, PV yield is kWh per m2 per step,
PV area is m2, prices are an abstract currency per m2 / per kWh.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Mode",
    "SolveStatus",
    "TimeGrid",
    "HouseholdSeries",
    "BatteryParams",
    "PriceSchedule",
    "SizingProblemSpec",
    "Trajectory",
    "SizingSolution",
    "PriceValidation",
    "NonconvexPriceError",
    "validate_prices",
    "baseline_cost",
    "savings_percent",
    "check_zeh",
]


class Mode(enum.Enum):
    """Whether each household invests on its own or the group pools one system."""

    INDIVIDUAL = "individual"
    COMMUNITY = "community"


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class NonconvexPriceError(ValueError):
    """Raised when a price schedule breaks the convexity assumption."""


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time discretization: K steps of `step_hours` hours each."""

    num_steps: int
    step_hours: float = 0.5

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if not self.step_hours > 0:
            raise ValueError("step_hours must be positive")

    @property
    def horizon_hours(self) -> float:
        return self.num_steps * self.step_hours

    @property
    def horizon_days(self) -> float:
        return self.horizon_hours / 24.0


@dataclass(frozen=True)
class HouseholdSeries:
    """Aligned consumption (kWh/step) and PV yield (kWh/m2/step) for one household."""

    household_id: str
    consumption: np.ndarray
    pv_yield: np.ndarray

    def __post_init__(self):
        cons = _frozen_array(self.consumption, "consumption")
        pv = _frozen_array(self.pv_yield, "pv_yield")
        if cons.shape != pv.shape:
            raise ValueError("consumption and pv_yield must have equal length")
        if np.any(cons < 0) or np.any(pv < 0):
            raise ValueError("consumption and pv_yield must be nonnegative")
        object.__setattr__(self, "consumption", cons)
        object.__setattr__(self, "pv_yield", pv)

    @property
    def num_steps(self) -> int:
        return self.consumption.shape[0]

    @property
    def total_consumption(self) -> float:
        return float(self.consumption.sum())

    @property
    def total_yield(self) -> float:
        return float(self.pv_yield.sum())


@dataclass(frozen=True)
class BatteryParams:
    """Physical battery constants.

    The usable band is [alpha_lo, alpha_hi] as fractions of the nominal
    capacity, `retention` is the per-step fraction of stored energy kept,
    `rate_frac` caps the per-step state-of-charge move as a fraction of
    capacity, and `init_frac` fixes the initial charge to init_frac * capacity
    (defaults to the bottom of the usable band).
    """

    alpha_hi: float = 0.95
    alpha_lo: float = 0.05
    retention: float = 0.999
    rate_frac: float = 0.5
    init_frac: float | None = None

    def __post_init__(self):
        if not 0.5 < self.alpha_hi <= 1.0:
            raise ValueError("alpha_hi must lie in (0.5, 1]")
        if not 0.0 <= self.alpha_lo < 0.5:
            raise ValueError("alpha_lo must lie in [0, 0.5)")
        if not 0.0 < self.retention <= 1.0:
            raise ValueError("retention must lie in (0, 1]")
        if not 0.0 < self.rate_frac <= 1.0:
            raise ValueError("rate_frac must lie in (0, 1]")
        if self.init_frac is None:
            object.__setattr__(self, "init_frac", self.alpha_lo)
        if not self.alpha_lo <= self.init_frac <= self.alpha_hi:
            raise ValueError("init_frac must lie within [alpha_lo, alpha_hi]")


@dataclass(frozen=True)
class PriceSchedule:
    """The four economic constants.

    pi_pv: price per m2 of panel, pi_b: price per kWh of battery capacity,
    pi_r: price per kWh injected into the grid (negative for a feed-in
    tariff), pi_g: price per kWh of backup generation.
    """

    pi_pv: float = 1000.0
    pi_b: float = 4500.0
    pi_r: float = 10.0
    pi_g: float = 30.0

    def __post_init__(self):
        if self.pi_pv < 0 or self.pi_b < 0:
            raise ValueError("pi_pv and pi_b must be nonnegative")

    def scaled_investment(self, factor: float) -> "PriceSchedule":
        """Return a copy with the investment prices scaled by `factor`.

        Used to amortize panel/battery prices onto a shorter data horizon;
        the per-kWh flow prices are left untouched.
        """
        return PriceSchedule(
            pi_pv=self.pi_pv * factor,
            pi_b=self.pi_b * factor,
            pi_r=self.pi_r,
            pi_g=self.pi_g,
        )


@dataclass(frozen=True)
class PriceValidation:
    ok: bool
    message: str


def validate_prices(prices: PriceSchedule) -> PriceValidation:
    """Check the convexity assumption pi_g >= 0 and pi_r >= -pi_g.

    The LP relaxation is only exact under these inequalities; the pipeline
    refuses to build an LP from a schedule that fails them.
    """
    if prices.pi_g < 0:
        return PriceValidation(
            False,
            "nonconvex cost configuration: pi_g >= 0 violated "
            f"(pi_g = {prices.pi_g})",
        )
    if prices.pi_r < -prices.pi_g:
        return PriceValidation(
            False,
            "nonconvex cost configuration: pi_r >= -pi_g violated "
            f"(pi_r = {prices.pi_r}, -pi_g = {-prices.pi_g})",
        )
    return PriceValidation(True, "ok")


def require_convex_prices(prices: PriceSchedule) -> None:
    result = validate_prices(prices)
    if not result.ok:
        raise NonconvexPriceError(result.message)


@dataclass(frozen=True)
class SizingProblemSpec:
    """A fully specified sizing problem instance."""

    mode: Mode
    households: tuple[HouseholdSeries, ...]
    battery: BatteryParams
    prices: PriceSchedule
    a_max: float
    enforce_zeh: bool
    grid: TimeGrid

    def __post_init__(self):
        object.__setattr__(self, "households", tuple(self.households))
        if not self.households:
            raise ValueError("at least one household is required")
        if self.mode is Mode.INDIVIDUAL and len(self.households) != 1:
            raise ValueError("individual mode takes exactly one household")
        if not self.a_max > 0:
            raise ValueError("a_max must be positive")
        k = self.grid.num_steps
        for hh in self.households:
            if hh.num_steps != k:
                raise ValueError(
                    f"household {hh.household_id!r} has {hh.num_steps} steps, "
                    f"grid expects {k}"
                )

    @property
    def num_steps(self) -> int:
        return self.grid.num_steps

    @property
    def num_households(self) -> int:
        return len(self.households)


@dataclass(frozen=True)
class Trajectory:
    """State-of-charge path plus the grid-export / backup-generation series.

    soc has K+1 entries (includes the initial charge), spill and deficit have
    K entries each and are nonnegative.
    """

    soc: np.ndarray
    spill: np.ndarray
    deficit: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "soc", _frozen_array(self.soc, "soc"))
        object.__setattr__(self, "spill", _frozen_array(self.spill, "spill"))
        object.__setattr__(self, "deficit", _frozen_array(self.deficit, "deficit"))
        if self.soc.shape[0] != self.spill.shape[0] + 1:
            raise ValueError("soc must have one more entry than spill")
        if self.spill.shape != self.deficit.shape:
            raise ValueError("spill and deficit must have equal length")


@dataclass(frozen=True)
class SizingSolution:
    """Result of one sizing run: panel areas, capacity, dispatch, and cost."""

    pv_area: np.ndarray
    capacity: float
    trajectory: Trajectory | None
    objective: float
    status: SolveStatus
    iterations: int = 0
    wall_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pv_area", _frozen_array(self.pv_area, "pv_area"))
        if self.status is SolveStatus.OPTIMAL:
            if not math.isfinite(self.objective):
                raise ValueError("optimal solution must carry a finite objective")
        elif math.isfinite(self.objective):
            raise ValueError("non-optimal solution must not carry a finite objective")

    @property
    def total_area(self) -> float:
        return float(self.pv_area.sum())


def baseline_cost(households, prices: PriceSchedule) -> float:
    """Cost of serving all demand from backup generation (no panels, no battery).

    This is the sizing objective evaluated at zero investment and is the
    reference point for savings percentages.
    """
    total = 0.0
    for hh in households:
        total += hh.total_consumption
    return prices.pi_g * total


def savings_percent(baseline: float, optimal: float) -> float:
    """Relative cost improvement over the no-investment baseline, in percent.

    May be negative: a constrained optimum can cost more than doing nothing.
    """
    if not baseline > 0:
        raise ValueError(f"baseline must be positive, got {baseline}")
    return 100.0 * (baseline - optimal) / baseline


def check_zeh(solution: SizingSolution, spec: SizingProblemSpec, tol: float = 0.0) -> bool:
    """Does the solution generate at least as much energy as is consumed?

    In community mode the balance is pooled across all households.
    """
    if solution.status is not SolveStatus.OPTIMAL:
        raise ValueError("check_zeh requires an optimal solution")
    generated = 0.0
    consumed = 0.0
    for area, hh in zip(solution.pv_area, spec.households):
        generated += area * hh.total_yield
        consumed += hh.total_consumption
    return generated >= consumed - tol
