"""A bounded-variable revised simplex solver over sparse matrices.

The solver works on the computational form

    min c@x   s.t.  A@x = b,   l <= x <= u,

obtained from a StandardFormLP by appending one slack column per inequality
row.  The basis matrix is kept factorized with a sparse LU (SuperLU via
scipy); between refactorizations the factorization is updated with
product-form eta vectors, and the basis is refactorized every
`refactor_interval` pivots or when numerical drift shows up.

Phase 1 minimizes the total size of artificial columns, which are only
created for rows that a singleton crash basis cannot make feasible: any
column with a single nonzero entry (slacks, but also structural columns such
as per-step overflow variables) can absorb its row's residual directly, so
well-shaped instances start feasible and skip phase 1 entirely.

Pricing is Dantzig (most negative reduced cost) with an automatic switch to
Bland's anti-cycling rule after a run of degenerate pivots; Bland can also be
selected outright.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .model import SolveStatus
from .formulation import StandardFormLP

__all__ = ["PivotRule", "SolverConfig", "SolveOutcome", "NumericalBreakdownError", "solve"]

_BASIC = 0
_AT_LOWER = 1
_AT_UPPER = 2
_FREE_NB = 3


class PivotRule(enum.Enum):
    BLAND = "bland"
    DANTZIG_WITH_BLAND_FALLBACK = "dantzig_bland_fallback"


class NumericalBreakdownError(RuntimeError):
    """Basis became singular beyond what refactorization can recover."""


@dataclass(frozen=True)
class SolverConfig:
    feasibility_tol: float = 1e-8
    optimality_tol: float = 1e-9
    max_iterations: int | None = None  # defaults to 50 * n_vars
    pivot_rule: PivotRule = PivotRule.DANTZIG_WITH_BLAND_FALLBACK
    refactor_interval: int = 100
    drift_tol: float = 1e-9

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.optimality_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class SolveOutcome:
    status: SolveStatus
    primal: np.ndarray
    objective: float
    iterations: int
    wall_time: float
    dual_objective: float = float("nan")


class _Basis:
    """Basis bookkeeping: LU factors of B plus a product-form eta file."""

    def __init__(self, a_csc: sp.csc_matrix, refactor_interval: int):
        self.a_csc = a_csc
        self.refactor_interval = refactor_interval
        self.lu = None
        self.etas: list[tuple[int, np.ndarray]] = []

    def refactor(self, basis: np.ndarray) -> None:
        mat = self.a_csc[:, basis].tocsc()
        try:
            self.lu = splu(mat)
        except RuntimeError as exc:  # SuperLU signals singularity this way
            raise NumericalBreakdownError(f"singular basis: {exc}") from exc
        self.etas = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        """Solve B @ x = v."""
        x = self.lu.solve(v)
        for r, w in self.etas:
            t = x[r] / w[r]
            if t != 0.0:
                x -= t * w
            x[r] = t
        return x

    def btran(self, v: np.ndarray) -> np.ndarray:
        """Solve B.T @ y = v."""
        y = v.copy()
        for r, w in reversed(self.etas):
            yr = y[r]
            s = w @ y
            y[r] = (yr - (s - w[r] * yr)) / w[r]
        return self.lu.solve(y, trans="T")

    def push_eta(self, r: int, w: np.ndarray) -> None:
        self.etas.append((r, w))

    @property
    def needs_refactor(self) -> bool:
        return len(self.etas) >= self.refactor_interval


def solve(lp: StandardFormLP, config: SolverConfig | None = None) -> SolveOutcome:
    """Solve a StandardFormLP; statuses follow the usual LP taxonomy."""
    if config is None:
        config = SolverConfig()
    t0 = time.perf_counter()
    lp.validate()

    n_struct = lp.n_vars
    m_eq = lp.a_eq.shape[0]
    m_ub = lp.a_ub.shape[0]
    m = m_eq + m_ub
    max_iter = config.max_iterations
    if max_iter is None:
        max_iter = max(200, 50 * n_struct)

    if m == 0:
        return _solve_unconstrained(lp, t0)

    # Assemble [A_eq; A_ub | I_slack] with slack columns on inequality rows.
    blocks = []
    if m_eq:
        blocks.append(sp.hstack([lp.a_eq, sp.csr_matrix((m_eq, m_ub))], format="csr"))
    if m_ub:
        blocks.append(sp.hstack([lp.a_ub, sp.eye(m_ub, format="csr")], format="csr"))
    a_work = sp.vstack(blocks, format="csc") if len(blocks) > 1 else blocks[0].tocsc()
    b = np.concatenate([lp.b_eq, lp.b_ub])
    lower = np.concatenate([lp.lower, np.zeros(m_ub)])
    upper = np.concatenate([lp.upper, np.full(m_ub, np.inf)])

    state = _SimplexState(a_work, b, lower, upper, lp.c, n_struct, config)
    state.crash()

    iterations = 0
    if state.n_art:
        if state.phase1_objective() > config.feasibility_tol:
            status, iterations = state.run(phase=1, budget=max_iter)
            if status is SolveStatus.ITERATION_LIMIT:
                return _outcome(SolveStatus.ITERATION_LIMIT, state, lp, iterations, t0)
            if status is SolveStatus.UNBOUNDED:
                raise NumericalBreakdownError("phase 1 reported an unbounded ray")
            if state.phase1_objective() > config.feasibility_tol:
                return _outcome(SolveStatus.INFEASIBLE, state, lp, iterations, t0)
        state.seal_artificials()

    status, more = state.run(phase=2, budget=max_iter - iterations)
    iterations += more
    return _outcome(status, state, lp, iterations, t0)


def _outcome(status, state, lp, iterations, t0) -> SolveOutcome:
    if status is SolveStatus.OPTIMAL:
        primal = state.primal_struct()
        objective = float(lp.c @ primal)
        dual = state.dual_objective()
    else:
        primal = np.full(lp.n_vars, np.nan)
        objective = float("nan")
        dual = float("nan")
    return SolveOutcome(
        status=status,
        primal=primal,
        objective=objective,
        iterations=iterations,
        wall_time=time.perf_counter() - t0,
        dual_objective=dual,
    )


def _solve_unconstrained(lp, t0) -> SolveOutcome:
    # No rows: each variable independently sits at whichever bound its cost prefers.
    x = np.clip(0.0, lp.lower, lp.upper)
    pos = lp.c > 0
    neg = lp.c < 0
    x[pos] = lp.lower[pos]
    x[neg] = lp.upper[neg]
    if not np.all(np.isfinite(x)):
        return SolveOutcome(
            SolveStatus.UNBOUNDED, np.full(lp.n_vars, np.nan), float("nan"), 0,
            time.perf_counter() - t0,
        )
    obj = float(lp.c @ x)
    return SolveOutcome(SolveStatus.OPTIMAL, x, obj, 0, time.perf_counter() - t0, obj)


class _SimplexState:
    def __init__(self, a_csc, b, lower, upper, c_struct, n_struct, config):
        self.config = config
        self.b = b
        self.m = a_csc.shape[0]
        self.n_cols = a_csc.shape[1]
        self.n_struct = n_struct
        self.lower = lower.copy()
        self.upper = upper.copy()
        self.c_phase2 = np.zeros(self.n_cols)
        self.c_phase2[:n_struct] = c_struct
        self.a_csc = a_csc.tocsc()
        self.a_csc.sort_indices()
        self.n_art = 0
        self._art_start = self.n_cols
        self.basis = None
        self.status_arr = None
        self.x = None  # values for every column; basics tracked here too
        self.fixed = None
        self.factor: _Basis | None = None
        self.pivot_tol = 1e-9

    # -- setup -----------------------------------------------------------

    def crash(self) -> None:
        """Choose a starting basis from singleton columns; add artificials elsewhere."""
        lower, upper = self.lower, self.upper
        x = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
        status = np.where(
            np.isfinite(lower),
            _AT_LOWER,
            np.where(np.isfinite(upper), _AT_UPPER, _FREE_NB),
        ).astype(np.int8)

        residual = self.b - self.a_csc @ x

        indptr = self.a_csc.indptr
        indices = self.a_csc.indices
        data = self.a_csc.data
        nnz_per_col = np.diff(indptr)
        singles = np.flatnonzero(nnz_per_col == 1)
        by_row: dict[int, list[int]] = {}
        for j in singles:
            by_row.setdefault(int(indices[indptr[j]]), []).append(int(j))

        basis = np.full(self.m, -1, dtype=np.int64)
        for i in range(self.m):
            for j in by_row.get(i, ()):
                coef = data[indptr[j]]
                val = x[j] + residual[i] / coef
                if lower[j] - 1e-12 <= val <= upper[j] + 1e-12:
                    basis[i] = j
                    x[j] = val
                    status[j] = _BASIC
                    residual[i] = 0.0
                    break

        art_rows = np.flatnonzero(basis < 0)
        self.n_art = art_rows.shape[0]
        self._art_start = self.n_cols
        if self.n_art:
            signs = np.where(residual[art_rows] >= 0, 1.0, -1.0)
            art_block = sp.csc_matrix(
                (signs, (art_rows, np.arange(self.n_art))), shape=(self.m, self.n_art)
            )
            self.a_csc = sp.hstack([self.a_csc, art_block], format="csc")
            self.a_csc.sort_indices()
            self.lower = np.concatenate([self.lower, np.zeros(self.n_art)])
            self.upper = np.concatenate([self.upper, np.full(self.n_art, np.inf)])
            self.c_phase2 = np.concatenate([self.c_phase2, np.zeros(self.n_art)])
            x = np.concatenate([x, np.abs(residual[art_rows])])
            status = np.concatenate([status, np.full(self.n_art, _BASIC, dtype=np.int8)])
            basis[art_rows] = self._art_start + np.arange(self.n_art)
            self.n_cols += self.n_art

        self.basis = basis
        self.status_arr = status
        self.x = x
        self.fixed = self.upper - self.lower <= 0.0
        self.c_phase1 = np.zeros(self.n_cols)
        if self.n_art:
            self.c_phase1[self._art_start:] = 1.0
        self.factor = _Basis(self.a_csc, self.config.refactor_interval)
        self.factor.refactor(self.basis)

    def phase1_objective(self) -> float:
        if not self.n_art:
            return 0.0
        return float(self.x[self._art_start:].sum())

    def seal_artificials(self) -> None:
        """Pin artificial columns to zero so phase 2 cannot move them."""
        if not self.n_art:
            return
        self.lower[self._art_start:] = 0.0
        self.upper[self._art_start:] = 0.0
        self.fixed[self._art_start:] = True
        self.x[self._art_start:] = np.maximum(self.x[self._art_start:], 0.0)

    # -- iteration loop ----------------------------------------------------

    def run(self, phase: int, budget: int) -> tuple[SolveStatus, int]:
        c = self.c_phase1 if phase == 1 else self.c_phase2
        tol = self.config.optimality_tol
        use_bland = self.config.pivot_rule is PivotRule.BLAND
        bland_mode = use_bland
        degen_run = 0
        fallback_after = 3 * max(self.n_struct, 1)
        iterations = 0

        while True:
            if iterations >= max(budget, 0):
                return SolveStatus.ITERATION_LIMIT, iterations

            y = self.factor.btran(c[self.basis])
            d = c - (self.a_csc.T @ y)

            can_up = (
                ((self.status_arr == _AT_LOWER) | (self.status_arr == _FREE_NB))
                & (d < -tol)
                & ~self.fixed
            )
            can_dn = (
                ((self.status_arr == _AT_UPPER) | (self.status_arr == _FREE_NB))
                & (d > tol)
                & ~self.fixed
            )
            candidates = can_up | can_dn
            if phase == 2 and self.n_art:
                candidates[self._art_start:] = False
            if not candidates.any():
                if self.factor.etas:
                    # Re-price against a fresh factorization before declaring victory.
                    self._refresh()
                    continue
                return SolveStatus.OPTIMAL, iterations

            if bland_mode:
                j = int(np.flatnonzero(candidates)[0])
            else:
                scores = np.where(candidates, np.abs(d), 0.0)
                j = int(np.argmax(scores))
            direction = 1.0 if d[j] < 0 else -1.0

            a_j = np.zeros(self.m)
            start, end = self.a_csc.indptr[j], self.a_csc.indptr[j + 1]
            a_j[self.a_csc.indices[start:end]] = self.a_csc.data[start:end]
            w = self.factor.ftran(a_j)

            step, leave_pos, leave_to = self._ratio_test(j, direction, w, bland_mode)
            if step is None:
                if phase == 1:
                    raise NumericalBreakdownError("unbounded direction in phase 1")
                return SolveStatus.UNBOUNDED, iterations

            iterations += 1
            if step <= 1e-12:
                degen_run += 1
                if not use_bland and not bland_mode and degen_run >= fallback_after:
                    bland_mode = True
            else:
                degen_run = 0
                if not use_bland:
                    bland_mode = False

            self._apply_pivot(j, direction, w, step, leave_pos, leave_to, phase)

            if self.factor.needs_refactor:
                self._refresh()

    def _ratio_test(self, j, direction, w, bland_mode):
        """Largest admissible step along the entering direction.

        Returns (step, leaving_position, leaving_status); leaving_position is
        None for a bound flip of the entering column itself.
        """
        xb = self.x[self.basis]
        lb = self.lower[self.basis]
        ub = self.upper[self.basis]
        tw = direction * w

        limits = np.full(self.m, np.inf)
        pos = tw > self.pivot_tol
        if pos.any():
            limits[pos] = (xb[pos] - lb[pos]) / tw[pos]
        neg = tw < -self.pivot_tol
        if neg.any():
            limits[neg] = (ub[neg] - xb[neg]) / (-tw[neg])
        limits = np.maximum(limits, 0.0)

        own_range = self.upper[j] - self.lower[j]
        best = float(limits.min(initial=np.inf))
        if best == np.inf:
            if not np.isfinite(own_range):
                return None, None, None
            return own_range, None, None
        if own_range <= best:
            return own_range, None, None

        ties = np.flatnonzero(limits <= best + 1e-10)
        if bland_mode:
            r = int(ties[np.argmin(self.basis[ties])])
        else:
            r = int(ties[np.argmax(np.abs(tw[ties]))])
        leave_to = _AT_LOWER if tw[r] > 0 else _AT_UPPER
        return max(best, 0.0), r, leave_to

    def _apply_pivot(self, j, direction, w, step, leave_pos, leave_to, phase):
        if step > 0.0:
            self.x[self.basis] -= direction * step * w
        if leave_pos is None:
            # Bound flip: entering column runs to its opposite bound.
            self.x[j] = self.upper[j] if direction > 0 else self.lower[j]
            self.status_arr[j] = _AT_UPPER if direction > 0 else _AT_LOWER
            return
        leaving = int(self.basis[leave_pos])
        self.x[leaving] = self.lower[leaving] if leave_to == _AT_LOWER else self.upper[leaving]
        self.status_arr[leaving] = leave_to
        if phase == 1 and leaving >= self._art_start:
            # An artificial that leaves the basis is never allowed back.
            self.lower[leaving] = 0.0
            self.upper[leaving] = 0.0
            self.fixed[leaving] = True
            self.x[leaving] = 0.0
        self.x[j] = self.x[j] + direction * step
        self.status_arr[j] = _BASIC
        self.basis[leave_pos] = j
        if abs(w[leave_pos]) < 1e-11:
            self._refresh()
        else:
            self.factor.push_eta(leave_pos, w)

    def _refresh(self) -> None:
        """Refactorize and recompute basic values from scratch."""
        self.factor.refactor(self.basis)
        nb_x = self.x.copy()
        nb_x[self.basis] = 0.0
        rhs = self.b - self.a_csc @ nb_x
        fresh = self.factor.ftran(rhs)
        if not np.all(np.isfinite(fresh)):
            raise NumericalBreakdownError("non-finite basic values after refactor")
        self.x[self.basis] = fresh

    # -- reporting ---------------------------------------------------------

    def primal_struct(self) -> np.ndarray:
        return self.x[: self.n_struct].copy()

    def dual_objective(self) -> float:
        """Value of the bound-aware dual at the final basis."""
        c = self.c_phase2
        y = self.factor.btran(c[self.basis])
        d = c - (self.a_csc.T @ y)
        tol = 10 * self.config.optimality_tol
        d = np.where(np.abs(d) <= tol, 0.0, d)
        nonbasic = self.status_arr != _BASIC
        lo_fin = np.where(np.isfinite(self.lower), self.lower, 0.0)
        hi_fin = np.where(np.isfinite(self.upper), self.upper, 0.0)
        lo_part = np.where(nonbasic & (d > 0), d * lo_fin, 0.0)
        hi_part = np.where(nonbasic & (d < 0), d * hi_fin, 0.0)
        return float(self.b @ y + lo_part.sum() + hi_part.sum())
