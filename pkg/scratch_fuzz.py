"""Dev scratch: fuzz the bundled simplex against scipy.optimize.linprog."""
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from zehsizer.formulation import StandardFormLP
from zehsizer.simplex import SolverConfig, PivotRule, solve
from zehsizer.model import SolveStatus

rng = np.random.default_rng(0)
mismatch = 0
for trial in range(300):
    n = rng.integers(1, 12)
    m_eq = rng.integers(0, 5)
    m_ub = rng.integers(0, 8)
    density = 0.6
    a_eq = np.where(rng.random((m_eq, n)) < density, rng.normal(size=(m_eq, n)).round(2), 0.0)
    a_ub = np.where(rng.random((m_ub, n)) < density, rng.normal(size=(m_ub, n)).round(2), 0.0)
    c = rng.normal(size=n).round(2)
    b_eq = rng.normal(size=m_eq).round(2)
    b_ub = rng.normal(size=m_ub).round(2)
    lower = np.where(rng.random(n) < 0.7, rng.normal(size=n).round(2) - 1, -np.inf)
    upper = np.where(rng.random(n) < 0.7, rng.normal(size=n).round(2) + 2, np.inf)
    bad = lower > upper
    lower[bad], upper[bad] = upper[bad], lower[bad]

    lp = StandardFormLP(
        c=c,
        a_eq=sp.csr_matrix(a_eq) if m_eq else sp.csr_matrix((0, n)),
        b_eq=b_eq,
        a_ub=sp.csr_matrix(a_ub) if m_ub else sp.csr_matrix((0, n)),
        b_ub=b_ub,
        lower=lower,
        upper=upper,
    )
    mine = solve(lp, SolverConfig())
    ref = linprog(
        c,
        A_eq=a_eq if m_eq else None,
        b_eq=b_eq if m_eq else None,
        A_ub=a_ub if m_ub else None,
        b_ub=b_ub if m_ub else None,
        bounds=list(zip(lower, upper)),
        method="highs",
    )
    ref_status = {0: SolveStatus.OPTIMAL, 2: SolveStatus.INFEASIBLE, 3: SolveStatus.UNBOUNDED}.get(ref.status)
    ok = True
    if mine.status is not ref_status:
        ok = False
    elif mine.status is SolveStatus.OPTIMAL:
        scale = 1 + abs(ref.fun)
        if abs(mine.objective - ref.fun) > 1e-7 * scale:
            ok = False
    if not ok:
        mismatch += 1
        print(f"trial {trial}: mine={mine.status} obj={mine.objective:.6g} "
              f"ref={ref_status} obj={getattr(ref, 'fun', None)}")
        if mismatch > 5:
            break
print("mismatches:", mismatch, "of 300")
