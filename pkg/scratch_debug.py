import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from zehsizer.formulation import StandardFormLP
from zehsizer.simplex import SolverConfig, solve

rng = np.random.default_rng(0)
for trial in range(36):
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

print("n", n, "m_eq", m_eq, "m_ub", m_ub)
print("c", c)
print("a_eq", a_eq)
print("b_eq", b_eq)
print("a_ub", a_ub)
print("b_ub", b_ub)
print("lower", lower)
print("upper", upper)

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
print("mine:", mine.status, mine.objective, "iters", mine.iterations)
ref = linprog(c, A_eq=a_eq if m_eq else None, b_eq=b_eq if m_eq else None,
              A_ub=a_ub if m_ub else None, b_ub=b_ub if m_ub else None,
              bounds=list(zip(lower, upper)), method="highs")
print("ref:", ref.status, ref.message)
