"""Small dense linear-program solver (maximization, finite box bounds).

Two-phase revised simplex over bounded variables with Bland's anti-cycling
rule.  Problems here are tiny (a handful of rows, up to a few thousand
columns), so every iteration refactorizes the basis for numerical hygiene
and determinism instead of maintaining an incremental inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RELATIONS = ("<=", "=", ">=")

_RCOST_TOL = 1e-9
_PIVOT_TOL = 1e-12
_FEAS_TOL = 1e-9
_DUALITY_TOL = 1e-7


@dataclass
class LinearProgram:
    """maximize objective . x subject to rows (a, rel, rhs) and box bounds."""

    objective: np.ndarray
    constraints: list[tuple[np.ndarray, str, float]]
    bounds: list[tuple[float, float]]

    def dimensions(self) -> tuple[int, int]:
        return len(self.bounds), len(self.constraints)


@dataclass(frozen=True)
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float
    witness: np.ndarray | None


class _Tableau:
    """Equality-form system A z = b with z in [0, ub] and basis bookkeeping."""

    def __init__(self, A: np.ndarray, b: np.ndarray, ub: np.ndarray, basis: list[int]):
        self.A = A
        self.b = b
        self.ub = ub
        self.basis = basis
        self.at_upper = np.zeros(A.shape[1], dtype=bool)

    def basic_values(self) -> np.ndarray:
        upper = self.at_upper.copy()
        upper[self.basis] = False
        z = self.b - self.A[:, upper] @ self.ub[upper]
        B = self.A[:, self.basis]
        return np.linalg.solve(B, z) if self.basis else np.zeros(0)

    def duals(self, c: np.ndarray) -> np.ndarray:
        if not self.basis:
            return np.zeros(0)
        return np.linalg.solve(self.A[:, self.basis].T, c[self.basis])

    def values(self) -> np.ndarray:
        z = np.where(self.at_upper, self.ub, 0.0)
        z[self.basis] = 0.0
        xb = self.basic_values()
        z[self.basis] = xb
        return z


def _simplex_core(tab: _Tableau, c: np.ndarray) -> str:
    """Optimize c.z over the tableau in place; returns 'optimal' or 'unbounded'."""
    n = tab.A.shape[1]
    is_basic = np.zeros(n, dtype=bool)
    is_basic[tab.basis] = True
    while True:
        y = tab.duals(c)
        reduced = c - tab.A.T @ y
        fixed = tab.ub <= _PIVOT_TOL
        improving = np.where(
            ~is_basic
            & ~fixed
            & (
                (~tab.at_upper & (reduced > _RCOST_TOL))
                | (tab.at_upper & (reduced < -_RCOST_TOL))
            )
        )[0]
        if improving.size == 0:
            return "optimal"
        j = int(improving[0])  # Bland: smallest index enters
        sigma = -1.0 if tab.at_upper[j] else 1.0
        w = (
            np.linalg.solve(tab.A[:, tab.basis], tab.A[:, j])
            if tab.basis
            else np.zeros(0)
        )
        xb = tab.basic_values()
        # x_j moves by sigma * t >= 0; basic variables move by -sigma * t * w.
        best_t = tab.ub[j] if np.isfinite(tab.ub[j]) else np.inf
        leave_row = -1
        leave_to_upper = False
        for i in range(len(tab.basis)):
            delta = -sigma * w[i]
            if delta < -_PIVOT_TOL:
                t_i = max(xb[i], 0.0) / -delta
                hits_upper = False
            elif delta > _PIVOT_TOL and np.isfinite(tab.ub[tab.basis[i]]):
                t_i = max(tab.ub[tab.basis[i]] - xb[i], 0.0) / delta
                hits_upper = True
            else:
                continue
            # Bland tie-break: strictly smaller t, or equal t with a smaller
            # basic variable index.
            if t_i < best_t - _PIVOT_TOL or (
                t_i < best_t + _PIVOT_TOL
                and leave_row >= 0
                and tab.basis[i] < tab.basis[leave_row]
            ):
                best_t = t_i
                leave_row = i
                leave_to_upper = hits_upper
        if not np.isfinite(best_t):
            return "unbounded"
        if leave_row < 0:
            # Entering variable runs to its opposite bound: a pure flip.
            tab.at_upper[j] = not tab.at_upper[j]
            continue
        leaving = tab.basis[leave_row]
        tab.basis[leave_row] = j
        is_basic[leaving] = False
        is_basic[j] = True
        tab.at_upper[leaving] = leave_to_upper
        tab.at_upper[j] = False


def _build_tableau(lp: LinearProgram) -> tuple[_Tableau, np.ndarray, np.ndarray, int]:
    """Shift bounds to zero, add slacks and artificials, return phase-1 state."""
    c0 = np.asarray(lp.objective, dtype=float)
    n = c0.size
    if len(lp.bounds) != n:
        raise ValueError("bounds length must match objective length")
    lo = np.array([bound[0] for bound in lp.bounds], dtype=float)
    hi = np.array([bound[1] for bound in lp.bounds], dtype=float)
    if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise ValueError("all variable bounds must be finite")
    if (hi < lo - _PIVOT_TOL).any():
        raise ValueError("upper bound below lower bound")
    m = len(lp.constraints)
    rows = np.zeros((m, n))
    rhs = np.zeros(m)
    slack_sign = np.zeros(m)
    for i, (a, rel, b) in enumerate(lp.constraints):
        a = np.asarray(a, dtype=float)
        if a.shape != (n,):
            raise ValueError(f"constraint {i} has wrong dimension")
        if rel not in RELATIONS:
            raise ValueError(f"unknown relation {rel!r}")
        rows[i] = a
        rhs[i] = b
        slack_sign[i] = {"<=": 1.0, "=": 0.0, ">=": -1.0}[rel]
    shifted_rhs = rhs - rows @ lo
    slack_cols = np.flatnonzero(slack_sign)
    k = slack_cols.size
    A = np.zeros((m, n + k + m))
    A[:, :n] = rows
    for pos, i in enumerate(slack_cols):
        A[i, n + pos] = slack_sign[i]
    for i in range(m):
        A[i, n + k + i] = 1.0
    b_vec = shifted_rhs.copy()
    flip = b_vec < 0
    A[flip] *= -1.0
    # Keep the artificial coefficient at +1 so the start basis is feasible.
    for i in np.flatnonzero(flip):
        A[i, n + k + i] = 1.0
    b_vec[flip] *= -1.0
    ub = np.concatenate([hi - lo, np.full(k + m, np.inf)])
    tab = _Tableau(A, b_vec, ub, [n + k + i for i in range(m)])
    return tab, lo, c0, n


def _drive_out_artificials(tab: _Tableau, first_artificial: int) -> None:
    """Pivot zero-valued basic artificials out; drop rows that are redundant."""
    keep = np.ones(tab.A.shape[0], dtype=bool)
    for row, col in enumerate(list(tab.basis)):
        if col < first_artificial:
            continue
        pivoted = False
        B = tab.A[:, tab.basis]
        e = np.zeros(len(tab.basis))
        e[row] = 1.0
        brow = np.linalg.solve(B.T, e)
        for j in range(first_artificial):
            if j in tab.basis:
                continue
            if abs(brow @ tab.A[:, j]) > 1e-9:
                tab.basis[row] = j
                tab.at_upper[j] = False
                pivoted = True
                break
        if not pivoted:
            keep[row] = False
    if not keep.all():
        tab.A = tab.A[keep]
        tab.b = tab.b[keep]
        tab.basis = [tab.basis[i] for i in np.flatnonzero(keep)]


def _solve_phases(lp: LinearProgram) -> tuple[str, _Tableau | None, np.ndarray, np.ndarray, int]:
    tab, lo, c0, n = _build_tableau(lp)
    total = tab.A.shape[1]
    first_artificial = total - lp.dimensions()[1]
    phase1_c = np.zeros(total)
    phase1_c[first_artificial:] = -1.0
    status = _simplex_core(tab, phase1_c)
    if status != "optimal":
        raise ArithmeticError("phase 1 cannot be unbounded")
    infeasibility = -float(phase1_c @ tab.values())
    if infeasibility > _FEAS_TOL:
        return "infeasible", None, lo, c0, n
    _drive_out_artificials(tab, first_artificial)
    tab.ub[first_artificial:] = 0.0
    tab.at_upper[first_artificial:] = False
    phase2_c = np.zeros(total)
    phase2_c[:n] = c0
    status = _simplex_core(tab, phase2_c)
    return status, tab, lo, c0, n


def _check_optimal(lp: LinearProgram, tab: _Tableau, c_full: np.ndarray, value: float, witness: np.ndarray) -> None:
    """Primal feasibility, objective consistency, and strong duality."""
    for a, rel, b in lp.constraints:
        lhs = float(np.asarray(a, dtype=float) @ witness)
        if rel == "<=" and lhs > b + _FEAS_TOL:
            raise ArithmeticError("optimal witness violates a <= constraint")
        if rel == ">=" and lhs < b - _FEAS_TOL:
            raise ArithmeticError("optimal witness violates a >= constraint")
        if rel == "=" and abs(lhs - b) > _FEAS_TOL:
            raise ArithmeticError("optimal witness violates an = constraint")
    for x_j, (lo_j, hi_j) in zip(witness, lp.bounds):
        if x_j < lo_j - _FEAS_TOL or x_j > hi_j + _FEAS_TOL:
            raise ArithmeticError("optimal witness violates a bound")
    if abs(value - float(np.asarray(lp.objective, dtype=float) @ witness)) > _FEAS_TOL:
        raise ArithmeticError("objective value inconsistent with witness")
    y = tab.duals(c_full)
    reduced = c_full - tab.A.T @ y
    active_upper = tab.at_upper & (tab.ub > 0)
    dual_value = float(y @ tab.b + reduced[active_upper] @ tab.ub[active_upper])
    shifted_value = float(c_full @ tab.values())
    if abs(dual_value - shifted_value) > _DUALITY_TOL:
        raise ArithmeticError(
            f"duality gap {abs(dual_value - shifted_value):.2e} exceeds tolerance"
        )
    basic = np.zeros(c_full.size, dtype=bool)
    basic[tab.basis] = True
    movable = ~basic & (tab.ub > _PIVOT_TOL)
    bad_lower = (movable & ~tab.at_upper & (reduced > _DUALITY_TOL)).any()
    bad_upper = (movable & tab.at_upper & (reduced < -_DUALITY_TOL)).any()
    if bad_lower or bad_upper:
        raise ArithmeticError("dual certificate is not feasible")


def solve(lp: LinearProgram) -> LpSolution:
    """Optimal basic solution, deterministic across runs."""
    status, tab, lo, c0, n = _solve_phases(lp)
    if status == "infeasible":
        return LpSolution(status="infeasible", value=np.nan, witness=None)
    if status == "unbounded":
        return LpSolution(status="unbounded", value=np.inf, witness=None)
    assert tab is not None
    witness = lo + tab.values()[:n]
    value = float(c0 @ witness)
    c_full = np.zeros(tab.A.shape[1])
    c_full[:n] = c0
    _check_optimal(lp, tab, c_full, value, witness)
    return LpSolution(status="optimal", value=value, witness=witness)


def feasible(lp: LinearProgram) -> bool:
    """Phase-1 feasibility, consistent with solve."""
    status, _, _, _, _ = _solve_phases(lp)
    return status != "infeasible"
