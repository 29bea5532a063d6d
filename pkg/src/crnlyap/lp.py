"""Exact rational linear programming.

A two-phase primal simplex over rationals with Bland's rule.  Free variables
keep a single tableau column: they may enter in either direction and, once
basic, never leave, so witnesses come out in the caller's coordinates.

Infeasibility is reported with a Farkas vector ``y`` over the constraint rows
(``y_i >= 0`` on inequality rows, free on equality rows) such that, writing
``s_i = -1`` for ``>=`` rows and ``+1`` otherwise, the aggregated inequality
``sum_i y_i s_i a_i x <= sum_i y_i s_i b_i`` holds for every feasible ``x`` yet
is violated by every ``x`` inside the variable bounds.  ``verify_certificate``
re-checks this, and every other outcome, by direct substitution.

Internally the tableau uses ``gmpy2.mpq`` for speed; all public values are
``fractions.Fraction``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

import gmpy2

from .linalg import Matrix, Vector, dot, matrix, to_fraction, vector

Bound = tuple[Optional[Fraction], Optional[Fraction]]

FREE: Bound = (None, None)
NONNEG: Bound = (Fraction(0), None)

_RELATIONS = ("<=", "=", ">=")


class Status(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    A: Matrix
    relations: tuple[str, ...]
    b: Vector
    bounds: tuple[Bound, ...]
    objective: Optional[Vector] = None
    sense: str = "max"

    def __post_init__(self):
        n = len(self.bounds)
        if len(self.relations) != len(self.A) or len(self.b) != len(self.A):
            raise ValueError("row count mismatch between A, relations and b")
        if any(len(row) != n for row in self.A):
            raise ValueError("column count of A does not match the number of variables")
        if any(r not in _RELATIONS for r in self.relations):
            raise ValueError(f"relations must be one of {_RELATIONS}")
        for lo, hi in self.bounds:
            if lo is not None and hi is not None and lo > hi:
                raise ValueError("variable bounds are not well ordered")
        if self.objective is not None and len(self.objective) != n:
            raise ValueError("objective length does not match the number of variables")
        if self.sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")

    @property
    def n_vars(self) -> int:
        return len(self.bounds)


def make_lp(A, relations, b, bounds=None, objective=None, sense="max", n_vars=None) -> LinearProgram:
    """Build a ``LinearProgram`` from plain Python numbers.

    ``bounds`` defaults to nonnegativity for every variable; an entry may be a
    ``(lo, hi)`` pair with ``None`` for a missing side, or the string ``"free"``.
    """
    A = matrix(A)
    if n_vars is None:
        if A:
            n_vars = len(A[0])
        elif bounds is not None:
            n_vars = len(bounds)
        elif objective is not None:
            n_vars = len(objective)
        else:
            n_vars = 0
    if bounds is None:
        bounds = [NONNEG] * n_vars
    norm = []
    for bd in bounds:
        if bd == "free" or bd is None:
            norm.append(FREE)
        else:
            lo, hi = bd
            norm.append((None if lo is None else to_fraction(lo), None if hi is None else to_fraction(hi)))
    return LinearProgram(
        A=A,
        relations=tuple(relations),
        b=vector(b),
        bounds=tuple(norm),
        objective=None if objective is None else vector(objective),
        sense=sense,
    )


@dataclass(frozen=True)
class LpOutcome:
    status: Status
    x: Optional[Vector] = None
    value: Optional[Fraction] = None
    farkas: Optional[Vector] = None
    ray: Optional[Vector] = None

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


def _q(x: Fraction):
    return gmpy2.mpq(x.numerator, x.denominator)


def _f(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


_ZERO = gmpy2.mpq(0)
_ONE = gmpy2.mpq(1)


class _Tableau:
    """Dense simplex tableau in the standardized problem ``A z = b, z >= 0`` (free z allowed)."""

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        nv = lp.n_vars
        # x_v = off_v + sg_v * z_v
        self.off = []
        self.sg = []
        free = []
        bound_rows = []
        for v, (lo, hi) in enumerate(lp.bounds):
            if lo is None and hi is None:
                self.off.append(_ZERO)
                self.sg.append(1)
                free.append(True)
            elif lo is not None:
                self.off.append(_q(lo))
                self.sg.append(1)
                free.append(False)
                if hi is not None:
                    bound_rows.append((v, _q(hi) - _q(lo)))
            else:
                self.off.append(_q(hi))
                self.sg.append(-1)
                free.append(False)

        rows = []  # (sparse coefficients over z, relation, rhs)
        for a, rel, rhs in zip(lp.A, lp.relations, lp.b):
            coefs = {v: _q(a[v]) * self.sg[v] for v in range(nv) if a[v]}
            shift = sum((_q(a[v]) * self.off[v] for v in coefs), _ZERO)
            rows.append((coefs, rel, _q(rhs) - shift))
        self.n_orig_rows = len(rows)
        for v, width in bound_rows:
            rows.append(({v: _ONE}, "<=", width))

        self.n_z = nv
        slack_of = []
        col = nv
        for _, rel, _ in rows:
            if rel == "=":
                slack_of.append(None)
            else:
                slack_of.append(col)
                col += 1
        first_art = col
        self.first_art = first_art
        self.flip = []
        init_basic = []
        art_col = first_art
        for i, (coefs, rel, rhs) in enumerate(rows):
            slack_coef = 0 if rel == "=" else (1 if rel == "<=" else -1)
            f = -1 if (rhs < 0 or (rhs == 0 and slack_coef == -1)) else 1
            self.flip.append(f)
            if slack_coef * f == 1:
                init_basic.append(slack_of[i])
            else:
                init_basic.append(art_col)
                art_col += 1
        self.n_cols = art_col
        self.free = free + [False] * (self.n_cols - nv)
        self.init_basic = init_basic

        self.T = []
        self.rhs = []
        for i, (coefs, rel, rhs) in enumerate(rows):
            f = self.flip[i]
            row = [_ZERO] * self.n_cols
            for k, c in coefs.items():
                row[k] = c * f
            if slack_of[i] is not None:
                row[slack_of[i]] = gmpy2.mpq(1 if rel == "<=" else -1) * f
            if init_basic[i] >= first_art:
                row[init_basic[i]] = _ONE
            self.T.append(row)
            self.rhs.append(rhs * f)
        self.basis = list(init_basic)
        self.live = [True] * len(self.T)

    # --- core pivoting -------------------------------------------------
    def _set_costs(self, costs):
        self.cost = costs
        d = list(costs)
        obj = _ZERO
        for i, row in enumerate(self.T):
            if not self.live[i]:
                continue
            cb = costs[self.basis[i]]
            if cb:
                for k, x in enumerate(row):
                    if x:
                        d[k] -= cb * x
                obj -= cb * self.rhs[i]
        self.d = d
        self.dobj = obj  # -(objective value)

    def _pivot(self, r: int, j: int):
        row = self.T[r]
        p = row[j]
        if p != 1:
            row = [x / p if x else _ZERO for x in row]
            self.T[r] = row
            self.rhs[r] /= p
        br = self.rhs[r]
        items = [(k, x) for k, x in enumerate(row) if x]
        for i, other in enumerate(self.T):
            if i == r or not self.live[i]:
                continue
            f = other[j]
            if not f:
                continue
            for k, x in items:
                other[k] -= f * x
            if br:
                self.rhs[i] -= f * br
        f = self.d[j]
        if f:
            for k, x in items:
                self.d[k] -= f * x
            self.dobj -= f * br
        self.basis[r] = j

    def _run(self, allow_art: bool):
        """Maximize current costs. Returns ('optimal', None) or ('unbounded', (j, dir))."""
        basic = set(self.basis[i] for i in range(len(self.T)) if self.live[i])
        limit = self.n_cols if allow_art else self.first_art
        while True:
            # Bland: lowest improving column, lowest basic index on ratio ties
            enter, direction = None, 1
            for j in range(limit):
                dj = self.d[j]
                if not dj or j in basic:
                    continue
                if dj > 0:
                    enter = j
                    break
                if self.free[j]:
                    enter, direction = j, -1
                    break
            if enter is None:
                return "optimal", None
            best = None
            for i, row in enumerate(self.T):
                if not self.live[i] or not row[enter] or self.free[self.basis[i]]:
                    continue
                e = row[enter] * direction
                if e > 0:
                    key = (self.rhs[i] / e, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return "unbounded", (enter, direction)
            r = best[1]
            basic.discard(self.basis[r])
            self._pivot(r, enter)
            basic.add(enter)

    # --- phases --------------------------------------------------------
    def solve(self) -> LpOutcome:
        lp = self.lp
        if self.n_cols > self.first_art:
            costs = [_ZERO] * self.n_cols
            for j in range(self.first_art, self.n_cols):
                costs[j] = -_ONE
            self._set_costs(costs)
            self._run(allow_art=True)
            if -self.dobj < 0:
                return LpOutcome(Status.INFEASIBLE, farkas=self._farkas())
            self._drive_out_artificials()

        if lp.objective is None:
            x = self._x()
            return LpOutcome(Status.FEASIBLE, x=x)

        sign = 1 if lp.sense == "max" else -1
        costs = [_ZERO] * self.n_cols
        for v in range(self.n_z):
            c = lp.objective[v]
            if c:
                costs[v] = _q(c) * self.sg[v] * sign
        self._set_costs(costs)
        status, info = self._run(allow_art=False)
        x = self._x()
        if status == "unbounded":
            return LpOutcome(Status.UNBOUNDED, x=x, ray=self._ray(*info))
        return LpOutcome(Status.FEASIBLE, x=x, value=dot(lp.objective, x))

    def _drive_out_artificials(self):
        for i in range(len(self.T)):
            if not self.live[i] or self.basis[i] < self.first_art:
                continue
            row = self.T[i]
            j = next((j for j in range(self.first_art) if row[j]), None)
            if j is None:
                self.live[i] = False
            else:
                self._pivot(i, j)

    def _x(self) -> Vector:
        z = [_ZERO] * self.n_cols
        for i in range(len(self.T)):
            if self.live[i]:
                z[self.basis[i]] = self.rhs[i]
        return tuple(_f(self.off[v] + self.sg[v] * z[v]) for v in range(self.n_z))

    def _ray(self, j: int, direction: int) -> Vector:
        dz = [_ZERO] * self.n_cols
        dz[j] = gmpy2.mpq(direction)
        for i, row in enumerate(self.T):
            if self.live[i] and row[j]:
                dz[self.basis[i]] -= row[j] * direction
        return tuple(_f(self.sg[v] * dz[v]) for v in range(self.n_z))

    def _farkas(self) -> Vector:
        # y_i = c_init - d_init for the column that was basic in row i initially
        y = [self.cost[col] - self.d[col] for col in self.init_basic]
        out = []
        for i in range(self.n_orig_rows):
            w = y[i] * self.flip[i]
            s = -1 if self.lp.relations[i] == ">=" else 1
            out.append(_f(w * s))
        return tuple(out)


def solve(lp: LinearProgram) -> LpOutcome:
    """Solve ``lp`` exactly; every outcome carries a checkable witness."""
    return _Tableau(lp).solve()


# --- verification ----------------------------------------------------------

def _row_ok(lhs: Fraction, rel: str, rhs: Fraction) -> bool:
    if rel == "<=":
        return lhs <= rhs
    if rel == ">=":
        return lhs >= rhs
    return lhs == rhs


def is_feasible_point(lp: LinearProgram, x: Sequence[Fraction]) -> bool:
    if x is None or len(x) != lp.n_vars:
        return False
    for v, (lo, hi) in enumerate(lp.bounds):
        if lo is not None and x[v] < lo:
            return False
        if hi is not None and x[v] > hi:
            return False
    return all(_row_ok(dot(a, x), rel, rhs) for a, rel, rhs in zip(lp.A, lp.relations, lp.b))


def _verify_farkas(lp: LinearProgram, y: Sequence[Fraction]) -> bool:
    if y is None or len(y) != len(lp.A):
        return False
    g = [Fraction(0)] * lp.n_vars
    rhs = Fraction(0)
    for yi, a, rel, bi in zip(y, lp.A, lp.relations, lp.b):
        if rel != "=" and yi < 0:
            return False
        w = -yi if rel == ">=" else yi
        if w:
            rhs += w * bi
            for v, av in enumerate(a):
                if av:
                    g[v] += w * av
    lower = Fraction(0)
    for v, (lo, hi) in enumerate(lp.bounds):
        gv = g[v]
        if gv == 0:
            continue
        if gv > 0:
            if lo is None:
                return False
            lower += gv * lo
        else:
            if hi is None:
                return False
            lower += gv * hi
    return lower > rhs


def _verify_ray(lp: LinearProgram, x, ray) -> bool:
    if ray is None or lp.objective is None or not is_feasible_point(lp, x):
        return False
    for v, (lo, hi) in enumerate(lp.bounds):
        if lo is not None and ray[v] < 0:
            return False
        if hi is not None and ray[v] > 0:
            return False
    for a, rel in zip(lp.A, lp.relations):
        if not _row_ok(dot(a, ray), rel, Fraction(0)):
            return False
    gain = dot(lp.objective, ray)
    return gain > 0 if lp.sense == "max" else gain < 0


def verify_certificate(lp: LinearProgram, outcome: LpOutcome) -> bool:
    """Re-check an outcome by exact substitution, independently of the solver."""
    if outcome.status is Status.FEASIBLE:
        if not is_feasible_point(lp, outcome.x):
            return False
        if lp.objective is not None:
            return outcome.value == dot(lp.objective, outcome.x)
        return True
    if outcome.status is Status.INFEASIBLE:
        return _verify_farkas(lp, outcome.farkas)
    return _verify_ray(lp, outcome.x, outcome.ray)


# --- strict cone interiors -------------------------------------------------

def strict_cone_interior(M: Sequence[Sequence]) -> Optional[Vector]:
    """Return r with ``M r >> 0`` if one exists, else None.

    Solves ``max t`` subject to ``M r >= t 1`` and ``t <= 1`` with r, t free.
    """
    M = matrix(M)
    if not M:
        return None
    nu = len(M[0])
    A = [tuple(row) + (Fraction(-1),) for row in M]
    A.append(tuple([Fraction(0)] * nu) + (Fraction(1),))
    rel = [">="] * len(M) + ["<="]
    b = [0] * len(M) + [1]
    lp = make_lp(A, rel, b, bounds=[FREE] * (nu + 1), objective=[0] * nu + [1])
    out = solve(lp)
    if out.status is not Status.FEASIBLE or out.value <= 0:
        return None
    r = out.x[:nu]
    assert all(dot(row, r) > 0 for row in M)
    return r


def feasible(A, relations, b, bounds=None) -> LpOutcome:
    """Convenience wrapper for a pure feasibility problem."""
    return solve(make_lp(A, relations, b, bounds=bounds))
