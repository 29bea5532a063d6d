"""Exact rational linear algebra on small dense matrices.

Matrices are tuples of row tuples of ``Fraction``.  Everything here is exact;
the helpers are deliberately simple because the matrices involved are at most
a few dozen rows and columns.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

Vector = tuple[Fraction, ...]
Matrix = tuple[Vector, ...]


def to_fraction(value) -> Fraction:
    """Convert ints, Fractions, ``"p/q"`` strings and floats exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rational numbers")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value)
    if hasattr(value, "numerator") and hasattr(value, "denominator"):
        return Fraction(int(value.numerator), int(value.denominator))
    raise TypeError(f"cannot convert {value!r} to a rational number")


def vector(values: Iterable) -> Vector:
    return tuple(to_fraction(v) for v in values)


def matrix(rows: Iterable[Iterable]) -> Matrix:
    out = tuple(vector(r) for r in rows)
    if out and len({len(r) for r in out}) != 1:
        raise ValueError("ragged matrix")
    return out


def ncols(m: Matrix, default: int = 0) -> int:
    return len(m[0]) if m else default


def transpose(m: Matrix, n_cols: int | None = None) -> Matrix:
    if not m:
        return tuple(() for _ in range(n_cols or 0))
    return tuple(zip(*m))


def dot(u: Sequence, v: Sequence) -> Fraction:
    total = Fraction(0)
    for a, b in zip(u, v):
        if a and b:
            total += a * b
    return total


def mat_vec(m: Matrix, v: Sequence) -> Vector:
    return tuple(dot(row, v) for row in m)


def vec_mat(v: Sequence, m: Matrix) -> Vector:
    cols = ncols(m)
    out = [Fraction(0)] * cols
    for coef, row in zip(v, m):
        if coef:
            for j, x in enumerate(row):
                if x:
                    out[j] += coef * x
    return tuple(out)


def scale(v: Sequence, s) -> Vector:
    s = to_fraction(s)
    return tuple(s * x for x in v)


def add(u: Sequence, v: Sequence) -> Vector:
    return tuple(a + b for a, b in zip(u, v))


def sub(u: Sequence, v: Sequence) -> Vector:
    return tuple(a - b for a, b in zip(u, v))


def is_zero(v: Sequence) -> bool:
    return not any(v)


def rref(m: Matrix, n_cols: int | None = None) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and pivot columns."""
    rows = [list(r) for r in m]
    width = ncols(m, n_cols or 0)
    pivots: list[int] = []
    r = 0
    for c in range(width):
        pivot = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        p = rows[r][c]
        rows[r] = [x / p for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def rank(m: Matrix) -> int:
    return len(rref(m)[1])


def primitive(v: Sequence) -> Vector:
    """Scale a rational vector to a primitive integer vector (same direction)."""
    v = vector(v)
    if is_zero(v):
        return v
    den = 1
    for x in v:
        den = den * x.denominator // gcd(den, x.denominator)
    ints = [int(x * den) for x in v]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    return tuple(Fraction(x // g) for x in ints)


def canonical(v: Sequence) -> tuple[Vector, int]:
    """Primitive integer form with first nonzero entry positive, plus the sign used."""
    p = primitive(v)
    lead = next((x for x in p if x != 0), Fraction(0))
    if lead < 0:
        return tuple(-x for x in p), -1
    return p, 1


def nullspace(m: Matrix, n_cols: int | None = None) -> list[Vector]:
    """Basis of {x : m x = 0} as primitive integer vectors, deterministic."""
    width = ncols(m, n_cols or 0)
    if not m:
        return [tuple(Fraction(int(i == j)) for i in range(width)) for j in range(width)]
    rows, pivots = rref(m, width)
    free = [c for c in range(width) if c not in pivots]
    basis = []
    for f in free:
        x = [Fraction(0)] * width
        x[f] = Fraction(1)
        for row, pc in zip(rows, pivots):
            x[pc] = -row[f]
        basis.append(primitive(x))
    return basis


def left_nullspace(m: Matrix, n_rows: int | None = None) -> list[Vector]:
    """Basis of {d : dᵀ m = 0}."""
    rows = len(m) if m else (n_rows or 0)
    return nullspace(transpose(m), rows)


def in_rowspace(v: Sequence, m: Matrix) -> bool:
    if is_zero(v):
        return True
    if not m:
        return False
    return rank(m + (vector(v),)) == rank(m)


def same_rowspace(a: Matrix, b: Matrix) -> bool:
    ra, rb = rank(a) if a else 0, rank(b) if b else 0
    if ra != rb:
        return False
    if ra == 0:
        return True
    return rank(a + b) == ra


def solve_exact(m: Matrix, rhs: Sequence) -> Vector | None:
    """One solution of m x = rhs (free variables set to zero), or None."""
    width = ncols(m)
    aug = tuple(tuple(row) + (to_fraction(b),) for row, b in zip(m, rhs))
    rows, pivots = rref(aug, width + 1)
    if width in pivots:
        return None
    x = [Fraction(0)] * width
    for row, pc in zip(rows, pivots):
        x[pc] = row[width]
    return tuple(x)


def fmt(x: Fraction) -> str:
    """Serialize a rational as ``"p/q"`` (or ``"p"`` for integers)."""
    x = to_fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def fmt_vector(v: Sequence) -> list[str]:
    return [fmt(x) for x in v]


def fmt_matrix(m: Sequence[Sequence]) -> list[list[str]]:
    return [fmt_vector(r) for r in m]
