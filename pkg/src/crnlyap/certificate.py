"""PWLR certificate objects and their construction from other function forms."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Optional, Sequence

from . import linalg
from .linalg import Matrix, Vector
from .partition import Partition, build_partition, locate


@dataclass(frozen=True)
class PwlrCertificate:
    """``Ṽ(r)`` given by rows c_k.

    Convex form (``H is None``): ``Ṽ(r) = max_k |c_k r|``.
    General form: row k is the linear piece on region k (first half) of the
    partition induced by ``H``; region ``m-1-k`` uses ``-c_k``.
    """

    C: Matrix
    H: Optional[Matrix] = None

    def __post_init__(self):
        if not self.C:
            raise ValueError("certificate has no rows")
        if len({len(r) for r in self.C}) != 1:
            raise ValueError("ragged coefficient matrix")
        for k, row in enumerate(self.C):
            if linalg.is_zero(row):
                raise ValueError(f"row {k + 1} of C is zero")
        if self.H is not None and (not self.H or len(self.H[0]) != len(self.C[0])):
            raise ValueError("H and C must have the same number of columns")

    @property
    def is_convex(self) -> bool:
        return self.H is None

    @property
    def nu(self) -> int:
        return len(self.C[0])

    @property
    def m(self) -> int:
        return 2 * len(self.C)

    def signed_row(self, k: int) -> Vector:
        """c_k for k < m/2 and -c_{m-1-k} otherwise."""
        half = len(self.C)
        if k < half:
            return self.C[k]
        return tuple(-x for x in self.C[self.m - 1 - k])

    def partition(self) -> Partition:
        if self.H is None:
            raise ValueError("convex certificates carry no H")
        return partition_of(self.H)


@lru_cache(maxsize=64)
def partition_of(H: Matrix) -> Partition:
    return build_partition(H)


def convex(C: Sequence[Sequence]) -> PwlrCertificate:
    return PwlrCertificate(linalg.matrix(C))


def general(C: Sequence[Sequence], H: Sequence[Sequence], align: bool = True) -> PwlrCertificate:
    """General-form certificate; with ``align`` the rows are matched to regions.

    Rows given in another order than the region enumeration (or negated,
    which swaps a region with its mirror) are permuted so that each row lies
    in the cone spanned by its region's signed rows.  Without a consistent
    matching the rows are kept as given and the checker reports the failure.
    """
    cert = PwlrCertificate(linalg.matrix(C), linalg.matrix(H))
    part = cert.partition()
    if part.m != cert.m:
        raise ValueError(f"general form needs {part.m // 2} rows for this H, got {len(cert.C)}")
    if align:
        rows = align_rows(cert.C, part)
        if rows is not None:
            cert = PwlrCertificate(rows, cert.H)
    return cert


def _in_cone(c: Sequence, gens: Sequence[Sequence]) -> bool:
    from .lp import Status, make_lp, solve

    A = [tuple(g[j] for g in gens) for j in range(len(c))]
    return solve(make_lp(A, ["="] * len(c), c, n_vars=len(gens))).status is Status.FEASIBLE


def align_rows(C: Matrix, part: Partition) -> Optional[Matrix]:
    """Rows of C reordered (and sign-fixed) so row k suits region k, or None."""
    half = part.m // 2
    fits = []
    for c in C:
        options = []
        for k in range(half):
            if _in_cone(c, part.signed_rows(k)):
                options.append((k, c))
            elif _in_cone(c, part.signed_rows(part.mirror(k))):
                options.append((k, tuple(-x for x in c)))
        fits.append(options)
    if all(any(k == i for k, _ in opts) for i, opts in enumerate(fits)):
        return tuple(next(v for k, v in opts if k == i) for i, opts in enumerate(fits))
    chosen: dict[int, Vector] = {}

    def assign(i: int) -> bool:
        if i == len(C):
            return True
        for k, v in fits[i]:
            if k not in chosen:
                chosen[k] = v
                if assign(i + 1):
                    return True
                del chosen[k]
        return False

    if not assign(0):
        return None
    return tuple(chosen[k] for k in range(half))


def normalize_rows(rows: Sequence[Sequence]) -> Matrix:
    """Drop zero rows and collapse parallel rows, keeping the largest multiple.

    ``max(|c r|, |t c r|) = |t c r|`` for ``|t| >= 1``, so the function is
    unchanged.  Order of first appearance is preserved.
    """
    kept: list[Vector] = []
    keys: list[Vector] = []
    for row in rows:
        row = linalg.vector(row)
        if linalg.is_zero(row):
            continue
        key, _ = linalg.canonical(row)
        if key in keys:
            g = keys.index(key)
            old = kept[g]
            lead = next(i for i, x in enumerate(key) if x)
            if abs(row[lead]) > abs(old[lead]):
                kept[g] = row
        else:
            keys.append(key)
            kept.append(row)
    return tuple(kept)


def from_sum_abs(rows: Sequence[Sequence]) -> PwlrCertificate:
    """ℓ∞ form of ``Σ_i |a_i r|`` via ``max_s |Σ_i s_i a_i r|``."""
    rows = linalg.matrix(rows)
    if not rows:
        raise ValueError("no terms")
    expanded = []
    for signs in product((1, -1), repeat=len(rows) - 1):
        s = (1,) + signs
        acc = [Fraction(0)] * len(rows[0])
        for si, a in zip(s, rows):
            for j, x in enumerate(a):
                acc[j] += si * x
        expanded.append(acc)
    return PwlrCertificate(normalize_rows(expanded))


def l1_candidate(xi: Sequence, gamma: Matrix) -> PwlrCertificate:
    """Convex form of ``‖diag(ξ) Γ r‖₁`` over the sign regions of Γ."""
    xi = linalg.vector(xi)
    if any(x < 0 for x in xi) or not any(xi):
        raise ValueError("ξ must be nonnegative and nonzero")
    if len(xi) != len(gamma):
        raise ValueError("ξ must have one entry per species")
    rows = [(x, row) for x, row in zip(xi, gamma) if not linalg.is_zero(row)]
    part = partition_of(tuple(row for _, row in rows))
    C = []
    for reg in part.regions[: part.m // 2]:
        acc = [Fraction(0)] * len(gamma[0])
        for s, (x, row) in zip(reg.signature, rows):
            if x:
                for j, v in enumerate(row):
                    acc[j] += s * x * v
        C.append(acc)
    return PwlrCertificate(normalize_rows(C))


def general_from_convex(cert: PwlrCertificate, H: Sequence[Sequence]) -> PwlrCertificate:
    """Assign each region of H the signed row attaining the max at its interior witness."""
    H = linalg.matrix(H)
    part = partition_of(H)
    signed = [cert.signed_row(k) for k in range(cert.m)]
    C = []
    for reg in part.regions[: part.m // 2]:
        w = reg.interior_witness
        best = max(signed, key=lambda c: linalg.dot(c, w))
        C.append(best)
    return PwlrCertificate(tuple(C), H)


def evaluate(cert: PwlrCertificate, r: Sequence) -> Fraction:
    """Exact value of Ṽ(r)."""
    r = linalg.vector(r)
    if len(r) != cert.nu:
        raise ValueError("rate vector has the wrong length")
    if cert.is_convex:
        return max(abs(linalg.dot(c, r)) for c in cert.C)
    part = cert.partition()
    ks = sorted(locate(part, r))
    values = {linalg.dot(cert.signed_row(k), r) for k in ks}
    if len(values) != 1:
        raise ValueError(f"linear pieces disagree at {r}: regions {ks} give {sorted(values)}")
    return values.pop()


def evaluate_float(cert: PwlrCertificate, r) -> float:
    """Floating-point Ṽ(r) for simulation monitoring."""
    import numpy as np

    r = np.asarray(r, dtype=float)
    C = np.array([[float(x) for x in row] for row in cert.C])
    if cert.is_convex:
        return float(np.max(np.abs(C @ r)))
    part = cert.partition()
    H = np.array([[float(x) for x in row] for row in part.H])
    vals = H @ r
    best = None
    for reg in part.regions:
        viol = float(np.max(-np.asarray(reg.signature) * vals, initial=0.0))
        if best is None or viol < best[0]:
            best = (viol, reg.index)
    k = best[1]
    c = np.array([float(x) for x in cert.signed_row(k)])
    return float(c @ r)
