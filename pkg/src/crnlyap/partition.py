"""Conic partitions of rate space induced by a matrix H.

Region k is the cone ``{r : Σ_k H r >= 0}`` for a sign pattern Σ_k whose cone
has nonempty interior.  Regions are indexed from 0; region ``m - 1 - k`` is
the mirror image ``-W_k``.  The first half holds the regions whose first
original row has sign +1, sorted lexicographically with +1 before -1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from . import linalg
from .linalg import Matrix, Vector
from .lp import FREE, Status, make_lp, solve, strict_cone_interior
from .network import positive_kernel_vector

MAX_REDUCED_ROWS = 20


@dataclass(frozen=True)
class Region:
    index: int
    signature: tuple[int, ...]
    reduced_signature: tuple[int, ...]
    interior_witness: Vector


@dataclass(frozen=True)
class Partition:
    H: Matrix
    mu: Optional[Vector]
    reduced: Matrix
    row_group: tuple[int, ...]
    row_sign: tuple[int, ...]
    representative: tuple[int, ...]
    regions: tuple[Region, ...]
    neighbors: dict

    @property
    def m(self) -> int:
        return len(self.regions)

    @property
    def nu(self) -> int:
        return len(self.H[0])

    def mirror(self, k: int) -> int:
        return self.m - 1 - k

    def signed_rows(self, k: int) -> Matrix:
        """Σ_k H."""
        sig = self.regions[k].signature
        return tuple(tuple(s * x for x in row) for s, row in zip(sig, self.H))

    def facet_rows(self, k: int) -> list[int]:
        """Original row indices s_k(𝒩_k) bounding region k, in neighbor order."""
        return sorted({t for (a, _), t in self.neighbors.items() if a == k})

    def neighbors_of(self, k: int) -> dict[int, int]:
        """Map neighbor region j -> switched original row s_k(j)."""
        return {j: t for (a, j), t in self.neighbors.items() if a == k}


def _enumerate(reduced: Matrix, first_sign: int) -> list[tuple[tuple[int, ...], Vector]]:
    """Reduced signatures with nonempty interior whose first entry is ``first_sign``.

    Depth-first over rows, pruning prefixes whose cone already has empty
    interior; a witness of the prefix decides one extension for free.
    """
    p = len(reduced)
    out = []
    first = tuple(first_sign * x for x in reduced[0])
    w0 = strict_cone_interior([first])
    stack = [((first_sign,), w0)]
    while stack:
        sig, w = stack.pop()
        t = len(sig)
        if t == p:
            out.append((sig, w))
            continue
        h = reduced[t]
        val = linalg.dot(h, w)
        for s in (1, -1):
            cand = sig + (s,)
            if val * s > 0:
                stack.append((cand, w))
                continue
            M = [tuple(si * x for x in reduced[i]) for i, si in enumerate(cand)]
            r = strict_cone_interior(M)
            if r is not None:
                stack.append((cand, r))
    return out


def build_partition(
    H: Sequence[Sequence],
    check_kernel_against: Optional[Matrix] = None,
    require_mu: bool = False,
) -> Partition:
    """Enumerate the nonempty-interior cones of H with symmetry and neighbor data."""
    H = linalg.matrix(H)
    if not H:
        raise ValueError("H has no rows")
    nu = len(H[0])
    for i, row in enumerate(H):
        if linalg.is_zero(row):
            raise ValueError(f"row {i + 1} of H is zero")
    if check_kernel_against is not None and not linalg.same_rowspace(H, check_kernel_against):
        raise ValueError("ker H differs from ker Γ")
    mu = positive_kernel_vector(H, nu)
    if require_mu and mu is None:
        raise ValueError("H has no strictly positive kernel vector")

    reduced: list[Vector] = []
    row_group = []
    row_sign = []
    representative = []
    for i, row in enumerate(H):
        canon, sign = linalg.canonical(row)
        if canon in reduced:
            g = reduced.index(canon)
        else:
            g = len(reduced)
            reduced.append(canon)
            representative.append(i)
        row_group.append(g)
        row_sign.append(sign)
    if len(reduced) > MAX_REDUCED_ROWS:
        raise ValueError(f"{len(reduced)} reduced rows exceed the enumeration cap of {MAX_REDUCED_ROWS}")
    reduced_t = tuple(reduced)

    half = _enumerate(reduced_t, row_sign[0])

    def lift(rsig):
        return tuple(row_sign[i] * rsig[row_group[i]] for i in range(len(H)))

    half.sort(key=lambda item: tuple(0 if s > 0 else 1 for s in lift(item[0])))
    regions = [Region(k, lift(rs), rs, w) for k, (rs, w) in enumerate(half)]
    m = 2 * len(half)
    for k in reversed(range(len(half))):
        r = regions[k]
        regions.append(
            Region(
                m - 1 - k,
                tuple(-s for s in r.signature),
                tuple(-s for s in r.reduced_signature),
                tuple(-x for x in r.interior_witness),
            )
        )

    neighbors = {}
    for a in regions:
        for b in regions:
            diff = [t for t, (x, y) in enumerate(zip(a.reduced_signature, b.reduced_signature)) if x != y]
            if len(diff) == 1:
                neighbors[(a.index, b.index)] = representative[diff[0]]

    return Partition(
        H=H,
        mu=mu,
        reduced=reduced_t,
        row_group=tuple(row_group),
        row_sign=tuple(row_sign),
        representative=tuple(representative),
        regions=tuple(regions),
        neighbors=neighbors,
    )


def locate(partition: Partition, r: Sequence) -> set[int]:
    """All regions k with Σ_k H r >= 0."""
    r = linalg.vector(r)
    vals = linalg.mat_vec(partition.H, r)
    return {
        reg.index
        for reg in partition.regions
        if all(s * v >= 0 for s, v in zip(reg.signature, vals))
    }


def facet_witness(partition: Partition, k: int, j: int) -> Optional[Vector]:
    """A relative-interior point of the common facet of neighbors k and j."""
    t = partition.neighbors.get((k, j))
    if t is None:
        return None
    g = partition.row_group[t]
    red = partition.reduced
    sig = partition.regions[k].reduced_signature
    nu = partition.nu
    A, rel, b = [], [], []
    for i, row in enumerate(red):
        if i == g:
            A.append(tuple(row) + (Fraction(0),))
            rel.append("=")
        else:
            A.append(tuple(sig[i] * x for x in row) + (Fraction(-1),))
            rel.append(">=")
        b.append(0)
    A.append(tuple([Fraction(0)] * nu) + (Fraction(1),))
    rel.append("<=")
    b.append(1)
    out = solve(make_lp(A, rel, b, bounds=[FREE] * (nu + 1), objective=[0] * nu + [1]))
    if out.status is not Status.FEASIBLE or out.value <= 0:
        return None
    return out.x[:nu]


@dataclass(frozen=True)
class RefinedPartition:
    """Partition over H = [Γ; Ĥ] with the species-row map and the q-map."""

    partition: Partition
    sign_regions: Partition
    species_rows: tuple[Optional[int], ...]
    q: tuple[int, ...]

    def species_signs(self, k: int) -> tuple[int, ...]:
        """Sign of ẋ_i on region k (0 for species whose Γ row is zero)."""
        sig = self.partition.regions[k].signature
        return tuple(0 if row is None else sig[row] for row in self.species_rows)


def refine_with_sign_regions(gamma: Matrix, hhat: Optional[Sequence[Sequence]] = None) -> RefinedPartition:
    """Partition over [Γ; Ĥ]; zero rows of Γ are skipped (their species sign is 0)."""
    gamma = linalg.matrix(gamma)
    nu = len(gamma[0])
    hhat = linalg.matrix(hhat) if hhat else ()
    if hhat and len(hhat[0]) != nu:
        raise ValueError("Ĥ has the wrong number of columns")
    for v in linalg.nullspace(gamma, nu):
        if any(linalg.mat_vec(hhat, v)):
            raise ValueError("ker Γ is not contained in ker Ĥ")
    species_rows = []
    rows = []
    for row in gamma:
        if linalg.is_zero(row):
            species_rows.append(None)
        else:
            species_rows.append(len(rows))
            rows.append(row)
    hhat_rows = [row for row in hhat if not linalg.is_zero(row)]
    sign_regions = build_partition(rows)
    if hhat_rows:
        refined = build_partition(rows + hhat_rows)
    else:
        refined = sign_regions
    lookup = {reg.signature: reg.index for reg in sign_regions.regions}
    n_rows = len(rows)
    q = tuple(lookup[reg.signature[:n_rows]] for reg in refined.regions)
    return RefinedPartition(refined, sign_regions, tuple(species_rows), q)
