"""Reaction networks: parsing, stoichiometry, kernels and graph combinatorics."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import gcd
from typing import Iterable, Optional, Sequence

from . import linalg
from .linalg import Matrix, Vector
from .lp import NONNEG, Status, make_lp, solve


class ParseError(ValueError):
    """Raised for malformed ``.crn`` input; carries 1-based line/column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class Reaction:
    """``sum alpha_i X_i -> sum beta_i X_i``; complexes are sorted (index, coef) pairs."""

    reactants: tuple[tuple[int, int], ...]
    products: tuple[tuple[int, int], ...]
    reverse_of: Optional[int] = None

    def __post_init__(self):
        if not self.reactants and not self.products:
            raise ValueError("reactants and products are both empty")
        for side in (self.reactants, self.products):
            if any(c <= 0 for _, c in side):
                raise ValueError("stoichiometric coefficients must be positive")
        shared = set(dict(self.reactants)) & set(dict(self.products))
        if shared:
            raise ValueError(f"species {sorted(shared)} on both sides (autocatalysis)")

    @property
    def alpha(self) -> dict[int, int]:
        return dict(self.reactants)

    @property
    def beta(self) -> dict[int, int]:
        return dict(self.products)


def _complex(d: dict[int, int]) -> tuple[tuple[int, int], ...]:
    return tuple(sorted((i, c) for i, c in d.items() if c))


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if len(set(self.species)) != len(self.species):
            raise ValueError("species names must be unique")
        n = len(self.species)
        for j, r in enumerate(self.reactions):
            for i, _ in r.reactants + r.products:
                if not 0 <= i < n:
                    raise ValueError(f"reaction {j + 1} references unknown species index {i}")
            if r.reverse_of is not None:
                k = r.reverse_of
                if not 0 <= k < len(self.reactions) or self.reactions[k].reverse_of != j:
                    raise ValueError(f"reaction {j + 1} has an unpaired reverse_of link")

    @property
    def n(self) -> int:
        return len(self.species)

    @property
    def nu(self) -> int:
        return len(self.reactions)

    @cached_property
    def alpha(self) -> tuple[tuple[int, ...], ...]:
        a = [[0] * self.nu for _ in range(self.n)]
        for j, r in enumerate(self.reactions):
            for i, c in r.reactants:
                a[i][j] = c
        return tuple(tuple(row) for row in a)

    @cached_property
    def beta(self) -> tuple[tuple[int, ...], ...]:
        b = [[0] * self.nu for _ in range(self.n)]
        for j, r in enumerate(self.reactions):
            for i, c in r.products:
                b[i][j] = c
        return tuple(tuple(row) for row in b)

    @cached_property
    def gamma(self) -> Matrix:
        return tuple(
            tuple(Fraction(b - a) for a, b in zip(arow, brow)) for arow, brow in zip(self.alpha, self.beta)
        )

    def reactant_set(self, j: int) -> frozenset[int]:
        """M_j, the species consumed by reaction j."""
        return frozenset(i for i, _ in self.reactions[j].reactants)

    @cached_property
    def inflows(self) -> frozenset[int]:
        return frozenset(j for j, r in enumerate(self.reactions) if not r.reactants)

    def output_reactions(self, species: Iterable[int]) -> frozenset[int]:
        """Λ(P): reactions having a reactant in P."""
        s = set(species)
        return frozenset(j for j, r in enumerate(self.reactions) if any(i in s for i, _ in r.reactants))

    def input_reactions(self, species: Iterable[int]) -> frozenset[int]:
        """Reactions producing some species of P."""
        s = set(species)
        return frozenset(j for j, r in enumerate(self.reactions) if any(i in s for i, _ in r.products))

    def index(self, name: str) -> int:
        return self.species.index(name)

    def subnetwork(self, species: Iterable[int], reactions: Iterable[int], source: str | None = None) -> "ReactionNetwork":
        """Restrict to the given species and reactions, dropping other species from complexes."""
        keep_s = sorted(set(species))
        keep_r = sorted(set(reactions))
        smap = {old: new for new, old in enumerate(keep_s)}
        rmap = {old: new for new, old in enumerate(keep_r)}
        out = []
        for j in keep_r:
            r = self.reactions[j]
            rev = r.reverse_of if r.reverse_of in rmap else None
            out.append(
                Reaction(
                    reactants=_complex({smap[i]: c for i, c in r.reactants if i in smap}),
                    products=_complex({smap[i]: c for i, c in r.products if i in smap}),
                    reverse_of=None if rev is None else rmap[rev],
                )
            )
        return ReactionNetwork(tuple(self.species[i] for i in keep_s), tuple(out), source)


# --- parsing ----------------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_TERM = re.compile(r"\s*(?:(\d+)\s*\*?\s*)?(" + _NAME + r")\s*$")
_HEADER = re.compile(r"\s*species\s*:(.*)$")


def _parse_side(text: str, line: int, col0: int) -> list[tuple[str, int]]:
    if text.strip() == "0":
        return []
    if not text.strip():
        raise ParseError("missing complex (use 0 for the empty complex)", line, col0 + 1)
    terms = []
    pos = col0
    for chunk in text.split("+"):
        m = _TERM.match(chunk)
        if not m:
            offset = len(chunk) - len(chunk.lstrip())
            raise ParseError(f"cannot parse term {chunk.strip()!r}", line, pos + offset + 1)
        coef = int(m.group(1)) if m.group(1) else 1
        if coef == 0:
            raise ParseError("zero stoichiometric coefficient", line, pos + 1)
        terms.append((m.group(2), coef))
        pos += len(chunk) + 1
    return terms


def parse_network(text: str, source: str | None = None) -> ReactionNetwork:
    """Parse the ``.crn`` text format.

    One reaction per line, ``2 A + B -> C`` or ``A <-> B`` for a reversible
    pair; ``0`` denotes the empty complex and ``#`` starts a comment.  An
    optional ``species: A B C`` line before the first reaction fixes the
    species order; otherwise species are ordered by first appearance.
    """
    header: list[str] | None = None
    raw: list[tuple[int, list[tuple[str, int]], list[tuple[str, int]], bool]] = []
    for lineno, full in enumerate(text.splitlines(), start=1):
        body = full.split("#", 1)[0]
        if not body.strip():
            continue
        hm = _HEADER.match(body)
        if hm:
            if header is not None:
                raise ParseError("duplicate species header", lineno, 1)
            if raw:
                raise ParseError("species header must precede reactions", lineno, 1)
            names = hm.group(1).replace(",", " ").split()
            for name in names:
                if not re.fullmatch(_NAME, name):
                    raise ParseError(f"invalid species name {name!r}", lineno, body.index(name) + 1)
            if len(set(names)) != len(names):
                raise ParseError("duplicate species in header", lineno, 1)
            header = names
            continue
        arrows = [(m.start(), m.group()) for m in re.finditer(r"<->|->", body)]
        if len(arrows) != 1:
            col = arrows[1][0] + 1 if len(arrows) > 1 else 1
            raise ParseError("expected exactly one '->' or '<->'", lineno, col)
        at, arrow = arrows[0]
        lhs = _parse_side(body[:at], lineno, 0)
        rhs = _parse_side(body[at + len(arrow):], lineno, at + len(arrow))
        if not lhs and not rhs:
            raise ParseError("reaction with empty reactant and product complexes", lineno, at + 1)
        raw.append((lineno, lhs, rhs, arrow == "<->"))
    if header is None and not raw:
        raise ParseError("empty network: no species and no reactions")

    order: list[str] = list(header) if header is not None else []
    known = set(order)
    for lineno, lhs, rhs, _ in raw:
        for name, _ in lhs + rhs:
            if name not in known:
                if header is not None:
                    raise ParseError(f"unknown species {name!r} (not in header)", lineno)
                order.append(name)
                known.add(name)
    idx = {name: i for i, name in enumerate(order)}

    reactions: list[Reaction] = []
    for lineno, lhs, rhs, reversible in raw:
        a: dict[int, int] = {}
        b: dict[int, int] = {}
        for name, c in lhs:
            a[idx[name]] = a.get(idx[name], 0) + c
        for name, c in rhs:
            b[idx[name]] = b.get(idx[name], 0) + c
        shared = sorted(set(a) & set(b))
        if shared:
            raise ParseError(f"AG1 violation: {order[shared[0]]} is both reactant and product", lineno)
        j = len(reactions)
        if reversible:
            reactions.append(Reaction(_complex(a), _complex(b), reverse_of=j + 1))
            reactions.append(Reaction(_complex(b), _complex(a), reverse_of=j))
        else:
            reactions.append(Reaction(_complex(a), _complex(b)))
    return ReactionNetwork(tuple(order), tuple(reactions), source)


def _format_complex(net: ReactionNetwork, cplx) -> str:
    if not cplx:
        return "0"
    return " + ".join((f"{c} " if c != 1 else "") + net.species[i] for i, c in cplx)


def format_network(net: ReactionNetwork) -> str:
    """Inverse of ``parse_network`` (up to whitespace and comments)."""
    lines = ["species: " + " ".join(net.species)]
    for j, r in enumerate(net.reactions):
        rev = r.reverse_of
        if rev is not None and rev < j:
            continue
        if rev is not None and rev == j + 1:
            lines.append(f"{_format_complex(net, r.reactants)} <-> {_format_complex(net, r.products)}")
        else:
            lines.append(f"{_format_complex(net, r.reactants)} -> {_format_complex(net, r.products)}")
    return "\n".join(lines) + "\n"


# --- linear algebra on Γ ----------------------------------------------------

def stoichiometry(net: ReactionNetwork) -> Matrix:
    """Γ with entries β_ij − α_ij (rows: species, columns: reactions)."""
    return net.gamma


def kernel_basis(gamma: Matrix, nu: int | None = None) -> list[Vector]:
    """Primitive integer basis of ker Γ."""
    return linalg.nullspace(gamma, nu)


def _strictly_positive_solution(A: Matrix, n_vars: int) -> Optional[Vector]:
    # the solution set is a cone, so v >> 0 exists iff v >= 1 is feasible
    if n_vars == 0:
        return None
    lp = make_lp(A, ["="] * len(A), [0] * len(A), bounds=[(1, None)] * n_vars, n_vars=n_vars)
    out = solve(lp)
    if out.status is not Status.FEASIBLE:
        return None
    return linalg.primitive(out.x)


def positive_kernel_vector(gamma: Matrix, nu: int | None = None) -> Optional[Vector]:
    """Some v >> 0 with Γ v = 0 (AG2), as a primitive integer vector."""
    width = linalg.ncols(gamma, nu or 0)
    basis = kernel_basis(gamma, width)
    if len(basis) == 1:
        v = basis[0]
        if all(x < 0 for x in v):
            v = tuple(-x for x in v)
        return v if all(x > 0 for x in v) else None
    return _strictly_positive_solution(gamma, width)


@dataclass(frozen=True)
class ConservationLaws:
    basis: tuple[Vector, ...]
    conservative: bool
    witness: Optional[Vector]


def conservation_laws(gamma: Matrix, n: int | None = None) -> ConservationLaws:
    """Left kernel of Γ and whether it contains a strictly positive vector."""
    rows = len(gamma) if gamma else (n or 0)
    basis = tuple(linalg.left_nullspace(gamma, rows)) if gamma and gamma[0] else tuple(
        tuple(Fraction(int(i == k)) for i in range(rows)) for k in range(rows)
    )
    gt = linalg.transpose(gamma) if gamma and gamma[0] else ()
    witness = _strictly_positive_solution(gt, rows) if gt else (tuple([Fraction(1)] * rows) if rows else None)
    return ConservationLaws(basis, witness is not None, witness)


def supports_conservation_law(net: ReactionNetwork, members: Iterable[int]) -> Optional[Vector]:
    """A d >= 0, d != 0 with dᵀΓ = 0 and supp d ⊆ members, or None."""
    members = sorted(set(members))
    if not members:
        return None
    nu = net.nu
    A = [[net.gamma[i][j] for i in members] for j in range(nu)]
    A.append([1] * len(members))
    rel = ["="] * (nu + 1)
    b = [0] * nu + [1]
    out = solve(make_lp(A, rel, b, bounds=[NONNEG] * len(members), n_vars=len(members)))
    if out.status is not Status.FEASIBLE:
        return None
    d = [Fraction(0)] * net.n
    for i, x in zip(members, out.x):
        d[i] = x
    return linalg.primitive(d)


# --- siphons ----------------------------------------------------------------

@dataclass(frozen=True)
class Siphon:
    members: frozenset[int]
    is_deadlock: bool
    is_critical: bool

    def names(self, net: ReactionNetwork) -> list[str]:
        return [net.species[i] for i in sorted(self.members)]


def is_siphon(net: ReactionNetwork, members: Iterable[int]) -> bool:
    s = set(members)
    return bool(s) and net.input_reactions(s) <= net.output_reactions(s)


def _closures(net: ReactionNetwork, seed: Iterable[int], require_all: bool, cap: int) -> list[frozenset[int]]:
    """All sets found by branching saturation from ``seed``.

    Each unsatisfied reaction (an input reaction of the set without a reactant
    in the set, or with ``require_all`` any reaction without a reactant in the
    set) forces one of its reactants into the set; every choice is explored.
    """
    found: set[frozenset[int]] = set()
    seen: set[frozenset[int]] = set()
    stack = [frozenset(seed)]
    while stack:
        s = stack.pop()
        if s in seen:
            continue
        seen.add(s)
        if len(seen) > cap:
            raise RuntimeError("siphon enumeration exceeded its search cap")
        outs = net.output_reactions(s)
        need = (set(range(net.nu)) if require_all else set(net.input_reactions(s))) - outs
        if not need:
            found.add(s)
            continue
        j = min(need)
        reactants = net.reactant_set(j)
        if not reactants:
            continue
        # prune branches that already contain a known solution
        for i in sorted(reactants):
            t = s | {i}
            if not any(f <= t for f in found):
                stack.append(t)
    return sorted(found, key=lambda f: (len(f), sorted(f)))


def _minimal(sets: Iterable[frozenset[int]]) -> list[frozenset[int]]:
    sets = sorted(set(sets), key=lambda f: (len(f), sorted(f)))
    out: list[frozenset[int]] = []
    for s in sets:
        if not any(o <= s for o in out):
            out.append(s)
    return sorted(out, key=lambda f: sorted(f))


def _make_siphon(net: ReactionNetwork, members: frozenset[int]) -> Siphon:
    return Siphon(
        members=members,
        is_deadlock=net.output_reactions(members) == frozenset(range(net.nu)),
        is_critical=supports_conservation_law(net, members) is None,
    )


def siphons(net: ReactionNetwork, cap: int = 200_000) -> list[Siphon]:
    """All minimal nonempty siphons, ordered lexicographically by species sets."""
    found = []
    for seed in range(net.n):
        found.extend(_closures(net, [seed], require_all=False, cap=cap))
    return [_make_siphon(net, s) for s in _minimal(found)]


def minimal_deadlocks(net: ReactionNetwork, cap: int = 200_000) -> list[Siphon]:
    """Inclusion-minimal siphons P with Λ(P) equal to all reactions."""
    if net.nu == 0 or net.inflows:
        return []
    found = []
    for seed in range(net.n):
        found.extend(_closures(net, [seed], require_all=True, cap=cap))
    return [_make_siphon(net, s) for s in _minimal(found)]


# --- ancestors and subnetworks ------------------------------------------------

def ancestors(net: ReactionNetwork, j: int) -> frozenset[int]:
    """𝒜(R_j): reactions with a directed path to R_j in the species-reaction graph."""
    producers = [set() for _ in range(net.n)]
    for k, r in enumerate(net.reactions):
        for i, _ in r.products:
            producers[i].add(k)
    out: set[int] = set()
    frontier = [j]
    while frontier:
        k = frontier.pop()
        for i in net.reactant_set(k):
            for p in producers[i]:
                if p not in out:
                    out.add(p)
                    frontier.append(p)
    return frozenset(out)


def critical_subnetworks(net: ReactionNetwork, _depth: int = 0) -> list[tuple[ReactionNetwork, tuple[int, ...], tuple[int, ...]]]:
    """Critical subnetworks, recursively, as (subnetwork, species, reactions).

    Species and reaction indices refer to ``net``.  For a critical siphon P the
    subnetwork drops P, drops Λ(P), and removes P-species from the remaining
    product complexes.
    """
    results: dict[tuple[tuple[int, ...], tuple[int, ...]], ReactionNetwork] = {}

    def visit(sub: ReactionNetwork, s_idx: tuple[int, ...], r_idx: tuple[int, ...]):
        for siphon in siphons(sub):
            if not siphon.is_critical:
                continue
            keep_s = tuple(s_idx[i] for i in range(sub.n) if i not in siphon.members)
            lam = sub.output_reactions(siphon.members)
            keep_r = tuple(r_idx[j] for j in range(sub.nu) if j not in lam)
            key = (keep_s, keep_r)
            if key in results:
                continue
            child = net.subnetwork(keep_s, keep_r, source=f"critical subnetwork without {{{', '.join(net.species[s_idx[i]] for i in sorted(siphon.members))}}}")
            results[key] = child
            visit(child, keep_s, keep_r)

    visit(net, tuple(range(net.n)), tuple(range(net.nu)))
    return [(results[k], k[0], k[1]) for k in sorted(results)]


# --- consensus networks -----------------------------------------------------

def laplacian_to_crn(L: Sequence[Sequence], consensus: bool = False) -> ReactionNetwork:
    """Network with one species and one reaction per node of a digraph Laplacian.

    ``L`` must have zero row sums and nonpositive off-diagonal entries.  By
    default the result has Γ = −Lᵀ (dynamics ẋ = −Lᵀ R(x)); with
    ``consensus=True`` it has Γ = −L, the form of ẋ = −L F(x).  Each
    reaction's column is scaled by the smallest positive integer that clears
    its denominators.
    """
    L = linalg.matrix(L)
    n = len(L)
    if any(len(row) != n for row in L):
        raise ValueError("Laplacian must be square")
    for i, row in enumerate(L):
        if sum(row) != 0:
            raise ValueError(f"row {i + 1} of the Laplacian does not sum to zero")
        if any(x > 0 for j, x in enumerate(row) if j != i):
            raise ValueError(f"row {i + 1} has a positive off-diagonal entry")
    cols = []
    for node in range(n):
        # column of Γ for the reaction consuming this node's species
        col = [-L[i][node] for i in range(n)] if consensus else [-L[node][i] for i in range(n)]
        if col[node] == 0:
            raise ValueError(f"node {node + 1} has no outgoing edge")
        den = 1
        for x in col:
            den = den * x.denominator // gcd(den, x.denominator)
        cols.append([int(x * den) for x in col])
    species = tuple(f"X{i + 1}" for i in range(n))
    reactions = []
    for node, col in enumerate(cols):
        reactions.append(
            Reaction(
                reactants=((node, -col[node]),),
                products=_complex({i: c for i, c in enumerate(col) if i != node and c > 0}),
            )
        )
    return ReactionNetwork(species, tuple(reactions), source="laplacian")
