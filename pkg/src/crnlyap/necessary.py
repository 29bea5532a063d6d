"""Necessary conditions for the existence of a PWLR Lyapunov function.

Three refutation tools: a per-sign-region LP on the sign pattern of the rate
coefficients, the critical-deadlock graph test, and a structural P0 test of
the Jacobian ``-Γ ∂R/∂x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Optional

from . import linalg
from .checker import jsonable
from .lp import FREE, NONNEG, Status, make_lp, solve, verify_certificate
from .network import ReactionNetwork, Siphon, minimal_deadlocks
from .parallel import pmap
from .partition import refine_with_sign_regions

N_CAP = 10


# --- sign-pattern LP -----------------------------------------------------------

def sign_table(net: ReactionNetwork, species_signs) -> list[int]:
    """b_kj: 1 for inflows, 0 on a reactant sign conflict, else minus the reactant sign.

    Species whose stoichiometric row is zero have sign 0 and are ignored; a
    reaction consuming only such species is treated like an inflow.
    """
    out = []
    for j in range(net.nu):
        signs = {species_signs[i] for i in net.reactant_set(j)} - {0}
        if not signs:
            out.append(1)
        elif len(signs) > 1:
            out.append(0)
        else:
            out.append(-signs.pop())
    return out


def unconstrained_reactions(net: ReactionNetwork) -> frozenset[int]:
    """Inflows, plus reactions whose reactants all have zero stoichiometric rows."""
    zero = {i for i, row in enumerate(net.gamma) if linalg.is_zero(row)}
    return frozenset(j for j in range(net.nu) if net.reactant_set(j) <= zero)


@dataclass
class RegionVerdict:
    region: int
    signature: tuple
    b: list
    literal: bool
    strict: bool
    zeta: Optional[tuple] = None
    zeta_strict: Optional[tuple] = None
    farkas: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return jsonable(
            {
                "region": self.region,
                "species_signs": self.signature,
                "b": self.b,
                "literal": self.literal,
                "strict": self.strict,
                "zeta": self.zeta,
                "zeta_strict": self.zeta_strict,
                "farkas": self.farkas,
            }
        )


def _pinned(BU, free: frozenset, candidates, nu: int):
    """Search ζ with ζᵀ BU = 0, ζ_j >= 0 off ``free``, and some pinned |ζ_j| >= 1."""
    d = len(BU[0]) if BU else 0
    farkas = []
    for j in candidates:
        for sign in ((1, -1) if j in free else (1,)):
            A = [tuple(BU[r][c] for r in range(nu)) for c in range(d)]
            rel = ["="] * d
            b = [0] * d
            pin = [Fraction(0)] * nu
            pin[j] = Fraction(sign)
            A.append(tuple(pin))
            rel.append(">=")
            b.append(1)
            bounds = [FREE if r in free else NONNEG for r in range(nu)]
            lp = make_lp(A, rel, b, bounds=bounds)
            out = solve(lp)
            assert verify_certificate(lp, out)
            if out.status is Status.FEASIBLE:
                return out.x, farkas
            farkas.append({"pinned": j, "sign": sign, "y": out.farkas})
    return None, farkas


def check_sign_region_kernel(net: ReactionNetwork) -> dict:
    """Per sign region: ζ ≠ 0 with ζᵀ B_k U = 0 (literal) and with B_k ζ ≠ 0 (strict)."""
    gamma = net.gamma
    U = linalg.nullspace(gamma, net.nu) if net.nu else []
    free = unconstrained_reactions(net)
    if not net.nu or all(linalg.is_zero(r) for r in gamma):
        return {"passed": True, "strict_passed": True, "regions": [], "note": "no sign regions"}
    refined = refine_with_sign_regions(gamma)
    part = refined.partition
    half = part.m // 2

    def one(k):
        sig = refined.species_signs(k)
        b = sign_table(net, sig)
        BU = [tuple(b[j] * u[j] for u in U) for j in range(net.nu)]
        v = RegionVerdict(k, sig, b, False, False)
        if not U:
            v.literal = v.strict = True
            v.zeta = v.zeta_strict = tuple(Fraction(int(j == 0)) for j in range(net.nu))
            return v
        zero_b = [j for j in range(net.nu) if b[j] == 0]
        if zero_b:
            v.literal = True
            v.zeta = tuple(Fraction(int(j == zero_b[0])) for j in range(net.nu))
        nonzero_b = [j for j in range(net.nu) if b[j] != 0]
        z, far = _pinned(BU, free, nonzero_b, net.nu)
        if z is not None:
            v.strict = True
            v.zeta_strict = z
            if not v.literal:
                v.literal = True
                v.zeta = z
        v.farkas = far if z is None else []
        return v

    regions = pmap(one, range(half))
    return {
        "passed": all(r.literal for r in regions),
        "strict_passed": all(r.strict for r in regions),
        "regions": regions,
    }


# --- critical deadlocks --------------------------------------------------------------

def check_critical_deadlock(net: ReactionNetwork) -> Optional[Siphon]:
    """First critical deadlock in deterministic order, or None.

    A subset of a critical set is critical, so minimal deadlocks suffice.
    """
    if not net.reactions:
        return None
    for s in minimal_deadlocks(net):
        if s.is_critical:
            return s
    return None


# --- structural P0 -----------------------------------------------------------------------

@dataclass
class P0Result:
    verdict: str  # "robustly-P0" | "counterexample" | "inconclusive" | "skipped"
    negative_terms: list = field(default_factory=list)
    witness: Optional[dict] = None
    note: str = ""

    def to_dict(self) -> dict:
        return jsonable(
            {"verdict": self.verdict, "negative_terms": self.negative_terms[:20], "witness": self.witness, "note": self.note}
        )


def minor_terms(net: ReactionNetwork, species: tuple[int, ...]):
    """Monomials of the principal minor of ``-Γ V`` on ``species``.

    V has a variable v_{ji} exactly where α_ij > 0.  A monomial is an injective
    assignment species -> consuming reaction; its coefficient is det N with
    column i' of N the column of -Γ (rows restricted to ``species``) of the
    reaction assigned to species i'.  Distinct assignments give distinct
    monomials, so coefficients never cancel.
    """
    alpha = net.alpha
    gamma = net.gamma
    options = [[j for j in range(net.nu) if alpha[i][j] > 0] for i in species]
    out = []

    def rec(pos, used, chosen):
        if pos == len(species):
            N = tuple(tuple(-gamma[r][chosen[c]] for c in range(len(species))) for r in species)
            det = _det(N)
            if det:
                out.append((tuple(zip(chosen, species)), det))
            return
        for j in options[pos]:
            if j not in used:
                rec(pos + 1, used | {j}, chosen + [j])

    rec(0, frozenset(), [])
    return out


def _det(M) -> Fraction:
    rows = [list(r) for r in M]
    n = len(rows)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if rows[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            rows[c], rows[p] = rows[p], rows[c]
            det = -det
        det *= rows[c][c]
        for r in range(c + 1, n):
            if rows[r][c]:
                f = rows[r][c] / rows[c][c]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[c])]
    return det


def jacobian(net: ReactionNetwork, values: dict) -> tuple:
    """Exact ``-Γ V`` with V_{ji} = values[(j, i)] on the α-pattern (default 1)."""
    alpha = net.alpha
    gamma = net.gamma
    V = [[values.get((j, i), Fraction(1)) if alpha[i][j] > 0 else Fraction(0) for i in range(net.n)] for j in range(net.nu)]
    return tuple(
        tuple(-sum((gamma[a][j] * V[j][b] for j in range(net.nu)), Fraction(0)) for b in range(net.n))
        for a in range(net.n)
    )


def _principal_minor(J, S) -> Fraction:
    return _det(tuple(tuple(J[a][b] for b in S) for a in S))


def _numeric_recheck(J, S) -> float:
    import numpy as np

    M = np.array([[float(J[a][b]) for b in S] for a in S])
    scale = max(1.0, float(np.max(np.abs(M))))
    return float(np.linalg.det(M / scale))


def p0_structural(net: ReactionNetwork, n_cap: int = N_CAP) -> P0Result:
    """Nonnegative coefficients certify P0; a negative one seeds a counterexample search."""
    if net.n > n_cap:
        raise ValueError(f"{net.n} species exceed the P0 enumeration cap of {n_cap}")
    negative = []
    for size in range(1, net.n + 1):
        for S in combinations(range(net.n), size):
            for mono, coef in minor_terms(net, S):
                if coef < 0:
                    negative.append({"species": S, "monomial": mono, "coefficient": coef})
    if not negative:
        return P0Result("robustly-P0")
    res = P0Result("inconclusive", negative)
    for term in negative:
        S = term["species"]
        support = [(j, i) for j, i in term["monomial"]]
        for e in range(1, 21):
            t = Fraction(2**e)
            for rest in (Fraction(1), 1 / t):
                values = {}
                for j in range(net.nu):
                    for i in range(net.n):
                        values[(j, i)] = rest
                for key in support:
                    values[key] = t
                J = jacobian(net, values)
                minor = _principal_minor(J, S)
                if minor < 0:
                    numeric = _numeric_recheck(J, S)
                    if numeric < -1e-9:
                        res.verdict = "counterexample"
                        res.witness = {
                            "species": [net.species[i] for i in S],
                            "t": t,
                            "others": rest,
                            "support": support,
                            "minor": minor,
                            "minor_scaled_float": numeric,
                        }
                        return res
    res.note = "negative coefficients found but sampling did not produce a negative minor"
    return res


def necessary_report(net: ReactionNetwork, n_cap: int = N_CAP) -> dict:
    """All necessary checks plus the refutation verdict."""
    srk = check_sign_region_kernel(net)
    dead = check_critical_deadlock(net)
    try:
        p0 = p0_structural(net, n_cap)
    except ValueError as exc:
        p0 = P0Result("skipped", note=str(exc))
    refuted = (not srk["passed"]) or dead is not None or p0.verdict == "counterexample"
    reasons = []
    if not srk["passed"]:
        reasons.append("sign-pattern LP infeasible in some sign region")
    if dead is not None:
        reasons.append(f"critical deadlock {{{', '.join(dead.names(net))}}}")
    if p0.verdict == "counterexample":
        reasons.append("Jacobian is not P0 at an admissible point")
    return {
        "sign_region_kernel": {
            "passed": srk["passed"],
            "strict_passed": srk["strict_passed"],
            "regions": [r.to_dict() for r in srk["regions"]],
        },
        "critical_deadlock": None if dead is None else dead.names(net),
        "p0": p0.to_dict(),
        "refuted": refuted,
        "reasons": reasons,
    }
