"""Exact verification of PWLR Lyapunov certificates.

Every pass carries a witness (ξ, η, ν, λ) that is re-checked by substitution;
every LP failure carries a verified Farkas vector.  Region indices are 0-based
and region ``m-1-k`` mirrors region ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Any, Optional, Sequence

from . import linalg
from .certificate import PwlrCertificate, normalize_rows
from .linalg import Matrix, Vector
from .lp import FREE, Status, make_lp, solve, strict_cone_interior, verify_certificate
from .network import ReactionNetwork, critical_subnetworks, positive_kernel_vector
from .parallel import pmap
from .partition import Partition


def jsonable(obj: Any) -> Any:
    """Rationals become ``"p/q"`` strings; tuples, sets and dict keys become JSON-friendly."""
    if isinstance(obj, Fraction):
        return linalg.fmt(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return [jsonable(v) for v in sorted(obj)]
    return obj


@dataclass
class ConditionResult:
    """Verdict for one condition; ``passed is None`` means not applicable."""

    name: str
    passed: Optional[bool]
    witness: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    note: str = ""

    def to_dict(self) -> dict:
        out = {"name": self.name, "passed": self.passed, "witness": jsonable(self.witness)}
        if self.failures:
            out["failures"] = list(self.failures)
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class CheckReport:
    form: str
    conditions: dict
    region_species: list = field(default_factory=list)
    region_links: list = field(default_factory=list)
    lasalle: Optional[ConditionResult] = None

    @property
    def decrease_ok(self) -> bool:
        return all(c.passed for c in self.conditions.values())

    @property
    def passed(self) -> bool:
        return self.decrease_ok and self.lasalle is not None and bool(self.lasalle.passed)

    def to_dict(self) -> dict:
        out = {
            "form": self.form,
            "decrease_conditions_pass": self.decrease_ok,
            "conditions": {k: v.to_dict() for k, v in self.conditions.items()},
        }
        if self.lasalle is not None:
            out["lasalle"] = self.lasalle.to_dict()
        return out


# --- LP helpers ---------------------------------------------------------------

def cone_combination(target: Sequence, generators: Sequence[Sequence]):
    """λ >= 0 with Σ λ_ℓ g_ℓ = target, or (None, Farkas vector).

    The returned λ is a basic solution, so its support indexes linearly
    independent generators and is inclusion-minimal.
    """
    target = linalg.vector(target)
    nu = len(target)
    if not generators:
        if linalg.is_zero(target):
            return (), None
        # y = -target separates: the empty combination gives 0 > -|target|²
        return None, tuple(-x for x in target)
    A = [tuple(g[j] for g in generators) for j in range(nu)]
    lp = make_lp(A, ["="] * nu, target, n_vars=len(generators))
    out = solve(lp)
    if not verify_certificate(lp, out):
        raise RuntimeError("LP witness failed verification")
    if out.status is Status.FEASIBLE:
        lam = out.x
        recombined = linalg.vec_mat(lam, tuple(linalg.vector(g) for g in generators))
        assert recombined == target
        return lam, None
    return None, out.farkas


def _support(v: Sequence) -> list[int]:
    return [i for i, x in enumerate(v) if x]


# --- bookkeeping -----------------------------------------------------------------

def reactant_species(net: ReactionNetwork, row: Sequence) -> frozenset[int]:
    """I_k: species consumed by some reaction in supp(c_k)."""
    out: set[int] = set()
    for j in _support(row):
        out |= net.reactant_set(j)
    return frozenset(out)


def sign_condition(net: ReactionNetwork, row: Sequence):
    """ν_{ki} for i ∈ I_k, or the first conflicting species.

    All c_kj with α_ij > 0 must share a sign; zero entries are compatible.
    Returns (dict i -> ±1, None) or (None, (i, j_pos, j_neg)).
    """
    alpha = net.alpha
    nu_map = {}
    for i in sorted(reactant_species(net, row)):
        pos = [j for j in range(net.nu) if alpha[i][j] > 0 and row[j] > 0]
        neg = [j for j in range(net.nu) if alpha[i][j] > 0 and row[j] < 0]
        if pos and neg:
            return None, (i, pos[0], neg[0])
        nu_map[i] = 1 if pos else -1
    return nu_map, None


# --- general form (C1 to C4) -----------------------------------------------------

def check_C1(cert: PwlrCertificate, partition: Partition) -> ConditionResult:
    """c_kᵀ = ξ_kᵀ Σ_k H with ξ_k >= 0 for every region of the first half."""
    res = ConditionResult("C1", True, {"xi": {}})
    for k in range(partition.m // 2):
        rows = partition.signed_rows(k)
        xi, farkas = cone_combination(cert.signed_row(k), rows)
        if xi is None:
            res.passed = False
            res.failures.append(f"region {k + 1}: c_k is not a nonnegative combination of Σ_k H")
            res.witness.setdefault("farkas", {})[k] = farkas
        else:
            res.witness["xi"][k] = xi
    return res


def check_C2(cert: PwlrCertificate, gamma: Matrix) -> ConditionResult:
    """ker C = ker Γ by rank of the stacked matrix."""
    C = cert.C
    nu = cert.nu
    rc, rg = linalg.rank(C), linalg.rank(gamma) if gamma else 0
    rs = linalg.rank(C + tuple(gamma))
    ok = rc == rg == rs
    witness = {
        "rank_C": rc,
        "rank_gamma": rg,
        "rank_stacked": rs,
        "ker_C": linalg.nullspace(C, nu),
        "ker_gamma": linalg.nullspace(gamma, nu),
    }
    res = ConditionResult("C2", ok, witness)
    if not ok:
        if rs > rg:
            res.failures.append("ker Γ is not contained in ker C")
        if rs > rc:
            res.failures.append("ker C is not contained in ker Γ")
    return res


def check_C3(cert: PwlrCertificate, partition: Partition) -> ConditionResult:
    """c_k - c_j = η_kj h_s for every neighbor pair, plus the convexity flag."""
    res = ConditionResult("C3", True, {"eta": {}, "convex": True})
    for (k, j), t in sorted(partition.neighbors.items()):
        diff = linalg.sub(cert.signed_row(k), cert.signed_row(j))
        h = partition.H[t]
        lead = next(i for i, x in enumerate(h) if x)
        eta = diff[lead] / h[lead]
        if linalg.scale(h, eta) != diff:
            res.passed = False
            res.failures.append(f"regions {k + 1},{j + 1}: c_k - c_j is not a multiple of h_{t + 1}")
            continue
        res.witness["eta"][(k, j)] = eta
        if eta * partition.regions[k].signature[t] < 0:
            res.witness["convex"] = False
    return res


def check_C4(cert: PwlrCertificate, partition: Partition, net: ReactionNetwork) -> tuple[ConditionResult, list, list]:
    """Sign condition and -ν γ_i in the cone of the facet rows of region k.

    Returns the result plus I_k and L_k for every region (mirrors included).
    """
    gamma = net.gamma
    half = partition.m // 2
    res = ConditionResult("C4", True, {"nu": {}, "lambda": {}})
    species: list = [frozenset()] * partition.m
    links: list = [frozenset()] * partition.m

    def region(k):
        c = cert.signed_row(k)
        nu_map, clash = sign_condition(net, c)
        if nu_map is None:
            i, jp, jn = clash
            return k, None, f"region {k + 1}: species {net.species[i]} has mixed signs on reactions {jp + 1} and {jn + 1}", {}
        facets = partition.neighbors_of(k)
        rows = sorted(set(facets.values()))
        gens = [tuple(partition.regions[k].signature[t] * x for x in partition.H[t]) for t in rows]
        lams, link = {}, set()
        for i, s in nu_map.items():
            lam, farkas = cone_combination(linalg.scale(gamma[i], -s), gens)
            if lam is None:
                return k, None, f"region {k + 1}, species {net.species[i]}: -ν γ_i is outside the facet cone", {"farkas": farkas}
            lams[i] = {rows[q]: v for q, v in enumerate(lam) if v}
            link |= {j for j, t in facets.items() if t in lams[i]}
        return k, (nu_map, lams, frozenset(nu_map), frozenset(link)), None, {}

    for k, data, err, extra in pmap(region, range(half)):
        if data is None:
            res.passed = False
            res.failures.append(err)
            if extra:
                res.witness.setdefault("farkas", {})[k] = extra["farkas"]
            continue
        nu_map, lams, I_k, L_k = data
        res.witness["nu"][k] = nu_map
        res.witness["lambda"][k] = lams
        mk = partition.mirror(k)
        species[k] = species[mk] = I_k
        links[k] = L_k
        links[mk] = frozenset(partition.mirror(j) for j in L_k)
    return res, species, links


def check_general(cert: PwlrCertificate, net: ReactionNetwork) -> CheckReport:
    """Conditions C1 to C4 for a general-form certificate."""
    if cert.is_convex:
        raise ValueError("certificate is in convex form")
    gamma = net.gamma
    if cert.nu != net.nu:
        raise ValueError("certificate and network have different reaction counts")
    part = cert.partition()
    h_ok = linalg.same_rowspace(part.H, gamma)
    conditions = {
        "H_kernel": ConditionResult("H_kernel", h_ok, {}, [] if h_ok else ["ker H differs from ker Γ"]),
        "C1": check_C1(cert, part),
        "C2": check_C2(cert, gamma),
        "C3": check_C3(cert, part),
    }
    c4, species, links = check_C4(cert, part, net)
    conditions["C4"] = c4
    return CheckReport("general", conditions, species, links)


# --- convex form (C2' and C4') -----------------------------------------------------

def max_regions(cert: PwlrCertificate) -> list[Optional[Vector]]:
    """Interior witness of {r : ĉ_k r >= ĉ_ℓ r for all ℓ} per signed row, or None."""
    half = cert.m // 2
    signed = [cert.signed_row(k) for k in range(cert.m)]

    def one(k):
        ck = signed[k]
        M = [linalg.sub(ck, c) for c in signed if c != ck]
        if not M:
            return ck
        return strict_cone_interior(M)

    first = pmap(one, range(half))
    out = first + [None if w is None else tuple(-x for x in w) for w in reversed(first)]
    return out


def _positive_multiple(a: Sequence, b: Sequence) -> bool:
    i = next(i for i, x in enumerate(b) if x)
    t = a[i] / b[i]
    return t > 0 and linalg.scale(b, t) == tuple(a)


def _as_integers(rows: Sequence[Sequence]) -> list[tuple[int, ...]]:
    """Common positive scaling of rational rows to integers."""
    den = 1
    for row in rows:
        for x in row:
            den = den * x.denominator // gcd(den, x.denominator)
    return [tuple(int(x * den) for x in row) for row in rows]


def segment_neighbors(signed: Sequence[Vector], witnesses: Sequence) -> dict[int, set]:
    """Pairs (k, l) proven adjacent by the segment between their interior points.

    On the segment from w_k to w_l the point where ĉ_k r = ĉ_l r is a facet
    witness when every other row is strictly below there.  With a = (ĉ_k - ĉ_l) w_k
    and b = (ĉ_k - ĉ_l) w_l that reads a·(ĉ_k - ĉ_p) w_l - b·(ĉ_k - ĉ_p) w_k > 0.
    Sound but not complete; integer arithmetic throughout.
    """
    idx = [q for q, w in enumerate(witnesses) if w is not None]
    rows = _as_integers(signed)
    W = {q: _as_integers([witnesses[q]])[0] for q in idx}
    P = {(p, q): sum(x * y for x, y in zip(rows[p], W[q])) for p in range(len(rows)) for q in idx}
    out: dict[int, set] = {k: set() for k in idx}
    for k in idx:
        for l in idx:
            if rows[l] == rows[k]:
                continue
            a = P[k, k] - P[l, k]
            b = P[k, l] - P[l, l]
            if a <= 0 or b >= 0:
                continue
            ok = True
            for p in range(len(rows)):
                if p == l or rows[p] == rows[k]:
                    continue
                if a * (P[k, l] - P[p, l]) - b * (P[k, k] - P[p, k]) <= 0:
                    if not _positive_multiple(linalg.sub(signed[k], signed[p]), linalg.sub(signed[k], signed[l])):
                        ok = False
                        break
            if ok:
                out[k].add(l)
    return out


def is_facet_neighbor(signed: Sequence[Vector], k: int, l: int, diffs: Optional[dict] = None) -> bool:
    """Max-regions of signed rows k and l share a facet.

    The hyperplane (ĉ_k - ĉ_l) r = 0 must meet region k in a relatively open
    piece: some r on it is strictly inside every other inequality, ignoring
    rows whose difference with ĉ_k is a positive multiple of ĉ_k - ĉ_l.
    """
    ck = signed[k]
    if diffs is None:
        diffs = {p: linalg.sub(ck, cp) for p, cp in enumerate(signed) if cp != ck}
    d = diffs[l]
    nu = len(ck)
    A, rel, b = [tuple(d) + (Fraction(0),)], ["="], [0]
    for p, e in diffs.items():
        if p == l or _positive_multiple(e, d):
            continue
        A.append(tuple(e) + (Fraction(-1),))
        rel.append(">=")
        b.append(0)
    A.append((Fraction(0),) * nu + (Fraction(1),))
    rel.append("<=")
    b.append(1)
    out = solve(make_lp(A, rel, b, bounds=[FREE] * (nu + 1), objective=[0] * nu + [1]))
    return out.status is Status.FEASIBLE and out.value > 0


def check_C4_convex(cert: PwlrCertificate, net: ReactionNetwork, witnesses: Optional[list] = None) -> tuple[ConditionResult, list, list]:
    """-ν γ_i = Σ λ_ℓ (ĉ_k - ĉ_ℓ) with λ >= 0 for every row whose max-region is full-dimensional.

    Rows whose max-region has empty interior never determine Ṽ and are
    reported as redundant.  Multipliers are restricted to facet neighbors of
    the max-region (the facet normals generate its dual cone), so the
    recorded links are genuine neighbors.  Pairs proven adjacent by the
    segment test are tried first; the general path solves over all rows and
    prunes non-neighbors by LP.
    """
    gamma = net.gamma
    m = cert.m
    half = m // 2
    if witnesses is None:
        witnesses = max_regions(cert)
    active = [w is not None for w in witnesses]
    signed = [cert.signed_row(k) for k in range(m)]
    adjacent = segment_neighbors(signed, witnesses)
    res = ConditionResult("C4'", True, {"nu": {}, "lambda": {}, "redundant_rows": [], "non_facet_support": []})
    species: list = [frozenset()] * m
    links: list = [frozenset()] * m

    def solve_all(diffs, nu_map, pool):
        lams = {}
        for i, s in nu_map.items():
            lam, farkas = cone_combination(linalg.scale(gamma[i], -s), [diffs[l] for l in pool])
            if lam is None:
                return None, (i, farkas)
            lams[i] = {pool[q]: v for q, v in enumerate(lam) if v}
        return lams, None

    def region(k):
        ck = signed[k]
        nu_map, clash = sign_condition(net, ck)
        if nu_map is None:
            i, jp, jn = clash
            return k, None, f"row {k + 1}: species {net.species[i]} has mixed signs on reactions {jp + 1} and {jn + 1}", None
        diffs = {l: linalg.sub(ck, c) for l, c in enumerate(signed) if c != ck}
        known = sorted(adjacent.get(k, ()))
        if known:
            lams, _ = solve_all(diffs, nu_map, known)
            if lams is not None:
                return k, (nu_map, lams, frozenset(nu_map), frozenset().union(*lams.values()) if lams else frozenset(), True), None, None
        pool = [l for l in diffs if active[l]]
        lams, fail = solve_all(diffs, nu_map, pool)
        if lams is None:
            i, farkas = fail
            return k, None, f"row {k + 1}, species {net.species[i]}: -ν γ_i is outside the difference cone", farkas
        # drop non-neighbors until the support is adjacent; neighbors always stay in the pool
        verdict: dict = {l: True for l in known}
        exact = True
        while True:
            support = set().union(*lams.values()) if lams else set()
            for l in support - verdict.keys():
                verdict[l] = is_facet_neighbor(signed, k, l, diffs)
            if all(verdict[l] for l in support):
                break
            pool = [l for l in pool if verdict.get(l, True)]
            retry, _ = solve_all(diffs, nu_map, pool)
            if retry is None:
                exact = False
                break
            lams = retry
        link = frozenset(l for l in support if verdict[l])
        return k, (nu_map, lams, frozenset(nu_map), link, exact), None, None

    todo = [k for k in range(half) if active[k]]
    res.witness["redundant_rows"] = [k for k in range(half) if not active[k]]
    for k, data, err, farkas in pmap(region, todo):
        if data is None:
            res.passed = False
            res.failures.append(err)
            if farkas is not None:
                res.witness.setdefault("farkas", {})[k] = farkas
            continue
        nu_map, lams, I_k, L_k, exact = data
        res.witness["nu"][k] = nu_map
        res.witness["lambda"][k] = lams
        if not exact:
            res.witness["non_facet_support"].append(k)
        mk = m - 1 - k
        species[k] = species[mk] = I_k
        links[k] = L_k
        links[mk] = frozenset(m - 1 - l for l in L_k)
    return res, species, links


def check_convex(cert: PwlrCertificate, net: ReactionNetwork) -> CheckReport:
    """Conditions C2' and C4' for a convex certificate."""
    if not cert.is_convex:
        raise ValueError("certificate is in general form")
    if cert.nu != net.nu:
        raise ValueError("certificate and network have different reaction counts")
    c2 = check_C2(cert, net.gamma)
    c2.name = "C2'"
    v = positive_kernel_vector(cert.C, cert.nu)
    c2.witness["positive_kernel_vector"] = v
    if v is None:
        c2.passed = False
        c2.failures.append("ker C has no strictly positive vector")
    c4, species, links = check_C4_convex(cert, net)
    return CheckReport("convex", {"C2'": c2, "C4'": c4}, species, links)


def check(cert: PwlrCertificate, net: ReactionNetwork) -> CheckReport:
    return check_convex(cert, net) if cert.is_convex else check_general(cert, net)


# --- LaSalle ---------------------------------------------------------------------

def lasalle_interior(cert: PwlrCertificate, net: ReactionNetwork, report: Optional[CheckReport] = None) -> ConditionResult:
    """Iterate Ī_k over the L_k chains; C5i needs Ī_k = all species.

    Convex certificates may pass instead by c_k ∈ rowspace(Γ_{Ī_k}).
    """
    if report is None:
        report = check(cert, net)
    res = ConditionResult("C5i", None)
    c4 = report.conditions.get("C4'") or report.conditions.get("C4")
    if not c4.passed:
        res.note = "not applicable: the C4 condition failed"
        return res
    species, links = report.region_species, report.region_links
    m = cert.m
    relevant = range(m // 2)
    if cert.is_convex:
        relevant = [k for k in relevant if k not in report.conditions["C4'"].witness["redundant_rows"]]
    all_species = frozenset(range(net.n))
    gamma = net.gamma
    if cert.is_convex:
        unlinked = [k for k in relevant if k in report.conditions["C4'"].witness.get("non_facet_support", [])]
        if unlinked:
            res.passed = False
            res.failures.append(f"rows {[k + 1 for k in unlinked]} need multipliers on non-adjacent rows; chains undefined")
            return res
    chains, closures, c5i, c5pi = {}, {}, True, True
    for k in relevant:
        seen = {k}
        frontier = [k]
        while frontier:
            a = frontier.pop()
            for b in links[a]:
                if b not in seen:
                    seen.add(b)
                    frontier.append(b)
        ibar = frozenset().union(*(species[l] for l in seen))
        chains[k] = sorted(seen - {k})
        closures[k] = ibar
        if ibar != all_species:
            c5i = False
            sub = tuple(gamma[i] for i in sorted(ibar))
            if not linalg.in_rowspace(cert.signed_row(k), sub):
                c5pi = False
    res.witness = {
        "I": {k: species[k] for k in relevant},
        "L": {k: links[k] for k in relevant},
        "chain": chains,
        "I_bar": closures,
        "C5i": c5i,
    }
    if cert.is_convex:
        res.name = "C5'i"
        res.witness["C5'i"] = c5pi
        res.passed = c5i or c5pi
    else:
        res.passed = c5i
    if not res.passed:
        bad = [k + 1 for k in relevant if closures[k] != all_species]
        res.failures.append(f"regions {bad} do not reach every species")
    return res


def inherit(cert: PwlrCertificate, reactions: Sequence[int]) -> Optional[PwlrCertificate]:
    """Restrict a convex certificate to a reaction subset, or None when nothing survives."""
    if not cert.is_convex:
        return None
    rows = normalize_rows([tuple(c[j] for j in reactions) for c in cert.C])
    if not rows:
        return None
    return PwlrCertificate(rows)


def _subnetwork_verdict(cert: PwlrCertificate, sub: ReactionNetwork, r_idx: Sequence[int], fallback: bool) -> dict:
    entry: dict = {"species": list(sub.species), "reactions": len(sub.reactions)}
    if not sub.reactions:
        entry.update(path="trivial", passed=True)
        return entry
    child = inherit(cert, r_idx)
    if child is not None:
        rep = check_convex(child, sub)
        if rep.decrease_ok:
            las = lasalle_interior(child, sub, rep)
            if las.passed:
                entry.update(path="inherited", passed=True, certificate=child.C)
                return entry
    if fallback:
        from .construct import construct_any

        outcome = construct_any(sub, lasalle=False)
        if outcome.certificate is not None:
            las = lasalle_interior(outcome.certificate, sub)
            entry.update(path=f"reanalyzed:{outcome.method}", passed=bool(las.passed), certificate=outcome.certificate.C)
            return entry
    entry.update(path="none", passed=False)
    return entry


def lasalle_full(cert: PwlrCertificate, net: ReactionNetwork, report: Optional[CheckReport] = None, fallback: bool = True) -> ConditionResult:
    """C5: the interior condition on the network and on every critical subnetwork."""
    main = lasalle_interior(cert, net, report)
    res = ConditionResult("C5", main.passed, {"network": main.to_dict(), "subnetworks": []})
    if not main.passed:
        res.failures.extend(main.failures or ["interior LaSalle condition not applicable"])
        res.passed = False if main.passed is False else None
        return res
    for sub, _s_idx, r_idx in critical_subnetworks(net):
        entry = _subnetwork_verdict(cert, sub, r_idx, fallback)
        res.witness["subnetworks"].append(entry)
        if not entry["passed"]:
            res.passed = False
            res.failures.append(f"{sub.source}: no certificate satisfies the LaSalle condition")
    if any(e["path"].startswith("reanalyzed") for e in res.witness["subnetworks"]):
        res.note = "some critical subnetworks were re-analyzed with a fresh certificate"
    return res


def full_check(cert: PwlrCertificate, net: ReactionNetwork, fallback: bool = True) -> CheckReport:
    """Decrease conditions plus C5."""
    report = check(cert, net)
    report.lasalle = lasalle_full(cert, net, report, fallback)
    return report
