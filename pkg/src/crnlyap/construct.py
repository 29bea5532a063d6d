"""Synthesis of PWLR certificates.

Four methods: a linear program over a fixed partition, the iterative
row-augmentation algorithm, and the max-min construction with its reversible
extension.  Whatever a method produces is run through the checker before it
is returned; a certificate that fails is reported, never surfaced.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Optional, Sequence

from . import linalg
from .certificate import PwlrCertificate, normalize_rows
from .checker import CheckReport, check, jsonable, lasalle_full
from .linalg import Matrix, Vector
from .lp import FREE, NONNEG, Status, make_lp, solve, verify_certificate
from .network import ReactionNetwork, ancestors, conservation_laws, positive_kernel_vector
from .partition import refine_with_sign_regions

DEFAULT_ITERATIONS = 20
LP_MAX_VARS = 1000
ROW_CAP = 2000


@dataclass
class ConstructionOutcome:
    method: str
    certificate: Optional[PwlrCertificate] = None
    report: Optional[CheckReport] = None
    diagnostics: dict = field(default_factory=dict)
    c2_status: str = "unresolved"

    @property
    def success(self) -> bool:
        return self.certificate is not None

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "success": self.success,
            "c2_status": self.c2_status,
            "diagnostics": jsonable(self.diagnostics),
        }
        if self.certificate is not None:
            out["C"] = linalg.fmt_matrix(self.certificate.C)
            if self.certificate.H is not None:
                out["H"] = linalg.fmt_matrix(self.certificate.H)
        if self.report is not None:
            out["report"] = self.report.to_dict()
        return out


def _self_check(outcome: ConstructionOutcome, cert: PwlrCertificate, net: ReactionNetwork, lasalle: bool) -> ConstructionOutcome:
    report = check(cert, net)
    if lasalle:
        report.lasalle = lasalle_full(cert, net, report)
    outcome.report = report
    c2 = report.conditions.get("C2'") or report.conditions.get("C2")
    outcome.c2_status = "resolved" if c2.passed else "unresolved"
    if report.decrease_ok:
        outcome.certificate = cert
    else:
        outcome.diagnostics["self_check"] = "candidate failed the checker"
        outcome.diagnostics["candidate"] = cert.C
        outcome.diagnostics["failures"] = [f for c in report.conditions.values() for f in c.failures]
    return outcome


# --- linear program over a fixed partition ----------------------------------

def sign_constraints(net: ReactionNetwork, species_signs: Sequence[int]) -> list[Optional[int]]:
    """b_kj for one sign region: -σ of the reactants, 0 on conflict, None when unconstrained.

    Species with a zero stoichiometric row never change, so they are ignored;
    a reaction whose reactants are all such species is unconstrained like an inflow.
    """
    out: list[Optional[int]] = []
    for j in range(net.nu):
        signs = {species_signs[i] for i in net.reactant_set(j)} - {0}
        if not signs:
            out.append(None)
        elif len(signs) > 1:
            out.append(0)
        else:
            out.append(-signs.pop())
    return out


class _Columns:
    def __init__(self):
        self.n = 0

    def take(self, k: int) -> range:
        r = range(self.n, self.n + k)
        self.n += k
        return r


def _lp_system(net: ReactionNetwork, refined, convex: bool, normalize: Optional[Fraction]):
    """Rows of the joint LP.  With ``normalize`` None the strictness is a max-t
    objective; otherwise every region gets ``1 <= 1ᵀξ_k <= normalize``."""
    part = refined.partition
    H = part.H
    p, nu, m = len(H), net.nu, part.m
    half = m // 2
    cols = _Columns()
    c_idx = [cols.take(nu) for _ in range(half)]
    xi_idx = [cols.take(p) for _ in range(half)]
    pairs = {}
    for (a, b), s in sorted(part.neighbors.items()):
        key = min(tuple(sorted((a, b))), tuple(sorted((m - 1 - a, m - 1 - b))))
        if key not in pairs:
            pairs[key] = s
    eta_idx = {key: cols.take(1)[0] for key in pairs}
    t_idx = cols.take(1)[0] if normalize is None else None
    n_vars = cols.n

    bounds = [FREE] * n_vars
    for k in range(half):
        for v in xi_idx[k]:
            bounds[v] = NONNEG
    if convex:
        for v in eta_idx.values():
            bounds[v] = NONNEG
    if t_idx is not None:
        bounds[t_idx] = (None, Fraction(1))

    A, rel, rhs = [], [], []

    def row(entries, r, b=0):
        vec = [Fraction(0)] * n_vars
        for v, coef in entries:
            vec[v] += coef
        A.append(vec)
        rel.append(r)
        rhs.append(b)

    for k in range(half):
        sig = part.regions[k].signature
        for j in range(nu):
            entries = [(c_idx[k][j], 1)]
            entries += [(xi_idx[k][t], -sig[t] * H[t][j]) for t in range(p) if H[t][j]]
            row(entries, "=")
        if normalize is None:
            row([(v, 1) for v in xi_idx[k]] + [(t_idx, -1)], ">=")
        else:
            row([(v, 1) for v in xi_idx[k]], ">=", 1)
            row([(v, 1) for v in xi_idx[k]], "<=", normalize)
        b = sign_constraints(net, refined.species_signs(k))
        for j, bj in enumerate(b):
            if bj == 0:
                row([(c_idx[k][j], 1)], "=")
            elif bj is not None:
                row([(c_idx[k][j], bj)], ">=")

    def c_terms(k, sign):
        if k < half:
            return [(c_idx[k][j], sign) for j in range(nu)]
        return [(c_idx[m - 1 - k][j], -sign) for j in range(nu)]

    for (a, b), s in pairs.items():
        sg = part.regions[a].signature[s]
        ta, tb = c_terms(a, 1), c_terms(b, -1)
        for j in range(nu):
            entries = [ta[j], tb[j]]
            if H[s][j]:
                entries.append((eta_idx[(a, b)], -sg * H[s][j]))
            row(entries, "=")

    return A, rel, rhs, bounds, c_idx, t_idx, n_vars


def construct_lp(
    net: ReactionNetwork,
    hhat: Optional[Sequence[Sequence]] = None,
    want_convex: bool = True,
    retries: int = 8,
    seed: int = 0,
    lasalle: bool = True,
    max_vars: Optional[int] = LP_MAX_VARS,
) -> ConstructionOutcome:
    """Joint LP in (c_k, ξ_k, η_kj) over the partition of [Γ; Ĥ].

    The exact tableau is dense, so systems with more than ``max_vars``
    variables are declined up front (``None`` removes the budget).
    """
    outcome = ConstructionOutcome("lp")
    gamma = net.gamma
    if positive_kernel_vector(gamma, net.nu) is None:
        outcome.diagnostics["error"] = "AG2 fails: ker Γ has no strictly positive vector"
        return outcome
    try:
        refined = refine_with_sign_regions(gamma, hhat)
    except ValueError as exc:
        outcome.diagnostics["error"] = str(exc)
        return outcome
    part = refined.partition
    outcome.diagnostics["regions"] = part.m
    outcome.diagnostics["H"] = part.H

    A, rel, rhs, bounds, c_idx, t_idx, n_vars = _lp_system(net, refined, want_convex, None)
    outcome.diagnostics["lp_size"] = {"rows": len(A), "variables": n_vars}
    if max_vars is not None and n_vars > max_vars:
        outcome.diagnostics["error"] = f"LP has {n_vars} variables, over the budget of {max_vars}"
        return outcome
    obj = [0] * n_vars
    obj[t_idx] = 1
    lp = make_lp(A, rel, rhs, bounds=bounds, objective=obj)
    out = solve(lp)
    assert verify_certificate(lp, out)
    if out.value <= 0:
        A2, rel2, rhs2, bounds2, _, _, _ = _lp_system(net, refined, want_convex, Fraction(1))
        # upper normalization is vacuous for the Farkas argument; drop it
        keep = [i for i, (r, b) in enumerate(zip(rel2, rhs2)) if not (r == "<=" and b == 1)]
        lp2 = make_lp([A2[i] for i in keep], [rel2[i] for i in keep], [rhs2[i] for i in keep], bounds=bounds2)
        out2 = solve(lp2)
        assert out2.status is Status.INFEASIBLE and verify_certificate(lp2, out2)
        outcome.diagnostics["infeasible"] = True
        outcome.diagnostics["farkas"] = out2.farkas
        outcome.diagnostics["farkas_verified"] = True
        return outcome

    def rows_of(x):
        return tuple(tuple(x[v] for v in c_idx[k]) for k in range(len(c_idx)))

    candidates = [rows_of(out.x)]
    rng = random.Random(seed)
    C = candidates[0]
    attempt = 0
    while linalg.rank(C) != linalg.rank(gamma) and attempt < retries:
        attempt += 1
        A3, rel3, rhs3, bounds3, _, _, n3 = _lp_system(net, refined, want_convex, Fraction(10))
        obj3 = [0] * n3
        for k in range(len(c_idx)):
            for v in c_idx[k]:
                obj3[v] = Fraction(rng.randint(-1000, 1000), rng.randint(1, 1000))
        lp3 = make_lp(A3, rel3, rhs3, bounds=bounds3, objective=obj3)
        out3 = solve(lp3)
        if out3.status is Status.FEASIBLE:
            C = rows_of(out3.x)
    outcome.diagnostics["c2_retries"] = attempt
    if linalg.rank(C) != linalg.rank(gamma):
        outcome.diagnostics["error"] = "LP feasible but no vertex found with ker C = ker Γ"
        outcome.diagnostics["candidate"] = C
        return outcome

    if any(linalg.is_zero(c) for c in C):
        outcome.diagnostics["error"] = "LP solution has a zero row"
        outcome.diagnostics["candidate"] = C
        return outcome
    outcome.diagnostics["general_rows"] = C
    if want_convex:
        cert = PwlrCertificate(normalize_rows(C))
    else:
        cert = PwlrCertificate(C, part.H)
    return _self_check(outcome, cert, net, lasalle)


# --- iterative row augmentation -------------------------------------------------

def default_initial_rows(gamma: Matrix) -> Matrix:
    """Rows of Γ with zero rows dropped and parallel rows merged."""
    return normalize_rows(gamma)


def _augment(net: ReactionNetwork, c: Vector) -> list[Vector]:
    gamma = net.gamma
    alpha = net.alpha
    out = []
    for i in sorted({i for j, x in enumerate(c) if x for i in net.reactant_set(j)}):
        signs = {1 if c[j] > 0 else -1 for j in range(net.nu) if alpha[i][j] > 0 and c[j]}
        for s in sorted(signs, reverse=True):
            out.append(linalg.add(c, linalg.scale(gamma[i], s)))
    return out


def construct_iterative(
    net: ReactionNetwork,
    C0: Optional[Sequence[Sequence]] = None,
    max_iter: int = DEFAULT_ITERATIONS,
    row_cap: int = ROW_CAP,
    lasalle: bool = True,
    sweep: bool = False,
) -> ConstructionOutcome:
    """Row augmentation c -> c + ν_i γ_i until the row set is a fixpoint.

    By default iteration k augments the single row under a cyclic pointer
    (row k of the current list), and the run has terminated once a full
    cycle over all rows leaves the set unchanged.  With ``sweep`` every row
    is augmented in each iteration.  Parallel rows are merged keeping the
    larger multiple, which leaves ``max_k |c_k r|`` unchanged.
    """
    outcome = ConstructionOutcome("iterative")
    gamma = net.gamma
    C = normalize_rows(default_initial_rows(gamma) if C0 is None else linalg.matrix(C0))
    if not C:
        outcome.diagnostics["error"] = "initial matrix has no nonzero rows"
        return outcome
    for v in linalg.nullspace(gamma, net.nu):
        if any(linalg.mat_vec(C, v)):
            outcome.diagnostics["error"] = "ker Γ is not contained in ker C0"
            return outcome
    trace = [len(C)]
    pointer = 0
    quiet = 0
    outcome.diagnostics["mode"] = "sweep" if sweep else "cyclic"
    for it in range(1, max_iter + 1):
        if sweep:
            grown = list(C)
            for c in C:
                grown.extend(_augment(net, c))
        else:
            if pointer >= len(C):
                pointer = 0
            grown = list(C) + _augment(net, C[pointer])
            pointer += 1
        nxt = normalize_rows(grown)
        trace.append(len(nxt))
        changed = nxt != C
        C = nxt
        quiet = 0 if changed else quiet + (len(C) if sweep else 1)
        if quiet >= len(C):
            outcome.diagnostics.update(iterations=it, terminated=True, row_counts=trace)
            return _self_check(outcome, PwlrCertificate(C), net, lasalle)
        if len(C) > row_cap:
            outcome.diagnostics.update(iterations=it, terminated=False, row_counts=trace, error=f"row count exceeded {row_cap}")
            return outcome
    outcome.diagnostics.update(iterations=max_iter, terminated=False, row_counts=trace, error=f"did not terminate in {max_iter} iterations")
    return outcome


# --- max-min constructions ------------------------------------------------------

def _maxmin_hypotheses(gamma: Matrix, nu: int) -> tuple[Optional[Vector], list[str]]:
    problems = []
    ker = linalg.nullspace(gamma, nu)
    if len(ker) != 1:
        problems.append(f"dim ker Γ = {len(ker)}, not 1")
    for i, row in enumerate(gamma):
        if sum(1 for x in row if x < 0) != 1:
            problems.append(f"row {i + 1} of Γ does not have a unique negative entry")
    v = None
    if len(ker) == 1:
        k = ker[0]
        if all(x > 0 for x in k):
            v = k
        elif all(x < 0 for x in k):
            v = tuple(-x for x in k)
        else:
            problems.append("ker Γ has no strictly positive vector")
    return v, problems


def _pairwise_rows(forms: Sequence[Vector]) -> Matrix:
    return tuple(linalg.sub(forms[q], forms[s]) for q, s in combinations(range(len(forms)), 2))


def _maxmin_claims(net: ReactionNetwork, skeleton: Optional[ReactionNetwork] = None) -> dict:
    base = skeleton or net
    anc = [ancestors(base, j) for j in range(base.nu)]
    common = all(anc[j] & anc[l] for j in range(base.nu) for l in range(base.nu))
    laws = conservation_laws(net.gamma, net.n)
    return {
        "common_ancestor": common,
        "lasalle_interior_claim": common,
        "conservative": laws.conservative,
        "persistent_claim": laws.conservative,
    }


def construct_maxmin(net: ReactionNetwork, lasalle: bool = True) -> ConstructionOutcome:
    """max_j R_j/v_j - min_j R_j/v_j under the one-dimensional-kernel hypotheses."""
    outcome = ConstructionOutcome("maxmin")
    if net.nu < 2:
        outcome.diagnostics["hypotheses"] = ["fewer than two reactions"]
        return outcome
    v, problems = _maxmin_hypotheses(net.gamma, net.nu)
    outcome.diagnostics["hypotheses"] = problems
    if problems:
        return outcome
    forms = [tuple(Fraction(int(i == j)) / v[j] for i in range(net.nu)) for j in range(net.nu)]
    C = _pairwise_rows(forms)
    assert linalg.same_rowspace(C, net.gamma)
    outcome.diagnostics["v"] = v
    outcome.diagnostics.update(_maxmin_claims(net))
    return _self_check(outcome, PwlrCertificate(C), net, lasalle)


def sole_input_reactions(net: ReactionNetwork) -> frozenset[int]:
    """Reactions that are the only input reaction of every one of their product species."""
    producers = [set() for _ in range(net.n)]
    for j, r in enumerate(net.reactions):
        for i, _ in r.products:
            producers[i].add(j)
    return frozenset(
        j for j, r in enumerate(net.reactions) if all(producers[i] == {j} for i, _ in r.products)
    )


def construct_maxmin_reversible(net: ReactionNetwork, lasalle: bool = True) -> ConstructionOutcome:
    """Max-min over net rates R_j - χ_j R_{-j} when reverses are added only to sole-input reactions."""
    outcome = ConstructionOutcome("maxmin_reversible")
    pairs = sorted({tuple(sorted((j, r.reverse_of))) for j, r in enumerate(net.reactions) if r.reverse_of is not None})
    if not pairs:
        outcome.diagnostics["hypotheses"] = ["no reversible pairs; use the plain max-min construction"]
        return outcome
    if len(pairs) > 12:
        outcome.diagnostics["hypotheses"] = ["too many reversible pairs to orient"]
        return outcome
    reasons = []
    for choice in product((0, 1), repeat=len(pairs)):
        kept = {pair[c] for pair, c in zip(pairs, choice)}
        dropped = {pair[1 - c] for pair, c in zip(pairs, choice)}
        keep = [j for j in range(net.nu) if j not in dropped]
        skeleton = net.subnetwork(range(net.n), keep)
        v, problems = _maxmin_hypotheses(skeleton.gamma, skeleton.nu)
        if problems:
            reasons.append({"orientation": sorted(kept), "problems": problems})
            continue
        sole = sole_input_reactions(skeleton)
        pos = {j: q for q, j in enumerate(keep)}
        bad = [j for j in kept if pos[j] not in sole]
        if bad:
            reasons.append({"orientation": sorted(kept), "problems": [f"reaction {j + 1} is not the sole input of its products" for j in bad]})
            continue
        rev = {pair[c]: pair[1 - c] for pair, c in zip(pairs, choice)}
        forms = []
        chi = {}
        for q, j in enumerate(keep):
            f = [Fraction(0)] * net.nu
            f[j] = 1 / v[q]
            if j in rev:
                f[rev[j]] = -1 / v[q]
                chi[j] = 1
            forms.append(tuple(f))
        C = _pairwise_rows(forms)
        outcome.diagnostics.update(v=v, chi=chi, skeleton_reactions=keep, hypotheses=[])
        outcome.diagnostics.update(_maxmin_claims(net, skeleton))
        return _self_check(outcome, PwlrCertificate(C), net, lasalle)
    outcome.diagnostics["hypotheses"] = ["no orientation of the reversible pairs satisfies the hypotheses"]
    outcome.diagnostics["attempts"] = reasons
    return outcome


# --- pipeline -------------------------------------------------------------------

def construct_any(
    net: ReactionNetwork,
    hhat: Optional[Sequence[Sequence]] = None,
    max_iter: int = DEFAULT_ITERATIONS,
    lasalle: bool = True,
    lp_max_vars: Optional[int] = LP_MAX_VARS,
) -> ConstructionOutcome:
    """First successful method in the order max-min, reversible max-min, LP, iterative."""
    tried = []
    for outcome in construct_all(net, hhat, max_iter, lasalle, stop_early=True, lp_max_vars=lp_max_vars):
        tried.append(outcome)
    for outcome in tried:
        if outcome.success and (not lasalle or outcome.report.passed):
            return outcome
    for outcome in tried:
        if outcome.success:
            return outcome
    return tried[-1] if tried else ConstructionOutcome("none")


def construct_all(
    net: ReactionNetwork,
    hhat: Optional[Sequence[Sequence]] = None,
    max_iter: int = DEFAULT_ITERATIONS,
    lasalle: bool = True,
    stop_early: bool = False,
    lp_max_vars: Optional[int] = LP_MAX_VARS,
):
    """Run the methods in order, yielding each outcome."""
    methods = [lambda: construct_maxmin(net, lasalle)]
    if any(r.reverse_of is not None for r in net.reactions):
        methods.append(lambda: construct_maxmin_reversible(net, lasalle))
    methods.append(lambda: construct_lp(net, hhat, lasalle=lasalle, max_vars=lp_max_vars))
    methods.append(lambda: construct_iterative(net, max_iter=max_iter, lasalle=lasalle))
    for make in methods:
        try:
            outcome = make()
        except ValueError as exc:
            outcome = ConstructionOutcome("error", diagnostics={"error": str(exc)})
        yield outcome
        if stop_early and outcome.success and (not lasalle or outcome.report.passed):
            return
