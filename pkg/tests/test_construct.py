import random
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from crnlyap import linalg
from crnlyap.certificate import PwlrCertificate, evaluate
from crnlyap.checker import check, full_check
from crnlyap.construct import (
    _augment,
    _lp_system,
    construct_all,
    construct_any,
    construct_iterative,
    construct_lp,
    construct_maxmin,
    construct_maxmin_reversible,
)
from crnlyap.network import parse_network
from crnlyap.partition import refine_with_sign_regions
from helpers import certified_networks, load

MAXMIN_ROWS = [[1, -1, 0], [0, 1, -1], [-1, 0, 1]]
ITER_ROWS = [[1, 0, -1], [1, -2, 1], [0, 2, -2], [-2, 2, 0]]
HHAT5 = [[1, 0, 0, -1]]


def row_set(rows, scale=False):
    """Rows up to sign (and positive scaling when ``scale``), as a set."""
    out = set()
    for r in rows:
        key = linalg.canonical(r)[0] if scale else linalg.vector(r)
        if not scale:
            lead = next(x for x in key if x)
            key = key if lead > 0 else tuple(-x for x in key)
        out.add(tuple(key))
    return out


def test_maxmin_reproduces_maxmin_rows(network1):
    out = construct_maxmin(network1)
    assert out.success
    assert row_set(out.certificate.C, scale=True) == row_set(MAXMIN_ROWS, scale=True)
    assert out.diagnostics["v"] == (1, 1, 1)
    assert out.diagnostics["common_ancestor"] is True
    assert out.report.passed


def test_maxmin_example4_is_max_minus_min():
    net = load("example4_unbounded")
    out = construct_maxmin(net)
    assert out.success
    rng = random.Random(0)
    for _ in range(30):
        r = [Fraction(rng.randint(0, 30), rng.randint(1, 4)) for _ in range(3)]
        v = out.diagnostics["v"]
        scaled = [x / w for x, w in zip(r, v)]
        assert evaluate(out.certificate, r) == max(scaled) - min(scaled)


def test_maxmin_example6_reports_hypothesis_failure():
    out = construct_maxmin(load("example6"))
    assert not out.success
    assert out.diagnostics["hypotheses"]


def test_iterative_reproduces_printed_rows(network1):
    out = construct_iterative(network1)
    assert out.success and out.diagnostics["terminated"]
    assert row_set(out.certificate.C) == row_set(ITER_ROWS)


def test_iterative_example6_does_not_terminate():
    out = construct_iterative(load("example6"), max_iter=20)
    assert not out.success
    assert out.diagnostics["terminated"] is False
    assert out.diagnostics["error"] == "did not terminate in 20 iterations"


def test_iterative_sweep_variant_terminates_on_example6():
    out = construct_iterative(load("example6"), max_iter=20, sweep=True)
    assert out.success
    assert check(out.certificate, load("example6")).decrease_ok


def test_iterative_single_reaction_fixpoint_lacks_positive_kernel():
    # immediate fixpoint, but ker C = {0} has no strictly positive vector
    out = construct_iterative(parse_network("X1 -> X2"))
    assert out.diagnostics["terminated"] and out.diagnostics["iterations"] == 1
    assert row_set(out.diagnostics["candidate"]) == {(Fraction(1),)}
    assert not out.success
    assert out.diagnostics["failures"] == ["ker C has no strictly positive vector"]


def test_iterative_rejects_kernel_violation(network1):
    out = construct_iterative(network1, C0=[[1, 0, 0]])
    assert not out.success
    assert "ker" in out.diagnostics["error"]


def test_lp_network1_passes(network1):
    out = construct_lp(network1)
    assert out.success
    assert full_check(out.certificate, network1).passed


def _farkas_holds(A, rel, b, bounds, y):
    """Independent check: y certifies that {A x (rel) b, x within bounds} is empty."""
    g = [Fraction(0)] * len(bounds)
    rhs = Fraction(0)
    for yi, a, r, bi in zip(y, A, rel, b):
        if r == ">=":
            if yi < 0:
                return False
            yi = -yi
        elif r == "<=" and yi < 0:
            return False
        rhs += yi * bi
        for v, av in enumerate(a):
            g[v] += yi * av
    low = Fraction(0)
    for gv, (lo, hi) in zip(g, bounds):
        if gv > 0:
            if lo is None:
                return False
            low += gv * lo
        elif gv < 0:
            if hi is None:
                return False
            low += gv * hi
    return low > rhs


def test_lp_example5_infeasible_with_verified_farkas():
    net = load("example5")
    out = construct_lp(net)
    assert not out.success
    assert out.diagnostics["infeasible"] and out.diagnostics["farkas_verified"]
    A, rel, b, bounds, _, _, n = _lp_system(net, refine_with_sign_regions(net.gamma), True, Fraction(1))
    keep = [i for i, (r, x) in enumerate(zip(rel, b)) if not (r == "<=" and x == 1)]
    A, rel, b = [A[i] for i in keep], [rel[i] for i in keep], [b[i] for i in keep]
    assert _farkas_holds(A, rel, b, bounds, out.diagnostics["farkas"])
    # floating-point oracle on the same system
    Aub = [[float(-x) for x in a] if r == ">=" else [float(x) for x in a] for a, r in zip(A, rel) if r != "="]
    bub = [float(-x) if r == ">=" else float(x) for x, r in zip(b, rel) if r != "="]
    Aeq = [[float(x) for x in a] for a, r in zip(A, rel) if r == "="]
    beq = [float(x) for x, r in zip(b, rel) if r == "="]
    fb = [(None if lo is None else float(lo), None if hi is None else float(hi)) for lo, hi in bounds]
    res = linprog(np.zeros(n), A_ub=Aub or None, b_ub=bub or None, A_eq=Aeq or None, b_eq=beq or None, bounds=fb, method="highs")
    assert res.status == 2


def test_lp_example5_feasible_with_hhat():
    net = load("example5")
    out = construct_lp(net, hhat=HHAT5)
    assert out.success
    assert out.report.decrease_ok


def test_lp_example6_passes():
    net = load("example6")
    out = construct_lp(net)
    assert out.success
    assert full_check(out.certificate, net).passed


def test_lp_budget_declines_large_systems():
    out = construct_lp(load("chain_n3"))
    assert not out.success
    assert out.diagnostics["error"].startswith("LP has 1604 variables")


def test_lp_scale_invariance(network1):
    out = construct_lp(network1, lasalle=False)
    for t in (Fraction(1, 3), Fraction(7, 2)):
        scaled = PwlrCertificate(tuple(linalg.scale(c, t) for c in out.certificate.C))
        assert check(scaled, network1).decrease_ok


def test_maxmin_reversible_network1_with_reverse():
    net = parse_network("X1 -> X2 + X3\n2 X2 <-> X4\nX3 + X4 -> X1 + X2")
    out = construct_maxmin_reversible(net)
    assert out.success
    assert out.diagnostics["chi"] == {1: 1}


def test_maxmin_reversible_ring():
    net = parse_network("X1 <-> X2\nX2 -> X3\nX3 -> X1")
    out = construct_maxmin_reversible(net)
    assert out.success
    assert out.report.decrease_ok


def test_maxmin_reversible_rejects_shared_product():
    net = parse_network("X1 <-> X2\nX3 -> X2\nX2 -> X3\nX2 -> X1")
    out = construct_maxmin_reversible(net)
    assert not out.success
    assert out.diagnostics["hypotheses"]


def test_construct_all_order(network1):
    methods = [o.method for o in construct_all(network1)]
    assert methods == ["maxmin", "lp", "iterative"]
    assert construct_any(network1).method == "maxmin"


def test_returned_certificates_pass_checker():
    for net, cert in certified_networks():
        assert check(cert, net).decrease_ok


def test_augmentation_shrinks_active_region():
    rng = random.Random(5)
    for net, _ in certified_networks()[:20]:
        for c in net.gamma:
            if not any(c):
                continue
            for _ in range(20):
                r = [Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(net.nu)]
                grown = _augment(net, c)
                if grown and all(linalg.dot(g, r) <= linalg.dot(c, r) for g in grown):
                    for g in grown:
                        assert linalg.dot(linalg.sub(g, c), r) <= 0


def test_maxmin_kernel_fact():
    for net, _ in certified_networks():
        if len(linalg.nullspace(net.gamma, net.nu)) == 1 and net.nu >= 2:
            out = construct_maxmin(net, lasalle=False)
            if out.success:
                assert linalg.same_rowspace(out.certificate.C, net.gamma)
