import random
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from crnlyap import linalg
from crnlyap.lp import strict_cone_interior
from crnlyap.partition import build_partition, facet_witness, locate, refine_with_sign_regions

from helpers import load


def test_network1_has_six_regions_and_twelve_neighbor_pairs(network1):
    part = build_partition(network1.gamma)
    assert len(part.reduced) == 3
    assert part.m == 6
    assert len(part.neighbors) == 12


def test_network1_excluded_signatures(network1):
    part = build_partition(network1.gamma)
    kept = {reg.reduced_signature for reg in part.regions}
    empty = 0
    for sig in product((1, -1), repeat=3):
        M = [tuple(s * x for x in row) for s, row in zip(sig, part.reduced)]
        r = strict_cone_interior(M)
        assert (r is not None) == (sig in kept)
        empty += r is None
    assert empty == 2


def test_single_row_partition():
    part = build_partition([[1, -1]])
    assert part.m == 2
    assert {reg.signature for reg in part.regions} == {(1,), (-1,)}


def test_locate_examples(network1):
    part = build_partition(network1.gamma)
    for reg in part.regions:
        assert locate(part, reg.interior_witness) == {reg.index}
    assert locate(part, (1, 1, 1)) == set(range(part.m))
    vals = linalg.mat_vec(part.H, (1, 1, 0))
    expected = {reg.index for reg in part.regions if all(s * v >= 0 for s, v in zip(reg.signature, vals))}
    assert locate(part, (1, 1, 0)) == expected


def test_zero_row_and_kernel_mismatch_rejected(network1):
    with pytest.raises(ValueError):
        build_partition([[1, -1], [0, 0]])
    with pytest.raises(ValueError):
        build_partition([[1, -1, 0]], check_kernel_against=network1.gamma)


def test_refinement_examples(network1):
    plain = refine_with_sign_regions(network1.gamma)
    assert plain.partition.m == 6
    assert plain.q == tuple(range(6))
    ex5 = load("example5")
    coarse = refine_with_sign_regions(ex5.gamma)
    fine = refine_with_sign_regions(ex5.gamma, [[1, 0, 0, -1]])
    assert fine.partition.m > coarse.partition.m
    assert set(fine.q) == set(range(coarse.partition.m))
    with pytest.raises(ValueError):
        refine_with_sign_regions(network1.gamma, [[1, 0, 0]])


@st.composite
def kernel_positive_matrix(draw):
    """Random H with H μ = 0 for a random μ >> 0."""
    nu = draw(st.integers(2, 4))
    mu = [draw(st.integers(1, 3)) for _ in range(nu)]
    p = draw(st.integers(1, 4))
    rows = []
    for _ in range(p):
        head = [draw(st.integers(-3, 3)) for _ in range(nu - 1)]
        last = Fraction(-sum(h * m for h, m in zip(head, mu)), mu[-1])
        row = head + [last]
        if any(row):
            rows.append(row)
    if not rows:
        rows.append([mu[1], -mu[0]] + [0] * (nu - 2))
    return rows, mu


@settings(max_examples=100, deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow])
@given(kernel_positive_matrix())
def test_partition_symmetry_positivity_covering(case):
    H, mu = case
    part = build_partition(H)
    m = part.m
    assert m % 2 == 0 and m >= 2
    for reg in part.regions:
        mirror = part.regions[part.mirror(reg.index)]
        assert mirror.signature == tuple(-s for s in reg.signature)
        signed = part.signed_rows(reg.index)
        w = reg.interior_witness
        assert all(linalg.dot(row, w) > 0 for row in signed)
        # shifting along μ keeps the point inside and eventually makes it positive
        t = 1 + max(abs(x) for x in w) * max(mu)
        shifted = [x + t * u for x, u in zip(w, mu)]
        assert min(shifted) > 0
        assert all(linalg.dot(row, shifted) > 0 for row in signed)
    rng = random.Random(len(H) * 31 + part.nu)
    nu = part.nu
    for _ in range(50):
        r = [Fraction(rng.randint(-5, 5)) for _ in range(nu)]
        ks = locate(part, r)
        assert ks
        vals = linalg.mat_vec(part.H, r)
        for a in ks:
            for b in ks:
                sa, sb = part.regions[a].signature, part.regions[b].signature
                for i in range(len(vals)):
                    if sa[i] != sb[i]:
                        assert vals[i] == 0
    for a in range(m):
        for b in range(m):
            ra, rb = part.regions[a].reduced_signature, part.regions[b].reduced_signature
            hamming = sum(x != y for x, y in zip(ra, rb))
            assert ((a, b) in part.neighbors) == (hamming == 1)
    for (a, b), t in part.neighbors.items():
        w = facet_witness(part, a, b)
        assert w is not None
        assert linalg.dot(part.H[t], w) == 0
