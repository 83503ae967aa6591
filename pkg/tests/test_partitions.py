from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from spherical_ldp.partitions import (Partition, distinct_permutations, dominance, kostka, lr_coefficient,
                                      monomial_bracket, monomial_eval, partitions, schur_bialternant,
                                      schur_combinatorial, ssyt_bruteforce)


def test_partition_basics():
    p = Partition.parse("3,1,1,0")
    assert p.parts == (3, 1, 1) and p.size == 5 and p.padded(5) == (3, 1, 1, 0, 0)
    assert [q.parts for q in partitions(4)] == [(4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1)]
    assert len(list(partitions(8))) == 22
    assert len(list(partitions(6, max_len=2))) == 4


def test_known_values():
    assert kostka((2, 1), (1, 1, 1)) == 2
    assert kostka((3, 2), (2, 2, 1)) == 2
    assert kostka((2, 2), (3, 1)) == 0
    assert lr_coefficient((2, 1), (2, 1), (3, 2, 1)) == 2
    assert lr_coefficient((1,), (1,), (2,)) == 1
    assert schur_bialternant((2, 1), [1, 2, 3]) == 60
    assert schur_combinatorial((2, 1), [1, 2, 3]) == 60
    assert monomial_eval((2, 1), [1, 2]) == 6


small_partition = st.integers(0, 6).flatmap(lambda n: st.sampled_from(list(partitions(n))))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: st.tuples(st.sampled_from(list(partitions(n))),
                                                      st.lists(st.integers(0, 3), min_size=1, max_size=4)
                                                      .filter(lambda c: sum(c) == n))))
def test_kostka_matches_bruteforce(args):
    lam, content = args
    assert kostka(lam, content) == ssyt_bruteforce(lam, content)


@settings(max_examples=30, deadline=None)
@given(small_partition, st.lists(st.fractions(Fraction(1, 9), Fraction(9)), min_size=1, max_size=4, unique=True))
def test_schur_two_routes(lam, pts):
    if len(lam.parts) > len(pts):
        assert schur_combinatorial(lam, pts) == 0
    else:
        assert schur_bialternant(lam, pts) == schur_combinatorial(lam, pts)


def test_kostka_content_symmetric():
    # K_{λη} does not depend on the order of the content
    for perm in distinct_permutations((2, 1, 1)):
        assert kostka((3, 1), perm) == kostka((3, 1), (2, 1, 1))


def test_positivity_iff_dominance():
    for n in range(1, 7):
        ps = list(partitions(n))
        for lam in ps:
            for eta in ps:
                assert (kostka(lam, eta.parts) > 0) == dominance(lam, eta)


def test_lr_symmetry_and_size():
    for lam in partitions(3):
        for eta in partitions(2):
            for kap in partitions(5):
                assert lr_coefficient(lam, eta, kap) == lr_coefficient(eta, lam, kap)
            for kap in partitions(4):
                assert lr_coefficient(lam, eta, kap) == 0


def test_monomial_bracket():
    b = monomial_bracket((2, 1, 0), [0.3, 0.1, -0.2])
    assert b.lower <= b.value <= b.upper


def test_degenerate_alternant():
    with pytest.raises(ValueError, match="degenerate alternant"):
        schur_bialternant((1,), [1, 1])
