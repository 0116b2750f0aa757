import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupkernels.errors import MalformedElementError, ResourceLimitError, ValidationError
from groupkernels.groups import (
    FreeGroup,
    GroupElement,
    Heisenberg3,
    IntegerLattice,
    ball,
    ball_sizes,
    growth_analysis,
    metric,
    parse_group,
    word_length,
)

from oracles import bfs_ball_sizes, bfs_lengths, lattice_ball_size

Z1, Z2, Z3 = IntegerLattice(1), IntegerLattice(2), IntegerLattice(3)
H3 = Heisenberg3()
F2 = FreeGroup(2)

# frozen from the BFS oracle, matching the known growth series of the Heisenberg group
H3_SIZES = [1, 5, 17, 53, 135, 299, 593, 1069, 1793, 2845, 4309]


class TestWordLength:
    def test_lattice_l1(self):
        assert word_length(Z2, Z2.element(3, -2)) == 5

    def test_free_reduced_word(self):
        assert word_length(F2, F2.parse_element("aba⁻¹")) == 3

    def test_heisenberg_commutator(self):
        x, xi, y, yi = H3.generators
        z = H3.product([x, y, xi, yi])
        assert z == H3.element(0, 0, 1)
        assert word_length(H3, z) == 4

    def test_identity_has_length_zero(self):
        for G in (Z1, Z3, H3, F2):
            assert word_length(G, G.identity()) == 0

    @pytest.mark.parametrize("G,r", [(H3, 6), (F2, 5), (Z3, 4)])
    def test_matches_bfs_oracle(self, G, r):
        for g, d in bfs_lengths(G, r).items():
            assert word_length(G, g) == d

    def test_malformed(self):
        with pytest.raises(MalformedElementError):
            Z2.element(1, 2, 3)
        with pytest.raises(MalformedElementError):
            F2.validate(GroupElement((1, -1)))
        with pytest.raises(MalformedElementError):
            F2.validate(GroupElement((3,)))
        with pytest.raises(MalformedElementError):
            H3.element(1, 2)
        with pytest.raises(MalformedElementError):
            F2.parse_element("ac")


class TestMetric:
    def test_examples(self):
        assert metric(Z1, Z1.element(5), Z1.element(5)) == 0
        assert metric(Z1, Z1.element(7), Z1.element(3)) == 4
        assert metric(F2, F2.parse_element("ab"), F2.parse_element("a")) == 1


class TestBall:
    def test_examples(self):
        assert [g.canonical[0] for g in ball(Z1, 3)] == [0, -1, 1, -2, 2, -3, 3]
        assert len(ball(Z2, 2)) == 13
        assert len(ball(F2, 2)) == 17

    def test_order_and_uniqueness(self):
        for G in (Z2, H3, F2):
            B = ball(G, 3)
            assert len(set(B)) == len(B)
            keys = [(G.word_length(g), g.canonical) for g in B]
            assert keys == sorted(keys)

    def test_nested_and_one_step(self):
        for G in (Z2, H3, F2):
            inner = set(ball(G, 2))
            outer = ball(G, 3)
            assert inner <= set(outer)
            for g in outer:
                if g not in inner:
                    assert any(G.multiply(g, s) in inner for s in G.generators)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_lattice_closed_form(self, d):
        G = IntegerLattice(d)
        assert ball_sizes(G, 10) == [lattice_ball_size(d, r) for r in range(11)]

    def test_free_closed_form(self):
        assert ball_sizes(F2, 8) == [2 * 3**r - 1 for r in range(9)]
        assert ball_sizes(F2, 5) == bfs_ball_sizes(F2, 5)

    def test_heisenberg_against_bfs(self):
        assert ball_sizes(H3, 7) == bfs_ball_sizes(H3, 7)
        assert ball_sizes(H3, 10) == H3_SIZES

    def test_budget(self):
        with pytest.raises(ResourceLimitError) as info:
            ball(F2, 20)
        assert info.value.cardinality == 2 * 3**20 - 1
        assert str(2 * 3**20 - 1) in str(info.value)
        with pytest.raises(ResourceLimitError):
            ball(H3, 8, budget=1000)


class TestGrowth:
    def test_z2(self):
        rep = growth_analysis(Z2, 12)
        assert 1.8 <= rep.degree_estimate <= 2.2
        assert rep.classified_polynomial
        assert rep.ball_sizes[0] == 1
        assert all(b < c for b, c in zip(rep.ball_sizes, rep.ball_sizes[1:]))

    def test_heisenberg(self):
        rep = growth_analysis(H3, 10)
        assert 3.5 <= rep.degree_estimate <= 4.5
        assert rep.classified_polynomial

    def test_free(self):
        assert not growth_analysis(F2, 8).classified_polynomial

    def test_small_rmax(self):
        with pytest.raises(ValidationError):
            growth_analysis(Z1, 3)

    def test_fit_is_least_squares_slope(self):
        rep = growth_analysis(Z2, 12)
        r = np.arange(6, 13)
        x, y = np.log1p(r), np.log(np.array(rep.ball_sizes[6:], dtype=float))
        slope = np.polyfit(x, y, 1)[0]
        assert math.isclose(rep.degree_estimate, slope, rel_tol=1e-12)


class TestParsing:
    def test_specs(self):
        assert parse_group("Z^2") == Z2
        assert parse_group("Z") == Z1
        assert isinstance(parse_group("H3"), Heisenberg3)
        assert parse_group("F3") == FreeGroup(3)
        for bad in ("Q", "Z^", "F", "Z^0", "F1", ""):
            with pytest.raises(ValidationError):
                parse_group(bad)

    def test_free_words(self):
        g = F2.parse_element("a b^-1 a")
        assert g.canonical == (1, -2, 1)
        assert F2.parse_element(F2.format_element(g)) == g
        assert F2.parse_element("aA") == F2.identity()

    def test_lattice_round_trip(self):
        g = Z3.element(1, -4, 0)
        assert Z3.parse_element(Z3.format_element(g)) == g


def _elements(G, coords):
    if isinstance(G, FreeGroup):
        return st.lists(st.sampled_from([1, -1, 2, -2]), max_size=6).map(lambda w: GroupElement(G.reduce(w)))
    n = 3 if isinstance(G, Heisenberg3) else G.rank
    return st.tuples(*[st.integers(-coords, coords)] * n).map(GroupElement)


@pytest.mark.parametrize("G", [Z2, H3, F2], ids=["Z2", "H3", "F2"])
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_group_axioms(G, data):
    g, h, t = (data.draw(_elements(G, 3)) for _ in range(3))
    e = G.identity()
    assert G.multiply(g, G.inverse(g)) == e
    assert G.multiply(G.multiply(g, h), t) == G.multiply(g, G.multiply(h, t))
    assert G.word_length(g) == G.word_length(G.inverse(g))
    assert metric(G, G.multiply(t, g), G.multiply(t, h)) == metric(G, g, h)
    assert metric(G, g, h) == metric(G, h, g)
    assert metric(G, g, t) <= metric(G, g, h) + metric(G, h, t)


def test_generators_symmetric():
    for G in (Z1, Z3, H3, F2, FreeGroup(3)):
        gens = G.generators
        assert G.identity() not in gens
        assert {G.inverse(s) for s in gens} == set(gens)
