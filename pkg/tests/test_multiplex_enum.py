from __future__ import annotations

import math
import random
from itertools import combinations, permutations, product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mxiso.graph_core import COLLECTIVE, PAIRWISE, LabeledGraph, Permutation, SizeLimitError, canonical_form
from mxiso.multiplex_enum import (
    CostGuardError,
    MultiplexNetwork,
    basis_pairs,
    brute_force_multiplex,
    catalog_from_pairings,
    collective_sparse_sizes,
    combine_layers,
    enumerate_catalog,
    enumerate_collective_basis,
    enumerate_multiplex,
    enumerate_pairwise_basis,
    expand_collective_sizes,
    expand_complements,
    expand_sparse_basis,
    flatten,
    oracle_mismatches,
    read_catalog,
    same_classes,
    scan_pairwise_basis,
    sparse_half,
    write_catalog,
)

# number of unlabeled simple graphs on n vertices, n = 1..6
GRAPH_COUNTS = {1: 1, 2: 2, 3: 4, 4: 11, 5: 34, 6: 156}


@pytest.mark.parametrize("n", sorted(GRAPH_COUNTS))
def test_pairwise_basis_counts(n):
    assert len(enumerate_pairwise_basis(n)) == GRAPH_COUNTS[n]


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_pairwise_basis_matches_exhaustive_scan(n):
    grown = enumerate_pairwise_basis(n)
    scanned = scan_pairwise_basis(n)
    assert [c.class_id for c in grown] == [c.class_id for c in scanned]
    assert sum(c.orbit_size for c in grown) == 2 ** math.comb(n, 2)


@pytest.mark.parametrize("n,expected", [(2, 1), (3, 2), (4, 6), (5, 18), (6, 78)])
def test_sparse_half_counts(n, expected):
    assert len(sparse_half(enumerate_pairwise_basis(n))) == expected


@pytest.mark.parametrize("n", [3, 4, 5])
def test_sparse_half_reconstructs_basis(n):
    full = enumerate_pairwise_basis(n)
    back = expand_sparse_basis(sparse_half(full))
    assert [c.class_id for c in back] == [c.class_id for c in full]


def test_collective_basis_n4():
    basis = enumerate_collective_basis(4)
    sizes = sorted(len(c.representative.layers[0].charged) for c in basis)
    assert sizes == [0, 2, 3, 4]
    assert sorted(c.orbit_size for c in basis) == [1, 1, 4, 6]
    # every charged set (k=1 folded into k=0) is covered exactly once
    assert sum(c.orbit_size for c in basis) == 2 ** 4 - 4


def test_collective_sparse_sizes_cover_all_classes():
    assert collective_sparse_sizes(4) == [0, 1, 2]
    assert expand_collective_sizes(collective_sparse_sizes(4), 4) == [0, 2, 3, 4]
    for n in range(2, 8):
        assert expand_collective_sizes(collective_sparse_sizes(n), n) == [0] + list(range(2, n + 1))


def _path3():
    return LabeledGraph(3, frozenset({(0, 1), (1, 2)}))


def test_combine_two_identical_paths():
    # P3 with P3: pairings fall into classes by where the second middle vertex lands
    classes = combine_layers(_path3(), _path3())
    assert sorted(c.size for c in classes) == [2, 4]
    assert sum(c.size for c in classes) == 6
    assert sum(c.orbit_size for c in classes) == 3 * 3


def test_combine_with_empty_layer_has_one_class():
    classes = combine_layers(_path3(), LabeledGraph.empty(3))
    assert len(classes) == 1
    assert classes[0].size == 6


def test_pairing_classes_are_closed_under_automorphisms():
    g = LabeledGraph(4, frozenset({(0, 1), (1, 2)}))
    h = LabeledGraph.clique(4, [0, 1, 2])
    classes = combine_layers(g, h)
    a1 = list(classes[0].first.shared_automorphisms)
    a2 = list(classes[0].second.shared_automorphisms)
    for c in classes:
        members = set(c.pairings)
        for pi in c.pairings:
            assert all(pi * a in members for a in a1)
            assert all(b * pi in members for b in a2)
    # all pairings are covered exactly once
    every = [p for c in classes for p in c.pairings]
    assert len(every) == len(set(every)) == 24


def test_members_of_one_pairing_class_are_isomorphic():
    g = LabeledGraph(4, frozenset({(0, 1), (2, 3), (1, 2)}))
    h = LabeledGraph(4, frozenset({(0, 2)}))
    classes = combine_layers(g, h)
    seen = set()
    for c in classes:
        forms = {MultiplexNetwork(tuple(LabeledGraph.from_mask(4, m) for m in
                                        (g.relabel(p).mask, h.mask))).canonical_form() for p in c.pairings}
        assert len(forms) == 1
        seen |= forms
    assert len(seen) == len(classes)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_orbit_sum_identity_for_every_basis_pair(n):
    fact = math.factorial(n)
    for x, y in basis_pairs(n):
        classes = combine_layers(x.representative, y.representative)
        assert sum(c.size for c in classes) == fact
        ox, oy = x.orbit_size, y.orbit_size
        assert sum(c.orbit_size for c in classes) == ox * oy


@st.composite
def stack_and_perm(draw):
    n = draw(st.integers(2, 5))
    ps = list(combinations(range(n), 2))
    e1 = draw(st.lists(st.sampled_from(ps), unique=True))
    e2 = draw(st.lists(st.sampled_from(ps), unique=True))
    perm = draw(st.permutations(range(n)))
    return LabeledGraph(n, frozenset(e1)), LabeledGraph(n, frozenset(e2)), Permutation(tuple(perm))


@settings(max_examples=40, deadline=None)
@given(stack_and_perm())
def test_flatten_keeps_exactly_the_common_symmetries(args):
    g, h, pi = args
    flat = flatten(g, h, pi)
    net = flat.base
    brute = {p for p in permutations(range(g.n))
             if all(lay.relabel(p) == lay for lay in net.layers)}
    assert {p.mapping for p in flat.shared_automorphisms} == brute


def test_third_layer_through_flattening_matches_direct_enumeration():
    n = 4
    g = LabeledGraph(n, frozenset({(0, 1), (1, 2)}))
    c = LabeledGraph.clique(n, [0, 1], COLLECTIVE)
    h = LabeledGraph(n, frozenset({(0, 3)}))
    forms = set()
    for pc in combine_layers(g, c):
        for pc2 in combine_layers(pc.flatten(), h):
            forms.add(pc2.network.canonical_form())
    brute = set()
    for p1 in permutations(range(n)):
        for p2 in permutations(range(n)):
            brute.add(canonical_form([g.relabel(p1), c.relabel(p2), h]))
    assert forms == brute


@pytest.mark.parametrize("n", [2, 3, 4])
def test_oracle_equivalence_all_basis_pairs(n):
    assert oracle_mismatches(basis_pairs(n)) == []


def test_oracle_equivalence_random_pairs_n5():
    pairs = random.Random(5).sample(basis_pairs(5), 20)
    assert oracle_mismatches(pairs) == []


def test_three_layer_catalog_matches_oracle_n3():
    kinds = (PAIRWISE, COLLECTIVE, PAIRWISE)
    bases = [enumerate_pairwise_basis(3), enumerate_collective_basis(3), enumerate_pairwise_basis(3)]
    assert same_classes(enumerate_multiplex(bases, 3), brute_force_multiplex(bases, 3))
    assert len(enumerate_catalog(3, kinds)) == len(brute_force_multiplex(bases, 3))


def test_brute_force_cost_guard():
    bases = [enumerate_pairwise_basis(5)] * 2
    with pytest.raises(CostGuardError):
        brute_force_multiplex(bases, 5, max_labeled=1000)


def test_catalog_454(catalog_pc):
    assert len(catalog_pc) == 454
    # every labeled (graph, charged set) pair counted once; k=1 collapses into k=0
    assert catalog_pc.total_labeled() == 2 ** 10 * (2 ** 5 - 5)


@pytest.mark.slow
def test_catalog_three_layers(catalog_pcp):
    assert len(catalog_pcp) == 257_616
    assert catalog_pcp.total_labeled() == 2 ** 10 * 27 * 2 ** 10


@pytest.mark.parametrize("kinds,expected", [
    ((PAIRWISE,), 11),
    ((COLLECTIVE,), 4),
    ((PAIRWISE, PAIRWISE), None),
    ((COLLECTIVE, COLLECTIVE), None),
])
def test_catalog_orbit_sums_n4(kinds, expected):
    cat = enumerate_catalog(4, kinds)
    if expected is not None:
        assert len(cat) == expected
    per_layer = {PAIRWISE: 2 ** 6, COLLECTIVE: 2 ** 4 - 4}
    assert cat.total_labeled() == math.prod(per_layer[k] for k in kinds)


def test_catalog_ids_are_canonical_and_unique(catalog_pc):
    ids = catalog_pc.class_ids
    assert len(set(ids)) == len(ids)
    for i in range(0, len(catalog_pc), 37):
        net = catalog_pc.network(i)
        perm = list(reversed(range(5)))
        assert net.relabel(perm).canonical_form().hex() == ids[i]
        assert catalog_pc.index_of(ids[i]) == i


def test_catalog_file_roundtrip(tmp_path, catalog_pc):
    path = tmp_path / "cat.txt"
    write_catalog(catalog_pc, path)
    back = read_catalog(path)
    assert same_classes(back, catalog_pc)
    write_catalog(back, tmp_path / "again.txt")
    assert path.read_bytes() == (tmp_path / "again.txt").read_bytes()


def test_enumeration_is_reproducible(tmp_path):
    a = enumerate_catalog(4, (PAIRWISE, COLLECTIVE), seed=3)
    b = enumerate_catalog(4, (PAIRWISE, COLLECTIVE), seed=3)
    write_catalog(a, tmp_path / "a")
    write_catalog(b, tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_threads_do_not_change_the_catalog():
    serial = enumerate_catalog(4, (PAIRWISE, PAIRWISE))
    parallel = enumerate_catalog(4, (PAIRWISE, PAIRWISE), threads=2)
    assert same_classes(serial, parallel)


def test_expand_complements_from_sparse_half():
    n = 4
    sparse = sparse_half(enumerate_pairwise_basis(n))
    partial = enumerate_multiplex([sparse, enumerate_collective_basis(n)], n)
    full = enumerate_catalog(n, (PAIRWISE, COLLECTIVE))
    assert same_classes(expand_complements(partial), full)


def test_catalog_from_pairings_is_the_two_layer_catalog():
    x = enumerate_pairwise_basis(4)[3]
    y = enumerate_collective_basis(4)[1]
    assert same_classes(catalog_from_pairings(x, y), enumerate_multiplex([[x], [y]], 4))


def test_size_limit_on_enumeration():
    with pytest.raises(SizeLimitError):
        enumerate_pairwise_basis(9)


def test_edge_counts_shape(catalog_pc):
    counts = catalog_pc.edge_counts()
    assert counts.shape == (454, 2)
    assert set(np.unique(counts[:, 1]).tolist()) == {0, 1, 3, 6, 10}


def test_multiplex_rejects_mixed_sizes():
    with pytest.raises(ValueError):
        MultiplexNetwork((LabeledGraph.empty(3), LabeledGraph.empty(4)))


def test_class_from_product_of_labeled_layers_lands_in_catalog(catalog_pc):
    rng = random.Random(0)
    for _ in range(50):
        edges = [p for p in combinations(range(5), 2) if rng.random() < 0.5]
        charged = [v for v in range(5) if rng.random() < 0.5]
        net = MultiplexNetwork((LabeledGraph(5, frozenset(edges)), LabeledGraph.clique(5, charged)))
        assert net.canonical_form().hex() in catalog_pc


def test_labeled_products_n3_group_into_catalog_orbits():
    cat = enumerate_catalog(3, (PAIRWISE, PAIRWISE))
    counts = {}
    for a, b in product(range(8), repeat=2):
        net = MultiplexNetwork.from_masks(3, (a, b), (PAIRWISE, PAIRWISE))
        key = net.canonical_form().hex()
        counts[key] = counts.get(key, 0) + 1
    assert counts == dict(zip(cat.class_ids, cat.orbit_sizes.tolist()))
