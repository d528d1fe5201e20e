"""Deliberately naive reference implementations used only by the tests."""

from __future__ import annotations

from itertools import combinations, permutations


def pairs(n):
    return list(combinations(range(n), 2))


def relabel_edges(edges, perm):
    return frozenset(tuple(sorted((perm[i], perm[j]))) for i, j in edges)


def naive_canonical(n, layers):
    """Smallest tuple of sorted edge lists over all n! relabelings."""
    best = None
    for perm in permutations(range(n)):
        key = tuple(tuple(sorted(relabel_edges(e, perm))) for e in layers)
        if best is None or key < best:
            best = key
    return best


def naive_automorphism_count(n, layers):
    layers = [frozenset(e) for e in layers]
    return sum(all(relabel_edges(e, perm) == e for e in layers) for perm in permutations(range(n)))


def naive_isomorphic(n, a, b):
    b = [frozenset(e) for e in b]
    return any(all(relabel_edges(x, perm) == y for x, y in zip(a, b)) for perm in permutations(range(n)))


def all_graphs(n):
    ps = pairs(n)
    for bits in range(1 << len(ps)):
        yield frozenset(p for k, p in enumerate(ps) if bits >> k & 1)
