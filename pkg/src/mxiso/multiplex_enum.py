"""Basis-network classes and multiplex isomorphism classes.

Two layers are joined by a *pairing*: a permutation applied to the first
layer's labels while the second layer stays in its own labeling.  Pairings
that differ by an automorphism of either layer give isomorphic multiplex
networks, so the classes of a basis pair are the closures of pairings under
those automorphisms.  A third layer is joined by flattening a two-layer class
representative into one object whose symmetry group is the set of
permutations fixing both of its layers.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .graph_core import (
    COLLECTIVE,
    KINDS,
    MAX_N,
    PAIRWISE,
    AutomorphismGroup,
    LabeledGraph,
    Permutation,
    ShapeMismatchError,
    SizeLimitError,
    automorphisms,
    canonical_form,
    canonical_masks,
    canonical_masks_batch,
    complement,
    encode_masks,
    format_edges,
    full_mask,
    is_isomorphic,
    num_pairs,
    parse_edges,
    popcount,
    relabel_mask,
)

log = logging.getLogger(__name__)

MAX_LAYERS = 3


class CostGuardError(RuntimeError):
    """Raised when the brute-force oracle would touch too many labeled networks."""


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiplexNetwork:
    """Vertex-aligned stack of layers sharing vertices ``0..n-1``."""

    layers: tuple[LabeledGraph, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("a multiplex network needs at least one layer")
        n = layers[0].n
        if any(lay.n != n for lay in layers):
            raise ShapeMismatchError("layers have different vertex counts")
        object.__setattr__(self, "layers", layers)

    @classmethod
    def from_masks(cls, n: int, masks: Sequence[int], kinds: Sequence[str]) -> "MultiplexNetwork":
        if len(masks) != len(kinds):
            raise ShapeMismatchError("one kind per layer is required")
        return cls(tuple(LabeledGraph.from_mask(n, int(m), k) for m, k in zip(masks, kinds)))

    @property
    def n(self) -> int:
        return self.layers[0].n

    @property
    def layer_kinds(self) -> tuple[str, ...]:
        return tuple(lay.kind for lay in self.layers)

    @property
    def masks(self) -> tuple[int, ...]:
        return tuple(lay.mask for lay in self.layers)

    def relabel(self, perm) -> "MultiplexNetwork":
        return MultiplexNetwork(tuple(lay.relabel(perm) for lay in self.layers))

    def canonical_form(self) -> bytes:
        return canonical_form(self.layers)

    def __len__(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class IsoClass:
    representative: MultiplexNetwork
    orbit_size: int
    class_id: bytes

    @property
    def hex_id(self) -> str:
        return self.class_id.hex()


@dataclass(frozen=True)
class FlattenedGraph:
    """A layer stack pinned to one pairing, with its shared automorphisms."""

    base: MultiplexNetwork
    shared_automorphisms: AutomorphismGroup

    @classmethod
    def of(cls, g) -> "FlattenedGraph":
        if isinstance(g, FlattenedGraph):
            return g
        net = g if isinstance(g, MultiplexNetwork) else MultiplexNetwork((g,))
        return cls(net, automorphisms(net.layers))

    @property
    def n(self) -> int:
        return self.base.n


@dataclass(frozen=True)
class PairingClass:
    """One class of pairings produced when joining two layer stacks."""

    first: FlattenedGraph
    second: FlattenedGraph
    representative: Permutation
    pairings: tuple[Permutation, ...]

    @property
    def size(self) -> int:
        return len(self.pairings)

    @property
    def network(self) -> MultiplexNetwork:
        return assemble(self.first.base, self.second.base, self.representative)

    @property
    def orbit_size(self) -> int:
        """Labeled multiplex networks in this class."""
        a1, a2 = self.first.shared_automorphisms.size, self.second.shared_automorphisms.size
        aut = a1 * a2 // self.size
        return math.factorial(self.first.n) // aut

    def flatten(self) -> FlattenedGraph:
        return flatten(self.first, self.second, self.representative)


def assemble(first: MultiplexNetwork, second: MultiplexNetwork, pairing: Permutation) -> MultiplexNetwork:
    return MultiplexNetwork(first.relabel(pairing).layers + second.layers)


# ---------------------------------------------------------------------------
# symmetric group bookkeeping
# ---------------------------------------------------------------------------

class _SymmetricGroup:
    """Index-based arithmetic on S_n for the closure loops."""

    def __init__(self, n: int):
        from itertools import permutations

        self.n = n
        self.perms = list(permutations(range(n)))
        self.index = {p: i for i, p in enumerate(self.perms)}
        self.order = len(self.perms)
        self.inv = [self.index[tuple(np.argsort(p).tolist())] for p in self.perms]
        self._table = None
        if n <= 6:
            arr = np.array(self.perms, dtype=np.int64).reshape(self.order, n)
            radix = n ** np.arange(n - 1, -1, -1, dtype=np.int64)
            codes = arr @ radix  # lexicographic order matches itertools order
            table = np.empty((self.order, self.order), dtype=np.int64)
            for a in range(self.order):
                table[a] = np.searchsorted(codes, arr[a][arr] @ radix)
            self._table = table.tolist()

    def compose(self, a: int, b: int) -> int:
        """Index of ``perms[a] ∘ perms[b]``."""
        if self._table is not None:
            return self._table[a][b]
        pa, pb = self.perms[a], self.perms[b]
        return self.index[tuple(pa[v] for v in pb)]

    def right_images(self, cur: int, elems: Sequence[int]) -> list[int]:
        if self._table is not None:
            row = self._table[cur]
            return [row[a] for a in elems]
        return [self.compose(cur, a) for a in elems]

    def left_images(self, cur: int, elems: Sequence[int]) -> list[int]:
        if self._table is not None:
            t = self._table
            return [t[b][cur] for b in elems]
        return [self.compose(b, cur) for b in elems]

    def conjugate(self, by: int, elems: Iterable[int]) -> list[int]:
        binv = self.inv[by]
        return [self.compose(self.compose(by, g), binv) for g in elems]

    def to_index(self, perm: Permutation) -> int:
        return self.index[perm.mapping]

    def to_perm(self, i: int) -> Permutation:
        return Permutation(self.perms[i])


@lru_cache(maxsize=None)
def _sym(n: int) -> _SymmetricGroup:
    return _SymmetricGroup(n)


def _pairing_closure(sym: _SymmetricGroup, first_aut: Sequence[int], second_aut: Sequence[int]) -> list[list[int]]:
    """Partition all pairings into classes by the worklist closure.

    ``unpaired`` holds pairings not yet assigned, ``unchecked`` members found
    but not expanded, ``checked`` expanded members of the current class.
    Automorphisms of the first stack act on the pairing's own labels
    (``π ∘ α``); those of the fixed second stack act on label positions
    (``β ∘ π``).
    """
    unpaired = dict.fromkeys(range(sym.order))  # insertion-ordered set
    classes = []
    while unpaired:
        start = next(iter(unpaired))
        del unpaired[start]
        unchecked = [start]
        seen = {start}
        checked = []
        while unchecked:
            cur = unchecked.pop()
            checked.append(cur)
            for nxt in sym.right_images(cur, first_aut):
                if nxt not in seen:
                    seen.add(nxt)
                    del unpaired[nxt]
                    unchecked.append(nxt)
            for nxt in sym.left_images(cur, second_aut):
                if nxt not in seen:
                    seen.add(nxt)
                    del unpaired[nxt]
                    unchecked.append(nxt)
        classes.append(checked)
    return classes


# ---------------------------------------------------------------------------
# basis networks
# ---------------------------------------------------------------------------

def _check_n(n: int, lo: int = 1) -> None:
    if n < lo:
        raise ValueError(f"n must be at least {lo}")
    if n > MAX_N:
        raise SizeLimitError(f"n={n} exceeds the limit of {MAX_N}")


def _basis_class(n: int, mask: int, kind: str) -> IsoClass:
    g = LabeledGraph.from_mask(n, mask, kind)
    net = MultiplexNetwork((g,))
    aut = automorphisms(g)
    return IsoClass(net, math.factorial(n) // aut.size, encode_masks(n, [mask]))


def _single_layer_canonical(n: int, masks: Iterable[int]) -> list[int]:
    masks = np.fromiter(masks, dtype=np.int64)
    if n <= 6:
        return canonical_masks_batch(n, masks[:, None])[:, 0].tolist()
    return [canonical_masks(n, [m])[0] for m in masks.tolist()]


def enumerate_pairwise_basis(n: int) -> list[IsoClass]:
    """One class per isomorphism type of simple graph on ``n`` vertices.

    Graphs with ``m + 1`` edges are grown from the ``m``-edge classes by adding
    each missing edge and keeping new canonical forms.
    """
    _check_n(n, 1)
    p = num_pairs(n)
    layer = {0}
    found = [0]
    for _ in range(p):
        grown = set()
        for mask in layer:
            for b in range(p):
                bit = 1 << b
                if not mask & bit:
                    grown.add(mask | bit)
        layer = set(_single_layer_canonical(n, sorted(grown)))
        found.extend(sorted(layer))
    return [_basis_class(n, m, PAIRWISE) for m in sorted(found, key=lambda m: (popcount(m), m))]


def scan_pairwise_basis(n: int) -> list[IsoClass]:
    """Exhaustive scan of all ``2^(n choose 2)`` labeled graphs, grouped by canonical form."""
    _check_n(n, 1)
    if n > 6:
        raise SizeLimitError("exhaustive scan is limited to n <= 6")
    masks = np.arange(1 << num_pairs(n), dtype=np.int64)
    canon = canonical_masks_batch(n, masks[:, None])[:, 0]
    uniq, counts = np.unique(canon, return_counts=True)
    out = []
    for m, c in zip(uniq.tolist(), counts.tolist()):
        cls = _basis_class(n, m, PAIRWISE)
        assert cls.orbit_size == c
        out.append(cls)
    return sorted(out, key=lambda c: (popcount(c.representative.masks[0]), c.representative.masks[0]))


def enumerate_collective_basis(n: int) -> list[IsoClass]:
    """Cliques on the first ``k`` vertices for ``k = 0, 2, 3, ..., n``.

    A single charged vertex has no partner, so its layer is the empty graph
    and it is folded into ``k = 0``.
    """
    _check_n(n, 1)
    out = []
    for k in [0] + list(range(2, n + 1)):
        g = LabeledGraph.clique(n, range(k))
        orbit = 1 if k == 0 else math.comb(n, k)
        out.append(IsoClass(MultiplexNetwork((g,)), orbit, encode_masks(n, [g.mask])))
    return sorted(out, key=lambda c: (popcount(c.representative.masks[0]), c.class_id))


def enumerate_basis(n: int, kind: str) -> list[IsoClass]:
    if kind == PAIRWISE:
        return enumerate_pairwise_basis(n)
    if kind == COLLECTIVE:
        return enumerate_collective_basis(n)
    raise ValueError(f"unknown layer kind {kind!r}")


def _canonical_mask_of(cls: IsoClass) -> int:
    g = cls.representative.layers[0]
    return canonical_masks(g.n, [g.mask])[0]


def sparse_half(classes: Sequence[IsoClass]) -> list[IsoClass]:
    """Keep one class from each complement pair of pairwise basis classes.

    The class with fewer edges is kept; when both have exactly half the pairs
    the smaller canonical form wins, and self-complementary classes are kept
    once.
    """
    out = []
    for cls in classes:
        g = cls.representative.layers[0]
        if g.kind != PAIRWISE or len(cls.representative) != 1:
            raise ValueError("sparse_half expects single-layer pairwise classes")
        p = num_pairs(g.n)
        e = g.num_edges
        if 2 * e < p:
            out.append(cls)
        elif 2 * e == p:
            gc = complement(g)
            if is_isomorphic(g, gc):
                out.append(cls)
            elif canonical_form(g) < canonical_form(gc):
                out.append(cls)
    return out


def expand_sparse_basis(classes: Sequence[IsoClass]) -> list[IsoClass]:
    """Inverse of :func:`sparse_half`: add complements, dropping duplicates."""
    out: dict[bytes, IsoClass] = {}
    for cls in classes:
        g = cls.representative.layers[0]
        for h in (g, complement(g)):
            key = canonical_form(h)
            if key not in out:
                m = canonical_masks(h.n, [h.mask])[0]
                out[key] = _basis_class(h.n, m, PAIRWISE)
    return sorted(out.values(), key=lambda c: (popcount(c.representative.masks[0]), c.representative.masks[0]))


def collective_sparse_sizes(n: int) -> list[int]:
    """Charged-set sizes ``k <= n/2``; node-set complements give the rest."""
    return list(range(0, n // 2 + 1))


def expand_collective_sizes(sizes: Iterable[int], n: int) -> list[int]:
    """Clique sizes covered by charged sets of the given sizes and their complements."""
    covered = set()
    for k in sizes:
        for kk in (k, n - k):
            covered.add(0 if kk == 1 else kk)
    return sorted(covered)


# ---------------------------------------------------------------------------
# joining layers
# ---------------------------------------------------------------------------

def combine_layers(first, second) -> list[PairingClass]:
    """Partition the ``n!`` pairings of two stacks into multiplex classes.

    ``first`` and ``second`` may be graphs, multiplex networks or flattened
    graphs (for chaining a third layer).  Sizes of the returned classes sum to
    ``n!``.
    """
    f1, f2 = FlattenedGraph.of(first), FlattenedGraph.of(second)
    if f1.n != f2.n:
        raise ShapeMismatchError("cannot pair stacks with different vertex counts")
    if f1.n > MAX_N:
        raise SizeLimitError(f"n={f1.n} exceeds the limit of {MAX_N}")
    sym = _sym(f1.n)
    a1 = [sym.to_index(g) for g in f1.shared_automorphisms]
    a2 = [sym.to_index(g) for g in f2.shared_automorphisms]
    out = []
    for members in _pairing_closure(sym, a1, a2):
        perms = tuple(sym.to_perm(i) for i in members)
        out.append(PairingClass(f1, f2, perms[0], perms))
    return out


def flatten(first, second, pairing: Permutation) -> FlattenedGraph:
    """Pin two stacks together by ``pairing`` and keep their common symmetries.

    The first stack's group is carried to its new labels by conjugation and
    intersected with the second stack's group.
    """
    f1, f2 = FlattenedGraph.of(first), FlattenedGraph.of(second)
    shared = f1.shared_automorphisms.conjugate(pairing).intersection(f2.shared_automorphisms)
    return FlattenedGraph(assemble(f1.base, f2.base, pairing), shared)


# ---------------------------------------------------------------------------
# catalogs
# ---------------------------------------------------------------------------

@dataclass
class IsoClassCatalog:
    """Canonical representatives of multiplex isomorphism classes.

    Representatives are kept as a (C, L) array of canonical layer masks so
    large catalogs stay compact; :attr:`classes` materializes objects.
    """

    n: int
    layer_kinds: tuple[str, ...]
    masks: np.ndarray
    orbit_sizes: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.layer_kinds = tuple(self.layer_kinds)
        self.masks = np.asarray(self.masks, dtype=np.int64).reshape(-1, len(self.layer_kinds))
        self.orbit_sizes = np.asarray(self.orbit_sizes, dtype=np.int64).reshape(-1)
        if len(self.masks) != len(self.orbit_sizes):
            raise ValueError("one orbit size per class is required")

    def __len__(self) -> int:
        return len(self.masks)

    @cached_property
    def class_ids(self) -> list[str]:
        return [encode_masks(self.n, row).hex() for row in self.masks.tolist()]

    @cached_property
    def _index(self) -> dict[str, int]:
        return {cid: i for i, cid in enumerate(self.class_ids)}

    def index_of(self, class_id: str | bytes) -> int:
        if isinstance(class_id, bytes):
            class_id = class_id.hex()
        return self._index[class_id]

    def __contains__(self, class_id) -> bool:
        if isinstance(class_id, bytes):
            class_id = class_id.hex()
        return class_id in self._index

    def network(self, i: int) -> MultiplexNetwork:
        return MultiplexNetwork.from_masks(self.n, self.masks[i].tolist(), self.layer_kinds)

    @cached_property
    def classes(self) -> list[IsoClass]:
        return [
            IsoClass(self.network(i), int(self.orbit_sizes[i]), bytes.fromhex(cid))
            for i, cid in enumerate(self.class_ids)
        ]

    def total_labeled(self) -> int:
        return int(sum(int(x) for x in self.orbit_sizes))

    def edge_counts(self) -> np.ndarray:
        return np.vectorize(popcount, otypes=[np.int64])(self.masks) if len(self) else self.masks.copy()


def _finalize(n: int, kinds: Sequence[str], masks: np.ndarray, orbits: np.ndarray, metadata: dict) -> IsoClassCatalog:
    """Canonicalize, deduplicate and order raw class representatives."""
    kinds = tuple(kinds)
    masks = np.asarray(masks, dtype=np.int64).reshape(-1, len(kinds))
    orbits = np.asarray(orbits, dtype=np.int64).reshape(-1)
    if len(masks):
        canon = canonical_masks_batch(n, masks)
        uniq, first = np.unique(canon, axis=0, return_index=True)
        dup = len(canon) - len(uniq)
        if dup:
            log.warning("dropped %d duplicate classes during deduplication", dup)
        canon, orbits = canon[first], orbits[first]
        counts = np.vectorize(popcount, otypes=[np.int64])(canon)
        order = np.lexsort(tuple(canon[:, i] for i in range(len(kinds) - 1, -1, -1))
                           + tuple(counts[:, i] for i in range(len(kinds) - 1, -1, -1)))
        masks, orbits = canon[order], orbits[order]
    return IsoClassCatalog(n, kinds, masks, orbits, metadata)


def _basis_entries(n: int, basis: Sequence[IsoClass]):
    sym = _sym(n)
    out = []
    for cls in basis:
        if len(cls.representative) != 1 or cls.representative.n != n:
            raise ShapeMismatchError("basis classes must be single layers on n vertices")
        g = cls.representative.layers[0]
        aut = [sym.to_index(p) for p in automorphisms(g)]
        out.append((g.mask, g.kind, aut))
    return out


def _join_subtree(n: int, head, rest_sets) -> tuple[list[tuple[int, ...]], list[int]]:
    """All classes whose first layer is ``head``, joining the remaining sets in order."""
    sym = _sym(n)
    fact = math.factorial(n)
    frontier = [((head[0],), head[2])]
    for basis in rest_sets:
        grown = []
        for masks, aut in frontier:
            aut_set_len = len(aut)
            for m2, _kind, aut2 in basis:
                aut2_set = set(aut2)
                for members in _pairing_closure(sym, aut, aut2):
                    rep = members[0]
                    perm = sym.perms[rep]
                    new_masks = tuple(relabel_mask(n, m, perm) for m in masks) + (m2,)
                    shared = [g for g in sym.conjugate(rep, aut) if g in aut2_set]
                    assert len(shared) * len(members) == aut_set_len * len(aut2)
                    grown.append((new_masks, shared))
        frontier = grown
    masks = [m for m, _ in frontier]
    orbits = [fact // len(a) for _, a in frontier]
    return masks, orbits


def _join_worker(args):
    n, head, rest_sets = args
    return _join_subtree(n, head, rest_sets)


def enumerate_multiplex(basis_sets: Sequence[Sequence[IsoClass]], n: int, threads: int = 1,
                        seed: int = 0) -> IsoClassCatalog:
    """Catalog of multiplex classes over all tuples of basis classes.

    Layers are joined left to right: the running stack is flattened and paired
    with each class of the next basis set.
    """
    _check_n(n, 1)
    if not 1 <= len(basis_sets) <= MAX_LAYERS:
        raise ValueError(f"between 1 and {MAX_LAYERS} layers are supported")
    if any(len(b) == 0 for b in basis_sets):
        raise ValueError("every basis set needs at least one class")
    t0 = time.perf_counter()
    entries = [_basis_entries(n, b) for b in basis_sets]
    kinds = tuple(b[0].representative.layer_kinds[0] for b in basis_sets)
    for b, k in zip(basis_sets, kinds):
        if any(c.representative.layer_kinds[0] != k for c in b):
            raise ValueError("each basis set must hold a single layer kind")
    jobs = [(n, head, entries[1:]) for head in entries[0]]
    masks, orbits = [], []
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_join_worker, jobs))
    else:
        results = [_join_worker(j) for j in jobs]
    for m, o in results:
        masks.extend(m)
        orbits.extend(o)
    meta = {"method": "automorphism-closure", "seed": seed, "generator": f"mxiso {__version__}",
            "timestamp": time.time(), "elapsed_s": round(time.perf_counter() - t0, 3)}
    return _finalize(n, kinds, np.array(masks, dtype=np.int64).reshape(-1, len(kinds)), orbits, meta)


def enumerate_catalog(n: int, layer_kinds: Sequence[str], threads: int = 1, seed: int = 0) -> IsoClassCatalog:
    """Convenience wrapper: full basis sets for each requested layer kind."""
    bases = {k: enumerate_basis(n, k) for k in set(layer_kinds)}
    return enumerate_multiplex([bases[k] for k in layer_kinds], n, threads=threads, seed=seed)


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def _labeled_members(cls: IsoClass) -> list[LabeledGraph]:
    """Every labeled copy of a basis class, by relabeling under all of S_n."""
    g = cls.representative.layers[0]
    seen = {}
    for perm in _sym(g.n).perms:
        h = g.relabel(perm)
        seen.setdefault(h.mask, h)
    return list(seen.values())


def brute_force_multiplex(basis_sets: Sequence[Sequence[IsoClass]], n: int,
                          max_labeled: int = 300_000) -> IsoClassCatalog:
    """Naive catalog: list every labeled layer tuple and group by isomorphism tests."""
    _check_n(n, 1)
    per_layer = []
    for basis in basis_sets:
        members = []
        for cls in basis:
            members.extend(_labeled_members(cls))
        per_layer.append(members)
    total = math.prod(len(m) for m in per_layer)
    if total > max_labeled:
        raise CostGuardError(f"{total} labeled networks exceeds the oracle budget of {max_labeled}")
    kinds = tuple(b[0].representative.layer_kinds[0] for b in basis_sets)
    buckets: dict[tuple, list[list]] = {}
    for layers in product(*per_layer):
        degs = [lay.degrees() for lay in layers]
        inv = tuple(sorted(tuple(d[v] for d in degs) for v in range(n)))
        key = (tuple(lay.num_edges for lay in layers), inv)
        groups = buckets.setdefault(key, [])
        for grp in groups:
            if is_isomorphic(grp[0], layers):
                grp[1] += 1
                break
        else:
            groups.append([layers, 1])
    reps, orbits = [], []
    for groups in buckets.values():
        for layers, count in groups:
            reps.append([lay.mask for lay in layers])
            orbits.append(count)
    meta = {"method": "brute-force", "generator": f"mxiso {__version__}", "timestamp": time.time()}
    return _finalize(n, kinds, np.array(reps, dtype=np.int64).reshape(-1, len(kinds)), orbits, meta)


def catalog_from_pairings(first: IsoClass, second: IsoClass) -> IsoClassCatalog:
    """Two-layer catalog built straight from :func:`combine_layers`."""
    a, b = first.representative, second.representative
    classes = combine_layers(a, b)
    masks = [c.network.masks for c in classes]
    orbits = [c.orbit_size for c in classes]
    kinds = a.layer_kinds + b.layer_kinds
    meta = {"method": "pairing-closure", "generator": f"mxiso {__version__}"}
    return _finalize(a.n, kinds, np.array(masks, dtype=np.int64).reshape(-1, len(kinds)), orbits, meta)


def same_classes(a: IsoClassCatalog, b: IsoClassCatalog) -> bool:
    return (a.n == b.n and a.layer_kinds == b.layer_kinds and a.masks.shape == b.masks.shape
            and bool(np.array_equal(a.masks, b.masks)) and bool(np.array_equal(a.orbit_sizes, b.orbit_sizes)))


def basis_pairs(n: int, kind_pairs: Sequence[tuple[str, str]] | None = None) -> list[tuple[IsoClass, IsoClass]]:
    """Every ordered pair of basis classes for the given layer-kind pairs (default: all four)."""
    if kind_pairs is None:
        kind_pairs = list(product((PAIRWISE, COLLECTIVE), repeat=2))
    bases = {k: enumerate_basis(n, k) for k in (PAIRWISE, COLLECTIVE)}
    return [(x, y) for k1, k2 in kind_pairs for x in bases[k1] for y in bases[k2]]


def oracle_mismatches(pairs: Iterable[tuple[IsoClass, IsoClass]]) -> list[tuple[IsoClass, IsoClass]]:
    """Pairs where the pairing closure or the fast join disagrees with the brute-force oracle."""
    bad = []
    for x, y in pairs:
        n = x.representative.n
        oracle = brute_force_multiplex([[x], [y]], n)
        if not (same_classes(catalog_from_pairings(x, y), oracle)
                and same_classes(enumerate_multiplex([[x], [y]], n), oracle)):
            bad.append((x, y))
    return bad


# ---------------------------------------------------------------------------
# complement expansion
# ---------------------------------------------------------------------------

def expand_complements(catalog: IsoClassCatalog) -> IsoClassCatalog:
    """Add every class obtained by complementing any subset of pairwise layers.

    Complementing a layer keeps its automorphisms, so orbit sizes carry over.
    """
    n = catalog.n
    fm = full_mask(n)
    pw = [i for i, k in enumerate(catalog.layer_kinds) if k == PAIRWISE]
    rows, orbits = [], []
    for flips in product((False, True), repeat=len(pw)):
        m = catalog.masks.copy()
        for i, flip in zip(pw, flips):
            if flip:
                m[:, i] = fm ^ m[:, i]
        rows.append(m)
        orbits.append(catalog.orbit_sizes)
    meta = dict(catalog.metadata, method=catalog.metadata.get("method", "") + "+complements")
    return _finalize(n, catalog.layer_kinds, np.concatenate(rows), np.concatenate(orbits), meta)


# ---------------------------------------------------------------------------
# catalog file
# ---------------------------------------------------------------------------

def format_catalog(catalog: IsoClassCatalog) -> str:
    meta = catalog.metadata
    lines = [
        f"# n={catalog.n}",
        f"# layer_kinds={','.join(catalog.layer_kinds)}",
        f"# generator={meta.get('generator', f'mxiso {__version__}')}",
        f"# seed={meta.get('seed', 0)}",
        f"# method={meta.get('method', '')}",
        f"# classes={len(catalog)}",
    ]
    n = catalog.n
    for cid, orbit, row in zip(catalog.class_ids, catalog.orbit_sizes.tolist(), catalog.masks.tolist()):
        layers = ";".join(format_edges(LabeledGraph.from_mask(n, m).edges) for m in row)
        lines.append(f"class={cid} orbit={orbit} layers=[{layers}]")
    return "\n".join(lines) + "\n"


def write_catalog(catalog: IsoClassCatalog, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_catalog(catalog))


def read_catalog(path) -> IsoClassCatalog:
    header: dict[str, str] = {}
    masks, orbits = [], []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key] = val
                continue
            fields = dict(tok.split("=", 1) for tok in line.split(" ", 2))
            body = fields["layers"]
            if not (body.startswith("[") and body.endswith("]")):
                raise ValueError(f"bad layers field in {line!r}")
            n = int(header["n"])
            row = []
            for part in body[1:-1].split(";"):
                row.append(LabeledGraph(n, frozenset(parse_edges(part))).mask)
            masks.append(row)
            orbits.append(int(fields["orbit"]))
            if encode_masks(n, row).hex() != fields["class"]:
                raise ValueError(f"class id does not match layers in {line!r}")
    kinds = tuple(header["layer_kinds"].split(","))
    for k in kinds:
        if k not in KINDS:
            raise ValueError(f"unknown layer kind {k!r} in catalog header")
    meta = {"generator": header.get("generator", ""), "seed": int(header.get("seed", 0)),
            "method": header.get("method", "")}
    cat = IsoClassCatalog(int(header["n"]), kinds, np.array(masks, dtype=np.int64).reshape(-1, len(kinds)),
                          orbits, meta)
    if "classes" in header and int(header["classes"]) != len(cat):
        raise ValueError("catalog header class count does not match body")
    return cat
