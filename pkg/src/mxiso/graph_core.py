"""Small labeled graphs, permutations, automorphism groups and canonical forms.

Edge sets are stored as integer bitsets over the ``n choose 2`` vertex pairs in
row-major lexicographic order ``(0,1), (0,2), ..., (0,n-1), (1,2), ...``.  Pair
index ``b`` lives at bit position ``P - 1 - b`` (``P`` = number of pairs), so
comparing two masks as integers compares their bit strings lexicographically.
That order is also the on-disk order for canonical forms and ``networks.bin``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations, permutations, product
from typing import Iterable, Sequence

import numpy as np

MAX_N = 8

PAIRWISE = "pairwise"
COLLECTIVE = "collective"
KINDS = (PAIRWISE, COLLECTIVE)

_KIND_CODES = {"p": PAIRWISE, "c": COLLECTIVE}


class SizeLimitError(ValueError):
    """Raised when a graph is too large for exhaustive permutation search."""


class ShapeMismatchError(ValueError):
    """Raised when graph stacks disagree on vertex or layer count."""


# ---------------------------------------------------------------------------
# pair tables
# ---------------------------------------------------------------------------

def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


@lru_cache(maxsize=None)
def pair_list(n: int) -> tuple[tuple[int, int], ...]:
    return tuple(combinations(range(n), 2))


@lru_cache(maxsize=None)
def pair_index_matrix(n: int) -> np.ndarray:
    """``idx[i, j]`` is the pair index of ``{i, j}`` (-1 on the diagonal)."""
    idx = -np.ones((n, n), dtype=np.int64)
    for b, (i, j) in enumerate(pair_list(n)):
        idx[i, j] = idx[j, i] = b
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=None)
def _bit_shifts(n: int) -> np.ndarray:
    p = num_pairs(n)
    return (p - 1 - np.arange(p)).astype(np.int64)


@lru_cache(maxsize=None)
def incidence(n: int) -> np.ndarray:
    """(P, n) pair/vertex incidence matrix, used to get degrees from bits."""
    inc = np.zeros((num_pairs(n), n), dtype=np.int64)
    for b, (i, j) in enumerate(pair_list(n)):
        inc[b, i] = inc[b, j] = 1
    return inc


def mask_from_edges(n: int, edges: Iterable[tuple[int, int]]) -> int:
    idx = pair_index_matrix(n)
    p = num_pairs(n)
    mask = 0
    for i, j in edges:
        mask |= 1 << (p - 1 - int(idx[i, j]))
    return mask


def edges_from_mask(n: int, mask: int) -> tuple[tuple[int, int], ...]:
    p = num_pairs(n)
    return tuple(pr for b, pr in enumerate(pair_list(n)) if (mask >> (p - 1 - b)) & 1)


def mask_bits(n: int, masks) -> np.ndarray:
    """Expand integer masks (any shape) into a trailing axis of P bits."""
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[..., None] >> _bit_shifts(n)) & 1).astype(np.int64)


def bits_to_masks(n: int, bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    return (bits << _bit_shifts(n)).sum(axis=-1)


def full_mask(n: int) -> int:
    return (1 << num_pairs(n)) - 1


def popcount(x: int) -> int:
    return bin(x).count("1")


def mask_bytes(n: int, mask: int) -> bytes:
    """Pack one layer's pair bits MSB-first, zero padded to whole bytes."""
    p = num_pairs(n)
    nbytes = (p + 7) // 8
    pad = nbytes * 8 - p
    return (int(mask) << pad).to_bytes(nbytes, "big")


def mask_from_bytes(n: int, data: bytes) -> int:
    p = num_pairs(n)
    pad = len(data) * 8 - p
    return int.from_bytes(data, "big") >> pad


def layer_nbytes(n: int) -> int:
    return (num_pairs(n) + 7) // 8


# ---------------------------------------------------------------------------
# permutations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Permutation:
    """A bijection on ``0..n-1``; vertex ``v`` goes to ``mapping[v]``."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(x) for x in self.mapping)
        if sorted(m) != list(range(len(m))):
            raise ValueError(f"not a permutation: {self.mapping!r}")
        object.__setattr__(self, "mapping", m)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.mapping)

    def __call__(self, v: int) -> int:
        return self.mapping[v]

    def __mul__(self, other: "Permutation") -> "Permutation":
        return self.compose(other)

    def compose(self, other: "Permutation") -> "Permutation":
        """``self ∘ other``: apply ``other`` first."""
        if other.n != self.n:
            raise ShapeMismatchError("permutations act on different sizes")
        return Permutation(tuple(self.mapping[v] for v in other.mapping))

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for v, w in enumerate(self.mapping):
            inv[w] = v
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(v == w for v, w in enumerate(self.mapping))

    def __repr__(self) -> str:
        return f"Permutation({self.mapping})"


@dataclass(frozen=True)
class AutomorphismGroup:
    graph_n: int
    elements: tuple[Permutation, ...]

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, perm: Permutation) -> bool:
        return perm in self.as_set()

    @property
    def size(self) -> int:
        return len(self.elements)

    def as_set(self) -> frozenset[Permutation]:
        return frozenset(self.elements)

    def conjugate(self, by: Permutation) -> "AutomorphismGroup":
        """The group ``by ∘ g ∘ by⁻¹``, i.e. this group seen after relabeling by ``by``."""
        inv = by.inverse()
        return AutomorphismGroup(self.graph_n, _sorted_perms(by * g * inv for g in self.elements))

    def intersection(self, other: "AutomorphismGroup") -> "AutomorphismGroup":
        keep = self.as_set() & other.as_set()
        return AutomorphismGroup(self.graph_n, _sorted_perms(keep))


def _sorted_perms(perms: Iterable[Permutation]) -> tuple[Permutation, ...]:
    return tuple(sorted(set(perms), key=lambda p: p.mapping))


# ---------------------------------------------------------------------------
# graphs
# ---------------------------------------------------------------------------

def _normalize_edges(n: int, edges: Iterable) -> frozenset[tuple[int, int]]:
    out = set()
    for e in edges:
        i, j = (int(x) for x in e)
        if i == j:
            raise ValueError(f"self-loop at vertex {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge {i}-{j} outside 0..{n - 1}")
        pr = (i, j) if i < j else (j, i)
        out.add(pr)
    return frozenset(out)


@dataclass(frozen=True)
class LabeledGraph:
    """Simple undirected graph on vertices ``0..n-1``.

    A ``collective`` graph must be a clique on its charged vertices with all
    other vertices isolated.
    """

    n: int
    edges: frozenset[tuple[int, int]] = frozenset()
    kind: str = PAIRWISE

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        if self.kind not in KINDS:
            raise ValueError(f"unknown graph kind {self.kind!r}")
        object.__setattr__(self, "edges", _normalize_edges(self.n, self.edges))
        if self.kind == COLLECTIVE:
            charged = self.charged
            want = set(combinations(sorted(charged), 2))
            if set(self.edges) != want:
                raise ValueError("collective layer must be a clique on its charged vertices")

    @classmethod
    def from_mask(cls, n: int, mask: int, kind: str = PAIRWISE) -> "LabeledGraph":
        return cls(n, frozenset(edges_from_mask(n, int(mask))), kind)

    @classmethod
    def clique(cls, n: int, vertices: Iterable[int], kind: str = COLLECTIVE) -> "LabeledGraph":
        vs = sorted(set(vertices))
        return cls(n, frozenset(combinations(vs, 2)), kind)

    @classmethod
    def empty(cls, n: int, kind: str = PAIRWISE) -> "LabeledGraph":
        return cls(n, frozenset(), kind)

    @classmethod
    def complete(cls, n: int, kind: str = PAIRWISE) -> "LabeledGraph":
        return cls(n, frozenset(pair_list(n)), kind)

    @cached_property
    def mask(self) -> int:
        return mask_from_edges(self.n, self.edges)

    @property
    def charged(self) -> frozenset[int]:
        """Vertices touched by an edge (the charged set for collective layers)."""
        return frozenset(v for e in self.edges for v in e)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> tuple[int, ...]:
        deg = [0] * self.n
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return tuple(deg)

    def relabel(self, perm: Permutation | Sequence[int]) -> "LabeledGraph":
        m = perm.mapping if isinstance(perm, Permutation) else tuple(perm)
        if len(m) != self.n:
            raise ShapeMismatchError("permutation size does not match graph")
        return LabeledGraph(self.n, frozenset((m[i], m[j]) for i, j in self.edges), self.kind)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def to_text(self) -> str:
        return format_graph(self)


# ---------------------------------------------------------------------------
# text format: ``n=<int> kind=<p|c> edges=<i-j,i-j,...>``
# ---------------------------------------------------------------------------

def format_edges(edges: Iterable[tuple[int, int]]) -> str:
    return ",".join(f"{i}-{j}" for i, j in sorted(edges))


def parse_edges(text: str) -> list[tuple[int, int]]:
    text = text.strip()
    if not text:
        return []
    out = []
    for tok in text.split(","):
        a, _, b = tok.strip().partition("-")
        if not b:
            raise ValueError(f"bad edge token {tok!r}")
        out.append((int(a), int(b)))
    return out


def format_graph(g: LabeledGraph) -> str:
    return f"n={g.n} kind={g.kind[0]} edges={format_edges(g.edges)}"


def parse_graph(line: str) -> LabeledGraph:
    fields = {}
    for tok in line.split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise ValueError(f"bad graph token {tok!r}")
        fields[key] = val
    try:
        n = int(fields["n"])
        kind = _KIND_CODES[fields.get("kind", "p")]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"cannot parse graph line {line!r}") from exc
    return LabeledGraph(n, frozenset(parse_edges(fields.get("edges", ""))), kind)


# ---------------------------------------------------------------------------
# permutation search
# ---------------------------------------------------------------------------

def _as_layers(g) -> tuple[LabeledGraph, ...]:
    if isinstance(g, LabeledGraph):
        return (g,)
    layers = getattr(g, "layers", g)
    layers = tuple(layers)
    if not layers:
        raise ShapeMismatchError("need at least one layer")
    n = layers[0].n
    if any(lay.n != n for lay in layers):
        raise ShapeMismatchError("layers have different vertex counts")
    return layers


def _check_size(n: int) -> None:
    if n > MAX_N:
        raise SizeLimitError(f"n={n} exceeds the exhaustive-search limit of {MAX_N}")


def _vertex_invariants(layers: Sequence[LabeledGraph]) -> list[tuple[int, ...]]:
    degs = [lay.degrees() for lay in layers]
    return [tuple(d[v] for d in degs) for v in range(layers[0].n)]


def _perm_pair_map(n: int, perms: np.ndarray) -> np.ndarray:
    """(K, P) array: where each pair lands under each permutation."""
    idx = pair_index_matrix(n)
    pl = np.array(pair_list(n), dtype=np.int64).reshape(-1, 2)
    return idx[perms[:, pl[:, 0]], perms[:, pl[:, 1]]]


def relabel_weights(n: int, perms: np.ndarray) -> np.ndarray:
    """(P, K) matrix so that ``bits @ W`` gives relabeled masks for all K perms."""
    perms = np.asarray(perms, dtype=np.int64).reshape(-1, n)
    pm = _perm_pair_map(n, perms)
    p = num_pairs(n)
    return (np.int64(1) << (p - 1 - pm)).T.copy()


def relabel_mask(n: int, mask: int, perm: Sequence[int]) -> int:
    p = num_pairs(n)
    idx = pair_index_matrix(n)
    out = 0
    for b, (i, j) in enumerate(pair_list(n)):
        if (mask >> (p - 1 - b)) & 1:
            out |= 1 << (p - 1 - int(idx[perm[i], perm[j]]))
    return out


def _block_permutations(groups_src: list[list[int]], groups_dst: list[list[int]], n: int) -> np.ndarray:
    """All bijections sending each source group onto the matching destination group."""
    per_group = [list(permutations(dst)) for dst in groups_dst]
    total = math.prod(len(x) for x in per_group)
    out = np.empty((total, n), dtype=np.int64)
    for r, choice in enumerate(product(*per_group)):
        for src, dst in zip(groups_src, choice):
            out[r, src] = dst
    return out


def _group_by_invariant(inv: list[tuple[int, ...]]) -> dict[tuple[int, ...], list[int]]:
    groups: dict[tuple[int, ...], list[int]] = {}
    for v, key in enumerate(inv):
        groups.setdefault(key, []).append(v)
    return groups


def automorphisms(g) -> AutomorphismGroup:
    """All vertex permutations fixing every layer of ``g`` (a graph or a layer stack).

    Only degree-preserving candidates are tried, which is exact: any
    automorphism maps a vertex to one with the same per-layer degrees.
    """
    layers = _as_layers(g)
    n = layers[0].n
    _check_size(n)
    groups = list(_group_by_invariant(_vertex_invariants(layers)).values())
    cand = _block_permutations(groups, groups, n)
    masks = np.array([lay.mask for lay in layers], dtype=np.int64)
    relabeled = mask_bits(n, masks) @ relabel_weights(n, cand)  # (L, K)
    keep = np.all(relabeled == masks[:, None], axis=0)
    elems = [Permutation(tuple(row)) for row in cand[keep].tolist()]
    return AutomorphismGroup(n, _sorted_perms(elems))


def is_isomorphic(a, b) -> bool:
    """True iff one permutation maps every layer of ``a`` onto the same layer of ``b``."""
    la, lb = _as_layers(a), _as_layers(b)
    if len(la) != len(lb) or la[0].n != lb[0].n:
        raise ShapeMismatchError("stacks differ in layer count or vertex count")
    n = la[0].n
    _check_size(n)
    if any(x.num_edges != y.num_edges for x, y in zip(la, lb)):
        return False
    inv_a, inv_b = _vertex_invariants(la), _vertex_invariants(lb)
    if sorted(inv_a) != sorted(inv_b):
        return False
    ga, gb = _group_by_invariant(inv_a), _group_by_invariant(inv_b)
    keys = sorted(ga)
    cand = _block_permutations([ga[k] for k in keys], [gb[k] for k in keys], n)
    ma = np.array([x.mask for x in la], dtype=np.int64)
    mb = np.array([y.mask for y in lb], dtype=np.int64)
    relabeled = mask_bits(n, ma) @ relabel_weights(n, cand)
    return bool(np.any(np.all(relabeled == mb[:, None], axis=0)))


def complement(g: LabeledGraph) -> LabeledGraph:
    if g.kind != PAIRWISE:
        raise ValueError("complements are only defined here for pairwise layers")
    return LabeledGraph(g.n, frozenset(pair_list(g.n)) - g.edges, PAIRWISE)


# ---------------------------------------------------------------------------
# canonical forms
# ---------------------------------------------------------------------------
# The canonical key of a layer stack is the lexicographically smallest tuple of
# relabeled layer masks over all relabelings that list vertices in
# non-decreasing order of their per-layer degree tuple.  That candidate set is
# carried along by any relabeling, so the minimum is a class invariant.

def _lexmin_rows(keys: np.ndarray) -> tuple[int, ...]:
    """Lexicographic minimum over columns of an (L, K) array."""
    alive = np.ones(keys.shape[1], dtype=bool)
    out = []
    for row in keys:
        best = row[alive].min()
        out.append(int(best))
        alive &= row == best
    return tuple(out)


def canonical_masks(n: int, masks: Sequence[int]) -> tuple[int, ...]:
    """Canonical layer masks for one stack given as integer masks."""
    _check_size(n)
    masks = np.asarray(masks, dtype=np.int64).reshape(-1)
    bits = mask_bits(n, masks)  # (L, P)
    degs = bits @ incidence(n)  # (L, n)
    inv = [tuple(int(x) for x in degs[:, v]) for v in range(n)]
    groups = _group_by_invariant(inv)
    src, dst, start = [], [], 0
    for key in sorted(groups):
        src.append(groups[key])
        dst.append(list(range(start, start + len(groups[key]))))
        start += len(groups[key])
    cand = _block_permutations(src, dst, n)
    return _lexmin_rows(bits @ relabel_weights(n, cand))


@lru_cache(maxsize=None)
def _all_perms(n: int) -> np.ndarray:
    arr = np.array(list(permutations(range(n))), dtype=np.int64).reshape(-1, n)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def _all_perm_tables(n: int):
    perms = _all_perms(n)
    inv = np.argsort(perms, axis=1)
    return perms, inv, relabel_weights(n, perms)


def canonical_masks_batch(n: int, masks, chunk: int | None = None) -> np.ndarray:
    """Vectorized :func:`canonical_masks` for a (B, L) array of stacks.

    Uses every permutation of ``n`` with the degree-order filter, so it
    returns exactly what the per-stack routine returns.
    """
    _check_size(n)
    masks = np.asarray(masks, dtype=np.int64)
    if masks.ndim == 1:
        masks = masks[:, None]
    b_total, n_layers = masks.shape
    p = num_pairs(n)
    if p * n_layers > 63 or n > 7:
        return np.array([canonical_masks(n, row) for row in masks], dtype=np.int64).reshape(b_total, n_layers)
    perms, inv_perms, weights = _all_perm_tables(n)
    k = len(perms)
    if chunk is None:
        chunk = max(1, 4_000_000 // (k * max(n, n_layers)))
    out = np.empty_like(masks)
    sentinel = np.iinfo(np.int64).max
    inc = incidence(n)
    for s in range(0, b_total, chunk):
        m = masks[s:s + chunk]
        bits = mask_bits(n, m)  # (b, L, P)
        degs = bits @ inc  # (b, L, n)
        code = np.zeros((len(m), n), dtype=np.int64)
        for lay in range(n_layers):
            code = code * n + degs[:, lay, :]
        seq = code[:, inv_perms]  # (b, K, n): invariant of the vertex placed at each new label
        valid = np.all(np.diff(seq, axis=2) >= 0, axis=2)
        rel = bits @ weights  # (b, L, K)
        key = np.zeros((len(m), k), dtype=np.int64)
        for lay in range(n_layers):
            key = (key << p) | rel[:, lay, :]
        key = np.where(valid, key, sentinel)
        best = key.min(axis=1)
        for lay in range(n_layers - 1, -1, -1):
            out[s:s + len(m), lay] = best & ((1 << p) - 1)
            best = best >> p
    return out


def encode_masks(n: int, masks: Sequence[int]) -> bytes:
    return b"".join(mask_bytes(n, int(m)) for m in masks)


def decode_masks(n: int, data: bytes) -> tuple[int, ...]:
    w = layer_nbytes(n)
    if len(data) % w:
        raise ValueError("canonical bytes length is not a whole number of layers")
    return tuple(mask_from_bytes(n, data[i:i + w]) for i in range(0, len(data), w))


def canonical_form(layers) -> bytes:
    """Class identity of a graph or layer stack as fixed-length bytes.

    Equal bytes iff the stacks are isomorphic under one common relabeling.
    """
    layers = _as_layers(layers)
    n = layers[0].n
    return encode_masks(n, canonical_masks(n, [lay.mask for lay in layers]))


def orbit_size(g) -> int:
    """Number of distinct labeled copies of ``g`` (``n! / |Aut(g)|``)."""
    layers = _as_layers(g)
    return math.factorial(layers[0].n) // automorphisms(layers).size
