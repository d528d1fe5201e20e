"""Class-sampling distributions of interaction-network generators.

Exact probabilities are kept as :class:`fractions.Fraction` so that tied
classes compare equal and most-to-least ratios are exact.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .graph_core import (
    COLLECTIVE,
    PAIRWISE,
    LabeledGraph,
    automorphisms,
    canonical_masks,
    canonical_masks_batch,
    num_pairs,
    pair_list,
    relabel_mask,
)
from .multiplex_enum import IsoClass, IsoClassCatalog, MultiplexNetwork

ORIGINAL_ER = "original_er"
UNIFORM_BASIS = "uniform_basis"
UNIFORM_MULTIPLEX = "uniform_multiplex"
METHODS = (ORIGINAL_ER, UNIFORM_BASIS, UNIFORM_MULTIPLEX)


def _as_fraction(p) -> Fraction:
    if isinstance(p, Fraction):
        out = p
    elif isinstance(p, float):
        out = Fraction(repr(p))
    else:
        out = Fraction(p)
    if not 0 <= out <= 1:
        raise ValueError(f"probability {p} outside [0, 1]")
    return out


def normalize_method(method: str) -> str:
    m = method.replace("-", "_").lower()
    if m not in METHODS:
        raise ValueError(f"unsupported method {method!r}")
    return m


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _clique_mask_from_nodes(n: int, charged: np.ndarray) -> np.ndarray:
    """(S, n) bool charged flags -> (S,) clique masks."""
    p = num_pairs(n)
    out = np.zeros(len(charged), dtype=np.int64)
    for b, (i, j) in enumerate(pair_list(n)):
        out |= (charged[:, i] & charged[:, j]).astype(np.int64) << (p - 1 - b)
    return out


def er_sample_masks(n: int, layer_kinds: Sequence[str], size: int, rng=None,
                    p_edge: float = 0.5, p_node: float = 0.5) -> np.ndarray:
    """Vectorized Original-ER draws as a (size, L) array of layer masks."""
    rng = np.random.default_rng(rng)
    pe, pn = float(_as_fraction(p_edge)), float(_as_fraction(p_node))
    p = num_pairs(n)
    shifts = (p - 1 - np.arange(p)).astype(np.int64)
    out = np.empty((size, len(layer_kinds)), dtype=np.int64)
    for lay, kind in enumerate(layer_kinds):
        if kind == PAIRWISE:
            bits = rng.random((size, p)) < pe
            out[:, lay] = (bits.astype(np.int64) << shifts).sum(axis=1)
        elif kind == COLLECTIVE:
            charged = rng.random((size, n)) < pn
            out[:, lay] = _clique_mask_from_nodes(n, charged)
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    return out


def er_sample_network(n: int, layer_kinds: Sequence[str], p_edge: float = 0.5, p_node: float = 0.5,
                      rng_seed=None) -> MultiplexNetwork:
    """One Original-ER network: Bernoulli edges for pairwise layers, Bernoulli charged nodes for collective ones."""
    masks = er_sample_masks(n, layer_kinds, 1, rng_seed, p_edge, p_node)[0]
    return MultiplexNetwork.from_masks(n, masks.tolist(), layer_kinds)


def random_relabel_masks(n: int, masks: Sequence[int], rng) -> tuple[int, ...]:
    perm = rng.permutation(n).tolist()
    return tuple(relabel_mask(n, int(m), perm) for m in masks)


def uniform_basis_sample(basis_sets: Sequence[Sequence[IsoClass]], rng_seed=None) -> MultiplexNetwork:
    """Uniform class per layer, then a uniform labeled member of it, independently per layer."""
    rng = np.random.default_rng(rng_seed)
    layers = []
    for basis in basis_sets:
        if not basis:
            raise ValueError("empty basis set")
        cls = basis[int(rng.integers(len(basis)))]
        g = cls.representative.layers[0]
        layers.append(g.relabel(rng.permutation(g.n).tolist()))
    return MultiplexNetwork(tuple(layers))


def uniform_multiplex_sample(catalog: IsoClassCatalog, rng_seed=None) -> MultiplexNetwork:
    """Uniform class, representative relabeled by a uniform random permutation."""
    if len(catalog) == 0:
        raise ValueError("empty catalog")
    rng = np.random.default_rng(rng_seed)
    i = int(rng.integers(len(catalog)))
    masks = random_relabel_masks(catalog.n, catalog.masks[i].tolist(), rng)
    return MultiplexNetwork.from_masks(catalog.n, masks, catalog.layer_kinds)


# ---------------------------------------------------------------------------
# exact distributions
# ---------------------------------------------------------------------------

@dataclass
class ClassDistribution:
    catalog: IsoClassCatalog
    method: str
    probs: list[Fraction]

    def __post_init__(self):
        if len(self.probs) != len(self.catalog):
            raise ValueError("one probability per class is required")

    def as_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    def total(self) -> Fraction:
        return sum(self.probs, Fraction(0))

    def ratio(self) -> Fraction:
        """Most-likely to least-likely class probability (zero-probability classes excluded)."""
        pos = [p for p in self.probs if p > 0]
        return max(pos) / min(pos)


def _layer_weight(kind: str, n: int, edges: int, pe: Fraction, pn: Fraction) -> Fraction:
    """Probability of one particular labeled layer with ``edges`` edges."""
    if kind == PAIRWISE:
        p = num_pairs(n)
        return pe ** edges * (1 - pe) ** (p - edges)
    k = _clique_size(edges)
    if k == 0:
        # no charged node or a single one both give the empty layer
        return (1 - pn) ** n + n * pn * (1 - pn) ** (n - 1)
    return pn ** k * (1 - pn) ** (n - k)


def _clique_size(edges: int) -> int:
    if edges == 0:
        return 0
    k = int(round((1 + math.isqrt(1 + 8 * edges)) / 2))
    if k * (k - 1) // 2 != edges:
        raise ValueError(f"{edges} edges is not a clique")
    return k


def layer_orbit_sizes(catalog: IsoClassCatalog) -> tuple[np.ndarray, list[int]]:
    """Per-class, per-layer orbit sizes and per-layer counts of basis classes seen."""
    n = catalog.n
    fact = math.factorial(n)
    orbit = np.empty_like(catalog.masks)
    counts = []
    for lay, kind in enumerate(catalog.layer_kinds):
        col = catalog.masks[:, lay]
        uniq, inverse = np.unique(col, return_inverse=True)
        sizes = np.array([fact // automorphisms(LabeledGraph.from_mask(n, int(m), kind)).size
                          for m in uniq.tolist()], dtype=np.int64)
        orbit[:, lay] = sizes[inverse.reshape(-1)]
        canon = canonical_masks_batch(n, uniq[:, None])[:, 0] if n <= 7 else \
            np.array([canonical_masks(n, [m])[0] for m in uniq.tolist()])
        counts.append(len(set(canon.tolist())))
    return orbit, counts


def class_probabilities(catalog: IsoClassCatalog, method: str = ORIGINAL_ER,
                        p_edge=Fraction(1, 2), p_node=Fraction(1, 2)) -> ClassDistribution:
    """Exact class probabilities induced by a generation method."""
    method = normalize_method(method)
    n = catalog.n
    if method == UNIFORM_MULTIPLEX:
        c = len(catalog)
        return ClassDistribution(catalog, method, [Fraction(1, c)] * c)
    if method == ORIGINAL_ER:
        pe, pn = _as_fraction(p_edge), _as_fraction(p_node)
        counts = catalog.edge_counts()
        cache: dict[tuple, Fraction] = {}
        probs = []
        for orbit, row in zip(catalog.orbit_sizes.tolist(), counts.tolist()):
            key = tuple(row)
            w = cache.get(key)
            if w is None:
                w = Fraction(1)
                for kind, e in zip(catalog.layer_kinds, row):
                    w *= _layer_weight(kind, n, e, pe, pn)
                cache[key] = w
            probs.append(orbit * w)
        return ClassDistribution(catalog, method, probs)
    orbit_layers, basis_counts = layer_orbit_sizes(catalog)
    denom_const = math.prod(basis_counts)
    probs = []
    for orbit, lay_orbits in zip(catalog.orbit_sizes.tolist(), orbit_layers.tolist()):
        probs.append(Fraction(orbit, denom_const * math.prod(lay_orbits)))
    return ClassDistribution(catalog, method, probs)


# ---------------------------------------------------------------------------
# rank-frequency
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankRow:
    rank: int
    probability: Fraction
    class_count: int
    class_ids: tuple[str, ...]


@dataclass
class RankFrequencyTable:
    rows: list[RankRow]

    @property
    def ratio(self) -> Fraction:
        return self.rows[0].probability / self.rows[-1].probability

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "probability", "class_count", "class_ids"])
        for r in self.rows:
            w.writerow([r.rank, repr(float(r.probability)), r.class_count, " ".join(r.class_ids)])
        return buf.getvalue()


def rank_frequency(dist: ClassDistribution) -> RankFrequencyTable:
    """Group classes by exactly equal probability, most likely first.

    Classes tied on probability share a rank; the next group's rank skips past
    them (competition ranking).
    """
    groups: dict[Fraction, list[str]] = {}
    for cid, p in zip(dist.catalog.class_ids, dist.probs):
        if p > 0:
            groups.setdefault(p, []).append(cid)
    rows = []
    rank = 1
    for p in sorted(groups, reverse=True):
        ids = tuple(sorted(groups[p]))
        rows.append(RankRow(rank, p, len(ids), ids))
        rank += len(ids)
    return RankFrequencyTable(rows)


def format_ratio(r: Fraction) -> str:
    if r.denominator == 1:
        return f"{r.numerator}:1"
    return f"{float(r):.6g}:1 ({r.numerator}/{r.denominator})"


def empirical_class_frequencies(catalog: IsoClassCatalog, masks: np.ndarray) -> np.ndarray:
    """Counts per catalog class for a (S, L) array of labeled networks."""
    canon = canonical_masks_batch(catalog.n, masks)
    index = {tuple(row): i for i, row in enumerate(catalog.masks.tolist())}
    uniq, inv, cnt = np.unique(canon, axis=0, return_inverse=True, return_counts=True)
    out = np.zeros(len(catalog), dtype=np.int64)
    for row, c in zip(uniq.tolist(), cnt.tolist()):
        out[index[tuple(row)]] += c
    return out


def p_sweep(catalog: IsoClassCatalog, values: Sequence = (Fraction(3, 10), Fraction(4, 10), Fraction(1, 2),
                                                          Fraction(6, 10), Fraction(7, 10))) -> list[tuple[Fraction, Fraction]]:
    """Original-ER most-to-least ratio for a range of symmetric Bernoulli parameters."""
    out = []
    for p in values:
        out.append((Fraction(p), class_probabilities(catalog, ORIGINAL_ER, p, p).ratio()))
    return out
