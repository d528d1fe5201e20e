"""Isomorphism-aware train/val/test benchmarks.

A :class:`DatasetManifest` fully determines a dataset given the class
catalog: which classes go to each split, which initial-condition seeds are
used, and how samples are oriented and shuffled.  Builders first produce
split *plans* (networks, class ids, init seeds); trajectories are simulated
from the plans when the dataset is materialized or written.

Initial-condition seeds are allocated in blocks, ``(seed << 32) | (block << 24)
| i``, so splits that share a block literally reuse the same initial
conditions and splits on different blocks never do.
"""

from __future__ import annotations

import json
import logging
import math
import zlib
from dataclasses import asdict, dataclass, field
from itertools import permutations
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .dynamics_sim import (
    POSITION,
    SimConfig,
    check_interactions,
    default_interactions,
    sample_initial_conditions,
    simulate_batch,
)
from .graph_core import (
    COLLECTIVE,
    PAIRWISE,
    _perm_pair_map,
    canonical_masks_batch,
    encode_masks,
    layer_nbytes,
    mask_bits,
    mask_bytes,
    mask_from_bytes,
    num_pairs,
)
from .multiplex_enum import IsoClassCatalog, enumerate_catalog
from .sampling_analysis import er_sample_masks

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")

ORIGINAL_ER = "original_er"
REJECTION_ER = "rejection_er"
CON_N = "con_n"
ISO_N = "iso_n"
CON_ISO = "con_iso"
SUB_CON_N = "sub_con_n"
EXTRAPOLATION = "extrapolation"
KINDS = (ORIGINAL_ER, REJECTION_ER, CON_N, ISO_N, CON_ISO, SUB_CON_N, EXTRAPOLATION)

EXTRAP_HIGH, EXTRAP_LOW, INTERPOLATE = "extrap_high", "extrap_low", "interpolate"
EXTRAPOLATION_VARIANTS = {
    "XCH": ("charge", EXTRAP_HIGH),
    "XCL": ("charge", EXTRAP_LOW),
    "IC": ("charge", INTERPOLATE),
    "XSH": ("spring", EXTRAP_HIGH),
    "XSL": ("spring", EXTRAP_LOW),
    "IS": ("spring", INTERPOLATE),
}

TRAJ_MAGIC = b"MXTRJ1"
NET_MAGIC = b"MXNET1"


class DatasetError(ValueError):
    pass


class RejectionBudgetError(DatasetError):
    pass


class InsufficientClassesError(DatasetError):
    pass


class EmptyBandError(DatasetError):
    pass


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

@dataclass
class DatasetManifest:
    name: str
    kind: str
    n: int = 5
    layer_kinds: tuple[str, ...] = (PAIRWISE, COLLECTIVE)
    interactions: tuple[str, ...] | None = None
    seed: int = 0
    sizes: dict = field(default_factory=lambda: {"train": 50000, "val": 10000, "test": 10000})
    n_init: dict = field(default_factory=lambda: {"train": 111, "val": 22, "test": 22})
    init_blocks: dict = field(default_factory=lambda: {"train": 0, "val": 1, "test": 2})
    class_split: dict | None = None
    axis: str | None = None
    mode: str | None = None
    p_edge: float = 0.5
    p_node: float = 0.5
    rejection_budget: int = 100
    pos_std: float = 0.5
    vel_norm: float = 0.5
    sim: SimConfig = field(default_factory=SimConfig)
    generator_version: str = __version__
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.layer_kinds = tuple(self.layer_kinds)
        if isinstance(self.sim, dict):
            self.sim = SimConfig.from_dict(self.sim)
        if self.interactions is None:
            self.interactions = default_interactions(self.layer_kinds)
        self.interactions = check_interactions(self.interactions, self.layer_kinds)
        self.validate()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise DatasetError(f"unknown dataset kind {self.kind!r}")
        if self.schema_version != SCHEMA_VERSION:
            raise DatasetError(f"unsupported manifest schema {self.schema_version}")
        if not 0 <= self.seed < 2 ** 31:
            raise DatasetError("seed must be in [0, 2^31)")
        for name in ("sizes", "n_init", "init_blocks"):
            d = getattr(self, name)
            if set(d) != set(SPLITS):
                raise DatasetError(f"{name} needs exactly the keys {SPLITS}")
            if any(int(v) < 0 for v in d.values()):
                raise DatasetError(f"{name} values must be non-negative")
        if any(not 0 <= int(b) < 128 for b in self.init_blocks.values()):
            raise DatasetError("init blocks must be in [0, 128)")
        if max(int(v) for v in self.n_init.values()) >= 2 ** 24 or max(int(v) for v in self.sizes.values()) >= 2 ** 24:
            raise DatasetError("split sizes must be below 2^24")
        if self.class_split is not None and set(self.class_split) != set(SPLITS):
            raise DatasetError(f"class_split needs exactly the keys {SPLITS}")
        if self.kind == EXTRAPOLATION:
            if self.axis not in ("charge", "spring"):
                raise DatasetError("extrapolation needs axis 'charge' or 'spring'")
            if self.mode not in (EXTRAP_HIGH, EXTRAP_LOW, INTERPOLATE):
                raise DatasetError("extrapolation needs a valid mode")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["layer_kinds"] = list(self.layer_kinds)
        d["interactions"] = list(self.interactions)
        d["sim"] = self.sim.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise DatasetError(f"unknown manifest fields {sorted(extra)}")
        if "interactions" in d and d["interactions"] is not None:
            d["interactions"] = tuple(d["interactions"])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def preset(name: str, **overrides) -> DatasetManifest:
    """Named presets: original-er, rejection-er, con-<n>, iso-<n>, con-iso,
    sub-con-<n>, and the extrapolation variants XCH/XCL/IC/XSH/XSL/IS."""
    key = name.lower()
    kw: dict = {}
    if key == "original-er":
        kw = dict(kind=ORIGINAL_ER)
    elif key == "rejection-er":
        kw = dict(kind=REJECTION_ER)
    elif key.startswith("con-iso"):
        kw = dict(kind=CON_ISO, n_init={s: 155 for s in SPLITS}, class_split={"train": 324, "val": 65, "test": 65})
    elif key.startswith("sub-con-"):
        k = int(key.rsplit("-", 1)[1])
        kw = dict(kind=SUB_CON_N, n_init={"train": k, "val": 22, "test": 22},
                  class_split={"train": 324, "val": 0, "test": 0})
    elif key.startswith("con-"):
        k = int(key.rsplit("-", 1)[1])
        kw = dict(kind=CON_N, n_init={"train": k, "val": 22, "test": 22})
    elif key.startswith("iso-"):
        k = int(key.rsplit("-", 1)[1])
        kw = dict(kind=ISO_N, n_init={s: k for s in SPLITS}, init_blocks={s: 0 for s in SPLITS},
                  class_split={"train": 324, "val": 65, "test": 65})
    elif name.upper() in EXTRAPOLATION_VARIANTS:
        axis, mode = EXTRAPOLATION_VARIANTS[name.upper()]
        kw = dict(kind=EXTRAPOLATION, axis=axis, mode=mode, n_init={"train": 50, "val": 22, "test": 22})
    else:
        raise DatasetError(f"unknown preset {name!r}")
    kw.update(overrides)
    return DatasetManifest(name=kw.pop("name", name), **kw)


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

@dataclass
class DatasetSplit:
    name: str
    n: int
    layer_kinds: tuple[str, ...]
    masks: np.ndarray  # (S, L) labeled layer bitsets
    class_ids: list[str]
    init_seeds: np.ndarray  # (S,)
    trajectories: np.ndarray | None = None  # (S, T, N, 2, 2) float32

    def __len__(self) -> int:
        return len(self.masks)

    def class_set(self) -> set[str]:
        return set(self.class_ids)

    def init_seed_set(self) -> set[int]:
        return set(self.init_seeds.tolist())


@dataclass
class Dataset:
    manifest: DatasetManifest
    splits: dict[str, DatasetSplit]
    report: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> DatasetSplit:
        return self.splits[name]

    def counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.splits.items()}


def _tag(*parts) -> list[int]:
    return [zlib.crc32(str(p).encode()) for p in parts]


def _rng(manifest: DatasetManifest, *parts) -> np.random.Generator:
    return np.random.default_rng([manifest.seed] + _tag(*parts))


def init_seed_block(seed: int, block: int, count: int) -> np.ndarray:
    return (np.int64(seed) << 32) | (np.int64(block) << 24) | np.arange(count, dtype=np.int64)


def class_ids_for(n: int, masks: np.ndarray) -> list[str]:
    canon = canonical_masks_batch(n, masks)
    return [encode_masks(n, row).hex() for row in canon.tolist()]


def relabel_batch(n: int, masks: np.ndarray, perms: np.ndarray) -> np.ndarray:
    """Relabel sample ``s`` by ``perms[s]`` (vertex v -> perms[s, v])."""
    p = num_pairs(n)
    weights = np.int64(1) << (p - 1 - _perm_pair_map(n, perms))  # (S, P)
    return np.sum(mask_bits(n, masks) * weights[:, None, :], axis=-1)


def _random_perms(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    return np.argsort(rng.random((count, n)), axis=1)


def _class_split(manifest: DatasetManifest, catalog: IsoClassCatalog, split: str, class_idx: Sequence[int],
                 seeds: np.ndarray) -> DatasetSplit:
    """Every listed class crossed with every init seed, oriented and shuffled."""
    class_idx = np.asarray(class_idx, dtype=np.int64)
    reps = np.repeat(catalog.masks[class_idx], len(seeds), axis=0)
    cls = np.repeat(class_idx, len(seeds))
    init = np.tile(seeds, len(class_idx))
    rng = _rng(manifest, "orient", split)
    masks = relabel_batch(catalog.n, reps, _random_perms(rng, len(reps), catalog.n)) if len(reps) else reps
    order = _rng(manifest, "shuffle", split).permutation(len(reps))
    ids = catalog.class_ids
    return DatasetSplit(split, catalog.n, catalog.layer_kinds, masks[order], [ids[i] for i in cls[order]],
                        init[order])


def _split_seeds(manifest: DatasetManifest, split: str) -> np.ndarray:
    return init_seed_block(manifest.seed, int(manifest.init_blocks[split]), int(manifest.n_init[split]))


def _require_catalog(manifest: DatasetManifest, catalog: IsoClassCatalog | None) -> IsoClassCatalog:
    if catalog is None:
        catalog = enumerate_catalog(manifest.n, manifest.layer_kinds)
    if catalog.n != manifest.n or catalog.layer_kinds != manifest.layer_kinds:
        raise DatasetError("catalog does not match the manifest's n / layer kinds")
    return catalog


def _er_split(manifest: DatasetManifest, split: str, size: int) -> DatasetSplit:
    rng = _rng(manifest, "er", split)
    masks = er_sample_masks(manifest.n, manifest.layer_kinds, size, rng, manifest.p_edge, manifest.p_node)
    seeds = init_seed_block(manifest.seed, int(manifest.init_blocks[split]), size)
    return DatasetSplit(split, manifest.n, manifest.layer_kinds, masks, class_ids_for(manifest.n, masks), seeds)


def build_original_er(manifest: DatasetManifest, catalog: IsoClassCatalog | None = None) -> Dataset:
    """Independent Original-ER networks per split, one random initial condition each."""
    splits = {s: _er_split(manifest, s, int(manifest.sizes[s])) for s in SPLITS}
    report = {"overlap": leak_report({k: v.class_set() for k, v in splits.items()})}
    if catalog is not None:
        report["coverage"] = {s: len(v.class_set()) / len(catalog) for s, v in splits.items()}
    return Dataset(manifest, splits, report)


def build_rejection_er(manifest: DatasetManifest, catalog: IsoClassCatalog | None = None) -> Dataset:
    """Original-ER train; val/test redraw any sample whose class occurs in train."""
    train = _er_split(manifest, "train", int(manifest.sizes["train"]))
    banned = train.class_set()
    splits = {"train": train}
    report: dict = {"train_classes": len(banned)}
    if catalog is not None:
        report["train_coverage"] = len(banned) / len(catalog)
        if len(banned) >= len(catalog):
            raise RejectionBudgetError("train covers every class; no sample can be accepted for val/test")
    n = manifest.n
    for split in ("val", "test"):
        target = int(manifest.sizes[split])
        budget = manifest.rejection_budget * max(target, 1)
        rng = _rng(manifest, "er", split)
        kept_masks, kept_ids, drawn, examined = [], [], 0, 0
        while len(kept_ids) < target:
            if drawn >= budget:
                raise RejectionBudgetError(
                    f"{split}: accepted {len(kept_ids)}/{target} after {drawn} draws; "
                    f"train covers {len(banned)} classes")
            batch = min(max(2 * (target - len(kept_ids)), 256), budget - drawn)
            masks = er_sample_masks(n, manifest.layer_kinds, batch, rng, manifest.p_edge, manifest.p_node)
            drawn += batch
            for row, cid in zip(masks, class_ids_for(n, masks)):
                if len(kept_ids) == target:
                    break
                examined += 1
                if cid not in banned:
                    kept_masks.append(row)
                    kept_ids.append(cid)
        seeds = init_seed_block(manifest.seed, int(manifest.init_blocks[split]), target)
        masks = np.array(kept_masks, dtype=np.int64).reshape(-1, len(manifest.layer_kinds))
        splits[split] = DatasetSplit(split, n, manifest.layer_kinds, masks, kept_ids, seeds)
        report[f"{split}_rejection_rate"] = 1 - target / examined if examined else 0.0
    report["overlap"] = leak_report({k: v.class_set() for k, v in splits.items()})
    return Dataset(manifest, splits, report)


def build_con_n(manifest: DatasetManifest, catalog: IsoClassCatalog | None = None,
                n_init: int | None = None) -> Dataset:
    """All classes in every split; one shared init set per split."""
    catalog = _require_catalog(manifest, catalog)
    if n_init is not None:
        manifest.n_init = dict(manifest.n_init, train=int(n_init))
    every = np.arange(len(catalog))
    splits = {s: _class_split(manifest, catalog, s, every, _split_seeds(manifest, s)) for s in SPLITS}
    return Dataset(manifest, splits, {"classes": {s: len(catalog) for s in SPLITS}})


def partition_classes(manifest: DatasetManifest, catalog: IsoClassCatalog, counts: dict) -> dict[str, np.ndarray]:
    need = sum(int(counts[s]) for s in SPLITS)
    if need > len(catalog):
        raise InsufficientClassesError(f"{need} classes requested, catalog has {len(catalog)}")
    order = _rng(manifest, "partition").permutation(len(catalog))
    out, start = {}, 0
    for s in SPLITS:
        out[s] = np.sort(order[start:start + int(counts[s])])
        start += int(counts[s])
    return out


def build_iso_n(manifest: DatasetManifest, catalog: IsoClassCatalog | None = None,
                n_init: int | None = None, split_counts: dict | None = None) -> Dataset:
    """Disjoint class partition across splits with a shared initial-condition set."""
    catalog = _require_catalog(manifest, catalog)
    if n_init is not None:
        manifest.n_init = {s: int(n_init) for s in SPLITS}
    counts = split_counts or manifest.class_split or {"train": 324, "val": 65, "test": 65}
    parts = partition_classes(manifest, catalog, counts)
    splits = {s: _class_split(manifest, catalog, s, parts[s], _split_seeds(manifest, s)) for s in SPLITS}
    report = {"classes": {s: len(parts[s]) for s in SPLITS},
              "overlap": leak_report({k: v.class_set() for k, v in splits.items()})}
    return Dataset(manifest, splits, report)


def build_con_iso(manifest: DatasetManifest, catalog: IsoClassCatalog | None = None) -> Dataset:
    """Iso partition, but each split draws its own initial conditions."""
    blocks = manifest.init_blocks
    if len({int(b) for b in blocks.values()}) != len(SPLITS):
        raise DatasetError("con_iso needs a distinct init block per split")
    return build_iso_n(manifest, catalog)


def build_sub_con_n(manifest: DatasetManifest, catalog: IsoClassCatalog | None = None,
                    n_init: int | None = None) -> Dataset:
    """Con-n with the training set restricted to a random subset of classes."""
    catalog = _require_catalog(manifest, catalog)
    keep = int((manifest.class_split or {}).get("train", 324))
    if keep > len(catalog):
        raise InsufficientClassesError(f"{keep} train classes requested, catalog has {len(catalog)}")
    con = build_con_n(manifest, catalog, n_init)
    chosen = np.sort(_rng(manifest, "subcon").permutation(len(catalog))[:keep])
    chosen_ids = {catalog.class_ids[i] for i in chosen}
    tr = con.splits["train"]
    sel = np.array([cid in chosen_ids for cid in tr.class_ids], dtype=bool)
    con.splits["train"] = DatasetSplit("train", tr.n, tr.layer_kinds, tr.masks[sel],
                                       [c for c, s in zip(tr.class_ids, sel) if s], tr.init_seeds[sel])
    con.report["classes"] = {"train": keep, "val": len(catalog), "test": len(catalog)}
    return con


def class_statistic(catalog: IsoClassCatalog, axis: str) -> np.ndarray:
    """Charged-node count of the first collective layer, or edge count of the first pairwise layer."""
    kind = COLLECTIVE if axis == "charge" else PAIRWISE
    try:
        lay = catalog.layer_kinds.index(kind)
    except ValueError:
        raise DatasetError(f"catalog has no {kind} layer for the {axis} axis") from None
    edges = catalog.edge_counts()[:, lay]
    if axis == "spring":
        return edges
    return np.array([0 if e == 0 else int(round((1 + math.isqrt(1 + 8 * e)) / 2)) for e in edges.tolist()])


def extrapolation_bands(stat: np.ndarray, mode: str) -> tuple[np.ndarray, np.ndarray, dict]:
    """Boolean (train, test) class masks plus the thresholds used.

    Median split with ties in the low band; interpolation trains on the outer
    terciles and tests on the middle one.
    """
    if mode in (EXTRAP_HIGH, EXTRAP_LOW):
        med = float(np.median(stat))
        low, high = stat <= med, stat > med
        info = {"median": med}
        train, test = (low, high) if mode == EXTRAP_HIGH else (high, low)
    elif mode == INTERPOLATE:
        t1, t2 = (float(x) for x in np.quantile(stat, [1 / 3, 2 / 3]))
        middle = (stat > t1) & (stat <= t2)
        train, test = ~middle, middle
        info = {"lower_tercile": t1, "upper_tercile": t2}
    else:
        raise DatasetError(f"unknown extrapolation mode {mode!r}")
    if not train.any() or not test.any():
        raise EmptyBandError(f"{mode} leaves an empty band")
    return train, test, info


def build_extrapolation(manifest: DatasetManifest, catalog: IsoClassCatalog | None = None,
                        axis: str | None = None, mode: str | None = None) -> Dataset:
    catalog = _require_catalog(manifest, catalog)
    axis = axis or manifest.axis
    mode = mode or manifest.mode
    stat = class_statistic(catalog, axis)
    train, test, info = extrapolation_bands(stat, mode)
    values, counts = np.unique(stat, return_counts=True)
    info["histogram"] = {int(v): int(c) for v, c in zip(values, counts)}
    log.info("%s/%s band split: %s", axis, mode, info)
    idx = {"train": np.nonzero(train)[0], "val": np.nonzero(test)[0], "test": np.nonzero(test)[0]}
    splits = {s: _class_split(manifest, catalog, s, idx[s], _split_seeds(manifest, s)) for s in SPLITS}
    report = {"bands": info, "classes": {s: len(idx[s]) for s in SPLITS},
              "overlap": leak_report({k: v.class_set() for k, v in splits.items()})}
    return Dataset(manifest, splits, report)


_BUILDERS = {
    ORIGINAL_ER: build_original_er,
    REJECTION_ER: build_rejection_er,
    CON_N: build_con_n,
    ISO_N: build_iso_n,
    CON_ISO: build_con_iso,
    SUB_CON_N: build_sub_con_n,
    EXTRAPOLATION: build_extrapolation,
}


def plan_dataset(manifest: DatasetManifest, catalog: IsoClassCatalog | None = None) -> Dataset:
    """Networks, class ids and init seeds for every split, without trajectories."""
    return _BUILDERS[manifest.kind](manifest, catalog)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def initial_conditions_for(manifest: DatasetManifest, seeds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pos = np.empty((len(seeds), manifest.n, 2))
    vel = np.empty_like(pos)
    cache: dict[int, tuple] = {}
    for s, seed in enumerate(seeds.tolist()):
        if seed not in cache:
            ic = sample_initial_conditions(manifest.n, seed, manifest.pos_std, manifest.vel_norm)
            cache[seed] = (ic.positions, ic.velocities)
        pos[s], vel[s] = cache[seed]
    return pos, vel


def _simulate_block(args):
    manifest, masks, seeds = args
    pos, vel = initial_conditions_for(manifest, seeds)
    frames = simulate_batch(manifest.n, masks, pos, vel, manifest.interactions, manifest.sim)
    return frames.astype(np.float32)


def simulate_chunks(manifest: DatasetManifest, split: DatasetSplit, chunk: int = 2048, threads: int = 1):
    """Yield float32 trajectory blocks for consecutive samples of a split, in order."""
    jobs = ((manifest, split.masks[i:i + chunk], split.init_seeds[i:i + chunk])
            for i in range(0, len(split), chunk))
    if threads <= 1:
        yield from map(_simulate_block, jobs)
        return
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(_simulate_block, jobs)


def simulate_split(manifest: DatasetManifest, split: DatasetSplit, chunk: int = 2048,
                   threads: int = 1) -> DatasetSplit:
    blocks = list(simulate_chunks(manifest, split, chunk, threads))
    t, n = manifest.sim.n_frames, manifest.n
    split.trajectories = np.concatenate(blocks) if blocks else np.zeros((0, t, n, 2, 2), np.float32)
    return split


def build_dataset(manifest: DatasetManifest, catalog: IsoClassCatalog | None = None,
                  simulate: bool = True, threads: int = 1) -> Dataset:
    ds = plan_dataset(manifest, catalog)
    if simulate:
        for split in ds.splits.values():
            simulate_split(manifest, split, threads=threads)
    return ds


# ---------------------------------------------------------------------------
# binary formats
# ---------------------------------------------------------------------------

def _traj_header(shape: Sequence[int]) -> bytes:
    return TRAJ_MAGIC + np.asarray(shape, dtype="<u4").tobytes()


def write_trajectories(path, frames: np.ndarray) -> None:
    frames = np.asarray(frames, dtype="<f4")
    if frames.ndim != 5 or frames.shape[3:] != (2, 2):
        raise ValueError("trajectories must be (S, T, N, 2, 2)")
    with open(path, "wb") as fh:
        fh.write(_traj_header(frames.shape))
        fh.write(frames.tobytes(order="C"))


def read_trajectories(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:6] != TRAJ_MAGIC:
        raise ValueError(f"{path}: not a trajectory file")
    shape = tuple(int(x) for x in np.frombuffer(data, dtype="<u4", count=5, offset=6))
    body = np.frombuffer(data, dtype="<f4", offset=26)
    if body.size != math.prod(shape):
        raise ValueError(f"{path}: expected {math.prod(shape)} values, found {body.size}")
    return body.reshape(shape)


def write_networks(path, n: int, masks: np.ndarray) -> None:
    masks = np.asarray(masks, dtype=np.int64)
    s, l = masks.shape
    with open(path, "wb") as fh:
        fh.write(NET_MAGIC + np.array([s, l, n], dtype="<u4").tobytes())
        fh.write(b"".join(mask_bytes(n, m) for m in masks.reshape(-1).tolist()))


def read_networks(path) -> tuple[int, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:6] != NET_MAGIC:
        raise ValueError(f"{path}: not a network file")
    s, l, n = (int(x) for x in np.frombuffer(data, dtype="<u4", count=3, offset=6))
    w = layer_nbytes(n)
    body = data[18:]
    if len(body) != s * l * w:
        raise ValueError(f"{path}: truncated network records")
    masks = [mask_from_bytes(n, body[i:i + w]) for i in range(0, len(body), w)]
    return n, np.array(masks, dtype=np.int64).reshape(s, l)


def write_dataset(ds: Dataset, out_dir, chunk: int = 2048, threads: int = 1,
                  trajectories: bool = True) -> Path:
    """Write manifest.json and one directory per split.

    Splits without in-memory trajectories are simulated chunk by chunk while
    writing.  ``trajectories=False`` writes only networks and class ids.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(ds.manifest.to_json(), encoding="utf-8")
    m = ds.manifest
    for name, split in ds.splits.items():
        d = out / name
        d.mkdir(exist_ok=True)
        write_networks(d / "networks.bin", split.n, split.masks)
        (d / "classes.txt").write_text("".join(c + "\n" for c in split.class_ids), encoding="utf-8")
        if not trajectories:
            continue
        shape = (len(split), m.sim.n_frames, m.n, 2, 2)
        with open(d / "trajectories.bin", "wb") as fh:
            fh.write(_traj_header(shape))
            if split.trajectories is not None:
                fh.write(np.asarray(split.trajectories, dtype="<f4").tobytes())
            else:
                for block in simulate_chunks(m, split, chunk, threads):
                    fh.write(block.astype("<f4").tobytes())
    return out


def read_split_classes(path) -> list[str]:
    p = Path(path)
    if p.is_dir():
        p = p / "classes.txt"
    return [line.strip() for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]


def discover_splits(path) -> dict[str, Path]:
    """Split directories under a dataset directory, or the directory itself if it is a split."""
    p = Path(path)
    if (p / "classes.txt").exists():
        return {p.name: p}
    dirs = sorted(p.iterdir(), key=lambda d: (SPLITS.index(d.name) if d.name in SPLITS else len(SPLITS), d.name)) \
        if p.is_dir() else []
    found = {d.name: d for d in dirs if (d / "classes.txt").exists()}
    if not found:
        raise DatasetError(f"{path}: no split directories with classes.txt")
    return found


# ---------------------------------------------------------------------------
# leakage and metrics
# ---------------------------------------------------------------------------

def leak_report(class_sets: dict[str, set]) -> dict[str, int]:
    """Number of shared class ids for every pair of splits."""
    names = list(class_sets)
    out = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            out[f"{a}/{b}"] = len(class_sets[a] & class_sets[b])
    return out


def check_stored_classes(split: DatasetSplit) -> int:
    """Count samples whose recomputed class id differs from the stored one."""
    recomputed = class_ids_for(split.n, split.masks) if len(split) else []
    return sum(a != b for a, b in zip(recomputed, split.class_ids))


def mse_k(pred, truth, k: int) -> float:
    """Mean squared position error over the first ``k`` frames (velocities ignored).

    Arrays are (..., T, N, 2, 2) trajectories.
    """
    pred, truth = np.asarray(pred, dtype=np.float64), np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    if not 1 <= k <= pred.shape[-4]:
        raise ValueError(f"k={k} outside 1..{pred.shape[-4]}")
    d = pred[..., :k, :, :, POSITION] - truth[..., :k, :, :, POSITION]
    return float(np.mean(d * d))


def stationary_baseline_mse(trajectories, n_observed: int = 50, k: int = 20) -> float:
    """MSE of predicting every particle stays at its last observed position."""
    traj = np.asarray(trajectories, dtype=np.float64)
    if traj.shape[-4] < n_observed + k:
        raise ValueError("trajectories too short for the requested horizon")
    truth = traj[..., n_observed:n_observed + k, :, :, :]
    pred = np.broadcast_to(traj[..., n_observed - 1:n_observed, :, :, :], truth.shape)
    return mse_k(pred, truth, k)


@dataclass
class MetricReport:
    mse_k: float | None = None
    edge_accuracy: float | None = None
    per_layer: list[float] = field(default_factory=list)
    layer_order: tuple[int, ...] = ()


def _layer_bits(x, n: int | None) -> np.ndarray:
    """Accept (..., L, P) bit arrays, (..., L) mask arrays or lists of LabeledGraph."""
    if isinstance(x, (list, tuple)) and x and hasattr(x[0], "mask"):
        n = x[0].n
        return mask_bits(n, np.array([g.mask for g in x]))
    arr = np.asarray(x)
    if n is not None and (arr.ndim == 0 or arr.shape[-1] != num_pairs(n)):
        return mask_bits(n, arr)
    return arr.astype(np.int64)


def edge_accuracy(pred_layers, true_layers, allow_layer_matching: bool = False,
                  layer_kinds: Sequence[str] | None = None, n: int | None = None) -> MetricReport:
    """Fraction of (pair, layer) slots predicted correctly.

    With ``allow_layer_matching`` the predicted layers may be reordered among
    layers of the same kind to maximize the overall score.
    """
    if isinstance(true_layers, (list, tuple)) and true_layers and hasattr(true_layers[0], "kind"):
        layer_kinds = layer_kinds or tuple(g.kind for g in true_layers)
    pb, tb = _layer_bits(pred_layers, n), _layer_bits(true_layers, n)
    if pb.shape != tb.shape:
        raise ValueError(f"shape mismatch {pb.shape} vs {tb.shape}")
    n_layers = tb.shape[-2]
    kinds = tuple(layer_kinds) if layer_kinds is not None else (None,) * n_layers
    if len(kinds) != n_layers:
        raise ValueError("one kind per layer is required")
    orders = [tuple(range(n_layers))]
    if allow_layer_matching:
        orders = [o for o in permutations(range(n_layers)) if all(kinds[i] == kinds[j] for i, j in enumerate(o))]
    best = None
    for order in orders:
        correct = (pb[..., list(order), :] == tb).reshape(-1, n_layers, tb.shape[-1])
        per_layer = correct.mean(axis=(0, 2))
        overall = float(correct.mean())
        if best is None or overall > best.edge_accuracy:
            best = MetricReport(None, overall, [float(x) for x in per_layer], order)
    return best
