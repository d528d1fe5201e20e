"""Command-line entry point: ``mxiso <subcommand> ...``.

Exit codes: 0 success, 1 validation error, 2 verification failure,
3 resource limit.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .dataset_builder import (
    DatasetError,
    DatasetManifest,
    RejectionBudgetError,
    check_stored_classes,
    DatasetSplit,
    discover_splits,
    edge_accuracy,
    mse_k,
    plan_dataset,
    preset,
    read_networks,
    read_split_classes,
    read_trajectories,
    stationary_baseline_mse,
    write_dataset,
)
from .dynamics_sim import SimConfig, SimulationError, sample_initial_conditions, simulate, trajectory_csv
from .graph_core import KINDS, SizeLimitError, parse_graph
from .multiplex_enum import (
    CostGuardError,
    MultiplexNetwork,
    basis_pairs,
    enumerate_catalog,
    oracle_mismatches,
    read_catalog,
    write_catalog,
)
from .sampling_analysis import class_probabilities, format_ratio, normalize_method, p_sweep, rank_frequency

log = logging.getLogger("mxiso")

EXIT_OK, EXIT_INVALID, EXIT_VERIFY, EXIT_RESOURCE = 0, 1, 2, 3


class VerificationFailed(Exception):
    pass


def _layer_kinds(text: str) -> tuple[str, ...]:
    kinds = tuple(k.strip() for k in text.split(",") if k.strip())
    bad = [k for k in kinds if k not in KINDS]
    if not kinds or bad:
        raise argparse.ArgumentTypeError(f"layers must be a comma list of {KINDS}, got {text!r}")
    return kinds


def _fraction(text: str) -> Fraction:
    try:
        f = Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 <= f <= 1:
        raise argparse.ArgumentTypeError("probabilities must lie in [0, 1]")
    return f


def _load_catalog(args):
    if getattr(args, "catalog", None):
        return read_catalog(args.catalog)
    if args.n is None or args.layers is None:
        raise ValueError("give --catalog or both --n and --layers")
    return enumerate_catalog(args.n, args.layers, threads=args.threads, seed=args.seed)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_enumerate(args) -> int:
    t0 = time.perf_counter()
    cat = enumerate_catalog(args.n, args.layers, threads=args.threads, seed=args.seed)
    elapsed = time.perf_counter() - t0
    if args.out:
        write_catalog(cat, args.out)
    print(f"n={args.n} layers={','.join(args.layers)} classes={len(cat)} "
          f"labeled={cat.total_labeled()} elapsed={elapsed:.2f}s")
    return EXIT_OK


def cmd_distribution(args) -> int:
    method = normalize_method(args.method)
    cat = _load_catalog(args)
    dist = class_probabilities(cat, method, args.p_edge, args.p_node)
    table = rank_frequency(dist)
    if args.out:
        Path(args.out).write_text(table.to_csv(), encoding="utf-8")
    print(f"method={method} classes={len(cat)} ranks={len(table.rows)} ratio={format_ratio(table.ratio)}")
    if args.sweep:
        for p, r in p_sweep(cat):
            print(f"p={float(p):.2f} original_er_ratio={format_ratio(r)}")
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    if bool(args.manifest) == bool(args.preset):
        raise ValueError("give exactly one of --manifest or --preset")
    manifest = DatasetManifest.load(args.manifest) if args.manifest else preset(args.preset)
    if args.seed is not None:
        manifest.seed = args.seed
        manifest.validate()
    log.info("manifest: %s", json.dumps(manifest.to_dict(), sort_keys=True))
    catalog = read_catalog(args.catalog) if args.catalog else None
    if catalog is None and manifest.kind not in ("original_er", "rejection_er"):
        catalog = enumerate_catalog(manifest.n, manifest.layer_kinds, threads=args.threads)
    if not args.plan_only and not args.out:
        raise ValueError("--out is required unless --plan-only is given")
    ds = plan_dataset(manifest, catalog)
    for key, val in ds.report.items():
        log.info("report %s: %s", key, val)
    if args.plan_only:
        print(json.dumps({"counts": ds.counts(), "report": ds.report}, sort_keys=True, default=str))
        return EXIT_OK
    out = write_dataset(ds, args.out, threads=args.threads)
    counts = " ".join(f"{k}={v}" for k, v in ds.counts().items())
    print(f"wrote {out} {counts}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    layers = tuple(parse_graph(text) for text in args.layer)
    net = MultiplexNetwork(layers)
    cfg = SimConfig(**{k: v for k, v in (("n_frames", args.n_frames), ("subsample", args.subsample),
                                          ("dt_internal", args.dt)) if v is not None})
    init = sample_initial_conditions(net.n, args.seed, args.pos_std, args.vel_norm)
    traj = simulate(net, init, cfg)
    text = trajectory_csv(traj)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"class={traj.class_id} frames={len(traj.frames)} -> {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_leak_check(args) -> int:
    sets: dict[str, set] = {}
    stored: dict[str, int] = {}
    for d in args.dirs:
        for name, path in discover_splits(d).items():
            key = name if name not in sets else f"{d}:{name}"
            ids = read_split_classes(path)
            sets[key] = set(ids)
            if args.recompute:
                n, masks = read_networks(path / "networks.bin")
                split = DatasetSplit(name, n, (), masks, ids, np.zeros(len(ids), dtype=np.int64))
                stored[key] = check_stored_classes(split)
    names = list(sets)
    train_leak = False
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            shared = len(sets[a] & sets[b])
            print(f"{a} / {b}: {shared} shared classes")
            if shared and "train" in (a.rsplit(":", 1)[-1], b.rsplit(":", 1)[-1]):
                train_leak = True
    for key, bad in stored.items():
        print(f"{key}: {bad} samples whose class id disagrees with their network")
    if any(stored.values()):
        raise VerificationFailed("stored class ids do not match recomputed canonical forms")
    if args.strict and train_leak:
        raise VerificationFailed("train shares classes with another split")
    return EXIT_OK


def _read_traj(path) -> np.ndarray:
    p = Path(path)
    if p.is_dir():
        p = p / "trajectories.bin"
    if p.suffix == ".npy":
        return np.load(p)
    return read_trajectories(p)


def cmd_metrics(args) -> int:
    done = False
    if args.pred and args.truth:
        pred, truth = _read_traj(args.pred), _read_traj(args.truth)
        print(f"mse_{args.k}={mse_k(pred, truth, args.k):.9g}")
        done = True
    elif args.truth:
        truth = _read_traj(args.truth)
        print(f"stationary_baseline_mse_{args.k}={stationary_baseline_mse(truth, args.observed, args.k):.9g}")
        done = True
    if args.pred_networks and args.truth_networks:
        n1, pm = read_networks(args.pred_networks)
        n2, tm = read_networks(args.truth_networks)
        if n1 != n2:
            raise ValueError("network files disagree on n")
        kinds = args.layers or (None,) * tm.shape[1]
        rep = edge_accuracy(pm, tm, args.match_layers, kinds, n=n1)
        per = " ".join(f"{x:.6f}" for x in rep.per_layer)
        print(f"edge_accuracy={rep.edge_accuracy:.6f} per_layer=[{per}] layer_order={list(rep.layer_order)}")
        done = True
    if not done:
        raise ValueError("nothing to compute: give --truth (and --pred) or both network files")
    return EXIT_OK


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    pairs = basis_pairs(args.n)
    if args.sample is not None and args.sample < len(pairs):
        pairs = random.Random(args.seed).sample(pairs, args.sample)
    bad = oracle_mismatches(pairs)
    status = "PASS" if not bad else "FAIL"
    print(f"{status} n={args.n} pairs={len(pairs)} mismatches={len(bad)} elapsed={time.perf_counter() - t0:.2f}s")
    if bad:
        raise VerificationFailed(f"{len(bad)} basis pairs disagree with the oracle")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mxiso", description="Multiplex isomorphism classes and benchmark datasets.")
    ap.add_argument("--version", action="version", version=f"mxiso {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--seed", type=int, default=None)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="enumerate multiplex isomorphism classes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--layers", type=_layer_kinds, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("distribution", help="class probabilities and rank-frequency table")
    p.add_argument("--catalog")
    p.add_argument("--n", type=int)
    p.add_argument("--layers", type=_layer_kinds)
    p.add_argument("--method", default="original-er")
    p.add_argument("--p-edge", type=_fraction, default=Fraction(1, 2))
    p.add_argument("--p-node", type=_fraction, default=Fraction(1, 2))
    p.add_argument("--sweep", action="store_true", help="also print the Original-ER ratio over a p sweep")
    p.add_argument("--out")
    p.set_defaults(func=cmd_distribution)

    p = sub.add_parser("gen-dataset", help="build a dataset from a manifest")
    p.add_argument("--manifest")
    p.add_argument("--preset")
    p.add_argument("--catalog")
    p.add_argument("--out")
    p.add_argument("--plan-only", action="store_true", help="report split counts without simulating")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("simulate", help="simulate one network and write a CSV trajectory")
    p.add_argument("--layer", action="append", required=True,
                   help="one layer as 'n=<n> kind=<p|c> edges=i-j,...'; repeat per layer")
    p.add_argument("--pos-std", type=float, default=0.5)
    p.add_argument("--vel-norm", type=float, default=0.5)
    p.add_argument("--n-frames", type=int)
    p.add_argument("--subsample", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("leak-check", help="report class overlaps between dataset splits")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--recompute", action="store_true", help="recompute class ids from networks.bin")
    p.add_argument("--strict", action="store_true", help="exit 2 if train shares a class with any split")
    p.set_defaults(func=cmd_leak_check)

    p = sub.add_parser("metrics", help="MSE over k frames and edge accuracy")
    p.add_argument("--pred")
    p.add_argument("--truth")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--observed", type=int, default=50, help="frames observed before the baseline horizon")
    p.add_argument("--pred-networks")
    p.add_argument("--truth-networks")
    p.add_argument("--layers", type=_layer_kinds)
    p.add_argument("--match-layers", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("verify", help="compare the pairing closure with the brute-force oracle")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--sample", type=int, help="check only this many random basis pairs")
    p.set_defaults(func=cmd_verify)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.seed is None:
        args.seed = None if args.command == "gen-dataset" else 0
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    resolved = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in vars(args).items() if k != "func"}
    log.info("mxiso %s config %s", __version__, json.dumps(resolved, sort_keys=True, default=str))
    try:
        return args.func(args)
    except VerificationFailed as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except (SizeLimitError, CostGuardError, RejectionBudgetError, MemoryError) as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, DatasetError, SimulationError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())
