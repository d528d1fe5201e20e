"""2-D particle dynamics driven by a multiplex interaction network.

Each layer carries one interaction: ideal springs and finite springs act along
the layer's edges; the charge force acts between every pair of charged
particles (the clique of a collective layer).  Masses are 1 and the integrator
is velocity Verlet.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .graph_core import COLLECTIVE, PAIRWISE, mask_bits, pair_list

IDEAL_SPRING = "ideal_spring"
FINITE_SPRING = "finite_spring"
CHARGE = "charge"
INTERACTIONS = {IDEAL_SPRING: PAIRWISE, FINITE_SPRING: PAIRWISE, CHARGE: COLLECTIVE}

POSITION, VELOCITY = 0, 1


class SimulationError(FloatingPointError):
    """Raised when a trajectory produces non-finite values."""


@dataclass(frozen=True)
class SimConfig:
    dt_internal: float = 0.001
    subsample: int = 100
    n_frames: int = 70
    spring_k: float = 0.1
    fspring_k: float = 0.1
    fspring_len: float = 1.0
    charge_strength: float = 1.0
    softening: float = 0.1
    box_half_width: float | None = None
    dims: int = 2

    def __post_init__(self):
        for name in ("dt_internal", "spring_k", "fspring_k", "fspring_len", "charge_strength", "softening"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.subsample < 1 or self.n_frames < 1:
            raise ValueError("subsample and n_frames must be at least 1")
        if self.box_half_width is not None and not self.box_half_width > 0:
            raise ValueError("box_half_width must be positive")
        if self.dims != 2:
            raise ValueError("only 2-D dynamics are supported")

    @property
    def frame_dt(self) -> float:
        return self.dt_internal * self.subsample

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(**d)


def default_interactions(layer_kinds: Sequence[str]) -> tuple[str, ...]:
    """First pairwise layer is ideal springs, later ones finite springs; collective is charge."""
    out = []
    seen_pairwise = False
    for kind in layer_kinds:
        if kind == COLLECTIVE:
            out.append(CHARGE)
        elif kind == PAIRWISE:
            out.append(FINITE_SPRING if seen_pairwise else IDEAL_SPRING)
            seen_pairwise = True
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    return tuple(out)


def check_interactions(interactions: Sequence[str], layer_kinds: Sequence[str]) -> tuple[str, ...]:
    interactions = tuple(interactions)
    if len(interactions) != len(layer_kinds):
        raise ValueError("one interaction per layer is required")
    for inter, kind in zip(interactions, layer_kinds):
        if INTERACTIONS.get(inter) != kind:
            raise ValueError(f"interaction {inter!r} cannot drive a {kind} layer")
    return interactions


@dataclass
class InitialConditions:
    positions: np.ndarray
    velocities: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.positions.shape != self.velocities.shape or self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError("positions and velocities must both be (N, 2)")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise ValueError("initial conditions must be finite")

    @property
    def n(self) -> int:
        return len(self.positions)

    def permuted(self, perm: Sequence[int]) -> "InitialConditions":
        """Particle ``v`` becomes particle ``perm[v]``."""
        inv = np.argsort(np.asarray(perm))
        return InitialConditions(self.positions[inv], self.velocities[inv], self.seed)


@dataclass
class Trajectory:
    frames: np.ndarray  # (T, N, 2 dims, 2 channels: position, velocity)
    network_masks: tuple[int, ...] = ()
    class_id: str | None = None

    @property
    def positions(self) -> np.ndarray:
        return self.frames[..., POSITION]

    @property
    def velocities(self) -> np.ndarray:
        return self.frames[..., VELOCITY]


def sample_initial_conditions(n: int, seed: int, pos_std: float = 0.5, vel_norm: float = 0.5) -> InitialConditions:
    if n < 1:
        raise ValueError("need at least one particle")
    rng = np.random.default_rng(seed)
    pos = rng.normal(0.0, pos_std, size=(n, 2))
    vel = rng.normal(0.0, 1.0, size=(n, 2))
    norms = np.linalg.norm(vel, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    vel = vel / norms * vel_norm
    return InitialConditions(pos, vel, seed)


# ---------------------------------------------------------------------------
# forces
# ---------------------------------------------------------------------------

def adjacency_from_masks(n: int, masks) -> np.ndarray:
    """(..., L) masks -> (..., L, N, N) symmetric 0/1 float adjacency."""
    masks = np.asarray(masks, dtype=np.int64)
    bits = mask_bits(n, masks).astype(np.float64)
    adj = np.zeros(masks.shape + (n, n))
    for b, (i, j) in enumerate(pair_list(n)):
        adj[..., i, j] = adj[..., j, i] = bits[..., b]
    return adj


def _network_masks(network) -> tuple[int, ...]:
    return tuple(getattr(network, "masks", network))


def _forces_batch(pos: np.ndarray, adj: np.ndarray, interactions: Sequence[str], cfg: SimConfig) -> np.ndarray:
    """pos (S, N, 2), adj (S, L, N, N) -> forces (S, N, 2)."""
    diff = pos[:, :, None, :] - pos[:, None, :, :]  # r_i - r_j
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    safe = np.where(dist > 0, dist, 1.0)
    unit = diff / safe[..., None]
    total = np.zeros_like(pos)
    for lay, inter in enumerate(interactions):
        a = adj[:, lay]
        if inter == IDEAL_SPRING:
            f = -cfg.spring_k * diff
        elif inter == FINITE_SPRING:
            f = (-cfg.fspring_k * (dist - cfg.fspring_len))[..., None] * unit
        elif inter == CHARGE:
            r = np.maximum(dist, cfg.softening)
            f = (cfg.charge_strength / (r * r))[..., None] * unit
        else:
            raise ValueError(f"unknown interaction {inter!r}")
        total += np.sum(a[..., None] * f, axis=2)
    return total


def forces(state, network, config: SimConfig = SimConfig(), interactions: Sequence[str] | None = None) -> np.ndarray:
    """Net force on each particle, summed over the network's layers.

    ``state`` is an (N, 2) position array or :class:`InitialConditions`.
    """
    pos = state.positions if isinstance(state, InitialConditions) else np.asarray(state, dtype=np.float64)
    kinds = network.layer_kinds
    inter = check_interactions(interactions or default_interactions(kinds), kinds)
    if network.n != len(pos):
        raise ValueError("network size does not match particle count")
    adj = adjacency_from_masks(network.n, np.array(network.masks))[None]
    return _forces_batch(pos[None], adj, inter, config)[0]


def potential_energy(positions: np.ndarray, network, config: SimConfig = SimConfig(),
                     interactions: Sequence[str] | None = None) -> float:
    kinds = network.layer_kinds
    inter = check_interactions(interactions or default_interactions(kinds), kinds)
    pos = np.asarray(positions, dtype=np.float64)
    energy = 0.0
    for layer, kind in zip(network.layers, inter):
        for i, j in layer.edges:
            d = float(np.linalg.norm(pos[i] - pos[j]))
            if kind == IDEAL_SPRING:
                energy += 0.5 * config.spring_k * d * d
            elif kind == FINITE_SPRING:
                energy += 0.5 * config.fspring_k * (d - config.fspring_len) ** 2
            else:
                if d < config.softening:
                    raise ValueError("charge potential undefined inside the softening radius")
                energy += config.charge_strength / d
    return energy


def total_energy(frame: np.ndarray, network, config: SimConfig = SimConfig(),
                 interactions: Sequence[str] | None = None) -> float:
    """Kinetic plus potential energy of one (N, 2, 2) frame."""
    v = frame[..., VELOCITY]
    return 0.5 * float(np.sum(v * v)) + potential_energy(frame[..., POSITION], network, config, interactions)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def _reflect(pos: np.ndarray, vel: np.ndarray, half: float) -> None:
    over = pos > half
    pos[over] = 2 * half - pos[over]
    vel[over] = -np.abs(vel[over])
    under = pos < -half
    pos[under] = -2 * half - pos[under]
    vel[under] = np.abs(vel[under])


def simulate_batch(n: int, masks, positions, velocities, interactions: Sequence[str],
                   config: SimConfig = SimConfig()) -> np.ndarray:
    """Integrate S systems at once.

    masks (S, L), positions/velocities (S, N, 2) -> frames (S, T, N, 2, 2).
    """
    masks = np.asarray(masks, dtype=np.int64)
    pos = np.array(positions, dtype=np.float64)
    vel = np.array(velocities, dtype=np.float64)
    if pos.shape != vel.shape or pos.shape[1:] != (n, 2) or len(masks) != len(pos):
        raise ValueError("inconsistent batch shapes")
    adj = adjacency_from_masks(n, masks)
    dt = config.dt_internal
    out = np.empty((len(pos), config.n_frames, n, 2, 2))
    out[:, 0, :, :, POSITION] = pos
    out[:, 0, :, :, VELOCITY] = vel
    # overflow is detected after each frame and reported as SimulationError
    with np.errstate(over="ignore", invalid="ignore"):
        f = _forces_batch(pos, adj, interactions, config)
        for t in range(1, config.n_frames):
            for _ in range(config.subsample):
                vel += 0.5 * dt * f
                pos += dt * vel
                if config.box_half_width is not None:
                    _reflect(pos, vel, config.box_half_width)
                f = _forces_batch(pos, adj, interactions, config)
                vel += 0.5 * dt * f
            if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
                bad = np.nonzero(~np.all(np.isfinite(pos), axis=(1, 2)) | ~np.all(np.isfinite(vel), axis=(1, 2)))[0]
                raise SimulationError(f"non-finite state at frame {t} in samples {bad[:10].tolist()}")
            out[:, t, :, :, POSITION] = pos
            out[:, t, :, :, VELOCITY] = vel
    return out


def simulate(network, init: InitialConditions, config: SimConfig = SimConfig(),
             interactions: Sequence[str] | None = None) -> Trajectory:
    """Velocity-Verlet trajectory, one frame every ``config.subsample`` steps."""
    kinds = network.layer_kinds
    inter = check_interactions(interactions or default_interactions(kinds), kinds)
    if init.n != network.n:
        raise ValueError("initial conditions do not match the network size")
    frames = simulate_batch(network.n, [network.masks], init.positions[None], init.velocities[None], inter, config)
    return Trajectory(frames[0], tuple(network.masks), network.canonical_form().hex())


def trajectory_csv(traj: Trajectory) -> str:
    lines = ["frame,particle,px,py,vx,vy"]
    for t, frame in enumerate(traj.frames):
        for i, p in enumerate(frame):
            px, py, vx, vy = (repr(float(x)) for x in (p[0, 0], p[1, 0], p[0, 1], p[1, 1]))
            lines.append(f"{t},{i},{px},{py},{vx},{vy}")
    return "\n".join(lines) + "\n"
