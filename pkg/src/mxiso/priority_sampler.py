"""Error-proportional sampling of training examples.

Each *unit* (an example, or a whole isomorphism class in ``per_class`` mode)
keeps an exponentially weighted moving average of the model error observed on
it.  An example is drawn with probability proportional to its unit's weight,
``ewma + floor``; in ``per_class`` mode a class's weight is split equally among
its examples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Sequence

import numpy as np

PER_EXAMPLE = "per_example"
PER_CLASS = "per_class"
MODES = (PER_EXAMPLE, PER_CLASS)

# floor as a fraction of the mean unit weight when none is given
DEFAULT_FLOOR_FRACTION = 1e-3


class UnknownUnitError(KeyError):
    pass


class EmptySamplerError(ValueError):
    pass


@dataclass
class SamplerState:
    unit_ids: list
    ewma_error: list[float | None]
    alpha: float = 0.3
    floor: float | None = None
    mode: str = PER_EXAMPLE

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.floor is not None and self.floor < 0:
            raise ValueError("floor must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if len(self.unit_ids) != len(self.ewma_error):
            raise ValueError("one ewma value per unit is required")
        if len(set(self.unit_ids)) != len(self.unit_ids):
            raise ValueError("unit ids must be unique")
        if any(e is not None and e < 0 for e in self.ewma_error):
            raise ValueError("ewma errors must be non-negative")

    def unit_weights(self) -> np.ndarray:
        """``ewma + floor`` per unit; unvisited units stand in at the largest value seen."""
        seen = [e for e in self.ewma_error if e is not None]
        stand_in = max(seen) if seen else 1.0
        ewma = np.array([stand_in if e is None else e for e in self.ewma_error], dtype=np.float64)
        floor = self.floor
        if floor is None:
            floor = DEFAULT_FLOOR_FRACTION * float(ewma.mean()) if len(ewma) else 0.0
        return ewma + floor


class PrioritySampler:
    """Sampler over ``example_ids``; ``class_of`` maps each example to its class in per_class mode."""

    def __init__(self, example_ids: Sequence[Hashable], mode: str = PER_EXAMPLE,
                 class_of: Sequence[Hashable] | dict | None = None, alpha: float = 0.3,
                 floor: float | None = None):
        self.example_ids = list(example_ids)
        if len(set(self.example_ids)) != len(self.example_ids):
            raise ValueError("example ids must be unique")
        if mode == PER_CLASS:
            if class_of is None:
                raise ValueError("per_class mode needs a class for every example")
            if isinstance(class_of, dict):
                classes = [class_of[e] for e in self.example_ids]
            else:
                classes = list(class_of)
            if len(classes) != len(self.example_ids):
                raise ValueError("one class per example is required")
            units = list(dict.fromkeys(classes))
        else:
            classes = list(self.example_ids)
            units = list(self.example_ids)
        self._example_unit = classes
        self._example_index = {e: i for i, e in enumerate(self.example_ids)}
        self._unit_index = {u: i for i, u in enumerate(units)}
        self.state = SamplerState(units, [None] * len(units), alpha, floor, mode)

    @classmethod
    def from_state(cls, state: SamplerState, example_ids: Sequence[Hashable] | None = None,
                   class_of: Sequence[Hashable] | None = None) -> "PrioritySampler":
        if state.mode == PER_CLASS:
            if example_ids is None or class_of is None:
                raise ValueError("per_class state needs the example ids and their classes")
            s = cls(example_ids, PER_CLASS, class_of, state.alpha, state.floor)
            if set(s.state.unit_ids) - set(state.unit_ids):
                raise ValueError("examples reference classes missing from the state")
            saved = dict(zip(state.unit_ids, state.ewma_error))
            s.state.ewma_error = [saved[u] for u in s.state.unit_ids]
        else:
            s = cls(state.unit_ids, PER_EXAMPLE, None, state.alpha, state.floor)
            s.state.ewma_error = list(state.ewma_error)
        return s

    def unit_of(self, example_id) -> Hashable:
        try:
            return self._example_unit[self._example_index[example_id]]
        except KeyError:
            raise UnknownUnitError(example_id) from None

    def update(self, unit_id, observed_error: float) -> None:
        """Fold one observed error into a unit's average.

        In per_class mode an example id is also accepted and resolved to its
        class.
        """
        if observed_error < 0 or not np.isfinite(observed_error):
            raise ValueError("observed error must be finite and non-negative")
        idx = self._unit_index.get(unit_id)
        if idx is None and self.state.mode == PER_CLASS and unit_id in self._example_index:
            idx = self._unit_index[self.unit_of(unit_id)]
        if idx is None:
            raise UnknownUnitError(unit_id)
        prev = self.state.ewma_error[idx]
        a = self.state.alpha
        # first observation on an unvisited unit starts the average from it
        self.state.ewma_error[idx] = float(observed_error) if prev is None else \
            a * float(observed_error) + (1 - a) * prev

    def probabilities(self) -> np.ndarray:
        """Per-example sampling probabilities, aligned with ``example_ids``."""
        if not self.example_ids:
            raise EmptySamplerError("sampler has no examples")
        w_unit = self.state.unit_weights()
        unit_idx = np.array([self._unit_index[u] for u in self._example_unit])
        w = w_unit[unit_idx]
        if self.state.mode == PER_CLASS:
            members = np.bincount(unit_idx, minlength=len(w_unit))
            w = w / members[unit_idx]
        total = w.sum()
        if total <= 0:
            return np.full(len(w), 1.0 / len(w))
        return w / total

    def probability_of(self, example_id) -> float:
        return float(self.probabilities()[self._example_index[example_id]])

    def sample_batch(self, batch_size: int, rng_seed=None) -> list:
        """I.i.d. draws with replacement."""
        if batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        p = self.probabilities()
        rng = np.random.default_rng(rng_seed)
        idx = rng.choice(len(p), size=batch_size, replace=True, p=p)
        return [self.example_ids[i] for i in idx.tolist()]

    # checkpointing

    def to_json(self) -> str:
        s = self.state
        doc = {"unit_ids": s.unit_ids, "ewma_error": s.ewma_error, "alpha": s.alpha, "floor": s.floor,
               "mode": s.mode}
        return json.dumps(doc, indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @staticmethod
    def load_state(path) -> SamplerState:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return SamplerState(doc["unit_ids"], doc["ewma_error"], doc["alpha"], doc["floor"], doc["mode"])
