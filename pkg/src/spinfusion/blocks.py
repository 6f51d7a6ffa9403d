"""Fusion blocks: apply a collection of fusion diagrams, aggregate over
index-aligned input multisets, concatenate per-diagram outputs along a new
channel axis, and mix with a learned real matrix.

All diagrams in a block share the same root spin and the same slot set, so
their outputs concatenate.  A slot may be given either a single input or a
list of inputs to aggregate over; every listed slot must have the same
length, and aggregation sums over the index-aligned tuples in ascending
order (a deterministic symmetric reduction, so reordering the tuples moves
the result only by floating-point reassociation).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .diagrams import FusionDiagram, contract, diagram_from_json, diagram_to_json
from .errors import ChannelMismatch, EmptyDiagramSet, SpinMismatch
from .irreps import Activation, IrrepVector
from .spins import Spin, dim

__all__ = [
    "AggregationKind",
    "MixingMatrix",
    "FusionBlockConfig",
    "identity_mixing",
    "uniform_mixing",
    "apply",
    "output_channel_count",
    "block_to_json",
    "block_from_json",
]


class AggregationKind(enum.Enum):
    """Symmetric aggregation over a multiset of contraction outputs."""

    SUM = "sum"


@dataclass
class MixingMatrix:
    """Real matrix acting on the channel axis only (never on m).

    ``init`` records how the weights were produced ("uniform" with ``seed``,
    or "identity"), so a config round-trips through JSON by re-initializing.
    """

    weights: np.ndarray
    trainable: bool = True
    init: str = "uniform"
    seed: int = 0

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 2:
            raise ValueError(f"mixing weights must be a matrix, got shape {self.weights.shape}")


def uniform_mixing(rows: int, cols: int, seed: int, trainable: bool = True) -> MixingMatrix:
    """Entries i.i.d. uniform in [-s, s] with s = rows**-0.5 (variance-preserving)."""
    scale = rows ** -0.5
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-scale, scale, size=(rows, cols))
    return MixingMatrix(weights, trainable=trainable, init="uniform", seed=seed)


def identity_mixing(n: int) -> MixingMatrix:
    """Fixed identity mixing (not trainable): concatenation passes through."""
    return MixingMatrix(np.eye(n), trainable=False, init="identity", seed=0)


@dataclass
class FusionBlockConfig:
    """The diagram collection, the aggregation, and the mixing stage."""

    diagrams: tuple[FusionDiagram, ...]
    aggregation: AggregationKind = AggregationKind.SUM
    mixing: MixingMatrix = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.diagrams = tuple(self.diagrams)
        if not self.diagrams:
            raise EmptyDiagramSet("a fusion block needs at least one diagram")
        roots = {d.two_J for d in self.diagrams}
        if len(roots) != 1:
            raise ValueError(f"diagrams disagree on root spin: {sorted(roots)}")
        slot_sets = {d.slots for d in self.diagrams}
        if len(slot_sets) != 1:
            raise ValueError(f"diagrams disagree on slot set: {sorted(slot_sets)}")
        if self.mixing is None:
            raise ValueError("a fusion block needs a mixing matrix")

    @property
    def two_J(self) -> int:
        return self.diagrams[0].two_J

    @property
    def slots(self) -> tuple[int, ...]:
        return self.diagrams[0].slots


def output_channel_count(cfg: FusionBlockConfig) -> int:
    """Concatenated channel count before mixing: |diagrams| x input channels."""
    return int(cfg.mixing.weights.shape[0])


def _entry_channels(entry) -> int:
    if isinstance(entry, (IrrepVector, Activation)):
        return entry.channels
    raise TypeError(f"expected IrrepVector or Activation, got {type(entry)!r}")


def apply(cfg: FusionBlockConfig, input_sets) -> IrrepVector:
    """Aggregate-concatenate-mix over the block's diagram collection.

    ``input_sets`` holds, per slot index, either one input (IrrepVector or
    multi-spin Activation) or a list of inputs to aggregate over.  Listed
    slots are index-aligned and must share a length.
    """
    slots = cfg.slots
    fixed: dict[int, object] = {}
    aggregated: dict[int, list] = {}
    for slot in slots:
        entry = input_sets[slot]
        if isinstance(entry, (list, tuple)):
            aggregated[slot] = list(entry)
        else:
            fixed[slot] = entry

    lengths = {len(v) for v in aggregated.values()}
    if len(lengths) > 1:
        raise ChannelMismatch(
            f"aggregated slots disagree on multiset size: {sorted(lengths)}"
        )
    n_agg = lengths.pop() if lengths else 0

    channel_counts = {_entry_channels(e) for e in fixed.values()}
    for members in aggregated.values():
        channel_counts.update(_entry_channels(e) for e in members)
    if len(channel_counts) > 1:
        raise ChannelMismatch(f"inputs disagree on channel count: {sorted(channel_counts)}")

    rows, cols = cfg.mixing.weights.shape
    if channel_counts:
        channels = channel_counts.pop()
    else:
        channels = rows // len(cfg.diagrams)
    expected_rows = len(cfg.diagrams) * channels
    if rows != expected_rows:
        raise ChannelMismatch(
            f"mixing expects {rows} concatenated channels, inputs give {expected_rows}"
        )

    out_dim = dim(cfg.two_J)
    parts = []
    for d in cfg.diagrams:
        if aggregated:
            total = np.zeros((out_dim, channels), dtype=complex)
            for i in range(n_agg):
                per_slot = dict(fixed)
                for slot, members in aggregated.items():
                    per_slot[slot] = members[i]
                total = total + contract(d, per_slot).data
            parts.append(total)
        else:
            parts.append(contract(d, fixed).data)
    concatenated = np.concatenate(parts, axis=1)
    mixed = concatenated @ cfg.mixing.weights
    return IrrepVector(Spin(cfg.two_J), mixed)


def block_to_json(cfg: FusionBlockConfig) -> str:
    """Serialize diagrams, aggregation kind, and the mixing recipe (shape,
    init kind, seed, trainable flag) — weights re-initialize on load."""
    payload = {
        "diagrams": [json.loads(diagram_to_json(d)) for d in cfg.diagrams],
        "aggregation": cfg.aggregation.value,
        "mixing": {
            "rows": int(cfg.mixing.weights.shape[0]),
            "cols": int(cfg.mixing.weights.shape[1]),
            "init": cfg.mixing.init,
            "seed": int(cfg.mixing.seed),
            "trainable": bool(cfg.mixing.trainable),
        },
    }
    return json.dumps(payload, indent=2)


def block_from_json(text: str) -> FusionBlockConfig:
    payload = json.loads(text)
    diagrams = tuple(diagram_from_json(json.dumps(d)) for d in payload["diagrams"])
    mix = payload["mixing"]
    if mix["init"] == "identity":
        if mix["rows"] != mix["cols"]:
            raise ValueError("identity mixing must be square")
        mixing = identity_mixing(int(mix["rows"]))
    elif mix["init"] == "uniform":
        mixing = uniform_mixing(
            int(mix["rows"]), int(mix["cols"]), int(mix["seed"]),
            trainable=bool(mix.get("trainable", True)),
        )
    else:
        raise ValueError(f"unknown mixing init {mix['init']!r}")
    return FusionBlockConfig(
        diagrams=diagrams,
        aggregation=AggregationKind(payload.get("aggregation", "sum")),
        mixing=mixing,
    )
