"""Equivariant energy models assembled from fusion-block layers.

A model maps a point cloud (positions + integer species) to a scalar energy:
species are embedded as spin-0 features, message-passing layers (pairwise
interaction or three-body update) refine per-atom activations, and an
invariant readout on the final spin-0 part sums per-atom energies.  Forces
are exact reverse-mode gradients of the energy with respect to positions.

The taped forward (vectorized over atoms and edges) is the trainable path;
``plain_energy`` recomputes the same number through the per-atom reference
layers for cross-checking.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .errors import ShapeMismatch
from .features import (
    edge_features,
    taped_distances,
    taped_edge_harmonics,
    taped_radial_basis,
)
from .geometry import PointCloud, build_neighborhood, edge_index
from .irreps import Activation
from .spins import Spin
from .layers import (
    InteractionParams,
    SpinSchedule,
    ThreeBodyParams,
    init_interaction_layer,
    init_three_body_layer,
    interaction_layer,
    seeded_uniform,
    taped_interaction_layer,
    taped_three_body_layer,
    three_body_forward,
)

__all__ = ["ModelConfig", "Model", "KINDS"]

KINDS = ("gated", "fused", "three_body")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; JSON round-trippable."""

    kind: str = "gated"
    n_layers: int = 1
    tau: int = 4
    j_max: int = 1
    cutoff: float = 3.0
    radial_channels: int = 8
    hidden: int = 16
    schedule_mode: str = "sparse"
    internal_spins: tuple[int, ...] = (0, 1)
    n_species: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "internal_spins", tuple(int(j) for j in self.internal_spins))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @staticmethod
    def from_json(text: str) -> "ModelConfig":
        payload = json.loads(text)
        known = {f for f in ModelConfig.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "internal_spins" in payload:
            payload["internal_spins"] = tuple(payload["internal_spins"])
        return ModelConfig(**payload)


class Model:
    """A configured model with named parameters and both forward paths."""

    def __init__(self, config: ModelConfig):
        self.config = config
        seed = config.seed
        self.embedding = seeded_uniform((config.n_species, config.tau), seed, "embed")
        self.layers: list[InteractionParams | ThreeBodyParams] = []
        spins: tuple[int, ...] = (0,)
        self.layer_input_spins: list[tuple[int, ...]] = []
        for s in range(config.n_layers):
            name = f"layer{s}"
            self.layer_input_spins.append(spins)
            if config.kind in ("gated", "fused"):
                layer = init_interaction_layer(
                    spins,
                    config.j_max,
                    config.tau,
                    config.radial_channels,
                    config.hidden,
                    fused=(config.kind == "fused"),
                    seed=seed,
                    name=name,
                )
            else:
                schedule = SpinSchedule(
                    config.schedule_mode, tuple(2 * j for j in config.internal_spins)
                )
                layer = init_three_body_layer(
                    spins,
                    config.j_max,
                    config.tau,
                    config.radial_channels,
                    schedule,
                    seed=seed,
                    name=name,
                )
            spins = layer.output_spins
            if 0 not in spins:
                raise ValueError(
                    f"layer {s} produces no spin-0 part; the readout needs one"
                )
            self.layers.append(layer)
        self.output_spins = spins
        self.readout_w = seeded_uniform((2 * config.tau, 1), seed, "readout/w")
        self.readout_b = np.zeros(1)

    # -- parameter bookkeeping ------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        """Ordered name -> array view of every trainable parameter."""
        params: dict[str, np.ndarray] = {"embed": self.embedding}
        for s, layer in enumerate(self.layers):
            name = f"layer{s}"
            if isinstance(layer, InteractionParams):
                gate = layer.gate
                params[f"{name}/gate/w_hidden"] = gate.w_hidden
                params[f"{name}/gate/b_hidden"] = gate.b_hidden
                params[f"{name}/gate/w_out"] = gate.w_out
                params[f"{name}/gate/b_out"] = gate.b_out
                for two_l, terms in layer.vertex.items():
                    for term, weights in terms.items():
                        params[f"{name}/vertex/{two_l}/{term}"] = weights
                for two_l, block in layer.fusion_blocks.items():
                    params[f"{name}/fusion_mix/{two_l}"] = block.mixing.weights
            else:
                for two_j, weights in layer.edge_embed.items():
                    params[f"{name}/edge_embed/{two_j}"] = weights
                for two_J, block in layer.blocks.items():
                    params[f"{name}/mixing/{two_J}"] = block.mixing.weights
        params["readout/w"] = self.readout_w
        params["readout/b"] = self.readout_b
        return params

    def set_parameters(self, values: dict[str, np.ndarray]) -> None:
        """Write new values into the stored parameter arrays, in place."""
        current = self.parameters()
        for name, value in values.items():
            target = current[name]
            if target.shape != np.shape(value):
                raise ShapeMismatch(
                    f"parameter {name}: expected shape {target.shape}, got {np.shape(value)}"
                )
            target[...] = value

    def parameter_count(self) -> int:
        return sum(arr.size for arr in self.parameters().values())

    def mixing_parameter_count(self) -> int:
        """Parameters in three-body final mixings (grows with the schedule)."""
        total = 0
        for layer in self.layers:
            if isinstance(layer, ThreeBodyParams):
                total += sum(blk.mixing.weights.size for blk in layer.blocks.values())
        return total

    # -- forward passes -------------------------------------------------------

    def _check_inputs(self, positions: np.ndarray, species: np.ndarray) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        species = np.asarray(species, dtype=int)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ShapeMismatch(f"positions must be (n_atoms, 3), got {positions.shape}")
        if species.shape != (positions.shape[0],):
            raise ShapeMismatch(
                f"species must be ({positions.shape[0]},), got {species.shape}"
            )
        if species.size and (species.min() < 0 or species.max() >= self.config.n_species):
            raise ValueError(
                f"species ids must lie in [0, {self.config.n_species}), got "
                f"[{species.min()}, {species.max()}]"
            )
        return species

    def taped_forward(
        self,
        tape: ad.Tape,
        positions: ad.Node,
        species: np.ndarray,
        param_nodes: dict[str, ad.Node],
    ) -> ad.Node:
        """Energy as a tape node; differentiable in positions and parameters."""
        cfg = self.config
        n_atoms = positions.shape[0]
        pc = PointCloud(positions.value, self._check_inputs(positions.value, species))
        nbr = build_neighborhood(pc, cfg.cutoff)
        src, dst = edge_index(nbr)

        disp = ad.sub(
            tape, ad.gather(tape, positions, dst), ad.gather(tape, positions, src)
        )
        dists = taped_distances(tape, disp)
        basis = taped_radial_basis(tape, dists, cfg.cutoff, cfg.radial_channels)
        harmonics = taped_edge_harmonics(tape, disp, cfg.j_max)

        embedded = ad.gather(tape, param_nodes["embed"], species)
        acts: dict[int, ad.Node] = {
            0: ad.complex_cast(
                tape, ad.reshape(tape, embedded, (n_atoms, 1, cfg.tau))
            )
        }
        for s, layer in enumerate(self.layers):
            taped = (
                taped_interaction_layer
                if isinstance(layer, InteractionParams)
                else taped_three_body_layer
            )
            acts = taped(
                tape, acts, src, dst, harmonics, basis, layer, param_nodes, f"layer{s}"
            )

        scalar = ad.reshape(tape, acts[0], (n_atoms, cfg.tau))
        invariants = ad.concat(
            tape, [ad.real(tape, scalar), ad.imag(tape, scalar)], axis=1
        )
        per_atom = ad.add(
            tape,
            ad.channel_mix(tape, invariants, param_nodes["readout/w"]),
            param_nodes["readout/b"],
        )
        return ad.sum_all(tape, per_atom)

    def parameter_nodes(self, tape: ad.Tape) -> dict[str, ad.Node]:
        return {name: tape.variable(arr) for name, arr in self.parameters().items()}

    def energy_and_forces(
        self, positions: np.ndarray, species: np.ndarray
    ) -> tuple[float, np.ndarray]:
        """Energy and exact forces (negative position gradient)."""
        tape = ad.Tape()
        pos_node = tape.variable(np.asarray(positions, dtype=float))
        param_nodes = self.parameter_nodes(tape)
        energy = self.taped_forward(tape, pos_node, np.asarray(species, dtype=int), param_nodes)
        grads = ad.backward(tape, energy, wrt=[pos_node])
        force = -np.real(grads[pos_node.id].value)
        return float(np.real(energy.value)), force

    def plain_energy(self, positions: np.ndarray, species: np.ndarray) -> float:
        """Reference energy through the per-atom layer implementations."""
        cfg = self.config
        species = self._check_inputs(np.asarray(positions, dtype=float), species)
        pc = PointCloud(np.asarray(positions, dtype=float), species)
        nbr = build_neighborhood(pc, cfg.cutoff)
        feats = edge_features(pc, nbr, cfg.j_max, cfg.radial_channels)
        acts = [
            Activation({0: self.embedding[species[a]][None, :].astype(complex)})
            for a in range(pc.n_atoms)
        ]
        for layer in self.layers:
            if isinstance(layer, InteractionParams):
                acts = interaction_layer(acts, pc, nbr, feats, layer)
            else:
                acts = three_body_forward(acts, pc, nbr, feats, layer)
        total = 0.0
        for a in range(pc.n_atoms):
            scalar = acts[a].part(0)[0]
            invariants = np.concatenate([scalar.real, scalar.imag])
            total += float(invariants @ self.readout_w[:, 0] + self.readout_b[0])
        return total

    # -- description ----------------------------------------------------------

    def describe(self) -> str:
        cfg = self.config
        lines = [
            f"kind: {cfg.kind}",
            f"layers: {cfg.n_layers}  channels (tau): {cfg.tau}  j_max: {cfg.j_max}",
            f"cutoff: {cfg.cutoff}  radial channels: {cfg.radial_channels}  "
            f"species: {cfg.n_species}  seed: {cfg.seed}",
        ]
        if cfg.kind == "three_body":
            lines.append(
                f"schedule: {cfg.schedule_mode} over internal spins "
                f"{list(cfg.internal_spins)}"
            )
        for s, layer in enumerate(self.layers):
            spins_in = "[" + ", ".join(str(Spin(t)) for t in self.layer_input_spins[s]) + "]"
            spins_out = "[" + ", ".join(str(Spin(t)) for t in layer.output_spins) + "]"
            extra = ""
            if isinstance(layer, ThreeBodyParams):
                n_diagrams = {
                    str(Spin(two_J)): len(blk.diagrams)
                    for two_J, blk in layer.blocks.items()
                }
                extra = f"  diagrams per output spin: {n_diagrams}"
            lines.append(
                f"layer {s}: input spins {spins_in} -> output spins {spins_out}{extra}"
            )
        lines.append("parameter groups:")
        for name, arr in self.parameters().items():
            lines.append(f"  {name}  shape {tuple(arr.shape)}  size {arr.size}")
        lines.append(f"total parameters: {self.parameter_count()}")
        if cfg.kind == "three_body":
            lines.append(
                f"three-body final-mixing parameters: {self.mixing_parameter_count()}"
            )
        return "\n".join(lines)
