"""Synthetic reference potentials with analytic forces.

Used to generate desk-scale training data: a pairwise Morse potential and an
optional three-body angular term.  Forces are exact gradients, verified
against finite differences when datasets are generated.
"""

from __future__ import annotations

import numpy as np

__all__ = ["POTENTIAL_KINDS", "potential_energy_forces"]

POTENTIAL_KINDS = ("morse", "morse-angular")

MORSE_DEPTH = 1.0
MORSE_WIDTH = 1.5
MORSE_R0 = 1.0
ANGULAR_STRENGTH = 0.25


def _morse(positions: np.ndarray) -> tuple[float, np.ndarray]:
    """Pairwise Morse energy and forces over all atom pairs."""
    n = positions.shape[0]
    energy = 0.0
    forces = np.zeros_like(positions)
    for i in range(n):
        for j in range(i + 1, n):
            rij = positions[j] - positions[i]
            r = float(np.linalg.norm(rij))
            decay = np.exp(-MORSE_WIDTH * (r - MORSE_R0))
            energy += MORSE_DEPTH * (1.0 - decay) ** 2
            dv_dr = 2.0 * MORSE_DEPTH * MORSE_WIDTH * decay * (1.0 - decay)
            pair_force = dv_dr * rij / r
            forces[i] += pair_force
            forces[j] -= pair_force
    return energy, forces


def _angular(positions: np.ndarray) -> tuple[float, np.ndarray]:
    """Three-body term: strength * cos^2 of every bond angle.

    For each center i and unordered pair {j, k} of other atoms, the angle at
    i between bonds i->j and i->k contributes cos^2(theta).
    """
    n = positions.shape[0]
    energy = 0.0
    forces = np.zeros_like(positions)
    for i in range(n):
        others = [a for a in range(n) if a != i]
        for a_idx in range(len(others)):
            for b_idx in range(a_idx + 1, len(others)):
                j, k = others[a_idx], others[b_idx]
                u = positions[j] - positions[i]
                v = positions[k] - positions[i]
                nu = float(np.linalg.norm(u))
                nv = float(np.linalg.norm(v))
                c = float(u @ v) / (nu * nv)
                energy += ANGULAR_STRENGTH * c * c
                dc_du = v / (nu * nv) - c * u / (nu * nu)
                dc_dv = u / (nu * nv) - c * v / (nv * nv)
                g = 2.0 * ANGULAR_STRENGTH * c
                forces[j] -= g * dc_du
                forces[k] -= g * dc_dv
                forces[i] += g * (dc_du + dc_dv)
    return energy, forces


def potential_energy_forces(
    positions: np.ndarray, kind: str = "morse"
) -> tuple[float, np.ndarray]:
    """Reference energy and forces for one configuration."""
    positions = np.asarray(positions, dtype=float)
    if kind not in POTENTIAL_KINDS:
        raise ValueError(f"unknown potential kind {kind!r}; choose from {POTENTIAL_KINDS}")
    energy, forces = _morse(positions)
    if kind == "morse-angular":
        e3, f3 = _angular(positions)
        energy += e3
        forces += f3
    return energy, forces
