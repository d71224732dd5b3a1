"""Circuit representation: rotation layers, noise layers, and inversion.

A circuit is an ordered sequence of Trotter steps, each step an ordered
group of layers. Keeping the step structure (rather than a flat layer list)
lets noise be attached per step and lets experiments record observables
after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union


@dataclass(frozen=True)
class XRotationAll:
    """exp(i*theta*X) applied to every qubit."""

    theta: float


@dataclass(frozen=True)
class ZRotationAll:
    """exp(i*theta*Z) applied to every qubit."""

    theta: float


@dataclass(frozen=True)
class ZZRotation:
    """exp(i*theta*Z_j Z_k) applied to every edge in the list."""

    edges: tuple[tuple[int, int], ...]
    theta: float


@dataclass(frozen=True)
class NoiseLayer:
    """Single-qubit depolarizing channel with amplitude ``p`` per listed qubit.

    ``qubits=None`` means every qubit of the target state.
    """

    p: float
    qubits: tuple[int, ...] | None = None


GateLayer = Union[XRotationAll, ZRotationAll, ZZRotation]
Layer = Union[GateLayer, NoiseLayer]

Step = tuple[Layer, ...]


def _invert_layer(layer: GateLayer) -> GateLayer:
    if isinstance(layer, XRotationAll):
        return XRotationAll(-layer.theta)
    if isinstance(layer, ZRotationAll):
        return ZRotationAll(-layer.theta)
    if isinstance(layer, ZZRotation):
        return ZZRotation(layer.edges, -layer.theta)
    raise TypeError(f"cannot invert layer {layer!r}")


@dataclass(frozen=True)
class Circuit:
    """Immutable sequence of Trotter steps acting on ``n_qubits`` qubits."""

    n_qubits: int
    steps: tuple[Step, ...]

    def __init__(self, n_qubits: int, steps: Iterable[Iterable[Layer]]):
        steps = tuple(tuple(step) for step in steps)
        if n_qubits < 1:
            raise ValueError("circuit needs at least one qubit")
        for step in steps:
            for layer in step:
                _validate_layer(layer, n_qubits)
        object.__setattr__(self, "n_qubits", int(n_qubits))
        object.__setattr__(self, "steps", steps)

    @property
    def layers(self) -> tuple[Layer, ...]:
        return tuple(layer for step in self.steps for layer in step)

    @property
    def step_count(self) -> int:
        return len(self.steps)

    @property
    def has_noise(self) -> bool:
        return any(isinstance(l, NoiseLayer) for l in self.layers)

    @property
    def two_qubit_gate_count(self) -> int:
        return sum(
            len(l.edges) for l in self.layers if isinstance(l, ZZRotation)
        )

    def inverse(self) -> "Circuit":
        """Exact layer-wise inverse with noise layers stripped."""
        inv_steps = []
        for step in reversed(self.steps):
            gates = [l for l in step if not isinstance(l, NoiseLayer)]
            inv_steps.append(tuple(_invert_layer(l) for l in reversed(gates)))
        return Circuit(self.n_qubits, inv_steps)

    def to_text(self) -> str:
        """Line-oriented serialization understood by ``from_text``."""
        lines = [f"qubits {self.n_qubits}"]
        for step in self.steps:
            lines.append("step")
            for layer in step:
                if isinstance(layer, ZZRotation):
                    edges = " ".join(f"{a}-{b}" for a, b in layer.edges)
                    lines.append(f"zz {layer.theta:.17g} {edges}")
                elif isinstance(layer, XRotationAll):
                    lines.append(f"xall {layer.theta:.17g}")
                elif isinstance(layer, ZRotationAll):
                    lines.append(f"zall {layer.theta:.17g}")
                elif isinstance(layer, NoiseLayer):
                    if layer.qubits is None:
                        lines.append(f"depol {layer.p:.17g} all")
                    else:
                        qs = " ".join(str(q) for q in layer.qubits)
                        lines.append(f"depol {layer.p:.17g} {qs}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        n_qubits = None
        steps: list[list[Layer]] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "qubits":
                n_qubits = int(parts[1])
            elif parts[0] == "step":
                steps.append([])
            elif parts[0] == "zz":
                edges = tuple(
                    tuple(int(x) for x in token.split("-")) for token in parts[2:]
                )
                steps[-1].append(ZZRotation(edges, float(parts[1])))
            elif parts[0] == "xall":
                steps[-1].append(XRotationAll(float(parts[1])))
            elif parts[0] == "zall":
                steps[-1].append(ZRotationAll(float(parts[1])))
            elif parts[0] == "depol":
                if parts[2:] == ["all"]:
                    qubits = None
                else:
                    qubits = tuple(int(q) for q in parts[2:])
                steps[-1].append(NoiseLayer(float(parts[1]), qubits))
            else:
                raise ValueError(f"unknown circuit line {line!r}")
        if n_qubits is None:
            raise ValueError("circuit text missing 'qubits' header")
        return cls(n_qubits, steps)


def _validate_layer(layer: Layer, n_qubits: int) -> None:
    if isinstance(layer, (XRotationAll, ZRotationAll)):
        if not math.isfinite(layer.theta):
            raise ValueError("rotation angle must be finite")
    elif isinstance(layer, ZZRotation):
        if not math.isfinite(layer.theta):
            raise ValueError("rotation angle must be finite")
        for a, b in layer.edges:
            if a == b:
                raise ValueError(f"edge ({a},{b}) has identical endpoints")
            if not (0 <= a < n_qubits and 0 <= b < n_qubits):
                raise ValueError(f"edge ({a},{b}) outside {n_qubits} qubits")
    elif isinstance(layer, NoiseLayer):
        if not 0.0 <= layer.p <= 1.0:
            raise ValueError(f"depolarizing amplitude {layer.p} outside [0, 1]")
        if layer.qubits is not None:
            for q in layer.qubits:
                if not 0 <= q < n_qubits:
                    raise ValueError(f"noise qubit {q} outside {n_qubits} qubits")
    else:
        raise TypeError(f"unknown layer type {type(layer)!r}")
