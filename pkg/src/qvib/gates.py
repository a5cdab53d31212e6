"""Gate-level IR shared by the compiler and the simulator.

Gate set: Rz(theta), sqrt-X, Hadamard, CNOT. Qubit 0 is the least
significant bit of a basis index; bitstrings print qubit (width-1) first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

RZ = "rz"
SX = "sx"
H = "h"
CNOT = "cnot"

_SQRT_X = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
_HADAMARD = np.array([[1, 1], [1, -1]]) / math.sqrt(2.0)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in (RZ, SX, H, CNOT):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == CNOT:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError("cnot needs two distinct qubits")
        elif len(self.qubits) != 1:
            raise ValueError(f"{self.kind} acts on one qubit")
        if self.kind == RZ:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError("rz needs a finite angle")
        elif self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")


def rz(theta: float, qubit: int) -> Gate:
    return Gate(RZ, (qubit,), float(theta))


def sx(qubit: int) -> Gate:
    return Gate(SX, (qubit,))


def hadamard(qubit: int) -> Gate:
    return Gate(H, (qubit,))


def cnot(control: int, target: int) -> Gate:
    return Gate(CNOT, (control, target))


def single_qubit_matrix(gate: Gate) -> np.ndarray:
    if gate.kind == RZ:
        return np.array([[np.exp(-0.5j * gate.angle), 0], [0, np.exp(0.5j * gate.angle)]])
    if gate.kind == SX:
        return _SQRT_X
    if gate.kind == H:
        return _HADAMARD.astype(complex)
    raise ValueError(f"{gate.kind} is not a single-qubit gate")


@dataclass
class Circuit:
    width: int
    gates: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for g in self.gates:
            self._check(g)

    def _check(self, gate: Gate):
        if any(q < 0 or q >= self.width for q in gate.qubits):
            raise ValueError(f"gate {gate} outside width {self.width}")

    def append(self, gate: Gate):
        self._check(gate)
        self.gates.append(gate)

    def extend(self, gates):
        for g in gates:
            self.append(g)

    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == CNOT)

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def __add__(self, other: "Circuit") -> "Circuit":
        if self.width != other.width:
            raise ValueError("cannot concatenate circuits of different widths")
        return Circuit(self.width, list(self.gates) + list(other.gates),
                       {**self.metadata, **other.metadata})


def apply_gate(state: np.ndarray, gate: Gate, width: int) -> np.ndarray:
    """Apply one gate to a statevector of 2**width amplitudes."""
    psi = state.reshape([2] * width)
    if gate.kind == CNOT:
        control, target = gate.qubits
        # axis order in the reshaped tensor: axis 0 is qubit width-1
        c_ax, t_ax = width - 1 - control, width - 1 - target
        psi = psi.copy()
        idx1 = [slice(None)] * width
        idx1[c_ax] = 1
        sub = psi[tuple(idx1)]
        psi[tuple(idx1)] = np.flip(sub, axis=t_ax - (1 if t_ax > c_ax else 0)).copy()
        return psi.reshape(-1)
    mat = single_qubit_matrix(gate)
    ax = width - 1 - gate.qubits[0]
    psi = np.moveaxis(psi, ax, -1)
    psi = psi @ mat.T
    return np.moveaxis(psi, -1, ax).reshape(-1)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary of the gate sequence (reference路 for verification)."""
    dim = 2 ** circuit.width
    cols = np.eye(dim, dtype=complex)
    for k in range(dim):
        state = cols[:, k].copy()
        for gate in circuit.gates:
            state = apply_gate(state, gate, circuit.width)
        cols[:, k] = state
    return cols


def phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius distance min over global phase of ||a - e^{i phi} b||."""
    overlap = np.trace(a.conj().T @ b)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return float(np.linalg.norm(a - b / phase))


def circuit_to_json_lines(circuit: Circuit) -> str:
    header = {"width": circuit.width, **circuit.metadata}
    lines = [json.dumps(header, sort_keys=True)]
    for g in circuit.gates:
        entry = {"kind": g.kind, "qubits": list(g.qubits)}
        if g.angle is not None:
            entry["angle"] = g.angle
        lines.append(json.dumps(entry, sort_keys=True))
    return "\n".join(lines) + "\n"


def circuit_from_json_lines(text: str) -> Circuit:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = json.loads(lines[0])
    width = header.pop("width")
    gates = []
    for ln in lines[1:]:
        entry = json.loads(ln)
        gates.append(Gate(entry["kind"], tuple(entry["qubits"]), entry.get("angle")))
    return Circuit(width=width, gates=gates, metadata=header)
