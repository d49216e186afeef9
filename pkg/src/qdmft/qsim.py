"""Dense statevector simulation for registers of up to five qubits.

Bit ``k`` of a basis index is the state of qubit ``k`` (qubit 0 is the least
significant bit). A qubit in ``|0>`` has ``sigma^z = +1`` and encodes an
empty fermionic mode, so ``|00...0>`` is the fermionic vacuum.

Two-qubit gate matrices are written in the basis ``|t0 t1>`` with the first
target as the most significant factor, e.g. for a controlled gate the first
target is the control.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

MAX_QUBITS = 5

I2 = np.eye(2, dtype=complex)
PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)

ROTATIONS = ("rx", "ry", "rz")
SINGLE_QUBIT_KINDS = ROTATIONS + ("h",)
TWO_QUBIT_KINDS = ("xy", "zz", "czphi", "swap", "cpauli")
ANGLED_KINDS = ROTATIONS + ("xy", "zz", "czphi")
GATE_KINDS = SINGLE_QUBIT_KINDS + TWO_QUBIT_KINDS


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gate:
    """One gate of a circuit.

    Parameters
    ----------
    kind : str
        One of ``rx, ry, rz, h, xy, zz, czphi, swap, cpauli``.
    targets : tuple of int
        One qubit for single-qubit kinds, two distinct qubits otherwise. For
        ``cpauli`` the first target is the control.
    angle : float, optional
        Rotation angle in radians, required for ``rx, ry, rz, xy, zz, czphi``.
    axis : str, optional
        Pauli applied by ``cpauli`` (``x``, ``y`` or ``z``).
    control_value : int, optional
        Control state (0 or 1) that triggers ``cpauli``.
    """

    kind: str
    targets: tuple[int, ...]
    angle: float | None = None
    axis: str | None = None
    control_value: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind not in GATE_KINDS:
            raise DomainError(f"unknown gate kind {self.kind!r}")
        nt = 1 if self.kind in SINGLE_QUBIT_KINDS else 2
        if len(self.targets) != nt:
            raise DomainError(f"{self.kind} takes {nt} target(s), got {self.targets}")
        if nt == 2 and self.targets[0] == self.targets[1]:
            raise DomainError(f"{self.kind} targets must be distinct, got {self.targets}")
        if any(t < 0 for t in self.targets):
            raise DomainError(f"negative qubit index in {self.targets}")
        if self.kind in ANGLED_KINDS:
            if self.angle is None:
                raise DomainError(f"{self.kind} requires an angle")
            object.__setattr__(self, "angle", float(self.angle))
        if self.kind == "cpauli":
            if self.axis not in PAULI:
                raise DomainError(f"cpauli axis must be x, y or z, got {self.axis!r}")
            if self.control_value not in (0, 1):
                raise DomainError(f"cpauli control_value must be 0 or 1, got {self.control_value!r}")

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    def matrix(self) -> np.ndarray:
        return gate_matrix(self)

    def remap(self, mapping: Sequence[int] | dict) -> "Gate":
        return Gate(self.kind, tuple(mapping[t] for t in self.targets), self.angle, self.axis, self.control_value)


def rx(q, theta):
    return Gate("rx", (q,), theta)


def ry(q, theta):
    return Gate("ry", (q,), theta)


def rz(q, theta):
    return Gate("rz", (q,), theta)


def hadamard(q):
    return Gate("h", (q,))


def xy(q0, q1, theta):
    return Gate("xy", (q0, q1), theta)


def zz(q0, q1, theta):
    return Gate("zz", (q0, q1), theta)


def czphi(q0, q1, phi):
    return Gate("czphi", (q0, q1), phi)


def swap(q0, q1):
    return Gate("swap", (q0, q1))


def controlled_pauli(control, target, axis, control_value=1):
    return Gate("cpauli", (control, target), axis=axis, control_value=control_value)


def _rotation(axis: str, theta: float) -> np.ndarray:
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * PAULI[axis]


def gate_matrix(gate: Gate) -> np.ndarray:
    """Dense 2x2 or 4x4 unitary of ``gate`` (see module docstring for ordering)."""
    kind, theta = gate.kind, gate.angle
    if kind in ROTATIONS:
        return _rotation(kind[1], theta)
    if kind == "h":
        return HADAMARD.copy()
    if kind == "xy":
        # exp(-i theta/2 (XX + YY)) only mixes |01> and |10>.
        c, s = np.cos(theta), np.sin(theta)
        return np.array(
            [[1, 0, 0, 0], [0, c, -1j * s, 0], [0, -1j * s, c, 0], [0, 0, 0, 1]], dtype=complex
        )
    if kind == "zz":
        p = np.exp(-0.5j * theta)
        return np.diag([p, p.conjugate(), p.conjugate(), p])
    if kind == "czphi":
        return np.diag([1, 1, 1, np.exp(1j * theta)]).astype(complex)
    if kind == "swap":
        return SWAP.copy()
    # cpauli
    on = np.zeros((2, 2), dtype=complex)
    off = np.zeros((2, 2), dtype=complex)
    on[gate.control_value, gate.control_value] = 1
    off[1 - gate.control_value, 1 - gate.control_value] = 1
    return np.kron(on, PAULI[gate.axis]) + np.kron(off, I2)


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


def _check_n_qubits(n_qubits):
    if not (isinstance(n_qubits, (int, np.integer)) and 1 <= n_qubits <= MAX_QUBITS):
        raise DomainError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


@dataclass(frozen=True, eq=False)
class StateVector:
    """Read-only vector of ``2**n_qubits`` complex amplitudes."""

    amplitudes: np.ndarray
    n_qubits: int = field(default=None)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        n = self.n_qubits
        if n is None:
            n = int(round(np.log2(max(amps.size, 1))))
        _check_n_qubits(n)
        if amps.size != 2**n:
            raise DomainError(f"expected {2**n} amplitudes for {n} qubits, got {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "n_qubits", int(n))

    def __len__(self):
        return self.amplitudes.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.amplitudes / self.norm, self.n_qubits)

    def tensor(self, other: "StateVector") -> "StateVector":
        """Register with ``self`` on the low qubits and ``other`` above them."""
        return StateVector(np.kron(other.amplitudes, self.amplitudes), self.n_qubits + other.n_qubits)


def init_basis_state(n_qubits: int, index: int) -> StateVector:
    """Computational basis state ``|index>``."""
    _check_n_qubits(n_qubits)
    if not 0 <= index < 2**n_qubits:
        raise DomainError(f"basis index {index} out of range for {n_qubits} qubits")
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[index] = 1.0
    return StateVector(amps, n_qubits)


def _check_targets(gate: Gate, n_qubits: int):
    if any(t >= n_qubits for t in gate.targets):
        raise DomainError(f"gate {gate.kind} targets {gate.targets} outside {n_qubits}-qubit register")


def apply_matrix(amplitudes: np.ndarray, matrix: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Apply a ``2**k x 2**k`` matrix to ``targets`` of a raw amplitude array.

    The matrix basis puts ``targets[0]`` as the most significant bit. Works on
    a trailing batch axis too: ``amplitudes`` may have shape ``(2**n, m)``.
    """
    k = len(targets)
    batch = amplitudes.shape[1:]
    psi = amplitudes.reshape((2,) * n_qubits + batch)
    # Reshaped axis j holds qubit n-1-j.
    axes = [n_qubits - 1 - t for t in targets]
    psi = np.moveaxis(psi, axes, range(k))
    shape = psi.shape
    psi = matrix @ psi.reshape(2**k, -1)
    psi = np.moveaxis(psi.reshape(shape), range(k), axes)
    return psi.reshape((2**n_qubits,) + batch)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    _check_targets(gate, state.n_qubits)
    amps = apply_matrix(state.amplitudes, gate_matrix(gate), gate.targets, state.n_qubits)
    return StateVector(amps, state.n_qubits)


# ---------------------------------------------------------------------------
# Circuits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list; gates are applied first to last."""

    gates: tuple[Gate, ...]
    n_qubits: int

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        _check_n_qubits(self.n_qubits)
        for g in self.gates:
            _check_targets(g, self.n_qubits)

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise DomainError(f"cannot concatenate {self.n_qubits}- and {other.n_qubits}-qubit circuits")
        return Circuit(self.gates + other.gates, self.n_qubits)

    @classmethod
    def empty(cls, n_qubits: int) -> "Circuit":
        return cls((), n_qubits)

    @classmethod
    def concat(cls, circuits: Iterable["Circuit"], n_qubits: int) -> "Circuit":
        gates = []
        for c in circuits:
            if c.n_qubits != n_qubits:
                raise DomainError(f"expected {n_qubits}-qubit circuit, got {c.n_qubits}")
            gates.extend(c.gates)
        return cls(tuple(gates), n_qubits)

    def remap(self, mapping: Sequence[int], n_qubits: int) -> "Circuit":
        """Relabel qubit ``q`` as ``mapping[q]`` inside an ``n_qubits`` register."""
        return Circuit(tuple(g.remap(mapping) for g in self.gates), n_qubits)

    def touches(self) -> set[int]:
        return {t for g in self.gates for t in g.targets}

    def unitary(self) -> np.ndarray:
        return circuit_unitary(self)

    def to_text(self) -> str:
        return circuit_to_text(self)


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if circuit.n_qubits != state.n_qubits:
        raise DomainError(f"{circuit.n_qubits}-qubit circuit applied to {state.n_qubits}-qubit state")
    amps = state.amplitudes
    for g in circuit.gates:
        amps = apply_matrix(amps, gate_matrix(g), g.targets, state.n_qubits)
    return StateVector(amps, state.n_qubits)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary of ``circuit``, obtained by running every basis state."""
    n = circuit.n_qubits
    cols = np.eye(2**n, dtype=complex)
    for g in circuit.gates:
        cols = apply_matrix(cols, gate_matrix(g), g.targets, n)
    return cols


# ---------------------------------------------------------------------------
# Measurement-side helpers
# ---------------------------------------------------------------------------


def expectation_pauli(state: StateVector, axis: str, qubit: int) -> float:
    """``<state| sigma^axis_qubit |state>``."""
    if axis not in PAULI:
        raise DomainError(f"axis must be x, y or z, got {axis!r}")
    if not 0 <= qubit < state.n_qubits:
        raise DomainError(f"qubit {qubit} outside {state.n_qubits}-qubit register")
    moved = apply_matrix(state.amplitudes, PAULI[axis], (qubit,), state.n_qubits)
    return float(np.vdot(state.amplitudes, moved).real)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``."""
    if a.n_qubits != b.n_qubits:
        raise DomainError(f"dimension mismatch: {a.n_qubits} vs {b.n_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def embed_operator(matrix: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Full ``2**n x 2**n`` matrix of a few-qubit operator on ``targets``."""
    return apply_matrix(np.eye(2**n_qubits, dtype=complex), matrix, targets, n_qubits)


def pauli_string(paulis: dict[int, str], n_qubits: int) -> np.ndarray:
    """Dense matrix of a product of Paulis, e.g. ``{0: 'z', 2: 'x'}``."""
    out = np.eye(2**n_qubits, dtype=complex)
    for q, a in paulis.items():
        out = apply_matrix(out, PAULI[a], (q,), n_qubits)
    return out


# ---------------------------------------------------------------------------
# Text serialization: one gate per line, ``NAME q0[,q1] [angle]``
# ---------------------------------------------------------------------------

_TEXT_NAMES = {"rx": "RX", "ry": "RY", "rz": "RZ", "h": "H", "xy": "XY", "zz": "ZZ", "czphi": "CZPHI", "swap": "SWAP"}
_TEXT_KINDS = {v: k for k, v in _TEXT_NAMES.items()}


def _gate_name(g: Gate) -> str:
    if g.kind == "cpauli":
        return f"C{g.axis.upper()}{g.control_value}"
    return _TEXT_NAMES[g.kind]


def circuit_to_text(circuit: Circuit) -> str:
    lines = [f"# qubits {circuit.n_qubits}"]
    for g in circuit.gates:
        line = f"{_gate_name(g)} {','.join(str(t) for t in g.targets)}"
        if g.angle is not None:
            line += f" {g.angle:.17g}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str, n_qubits: int | None = None) -> Circuit:
    gates = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if n_qubits is None and len(parts) == 2 and parts[0] == "qubits":
                n_qubits = int(parts[1])
            continue
        parts = line.split()
        name, targets = parts[0], tuple(int(t) for t in parts[1].split(","))
        angle = float(parts[2]) if len(parts) > 2 else None
        if name in _TEXT_KINDS:
            gates.append(Gate(_TEXT_KINDS[name], targets, angle))
        elif len(name) == 3 and name[0] == "C" and name[1] in "XYZ" and name[2] in "01":
            gates.append(controlled_pauli(targets[0], targets[1], name[1].lower(), int(name[2])))
        else:
            raise DomainError(f"unknown gate name {name!r} in line {raw!r}")
    if n_qubits is None:
        n_qubits = max((t for g in gates for t in g.targets), default=0) + 1
    return Circuit(tuple(gates), n_qubits)
