"""Ancilla (Ramsey) interferometry for the retarded impurity Green function.

The register has the four system qubits 0-3 and the ancilla on qubit 4. For
Pauli labels ``alpha, beta`` the protocol

1. Hadamard on the ancilla,
2. ``sigma^beta`` on the impurity qubit, controlled on ancilla ``|0>``,
3. the system evolution ``U(tau)``, applied unconditionally,
4. ``sigma^alpha`` on the impurity qubit, controlled on ancilla ``|1>``,
5. Hadamard on the ancilla,

leaves the ancilla with ``<Z> = Re F`` and ``<Y> = Im F`` where
``F = <GS| U^dag sigma^alpha U sigma^beta |GS>``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import DomainError
from .params import SiamParams
from .qsim import (
    Circuit,
    StateVector,
    apply_circuit,
    apply_gate,
    apply_matrix,
    controlled_pauli,
    expectation_pauli,
    hadamard,
)
from .siam import exact_propagator, ground_state, mode_index
from .trotter import TrotterPlan, evolution_unitary

ANCILLA = 4
N_TOTAL = 5
METHODS = ("xy", "cz", "exact")

Evolution = Union[Circuit, np.ndarray]


@dataclass(frozen=True, eq=False)
class RamseyTermSpec:
    alpha: str
    beta: str
    tau: float
    evolution: Evolution

    def __post_init__(self):
        for label in (self.alpha, self.beta):
            if label not in ("x", "y"):
                raise DomainError(f"Pauli labels must be 'x' or 'y', got {label!r}")


@dataclass(frozen=True, eq=False)
class GreenSeries:
    """Samples of ``i G^R(tau_k)`` on a uniform grid starting at zero."""

    times: np.ndarray
    values: np.ndarray
    method: str
    n_steps_per_time: int | None
    params: SiamParams | None = None
    spin: str = field(default="down")

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if t.shape != v.shape or t.ndim != 1:
            raise DomainError("times and values must be 1-d arrays of equal length")
        if t.size and (t[0] != 0.0 or np.any(np.diff(t) <= 0)):
            raise DomainError("times must start at 0 and be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "re_igr", "im_igr"])
        for t, z in zip(self.times, self.values):
            w.writerow([repr(float(t)), repr(float(z.real)), repr(float(z.imag))])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "params": self.params.to_dict() if self.params else None,
            "method": self.method,
            "n_steps": self.n_steps_per_time,
            "spin": self.spin,
            "times": self.times.tolist(),
            "values_re": self.values.real.tolist(),
            "values_im": self.values.imag.tolist(),
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "GreenSeries":
        doc = json.loads(text)
        params = SiamParams(**doc["params"]) if doc.get("params") else None
        values = np.asarray(doc["values_re"]) + 1j * np.asarray(doc["values_im"])
        return cls(np.asarray(doc["times"]), values, doc["method"], doc["n_steps"], params,
                   doc.get("spin", "down"))

    @classmethod
    def from_csv(cls, text: str, method: str = "exact", n_steps: int | None = None,
                 params: SiamParams | None = None) -> "GreenSeries":
        rows = list(csv.DictReader(io.StringIO(text)))
        times = [float(r["tau"]) for r in rows]
        values = [complex(float(r["re_igr"]), float(r["im_igr"])) for r in rows]
        return cls(np.asarray(times), np.asarray(values), method, n_steps, params)


# ---------------------------------------------------------------------------
# The interferometer
# ---------------------------------------------------------------------------


def _impurity_pauli_gates(axis: str, control_value: int, spin: str):
    """Controlled impurity Pauli including its Jordan-Wigner string."""
    q = mode_index(1, spin)
    gates = [controlled_pauli(ANCILLA, k, "z", control_value) for k in range(q)]
    gates.append(controlled_pauli(ANCILLA, q, axis, control_value))
    return gates


def _evolve_system(state: StateVector, evolution: Evolution) -> StateVector:
    if isinstance(evolution, Circuit):
        if evolution.n_qubits == N_TOTAL:
            if ANCILLA in evolution.touches():
                raise DomainError("system evolution must not act on the ancilla qubit")
            return apply_circuit(state, evolution)
        if evolution.n_qubits != 4:
            raise DomainError(f"evolution must act on the 4 system qubits, got {evolution.n_qubits}")
        return apply_circuit(state, evolution.remap(range(4), N_TOTAL))
    u = np.asarray(evolution)
    if u.shape != (16, 16):
        raise DomainError(f"evolution matrix must be 16x16, got {u.shape}")
    return StateVector(apply_matrix(state.amplitudes, u, (3, 2, 1, 0), N_TOTAL), N_TOTAL)


def _ramsey_state(spec: RamseyTermSpec, ground: StateVector, spin: str) -> StateVector:
    if ground.n_qubits != 4:
        raise DomainError(f"ground state must be a 4-qubit state, got {ground.n_qubits}")
    state = ground.tensor(StateVector(np.array([1, 0], dtype=complex), 1))
    state = apply_gate(state, hadamard(ANCILLA))
    for g in _impurity_pauli_gates(spec.beta, 0, spin):
        state = apply_gate(state, g)
    state = _evolve_system(state, spec.evolution)
    for g in _impurity_pauli_gates(spec.alpha, 1, spin):
        state = apply_gate(state, g)
    return apply_gate(state, hadamard(ANCILLA))


def ramsey_term(spec: RamseyTermSpec, ground: StateVector, spin: str = "down",
                shots: int | None = None, seed: int = 0) -> complex:
    """Simulate the five-qubit interferometer and read out ``F`` from the ancilla.

    With ``shots`` the two ancilla expectation values are replaced by
    finite-statistics estimates drawn with :func:`sample_shots`.
    """
    state = _ramsey_state(spec, ground, spin)
    z = expectation_pauli(state, "z", ANCILLA)
    y = expectation_pauli(state, "y", ANCILLA)
    if shots is not None:
        seeds = np.random.SeedSequence(seed).generate_state(2)
        z = sample_shots(z, shots, int(seeds[0]))
        y = sample_shots(y, shots, int(seeds[1]))
    return complex(z, y)


def direct_term(alpha: str, beta: str, evolution: np.ndarray, ground: StateVector, spin: str = "down") -> complex:
    """``<GS| U^dag P_alpha U P_beta |GS>`` by plain matrix algebra."""
    from .qsim import pauli_string

    q = mode_index(1, spin)
    string = {k: "z" for k in range(q)}
    pa = pauli_string({**string, q: alpha}, 4)
    pb = pauli_string({**string, q: beta}, 4)
    u = np.asarray(evolution)
    psi = ground.amplitudes
    return complex(np.vdot(psi, u.conj().T @ pa @ u @ pb @ psi))


def _four_terms(evolution: Evolution, ground: StateVector, spin: str,
                shots: int | None = None, seed: int = 0) -> dict[tuple[str, str], complex]:
    terms = {}
    for k, (a, b) in enumerate((a, b) for a in "xy" for b in "xy"):
        sub_seed = None if shots is None else int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        terms[a, b] = ramsey_term(RamseyTermSpec(a, b, 0.0, evolution), ground, spin, shots, sub_seed or 0)
    return terms


def _greater_from_terms(f) -> complex:
    # c(tau) c^dag = (1/4) U^dag (X + iY) U (X - iY)
    return -0.25j * (f["x", "x"] - 1j * f["x", "y"] + 1j * f["y", "x"] + f["y", "y"])


def _lesser_from_terms(f) -> complex:
    # <P_b U^dag P_a U> = conj(F(alpha=a, beta=b))
    g = {k: v.conjugate() for k, v in f.items()}
    return 0.25j * (g["x", "x"] + 1j * g["y", "x"] - 1j * g["x", "y"] + g["y", "y"])


def greater_green(tau: float, evolution: Evolution, ground: StateVector, spin: str = "down") -> complex:
    """``G^>(tau) = -i <c(tau) c^dag(0)>`` from four interferometer runs."""
    return _greater_from_terms(_four_terms(evolution, ground, spin))


def lesser_green(tau: float, evolution: Evolution, ground: StateVector, spin: str = "down") -> complex:
    """``G^<(tau) = i <c^dag(0) c(tau)>`` from the same four interferometer runs."""
    return _lesser_from_terms(_four_terms(evolution, ground, spin))


def retarded_igr(evolution: Evolution, ground: StateVector, spin: str = "down",
                 shots: int | None = None, seed: int = 0) -> complex:
    """``i G^R(tau) = i [G^>(tau) - G^<(tau)]`` for ``tau >= 0``."""
    f = _four_terms(evolution, ground, spin, shots, seed)
    return 1j * (_greater_from_terms(f) - _lesser_from_terms(f))


# ---------------------------------------------------------------------------
# Series and fillings
# ---------------------------------------------------------------------------


def time_grid(tau_max: float, n_points: int) -> np.ndarray:
    """``tau_k = k tau_max / n_points`` for ``k = 0 .. n_points``."""
    if n_points < 1 or tau_max < 0:
        raise DomainError(f"need n_points >= 1 and tau_max >= 0, got {n_points}, {tau_max}")
    if tau_max == 0:
        return np.zeros(1)
    return np.arange(n_points + 1) * (tau_max / n_points)


def steps_for_time(tau: float, tau_max: float, n_steps: int) -> int:
    """Trotter steps used at ``tau`` so the step size never exceeds ``tau_max / n_steps``."""
    if tau_max <= 0:
        return 1
    return max(1, math.ceil(n_steps * tau / tau_max - 1e-9))


@lru_cache(maxsize=64)
def _trotter_step_unitary(method: str, params: SiamParams, dt: float) -> np.ndarray:
    u = evolution_unitary(TrotterPlan(method, 1, dt, params))
    u.setflags(write=False)
    return u


def evolution_for(params: SiamParams, tau: float, method: str, n_steps: int = 1) -> np.ndarray:
    """Dense system propagator for one time point of a series."""
    if method == "exact":
        return exact_propagator(params, tau)
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}, got {method!r}")
    return np.linalg.matrix_power(_trotter_step_unitary(method, params, tau / n_steps), n_steps)


def measure_green_series(
    params: SiamParams,
    tau_max: float,
    n_points: int,
    method: str = "xy",
    n_steps: int = 24,
    spin: str = "down",
    shots: int | None = None,
    seed: int = 0,
) -> GreenSeries:
    """``i G^R(tau_k)`` on ``k = 0 .. n_points`` via the interferometer.

    Trotterized methods use ``ceil(n_steps tau_k / tau_max)`` steps at
    ``tau_k``, so the step size is at most ``tau_max / n_steps``. With
    ``shots`` every ancilla expectation value carries binomial noise; the
    draws are reproducible from ``seed``.
    """
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}, got {method!r}")
    ground, _ = ground_state(params)
    times = time_grid(tau_max, n_points)
    values = []
    for k, tau in enumerate(times):
        point_seed = seed * 100003 + k
        if tau == 0.0:
            values.append(retarded_igr(np.eye(16, dtype=complex), ground, spin, shots, point_seed))
            continue
        n_k = steps_for_time(tau, tau_max, n_steps)
        values.append(retarded_igr(evolution_for(params, tau, method, n_k), ground, spin, shots, point_seed))
    return GreenSeries(times, np.array(values), method, None if method == "exact" else n_steps, params, spin)


def measure_filling(params: SiamParams) -> float:
    """Impurity occupation ``1 - (<Z_0> + <Z_2>)/2`` in the ground state."""
    ground, _ = ground_state(params)
    return 1.0 - (expectation_pauli(ground, "z", 0) + expectation_pauli(ground, "z", 2)) / 2


def sample_shots(expectation: float, shots: int, seed: int) -> float:
    """Finite-statistics estimate of a Pauli expectation value from ``shots``
    projective measurements."""
    p = (1.0 + expectation) / 2.0
    if not -1e-12 <= p <= 1 + 1e-12:
        raise DomainError(f"expectation {expectation} outside [-1, 1]")
    if shots < 1:
        raise DomainError(f"shots must be >= 1, got {shots}")
    rng = np.random.default_rng(seed)
    successes = rng.binomial(shots, min(max(p, 0.0), 1.0))
    return 2.0 * successes / shots - 1.0
