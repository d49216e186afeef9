"""First-order Trotter circuits for the two-site SIAM.

Two gate sets are supported:

``xy``
    Resonator-bus gates: the hopping terms are native ``XY`` gates and the
    impurity interaction is a direct ``ZZ`` gate between qubits 0 and 2.
``cz``
    Nearest-neighbour hardware: every two-qubit interaction is a ``ZZ``
    block built from two ``CZ_phi`` gates, hopping terms are rotated into
    ``ZZ`` form by single-qubit basis changes, and the 0-2 interaction is
    routed through a pair of SWAPs on a linear 0-1-2-3 chain.

Within one step the gates are emitted in time order so that the composed
unitary is the operator product

    XY(0,1) XY(2,3) ZZ_B(0,2) C(0) C(2) D(1) D(3)

(rightmost applied first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .params import SiamParams
from .qsim import (
    Circuit,
    Gate,
    StateVector,
    circuit_unitary,
    czphi,
    inner_product,
    rx,
    ry,
    rz,
    swap,
    xy,
    zz,
)
from .siam import exact_propagator, ground_state, jw_creation_operator

N_SYSTEM = 4
METHODS = ("xy", "cz")
HALF_PI = math.pi / 2


@dataclass(frozen=True)
class TrotterPlan:
    """``n_steps`` first-order steps of size ``tau / n_steps``."""

    method: str
    n_steps: int
    tau: float
    params: SiamParams
    optimize_pairs: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}, got {self.method!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if self.tau < 0:
            raise DomainError(f"tau must be nonnegative, got {self.tau}")

    @property
    def dt(self) -> float:
        return self.tau / self.n_steps


@dataclass(frozen=True)
class GateCount:
    zz_gates: int = 0
    swap_gates: int = 0
    single_qubit_rotations: int = 0
    xy_gates: int = 0
    czphi_gates: int = 0


def _angles(params: SiamParams, dt: float) -> dict[str, float]:
    return {
        "hop": params.v * dt,
        "b": params.u * dt / 2,
        "c": (params.mu - params.u / 2) * dt,
        "d": -params.epsilon_c * dt,
    }


def _diagonal_phases(a: dict[str, float], keep_zero: bool) -> list[Gate]:
    gates = [rz(0, a["c"]), rz(2, a["c"]), rz(1, a["d"]), rz(3, a["d"])]
    return gates if keep_zero else [g for g in gates if g.angle != 0.0]


def build_xy_step(params: SiamParams, dt: float) -> Circuit:
    """One Trotter step with native ``XY`` gates; zero-angle gates are omitted."""
    if dt < 0:
        raise DomainError(f"dt must be nonnegative, got {dt}")
    a = _angles(params, dt)
    gates = _diagonal_phases(a, keep_zero=False)
    if a["b"] != 0.0:
        gates.append(zz(0, 2, a["b"]))
    if a["hop"] != 0.0:
        gates += [xy(0, 1, a["hop"]), xy(2, 3, a["hop"])]
    return Circuit(tuple(gates), N_SYSTEM)


def zz_from_czphi(phi: float) -> Circuit:
    """Two-qubit circuit equal to ``exp(-i phi/2 Z Z)`` up to a global phase.

    ``Rx1(pi) CZ_phi Rx1(pi) Rx2(pi) CZ_phi Rx2(pi)``: each ``Rx(pi)``
    conjugation moves the ``CZ_phi`` phase from ``|11>`` to ``|01>`` or
    ``|10>``.
    """
    pi = math.pi
    gates = (rx(1, pi), czphi(0, 1, phi), rx(1, pi), rx(0, pi), czphi(0, 1, phi), rx(0, pi))
    return Circuit(gates, 2)


def _zz_block(q0: int, q1: int, phi: float) -> list[Gate]:
    return list(zz_from_czphi(phi).remap((q0, q1), N_SYSTEM).gates)


def _interaction_block(phi: float) -> list[Gate]:
    # qubit 2 is brought next to qubit 0 and back again
    return [swap(1, 2)] + _zz_block(0, 1, phi) + [swap(1, 2)]


def _hopping_sandwich(axis: str, phi: float, lead: bool = True, trail: bool = True) -> list[Gate]:
    """``exp(-i phi/2 (PP_01 + PP_23))`` for ``P = X`` (``axis='y'`` rotations)
    or ``P = Y`` (``axis='x'`` rotations), in time order."""
    rot = ry if axis == "y" else rx
    # Ry(pi/2) Z Ry(-pi/2) = X and Rx(-pi/2) Z Rx(pi/2) = Y; the first factor
    # applied in time is the rightmost one.
    first = -HALF_PI if axis == "y" else HALF_PI
    gates = [rot(q, first) for q in range(4)] if lead else []
    gates += _zz_block(0, 1, phi) + _zz_block(2, 3, phi)
    if trail:
        gates += [rot(q, -first) for q in range(4)]
    return gates


def build_cz_step(params: SiamParams, dt: float, parity: str = "odd", optimize: bool = False) -> Circuit:
    """One Trotter step built from rotations, ``CZ_phi`` and SWAP gates.

    Odd steps run (in time) phases, interaction, the ``YY`` sandwich and then
    the ``XX`` sandwich. Even steps run the same blocks in reverse order. With
    ``optimize`` the trailing ``Ry(pi/2)`` layer of an odd step and the
    leading ``Ry(-pi/2)`` layer of the following even step cancel and are
    both dropped, so only an (odd, even) pair composes to a full unitary.
    Unoptimized steps always use the odd ordering and ignore ``parity``.
    """
    if dt < 0:
        raise DomainError(f"dt must be nonnegative, got {dt}")
    if parity not in ("odd", "even"):
        raise DomainError(f"parity must be 'odd' or 'even', got {parity!r}")
    a = _angles(params, dt)
    diag = _diagonal_phases(a, keep_zero=True) + _interaction_block(a["b"])
    if not optimize or parity == "odd":
        gates = diag + _hopping_sandwich("x", a["hop"]) + _hopping_sandwich("y", a["hop"], trail=not optimize)
    else:
        gates = _hopping_sandwich("y", a["hop"], lead=False) + _hopping_sandwich("x", a["hop"]) + diag[::-1]
    return Circuit(tuple(gates), N_SYSTEM)


def build_evolution(plan: TrotterPlan) -> Circuit:
    """Concatenated Trotter steps approximating ``exp(-i H tau)``."""
    dt, n = plan.dt, plan.n_steps
    if plan.method == "xy":
        step = build_xy_step(plan.params, dt)
        return Circuit(step.gates * n, N_SYSTEM)
    if not plan.optimize_pairs:
        step = build_cz_step(plan.params, dt)
        return Circuit(step.gates * n, N_SYSTEM)
    odd = build_cz_step(plan.params, dt, "odd", optimize=True)
    even = build_cz_step(plan.params, dt, "even", optimize=True)
    gates = (odd.gates + even.gates) * (n // 2)
    if n % 2:
        gates += build_cz_step(plan.params, dt).gates
    return Circuit(gates, N_SYSTEM)


def count_gates(plan: TrotterPlan) -> GateCount:
    """Gate tallies of :func:`build_evolution`.

    In the CZ method each ``ZZ`` block (two ``CZ_phi`` plus four ``Rx(pi)``)
    is counted once as a ``ZZ`` gate, and ``czphi_gates`` reports the native
    two-qubit cost with a SWAP taken as three ``CZ_phi`` gates.
    """
    circuit = build_evolution(plan)
    kinds = [g.kind for g in circuit.gates]
    n_czphi = kinds.count("czphi")
    n_swap = kinds.count("swap")
    n_rot = sum(kinds.count(k) for k in ("rx", "ry", "rz"))
    if plan.method == "cz":
        zz_blocks = n_czphi // 2
        return GateCount(
            zz_gates=zz_blocks,
            swap_gates=n_swap,
            single_qubit_rotations=n_rot - 4 * zz_blocks,
            czphi_gates=n_czphi + 3 * n_swap,
        )
    return GateCount(
        zz_gates=kinds.count("zz"),
        swap_gates=n_swap,
        single_qubit_rotations=n_rot,
        xy_gates=kinds.count("xy"),
        czphi_gates=n_czphi,
    )


def evolution_unitary(plan: TrotterPlan) -> np.ndarray:
    """Dense unitary of the plan, computed as a power of one compiled step."""
    if plan.method == "xy":
        block, reps, rest = circuit_unitary(build_xy_step(plan.params, plan.dt)), plan.n_steps, None
    elif not plan.optimize_pairs:
        block, reps, rest = circuit_unitary(build_cz_step(plan.params, plan.dt)), plan.n_steps, None
    else:
        pair = Circuit.concat(
            [build_cz_step(plan.params, plan.dt, p, optimize=True) for p in ("odd", "even")], N_SYSTEM
        )
        block, reps = circuit_unitary(pair), plan.n_steps // 2
        rest = circuit_unitary(build_cz_step(plan.params, plan.dt)) if plan.n_steps % 2 else None
    out = np.linalg.matrix_power(block, reps)
    return rest @ out if rest is not None else out


def fidelity(a: StateVector, b: StateVector) -> float:
    """``|<a|b>|^2``."""
    return abs(inner_product(a, b)) ** 2


def phase_insensitive_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``1 - |tr(a^dag b)| / dim``; zero iff the unitaries agree up to a phase."""
    return 1.0 - abs(np.trace(a.conj().T @ b)) / a.shape[0]


def operator_error(approx: np.ndarray, exact: np.ndarray) -> float:
    """Spectral-norm distance ``min_theta ||approx - exp(i theta) exact||_2``.

    The phase is the one maximizing ``Re[e^{-i theta} tr(exact^dag approx)]``
    and is then refined by a bounded scalar search.
    """
    from scipy.optimize import minimize_scalar

    overlap = np.trace(exact.conj().T @ approx)
    theta0 = float(np.angle(overlap))

    def err(theta):
        return np.linalg.norm(approx - np.exp(1j * theta) * exact, 2)

    res = minimize_scalar(err, bounds=(theta0 - 0.5, theta0 + 0.5), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(res.fun, err(theta0)))


def particle_excited_state(params: SiamParams, spin: str = "down") -> StateVector:
    """Normalized ``c^dag_{1, spin} |GS>``, the state probed by the Green function."""
    ground, _ = ground_state(params)
    psi = jw_creation_operator(1, spin) @ ground.amplitudes
    return StateVector(psi / np.linalg.norm(psi), N_SYSTEM)


def fidelity_series(params: SiamParams, tau_max: float, n_steps: int, method: str,
                    optimize_pairs: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """State fidelity of Trotterized against exact evolution of ``c^dag |GS>``.

    Samples ``tau_k = k tau_max / n_steps`` for ``k = 0 .. n_steps`` with
    ``k`` steps of fixed size at ``tau_k``. With ``optimize_pairs`` the CZ
    evolution uses optimized (odd, even) pairs and a trailing plain step at
    odd ``k``.
    """
    psi0 = particle_excited_state(params)
    if tau_max == 0:
        return np.zeros(1), np.ones(1)
    dt = tau_max / n_steps
    times = np.arange(n_steps + 1) * dt
    step = evolution_unitary(TrotterPlan(method, 1, dt, params))
    pair = evolution_unitary(TrotterPlan(method, 2, 2 * dt, params, optimize_pairs)) if optimize_pairs else None
    out = np.empty(n_steps + 1)
    psi = psi0.amplitudes
    paired = psi0.amplitudes
    for k, tau in enumerate(times):
        if k:
            psi = step @ psi
        if pair is not None:
            if k and k % 2 == 0:
                paired = pair @ paired
            approx = paired if k % 2 == 0 else step @ paired
        else:
            approx = psi
        exact = exact_propagator(params, tau) @ psi0.amplitudes
        out[k] = fidelity(StateVector(exact, N_SYSTEM), StateVector(approx, N_SYSTEM))
    return times, out
