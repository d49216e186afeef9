"""Exact classical treatment of the two-site Anderson impurity model.

Mode ordering on the four system qubits::

    qubit 0: impurity, spin down      qubit 2: impurity, spin up
    qubit 1: bath,     spin down      qubit 3: bath,     spin up

Creation operators carry Jordan-Wigner ``sigma^z`` strings on all lower
qubits, ``c^dag_q = Z_0 ... Z_{q-1} sigma^-_q`` with ``sigma^- = |1><0|``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGroundStateError, DomainError
from .params import PoleFit, SiamParams
from .qsim import StateVector, apply_matrix, pauli_string

N_SYSTEM = 4
DIM = 2**N_SYSTEM

SITES = (1, 2)
SPINS = ("down", "up")

DEGENERACY_RTOL = 1e-9
POLE_MERGE_TOL = 1e-9
WEIGHT_FLOOR = 1e-12

_LOWER = np.array([[0, 0], [1, 0]], dtype=complex)  # sigma^- = |1><0|


def mode_index(site: int, spin: str) -> int:
    """Qubit holding the fermionic mode ``(site, spin)``."""
    if site not in SITES:
        raise DomainError(f"site must be 1 or 2, got {site!r}")
    if spin not in SPINS:
        raise DomainError(f"spin must be 'down' or 'up', got {spin!r}")
    return (site - 1) + 2 * SPINS.index(spin)


def jw_creation_operator(site: int, spin: str) -> np.ndarray:
    """16x16 matrix of ``c^dag_{site, spin}``."""
    q = mode_index(site, spin)
    op = pauli_string({k: "z" for k in range(q)}, N_SYSTEM)
    lower = apply_matrix(np.eye(DIM, dtype=complex), _LOWER, (q,), N_SYSTEM)
    return lower @ op


def jw_annihilation_operator(site: int, spin: str) -> np.ndarray:
    return jw_creation_operator(site, spin).conj().T


def number_operator(site: int, spin: str) -> np.ndarray:
    c = jw_creation_operator(site, spin)
    return c @ c.conj().T


def build_spin_hamiltonian(p: SiamParams) -> np.ndarray:
    """Qubit Hamiltonian of the two-site SIAM with constant terms dropped."""
    z = lambda *qs: pauli_string({q: "z" for q in qs}, N_SYSTEM)  # noqa: E731
    hop = lambda a, b: pauli_string({a: "x", b: "x"}, N_SYSTEM) + pauli_string({a: "y", b: "y"}, N_SYSTEM)  # noqa: E731
    h = (p.u / 4) * (z(0, 2) - z(0) - z(2))
    h = h + (p.mu / 2) * (z(0) + z(2))
    h = h - (p.epsilon_c / 2) * (z(1) + z(3))
    h = h + (p.v / 2) * (hop(0, 1) + hop(2, 3))
    return h


def build_fermionic_hamiltonian(p: SiamParams) -> np.ndarray:
    """Second-quantized SIAM assembled from Jordan-Wigner operator products.

    Differs from :func:`build_spin_hamiltonian` by a multiple of the identity.
    """
    n = {(i, s): number_operator(i, s) for i in SITES for s in SPINS}
    h = p.u * n[1, "down"] @ n[1, "up"]
    for s in SPINS:
        h = h - p.mu * n[1, s] + p.epsilon_c * n[2, s]
        hop = jw_creation_operator(1, s) @ jw_annihilation_operator(2, s)
        h = h + p.v * (hop + hop.conj().T)
    return h


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending eigenvalues with orthonormal eigenvectors stored as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def state(self, j: int) -> StateVector:
        return StateVector(self.eigenvectors[:, j], N_SYSTEM)

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return vec * (abs(vec[k]) / vec[k])


def diagonalize(p: SiamParams) -> EigenSystem:
    evals, evecs = np.linalg.eigh(build_spin_hamiltonian(p))
    evecs = np.column_stack([_fix_phase(evecs[:, j]) for j in range(DIM)])
    return EigenSystem(evals, evecs)


def _check_nondegenerate(es: EigenSystem):
    gap = es.eigenvalues[1] - es.eigenvalues[0]
    scale = max(es.spectral_radius, 1e-300)
    if gap < DEGENERACY_RTOL * scale:
        raise DegenerateGroundStateError(
            f"ground state is degenerate (gap {gap:.3e}, spectral radius {scale:.3e})"
        )


def ground_state(p: SiamParams) -> tuple[StateVector, float]:
    """Unique ground state and its energy.

    The phase is fixed by making the largest-magnitude amplitude real and
    positive. Raises :class:`DegenerateGroundStateError` when the gap is below
    ``1e-9`` of the spectral radius, which always happens at ``v = 0``.
    """
    es = diagonalize(p)
    _check_nondegenerate(es)
    return es.state(0), float(es.eigenvalues[0])


def exact_propagator(p: SiamParams, tau: float) -> np.ndarray:
    """``exp(-i H tau)`` through the eigendecomposition of ``H``."""
    es = diagonalize(p)
    phases = np.exp(-1j * es.eigenvalues * tau)
    return (es.eigenvectors * phases) @ es.eigenvectors.conj().T


def _merge_poles(omegas, weights):
    order = np.argsort(omegas)
    merged: list[list[float]] = []
    for w, a in zip(omegas[order], weights[order]):
        if merged and abs(w - merged[-1][0]) < POLE_MERGE_TOL:
            merged[-1][1] += a
        else:
            merged.append([float(w), float(a)])
    return [(w, a) for w, a in merged if a > WEIGHT_FLOOR]


def lehmann_poles(p: SiamParams, spin: str = "down") -> dict[str, list[tuple[float, float]]]:
    """Excitation energies and weights of both Lehmann branches.

    Returns ``{"particle": [(omega_j, |<j|c^dag|GS>|^2), ...],
    "hole": [(omega_j, |<j|c|GS>|^2), ...]}`` with ``omega_j = E_j - E_GS``.
    """
    es = diagonalize(p)
    _check_nondegenerate(es)
    gs = es.eigenvectors[:, 0]
    omegas = es.eigenvalues - es.eigenvalues[0]
    cdag = jw_creation_operator(1, spin)
    vecs = es.eigenvectors.conj().T
    particle = np.abs(vecs @ (cdag @ gs)) ** 2
    hole = np.abs(vecs @ (cdag.conj().T @ gs)) ** 2
    return {"particle": _merge_poles(omegas, particle), "hole": _merge_poles(omegas, hole)}


def lehmann_green(p: SiamParams, spin: str = "down") -> PoleFit:
    """Exact residues and poles of the impurity Green function (particle branch).

    At most two nonnegative poles survive for the two-site model; a missing
    second pole is reported with zero residue.
    """
    poles = [(w, a) for w, a in lehmann_poles(p, spin)["particle"] if w >= -POLE_MERGE_TOL]
    if len(poles) > 2:
        raise DomainError(f"expected at most two particle poles, found {len(poles)}: {poles}")
    if not poles:
        return PoleFit(0.0, 0.0, 0.0, 0.0)
    if len(poles) == 1:
        (w, a), = poles
        return PoleFit.single_pole(a, w)
    (w1, a1), (w2, a2) = poles
    return PoleFit.canonical(a1, w1, a2, w2)


def impurity_filling(state: StateVector) -> float:
    """``<n_{1,down} + n_{1,up}>`` of a four-qubit state."""
    psi = state.amplitudes
    n = number_operator(1, "down") + number_operator(1, "up")
    return float(np.vdot(psi, n @ psi).real)


def ground_manifold_filling(p: SiamParams) -> float:
    """Impurity filling averaged over the (possibly degenerate) ground manifold.

    Away from half filling the ground state is often a spin doublet; both
    members share the same impurity filling because ``n_imp`` conserves
    ``S_z``, so the average is well defined.
    """
    es = diagonalize(p)
    scale = max(es.spectral_radius, 1e-300)
    members = np.flatnonzero(es.eigenvalues - es.eigenvalues[0] < DEGENERACY_RTOL * scale)
    return float(np.mean([impurity_filling(es.state(j)) for j in members]))
