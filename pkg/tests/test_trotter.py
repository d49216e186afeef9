import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdmft import oracles
from qdmft.errors import DomainError
from qdmft.params import SiamParams
from qdmft.qsim import PAULI, Circuit, StateVector, apply_circuit, circuit_unitary, gate_matrix, init_basis_state, rx, ry
from qdmft.siam import exact_propagator
from qdmft.trotter import (
    GateCount,
    TrotterPlan,
    build_cz_step,
    build_evolution,
    build_xy_step,
    count_gates,
    evolution_unitary,
    fidelity,
    fidelity_series,
    operator_error,
    phase_insensitive_distance,
    zz_from_czphi,
)

from conftest import random_state

ZZ = np.kron(PAULI["z"], PAULI["z"])


def zz_exact(phi):
    return np.diag(np.exp(-0.5j * phi * np.diag(ZZ)))


# --- single steps --------------------------------------------------------------------------


@pytest.mark.parametrize("builder", [build_xy_step, build_cz_step])
def test_zero_time_step_is_identity(builder, fig_params):
    assert np.allclose(circuit_unitary(builder(fig_params, 0.0)), np.eye(16), atol=1e-12)


def test_noninteracting_step_has_only_hopping():
    step = build_xy_step(SiamParams(0, 0, 0, 1), 0.3)
    assert [g.kind for g in step] == ["xy", "xy"]
    assert [g.targets for g in step] == [(0, 1), (2, 3)]


@pytest.mark.parametrize("p", [SiamParams(4, 2, 0, 1), SiamParams(3, 0.4, -0.7, 0.6)])
def test_xy_step_matches_term_exponentials(p):
    u = circuit_unitary(build_xy_step(p, 0.25))
    assert np.max(np.abs(u - oracles.trotter_step_reference(p, 0.25))) <= 1e-12


def test_xy_step_on_basis_state(fig_params):
    psi = init_basis_state(4, 0b0101)
    out = apply_circuit(psi, build_xy_step(fig_params, 0.25))
    ref = oracles.trotter_step_reference(fig_params, 0.25) @ psi.amplitudes
    assert np.max(np.abs(out.amplitudes - ref)) <= 1e-10


def test_cz_step_equals_xy_step_up_to_phase(fig_params):
    a = circuit_unitary(build_cz_step(fig_params, 0.25))
    b = circuit_unitary(build_xy_step(fig_params, 0.25))
    assert phase_insensitive_distance(a, b) <= 1e-10


@pytest.mark.parametrize("p", [SiamParams(4, 2, 0, 1), SiamParams(2, 0.3, 0.5, 0.9)])
def test_optimized_pair_is_mirrored_product(p):
    """The (odd, even) pair runs the diagonal factor on both ends: D H H D."""
    dt = 0.25
    pair = Circuit.concat([build_cz_step(p, dt, par, optimize=True) for par in ("odd", "even")], 4)
    assert phase_insensitive_distance(circuit_unitary(pair), oracles.trotter_pair_reference(p, dt)) <= 1e-10


@pytest.mark.xfail(strict=True, reason="the mirrored pair D H H D is not H D H D; the factors do not commute")
def test_optimized_pair_equals_two_plain_steps(fig_params):
    dt = 0.25
    pair = Circuit.concat([build_cz_step(fig_params, dt, par, optimize=True) for par in ("odd", "even")], 4)
    plain = circuit_unitary(build_cz_step(fig_params, dt))
    assert phase_insensitive_distance(circuit_unitary(pair), plain @ plain) <= 1e-10


def test_optimized_pair_matches_two_plain_steps_when_terms_commute():
    p = SiamParams(0, 0, 0, 1)
    dt = 0.4
    pair = Circuit.concat([build_cz_step(p, dt, par, optimize=True) for par in ("odd", "even")], 4)
    plain = circuit_unitary(build_cz_step(p, dt))
    assert phase_insensitive_distance(circuit_unitary(pair), plain @ plain) <= 1e-12


def test_cz_step_gate_alphabet(fig_params):
    kinds = {g.kind for g in build_cz_step(fig_params, 0.25)}
    assert kinds <= {"rx", "ry", "rz", "czphi", "swap"}


def test_negative_dt_rejected(fig_params):
    with pytest.raises(DomainError):
        build_xy_step(fig_params, -0.1)
    with pytest.raises(DomainError):
        build_cz_step(fig_params, 0.1, parity="sideways")


# --- CZ-phi decomposition and basis rotations ------------------------------------------------------


def test_zz_from_czphi_structure():
    c = zz_from_czphi(0.3)
    assert [g.kind for g in c] == ["rx", "czphi", "rx", "rx", "czphi", "rx"]


def test_zz_from_czphi_zero_angle():
    assert abs(np.trace(circuit_unitary(zz_from_czphi(0.0)))) / 4 == pytest.approx(1, abs=1e-12)


def test_zz_from_czphi_pi():
    u = circuit_unitary(zz_from_czphi(math.pi))
    assert phase_insensitive_distance(u, np.diag([1, -1, -1, 1])) <= 1e-12


def test_zz_from_czphi_random_angles(rng):
    for phi in rng.uniform(-2 * np.pi, 2 * np.pi, 100):
        u = circuit_unitary(zz_from_czphi(phi))
        assert abs(abs(np.trace(u.conj().T @ zz_exact(phi))) / 4 - 1) <= 1e-12


def test_basis_rotation_identities():
    # single-qubit forms
    ry_p, ry_m = gate_matrix(ry(0, math.pi / 2)), gate_matrix(ry(0, -math.pi / 2))
    rx_p, rx_m = gate_matrix(rx(0, math.pi / 2)), gate_matrix(rx(0, -math.pi / 2))
    assert np.allclose(ry_p @ PAULI["z"] @ ry_m, PAULI["x"], atol=1e-12)
    assert np.allclose(rx_m @ PAULI["z"] @ rx_p, PAULI["y"], atol=1e-12)
    # two-qubit forms: XX and YY from ZZ
    assert np.allclose(np.kron(ry_p, ry_p) @ ZZ @ np.kron(ry_m, ry_m),
                       np.kron(PAULI["x"], PAULI["x"]), atol=1e-12)
    assert np.allclose(np.kron(rx_m, rx_m) @ ZZ @ np.kron(rx_p, rx_p),
                       np.kron(PAULI["y"], PAULI["y"]), atol=1e-12)


# --- full evolutions -----------------------------------------------------------------------------


@pytest.mark.parametrize("method", ["xy", "cz"])
def test_zero_time_evolution(method, fig_params):
    u = circuit_unitary(build_evolution(TrotterPlan(method, 1, 0.0, fig_params)))
    assert phase_insensitive_distance(u, np.eye(16)) <= 1e-12


@pytest.mark.parametrize("method", ["xy", "cz"])
@pytest.mark.parametrize("p", [SiamParams(0, 0, 0, 1), SiamParams(0, 0.6, -0.6, 1.3), SiamParams(8, 4, 0, 0)])
def test_commuting_terms_have_no_trotter_error(method, p):
    """U = 0 with equal site energies, and the V = 0 insulating point."""
    u = evolution_unitary(TrotterPlan(method, 3, 2.5, p))
    assert phase_insensitive_distance(u, exact_propagator(p, 2.5)) <= 1e-10


@pytest.mark.parametrize("method, optimize", [("xy", False), ("cz", False), ("cz", True)])
@pytest.mark.parametrize("n", [1, 4, 5])
def test_dense_unitary_matches_circuit(method, optimize, n, fig_params):
    plan = TrotterPlan(method, n, 1.3, fig_params, optimize)
    assert np.allclose(evolution_unitary(plan), circuit_unitary(build_evolution(plan)), atol=1e-12)


@pytest.mark.parametrize("method, optimize", [("xy", False), ("cz", False), ("cz", True)])
def test_evolutions_preserve_norm(method, optimize, fig_params, rng):
    circuit = build_evolution(TrotterPlan(method, 3, 1.0, fig_params, optimize))
    for _ in range(20):
        psi = StateVector(random_state(rng, 4))
        assert abs(apply_circuit(psi, circuit).norm - 1) <= 1e-9


def test_first_order_scaling(fig_params):
    exact = exact_propagator(fig_params, 6.0)
    err = {n: operator_error(evolution_unitary(TrotterPlan("xy", n, 6.0, fig_params)), exact) for n in (24, 48, 96, 192)}
    for n in (24, 48, 96):
        assert 1.6 <= err[n] / err[2 * n] <= 2.4


def test_operator_error_is_phase_blind(rng):
    q, _ = np.linalg.qr(rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16)))
    assert operator_error(np.exp(0.7j) * q, q) <= 1e-10
    assert phase_insensitive_distance(np.exp(-1.1j) * q, q) <= 1e-12


@pytest.mark.parametrize("plan_kwargs", [dict(method="zz", n_steps=1), dict(method="xy", n_steps=0),
                                         dict(method="xy", n_steps=1.5)])
def test_plan_domain(plan_kwargs, fig_params):
    with pytest.raises(DomainError):
        TrotterPlan(tau=1.0, params=fig_params, **plan_kwargs)
    with pytest.raises(DomainError):
        TrotterPlan("xy", 1, -1.0, fig_params)


# --- gate counts --------------------------------------------------------------------------------


def test_cz_gate_counts(fig_params):
    step = count_gates(TrotterPlan("cz", 1, 0.25, fig_params))
    assert (step.zz_gates, step.swap_gates, step.single_qubit_rotations) == (5, 2, 20)
    assert step.czphi_gates == 10 + 3 * 2
    pair = count_gates(TrotterPlan("cz", 2, 0.5, fig_params, optimize_pairs=True))
    assert (pair.zz_gates, pair.swap_gates, pair.single_qubit_rotations) == (10, 4, 32)


def test_cz_counts_do_not_depend_on_parameters():
    """Zero-angle gates are kept so every step has the same layout."""
    a = count_gates(TrotterPlan("cz", 1, 0.25, SiamParams(0, 0, 0, 1)))
    b = count_gates(TrotterPlan("cz", 1, 0.25, SiamParams(4, 1, 0.3, 1)))
    assert a == b


def test_xy_gate_counts_at_half_filling(fig_params):
    assert count_gates(TrotterPlan("xy", 1, 0.25, fig_params)) == GateCount(zz_gates=1, xy_gates=2)
    full = count_gates(TrotterPlan("xy", 3, 0.75, SiamParams(4, 1, 0.3, 1)))
    assert (full.xy_gates, full.zz_gates, full.single_qubit_rotations) == (6, 3, 12)


# --- fidelities ----------------------------------------------------------------------------------


def test_fidelity_examples(rng):
    psi = StateVector(random_state(rng, 4))
    assert fidelity(psi, psi) == pytest.approx(1, abs=1e-14)
    assert fidelity(init_basis_state(4, 0), init_basis_state(4, 3)) == 0


def test_fidelity_series_zero_time(fig_params):
    t, f = fidelity_series(fig_params, 0.0, 24, "xy")
    assert t.tolist() == [0.0] and f.tolist() == [1.0]


def test_fidelity_floor(fig_params):
    t, f = fidelity_series(fig_params, 6.0, 24, "xy")
    assert np.allclose(t, np.arange(25) * 0.25)
    assert f.min() >= 0.99
    assert f[0] == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("n", [6, 12, 18, 24])
def test_xy_at_least_as_faithful_as_cz(n, fig_params):
    _, fx = fidelity_series(fig_params, 6.0, n, "xy")
    _, fc = fidelity_series(fig_params, 6.0, n, "cz")
    assert np.all(fx >= fc - 1e-9)


@pytest.mark.parametrize("n", [6, 7])
def test_fidelity_series_with_optimized_pairs(n, fig_params):
    """Even sample points use whole pairs, odd ones a trailing plain step."""
    _, f = fidelity_series(fig_params, 3.0, n, "cz", optimize_pairs=True)
    exact = exact_propagator(fig_params, 3.0)
    from qdmft.trotter import particle_excited_state

    psi = particle_excited_state(fig_params).amplitudes
    u = evolution_unitary(TrotterPlan("cz", n, 3.0, fig_params, optimize_pairs=True))
    ref = abs(np.vdot(exact @ psi, u @ psi)) ** 2
    assert f[-1] == pytest.approx(ref, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 6), st.floats(0.3, 1.5), st.integers(1, 30))
def test_fidelity_is_a_probability(u, v, n):
    _, f = fidelity_series(SiamParams.half_filled(u, v), 2.0, n, "xy")
    assert np.all((f >= -1e-12) & (f <= 1 + 1e-12))
