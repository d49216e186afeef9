import numpy as np
import pytest

from qdmft import oracles
from qdmft.errors import DegenerateGroundStateError, DomainError
from qdmft.interferometry import (
    GreenSeries,
    RamseyTermSpec,
    direct_term,
    evolution_for,
    greater_green,
    lesser_green,
    measure_filling,
    measure_green_series,
    ramsey_term,
    retarded_igr,
    sample_shots,
    steps_for_time,
    time_grid,
)
from qdmft.params import SiamParams
from qdmft.qsim import Circuit, expectation_pauli, rx
from qdmft.siam import exact_propagator, ground_state, lehmann_poles, number_operator
from qdmft.trotter import TrotterPlan, build_evolution

HALF_FILLED = [SiamParams.half_filled(u, v) for u, v in ((0.0, 1.0), (1.0, 0.98), (4.0, 1.0), (5.0, 0.55), (8.0, 0.5))]


def n_down(ground):
    psi = ground.amplitudes
    return float(np.vdot(psi, number_operator(1, "down") @ psi).real)


# --- single interferometer runs -------------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(DomainError):
        RamseyTermSpec("z", "x", 0.0, np.eye(16))


def test_pauli_squares_to_identity(fig_params):
    g, _ = ground_state(fig_params)
    assert ramsey_term(RamseyTermSpec("x", "x", 0.0, np.eye(16)), g) == pytest.approx(1, abs=1e-14)


def test_xy_product_reads_z():
    p = SiamParams(4, 1, 0.5, 1)
    g, _ = ground_state(p)
    f = ramsey_term(RamseyTermSpec("x", "y", 0.0, np.eye(16)), g)
    assert f == pytest.approx(1j * expectation_pauli(g, "z", 0), abs=1e-14)


def test_ramsey_matches_direct_matrix_element(fig_params):
    g, _ = ground_state(fig_params)
    u = exact_propagator(fig_params, 1.0)
    for a in "xy":
        for b in "xy":
            f = ramsey_term(RamseyTermSpec(a, b, 1.0, u), g)
            assert abs(f - oracles.direct_matrix_element(a, b, u, g.amplitudes)) <= 1e-10
            assert abs(f - direct_term(a, b, u, g)) <= 1e-10


def test_oracle_equivalence_random_draws(rng):
    checked = 0
    while checked < 50:
        p = SiamParams(rng.uniform(0, 8), rng.uniform(-1, 5), rng.uniform(-1, 1), rng.uniform(0.2, 2))
        tau = rng.uniform(0, 6)
        try:
            g, _ = ground_state(p)
        except DegenerateGroundStateError:
            continue  # spin doublets away from half filling
        checked += 1
        u = exact_propagator(p, tau)
        a, b = rng.choice(["x", "y"], 2)
        assert abs(ramsey_term(RamseyTermSpec(a, b, tau, u), g) - direct_term(a, b, u, g)) <= 1e-10


def test_circuit_evolution_accepted(fig_params):
    g, _ = ground_state(fig_params)
    circuit = build_evolution(TrotterPlan("xy", 3, 0.9, fig_params))
    dense = circuit.unitary()
    assert retarded_igr(circuit, g) == pytest.approx(retarded_igr(dense, g), abs=1e-12)


def test_evolution_touching_ancilla_rejected(fig_params):
    g, _ = ground_state(fig_params)
    with pytest.raises(DomainError):
        ramsey_term(RamseyTermSpec("x", "x", 0.1, Circuit((rx(4, 0.1),), 5)), g)


# --- greater and lesser functions ----------------------------------------------------------------


@pytest.mark.parametrize("p", [SiamParams(4, 2, 0, 1), SiamParams(3, 1, 0.4, 0.7)])
def test_equal_time_values(p):
    g, _ = ground_state(p)
    n = n_down(g)
    eye = np.eye(16)
    assert greater_green(0.0, eye, g) == pytest.approx(-1j * (1 - n), abs=1e-12)
    assert lesser_green(0.0, eye, g) == pytest.approx(1j * n, abs=1e-12)


def test_noninteracting_greater():
    p = SiamParams(0, 0, 0, 1)
    g, _ = ground_state(p)
    for tau in (0.3, 1.7, 4.2):
        got = greater_green(tau, exact_propagator(p, tau), g)
        assert got == pytest.approx(-0.5j * np.exp(-1j * p.v * tau), abs=1e-12)


@pytest.mark.parametrize("p", [SiamParams(4, 2, 0, 1), SiamParams(3, 1, 0.4, 0.7)])
def test_greater_and_lesser_match_lehmann(p):
    g, _ = ground_state(p)
    poles = lehmann_poles(p)
    for tau in np.linspace(0, 6, 13):
        u = exact_propagator(p, tau)
        gt = -1j * sum(a * np.exp(-1j * w * tau) for w, a in poles["particle"])
        lt = 1j * sum(a * np.exp(1j * w * tau) for w, a in poles["hole"])
        assert abs(greater_green(tau, u, g) - gt) <= 1e-8
        assert abs(lesser_green(tau, u, g) - lt) <= 1e-8


def test_retarded_matches_fock_oracle():
    p = SiamParams(3, 1, 0.4, 0.7)
    s = measure_green_series(p, 6.0, 24, "exact")
    assert np.max(np.abs(s.values - oracles.exact_igr(p, s.times))) <= 1e-10


# --- series ----------------------------------------------------------------------------------------


def test_time_grid_and_step_counts():
    assert np.allclose(time_grid(6.0, 24), np.arange(25) * 0.25)
    assert time_grid(0.0, 5).tolist() == [0.0]
    assert [steps_for_time(t, 6.0, 24) for t in (0.0, 0.25, 3.0, 6.0)] == [1, 1, 12, 24]
    with pytest.raises(DomainError):
        time_grid(6.0, 0)


def test_evolution_for_uses_constant_step(fig_params):
    u = evolution_for(fig_params, 1.5, "xy", 6)
    ref = np.linalg.matrix_power(oracles.trotter_step_reference(fig_params, 0.25), 6)
    assert np.allclose(u, ref, atol=1e-12)
    with pytest.raises(DomainError):
        evolution_for(fig_params, 1.0, "qft")


@pytest.mark.parametrize("method", ["xy", "cz", "exact"])
@pytest.mark.parametrize("p", HALF_FILLED, ids=lambda p: f"u{p.u}")
def test_sum_rule_and_reality(method, p):
    s = measure_green_series(p, 6.0, 24, method, 24)
    assert abs(s.values[0] - 1) <= 1e-8
    assert np.max(np.abs(s.values.imag)) <= 1e-8


def test_sum_rule_away_from_half_filling():
    s = measure_green_series(SiamParams(3, 1, 0.4, 0.7), 6.0, 12, "xy", 12)
    assert abs(s.values[0] - 1) <= 1e-12


def test_exact_series_is_cosine_sum(fig_params):
    s = measure_green_series(fig_params, 6.0, 24, "exact")
    f = oracles.lehmann_fit(fig_params)
    ref = 2 * (f.alpha1 * np.cos(f.omega1 * s.times) + f.alpha2 * np.cos(f.omega2 * s.times))
    assert np.max(np.abs(s.values - ref)) <= 1e-8


def test_xy_series_deviation_observed_bound(fig_params):
    """Trotter error of the N = 24 series, and its reduction at N = 48."""
    exact = measure_green_series(fig_params, 6.0, 24, "exact").values
    d24 = np.max(np.abs(measure_green_series(fig_params, 6.0, 24, "xy", 24).values - exact))
    d48 = np.max(np.abs(measure_green_series(fig_params, 6.0, 24, "xy", 48).values - exact))
    assert d24 <= 0.06
    assert d48 <= d24 / 3


@pytest.mark.xfail(strict=True, reason="the N = 24 XY series deviates from exact by up to 0.057")
def test_xy_series_within_005_of_exact(fig_params):
    exact = measure_green_series(fig_params, 6.0, 24, "exact").values
    xy = measure_green_series(fig_params, 6.0, 24, "xy", 24).values
    assert np.max(np.abs(xy - exact)) <= 0.05


@pytest.mark.parametrize("method", ["xy", "exact"])
def test_spin_symmetry(method, fig_params):
    up = measure_green_series(fig_params, 6.0, 24, method, 24, spin="up")
    down = measure_green_series(fig_params, 6.0, 24, method, 24, spin="down")
    assert np.max(np.abs(up.values - down.values)) <= 1e-8


def test_decoupled_impurity_rejected():
    with pytest.raises(DegenerateGroundStateError):
        measure_green_series(SiamParams(8, 4, 0, 0), 6.0, 24, "exact")


def test_series_serialization_round_trip(fig_params):
    s = measure_green_series(fig_params, 6.0, 12, "xy", 12)
    back = GreenSeries.from_json(s.to_json())
    assert np.array_equal(back.values, s.values) and back.params == fig_params and back.n_steps_per_time == 12
    text = s.to_csv()
    assert text.splitlines()[0] == "tau,re_igr,im_igr" and "\r" not in text
    assert np.array_equal(GreenSeries.from_csv(text).values, s.values)


@pytest.mark.parametrize("times", [[0.0, 0.5, 0.5], [0.1, 0.2], [[0.0, 1.0]]])
def test_series_validation(times):
    with pytest.raises(DomainError):
        GreenSeries(np.asarray(times), np.zeros(np.shape(times)), "exact", None)


# --- fillings ----------------------------------------------------------------------------------


def test_half_filling_occupation(fig_params):
    assert measure_filling(fig_params) == pytest.approx(1.0, abs=1e-10)


def test_deep_potential_fills_impurity():
    # each spin sector is a two-level problem: n = 1 + mu / sqrt(mu^2 + 4 V^2)
    for mu in (5.0, 100.0, 1e4):
        expected = 1 + mu / np.sqrt(mu**2 + 4)
        assert measure_filling(SiamParams(0, mu, 0, 1)) == pytest.approx(expected, abs=1e-10)
    assert measure_filling(SiamParams(0, 1e4, 0, 1)) == pytest.approx(2.0, abs=1e-6)


@pytest.mark.xfail(strict=True, reason="hybridization leaves 2 V^2 / mu^2 = 2e-4 of the impurity empty at mu = 100")
def test_deep_potential_within_1e_6_at_mu_100():
    assert measure_filling(SiamParams(0, 100, 0, 1)) == pytest.approx(2.0, abs=1e-6)


def test_filling_matches_oracle():
    p = SiamParams(4, 1, 0.5, 1)
    assert measure_filling(p) == pytest.approx(oracles.fock_filling(p), abs=1e-10)


# --- shot noise --------------------------------------------------------------------------------


def test_deterministic_outcomes():
    assert sample_shots(1.0, 17, 3) == 1.0
    assert sample_shots(-1.0, 17, 3) == -1.0


def test_large_sample_is_unbiased():
    assert abs(sample_shots(0.0, 10**6, 12345)) < 0.005


def test_shot_mean_converges():
    shots = 400
    for e in (-0.6, 0.1, 0.85):
        mean = np.mean([sample_shots(e, shots, s) for s in range(100)])
        assert abs(mean - e) <= 4 / np.sqrt(100 * shots)


def test_shot_domain():
    with pytest.raises(DomainError):
        sample_shots(1.5, 10, 0)
    with pytest.raises(DomainError):
        sample_shots(0.0, 0, 0)


def test_noisy_series_reproducible(fig_params):
    a = measure_green_series(fig_params, 6.0, 12, "xy", 12, shots=1000, seed=7)
    b = measure_green_series(fig_params, 6.0, 12, "xy", 12, shots=1000, seed=7)
    c = measure_green_series(fig_params, 6.0, 12, "xy", 12, shots=1000, seed=8)
    clean = measure_green_series(fig_params, 6.0, 12, "xy", 12)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    # each value combines eight +-1 estimates with weight 1/4
    assert np.max(np.abs(a.values - clean.values)) <= 5 * np.sqrt(8) / 4 / np.sqrt(1000)
