"""Acceptance criteria as runnable checks.

Each check returns a :class:`CriterionResult`; the test suite and the
``selftest`` command both run them from here.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import oracles
from .analysis import (
    FrequencyGrid,
    dyson_self_energy,
    fit_two_cosine,
    self_energy_poles,
    spectral_function,
    synthetic_series,
)
from .dmft import DmftConfig, run, sweep_z
from .interferometry import RamseyTermSpec, measure_green_series, ramsey_term
from .params import PoleFit, SiamParams
from .qsim import StateVector, circuit_unitary
from .siam import (
    build_fermionic_hamiltonian,
    build_spin_hamiltonian,
    exact_propagator,
    jw_annihilation_operator,
    jw_creation_operator,
)
from .trotter import (
    TrotterPlan,
    count_gates,
    evolution_unitary,
    fidelity_series,
    operator_error,
    phase_insensitive_distance,
    zz_from_czphi,
)

FIG_PARAMS = SiamParams(u=4.0, mu=2.0, epsilon_c=0.0, v=1.0)
HALF_FILLED_SETS = ((0.0, 1.0), (1.0, 0.98), (2.0, 0.94), (4.0, 1.0), (5.0, 0.55), (8.0, 0.5))
MOTT_SWEEP = (0.1,) + tuple(np.arange(1, 17) * 0.5)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d}: {self.title} ({self.detail}; {self.seconds:.1f} s)"


def _timed(number: int, title: str, fn: Callable[[], tuple[bool, str]]) -> CriterionResult:
    start = time.perf_counter()
    passed, detail = fn()
    return CriterionResult(number, title, bool(passed), detail, time.perf_counter() - start)


def fidelity_floor() -> CriterionResult:
    def check():
        start = time.perf_counter()
        _, f = fidelity_series(FIG_PARAMS, 6.0, 24, "xy")
        elapsed = time.perf_counter() - start
        return f.min() >= 0.99 and elapsed < 5.0, f"min F_XY = {f.min():.5f}, {elapsed:.2f} s"

    return _timed(1, "XY fidelity floor at N=24", check)


def method_ordering() -> CriterionResult:
    def check():
        worst = math.inf
        for n in (6, 12, 18, 24):
            _, fx = fidelity_series(FIG_PARAMS, 6.0, n, "xy")
            _, fc = fidelity_series(FIG_PARAMS, 6.0, n, "cz")
            worst = min(worst, float(np.min(fx - fc)))
        return worst >= -1e-9, f"min(F_XY - F_CZ) = {worst:.2e}"

    return _timed(2, "XY vs CZ fidelity ordering", check)


def trotter_scaling() -> CriterionResult:
    def check():
        exact = exact_propagator(FIG_PARAMS, 6.0)
        errs = {n: operator_error(evolution_unitary(TrotterPlan("xy", n, 6.0, FIG_PARAMS)), exact) for n in (24, 48, 96)}
        ratios = [errs[24] / errs[48], errs[48] / errs[96]]
        ok = all(1.6 <= r <= 2.4 for r in ratios)
        return ok, "ratios " + ", ".join(f"{r:.3f}" for r in ratios)

    return _timed(3, "first-order Trotter scaling", check)


def interferometry_oracle(n_draws: int = 50, seed: int = 2024) -> CriterionResult:
    def check():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_draws):
            p = SiamParams(rng.uniform(0, 8), rng.uniform(-2, 6), rng.uniform(-2, 2), rng.uniform(0.1, 2))
            tau = rng.uniform(0, 6)
            alpha, beta = rng.choice(["x", "y"], size=2)
            _, vecs = np.linalg.eigh(oracles.spin_hamiltonian(p))
            ground = vecs[:, 0]
            u_mat = oracles.expm_propagator(p, tau)
            got = ramsey_term(RamseyTermSpec(str(alpha), str(beta), tau, u_mat), StateVector(ground, 4))
            want = oracles.direct_matrix_element(str(alpha), str(beta), u_mat, ground)
            worst = max(worst, abs(got - want))
        return worst <= 1e-10, f"max |F_anc - F_direct| = {worst:.2e} over {n_draws} draws"

    return _timed(4, "ancilla readout equals direct matrix element", check)


def jordan_wigner_algebra() -> CriterionResult:
    def check():
        modes = [(s, sp) for sp in ("down", "up") for s in (1, 2)]
        c = [jw_annihilation_operator(*m) for m in modes]
        cd = [jw_creation_operator(*m) for m in modes]
        eye = np.eye(16)
        worst, count = 0.0, 0
        for i, j in itertools.combinations_with_replacement(range(4), 2):
            for a, b in ((c[i], c[j]), (cd[i], cd[j])):
                worst = max(worst, np.abs(a @ b + b @ a).max())
                count += 1
        for i, j in itertools.product(range(4), repeat=2):
            ac = c[i] @ cd[j] + cd[j] @ c[i]
            worst = max(worst, np.abs(ac - (i == j) * eye).max())
            count += 1
        rng = np.random.default_rng(7)
        h_worst = 0.0
        for _ in range(10):
            p = SiamParams(rng.uniform(0, 8), rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 2))
            diff = build_fermionic_hamiltonian(p) - build_spin_hamiltonian(p)
            shift = np.trace(diff).real / 16
            h_worst = max(h_worst, np.abs(diff - shift * eye).max())
        ok = count == 36 and worst <= 1e-12 and h_worst <= 1e-12
        return ok, f"{count} anticommutators, max dev {worst:.1e}; Hamiltonian dev {h_worst:.1e}"

    return _timed(5, "Jordan-Wigner algebra and Hamiltonian mapping", check)


def czphi_decomposition(n_draws: int = 100, seed: int = 11) -> CriterionResult:
    def check():
        rng = np.random.default_rng(seed)
        zz = np.diag([1, -1, -1, 1]).astype(complex)
        worst = 0.0
        for phi in rng.uniform(-2 * math.pi, 2 * math.pi, n_draws):
            target = np.diag(np.exp(-0.5j * phi * np.diag(zz)))
            got = circuit_unitary(zz_from_czphi(phi))
            phase = np.vdot(target, got)
            phase /= abs(phase)
            worst = max(worst, np.abs(got - phase * target).max(), phase_insensitive_distance(got, target))
        return worst <= 1e-12, f"max deviation {worst:.1e} over {n_draws} angles"

    return _timed(6, "ZZ from two CZ-phi gates", check)


def gate_counts() -> CriterionResult:
    def check():
        one = count_gates(TrotterPlan("cz", 1, 0.25, FIG_PARAMS))
        pair = count_gates(TrotterPlan("cz", 2, 0.5, FIG_PARAMS, optimize_pairs=True))
        got = (one.zz_gates, one.swap_gates, one.single_qubit_rotations,
               pair.zz_gates, pair.swap_gates, pair.single_qubit_rotations)
        return got == (5, 2, 20, 10, 4, 32), f"step {got[:3]}, optimized pair {got[3:]}"

    return _timed(7, "CZ gate counts", check)


def _exact_sigma_pole() -> float:
    """Positive zero of the exact Green function between its two poles."""
    fit = oracles.lehmann_fit(FIG_PARAMS)
    g = lambda w: sum(a * (1 / (w - p) + 1 / (w + p)) for a, p in zip(fit.alphas, fit.omegas))  # noqa: E731
    eps = 1e-9
    return brentq(g, fit.omega1 + eps, fit.omega2 - eps, xtol=1e-14)


def self_energy_pole_accuracy() -> CriterionResult:
    def check():
        start = time.perf_counter()
        series = measure_green_series(FIG_PARAMS, 6.0, 24, "xy", 24)
        fit = fit_two_cosine(series)
        poles = self_energy_poles(fit, FIG_PARAMS)
        elapsed = time.perf_counter() - start
        exact = _exact_sigma_pole()
        got = max(poles.positions)
        rel = abs(got - exact) / exact
        ok = rel <= 0.03 and min(poles.positions) == -got and elapsed < 30
        return ok, f"pole {got:.4f} vs exact {exact:.4f}, rel err {rel:.2%}, {elapsed:.2f} s"

    return _timed(8, "self-energy pole positions", check)


def insulating_point() -> CriterionResult:
    def check():
        details, ok = [], True
        grid = FrequencyGrid.default(eta=0.0)
        want = oracles.insulating_spectral(8.0, grid.omegas)
        for method in ("exact", "xy"):
            res = run(DmftConfig(8.0, method=method, accelerate=True))
            params = SiamParams.half_filled(8.0, 0.0)
            se = dyson_self_energy(res.final_fit, params, grid, allow_poles=True)
            got = spectral_function(se, params)
            support = want > 0
            rel = float(np.max(np.abs(got[support] - want[support]) / want[support]))
            outside = float(np.max(np.abs(got[~support]))) if np.any(~support) else 0.0
            good = res.phase == "insulating" and res.v_final == 0 and res.z_final == 0 and rel <= 1e-6 and outside == 0
            ok &= good
            details.append(f"{method}: {res.phase} after {res.iterations} it, rel err {rel:.1e}")
        return ok, "; ".join(details)

    return _timed(9, "insulating solution at U=8", check)


def mott_transition() -> CriterionResult:
    def check():
        start = time.perf_counter()
        exact = sweep_z(DmftConfig(1.0, method="exact", accelerate=True), MOTT_SWEEP)
        z = np.array([r.z_final for r in exact])
        u = np.array(MOTT_SWEEP)
        monotone = bool(np.all(np.diff(z) <= 1e-9))
        weak = z[0] >= 0.99
        gapped = bool(np.all(z[u >= 6] == 0))

        errors = {}
        for n in (24, 48):
            u_list = (1.0, 2.0, 3.0, 4.0, 5.0) if n == 24 else (4.0, 5.0)
            res = sweep_z(DmftConfig(1.0, method="xy", n_steps=n, accelerate=True), u_list)
            for uu, r in zip(u_list, res):
                errors[n, uu] = abs(r.z_final - oracles.dmft_fixed_point(uu)[0])
        within = all(errors[24, uu] <= 0.05 for uu in (1.0, 2.0, 3.0, 4.0, 5.0))
        refine = all(errors[48, uu] <= errors[24, uu] for uu in (4.0, 5.0))
        elapsed = time.perf_counter() - start
        ok = monotone and weak and gapped and within and refine and elapsed < 600
        worst = max(errors[24, uu] for uu in (1.0, 2.0, 3.0, 4.0, 5.0))
        detail = (f"Z(0.1)={z[0]:.4f}, monotone={monotone}, Z=0 for U>=6: {gapped}, "
                  f"max |Z_XY24 - Z_exact| = {worst:.4f}, N=48 errors "
                  f"{errors[48, 4.0]:.4f}/{errors[48, 5.0]:.4f} vs N=24 {errors[24, 4.0]:.4f}/{errors[24, 5.0]:.4f}, "
                  f"{elapsed:.0f} s")
        return ok, detail

    return _timed(10, "Mott transition in the Z(U) sweep", check)


def sum_rule_and_reality() -> CriterionResult:
    def check():
        worst_sum, worst_im = 0.0, 0.0
        for (u, v), method in itertools.product(HALF_FILLED_SETS, ("xy", "cz", "exact")):
            s = measure_green_series(SiamParams.half_filled(u, v), 6.0, 24, method, 24)
            worst_sum = max(worst_sum, abs(s.values[0] - 1))
            worst_im = max(worst_im, float(np.max(np.abs(s.values.imag))))
        ok = worst_sum <= 1e-8 and worst_im <= 1e-8
        return ok, f"max |iG(0) - 1| = {worst_sum:.1e}, max |Im iG| = {worst_im:.1e}"

    return _timed(11, "Green-function sum rule and reality", check)


def random_pole_fit(rng: np.random.Generator, omega_max: float = 6.0, min_gap: float = 0.1) -> PoleFit:
    a1 = rng.uniform(0.02, 0.48)
    while True:
        w1, w2 = np.sort(rng.uniform(0, omega_max, 2))
        if w2 - w1 > min_gap:
            return PoleFit(a1, float(w1), 0.5 - a1, float(w2))


def fit_round_trip(n_draws: int = 100, seed: int = 5) -> CriterionResult:
    def check():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_draws):
            ref = random_pole_fit(rng)
            got = fit_two_cosine(synthetic_series(ref))
            worst = max(worst, *(abs(x - y) for x, y in zip(got.alphas + got.omegas, ref.alphas + ref.omegas)))
        return worst <= 1e-6, f"max parameter error {worst:.1e} over {n_draws} fits"

    return _timed(12, "two-cosine fit round trip", check)


CRITERIA = {
    1: fidelity_floor,
    2: method_ordering,
    3: trotter_scaling,
    4: interferometry_oracle,
    5: jordan_wigner_algebra,
    6: czphi_decomposition,
    7: gate_counts,
    8: self_energy_pole_accuracy,
    9: insulating_point,
    10: mott_transition,
    11: sum_rule_and_reality,
    12: fit_round_trip,
}


def run_all(numbers=None) -> list[CriterionResult]:
    return [CRITERIA[n]() for n in (numbers or sorted(CRITERIA))]
