"""Independent reference implementations used to check the main pipeline.

Nothing here goes through the circuit simulator or the Jordan-Wigner
matrices: the impurity model is diagonalized in an occupation-number basis
with explicit fermionic signs, propagators come from ``scipy.linalg.expm``,
and the two-site DMFT fixed point is found by root bracketing on an
analytic expression for ``Z``.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

from .params import PoleFit, SiamParams
from .qsim import pauli_string

# mode order for the Fock basis (deliberately not the qubit order)
MODES = (("imp", "up"), ("imp", "down"), ("bath", "up"), ("bath", "down"))
_STATES = list(itertools.product((0, 1), repeat=4))
_INDEX = {s: k for k, s in enumerate(_STATES)}


def _apply(op: str, mode: int, state: tuple[int, ...]):
    """``c^dag`` (op='+') or ``c`` (op='-') on an occupation tuple; returns (sign, state) or None."""
    occ = state[mode]
    if (op == "+" and occ) or (op == "-" and not occ):
        return None
    sign = -1 if sum(state[:mode]) % 2 else 1
    new = list(state)
    new[mode] = 1 - occ
    return sign, tuple(new)


def fock_operator(ops: list[tuple[str, int]]) -> np.ndarray:
    """Matrix of an operator product, rightmost applied first."""
    mat = np.zeros((16, 16))
    for s in _STATES:
        sign, cur = 1, s
        for op, mode in reversed(ops):
            out = _apply(op, mode, cur)
            if out is None:
                break
            sign *= out[0]
            cur = out[1]
        else:
            mat[_INDEX[cur], _INDEX[s]] += sign
    return mat


def fock_hamiltonian(p: SiamParams) -> np.ndarray:
    imp = {"up": 0, "down": 1}
    bath = {"up": 2, "down": 3}
    h = p.u * fock_operator([("+", 0), ("-", 0), ("+", 1), ("-", 1)])
    for s in ("up", "down"):
        h -= p.mu * fock_operator([("+", imp[s]), ("-", imp[s])])
        h += p.epsilon_c * fock_operator([("+", bath[s]), ("-", bath[s])])
        h += p.v * fock_operator([("+", imp[s]), ("-", bath[s])])
        h += p.v * fock_operator([("+", bath[s]), ("-", imp[s])])
    return h


def fock_lehmann(p: SiamParams):
    """``(particle, hole)`` lists of ``(omega, weight)`` for the spin-down impurity."""
    e, w = np.linalg.eigh(fock_hamiltonian(p))
    gs = w[:, 0]
    cdag = fock_operator([("+", 1)])
    part = np.abs(w.T @ cdag @ gs) ** 2
    hole = np.abs(w.T @ cdag.T @ gs) ** 2
    om = e - e[0]
    keep = lambda a: [(float(o), float(x)) for o, x in zip(om, a) if x > 1e-12]  # noqa: E731
    return keep(part), keep(hole)


def fock_filling(p: SiamParams) -> float:
    e, w = np.linalg.eigh(fock_hamiltonian(p))
    gs = w[:, 0]
    n = fock_operator([("+", 0), ("-", 0)]) + fock_operator([("+", 1), ("-", 1)])
    return float(gs @ n @ gs)


def exact_igr(p: SiamParams, times) -> np.ndarray:
    """``i G^R(tau)`` from the Lehmann sums."""
    part, hole = fock_lehmann(p)
    t = np.asarray(times, dtype=float)
    out = sum(wt * np.exp(-1j * om * t) for om, wt in part)
    return out + sum(wt * np.exp(1j * om * t) for om, wt in hole)


def lehmann_fit(p: SiamParams) -> PoleFit:
    """Particle-branch residues and poles merged into a :class:`PoleFit`."""
    part, _ = fock_lehmann(p)
    poles: list[list[float]] = []
    for om, wt in sorted(part):
        if poles and abs(om - poles[-1][0]) < 1e-9:
            poles[-1][1] += wt
        else:
            poles.append([om, wt])
    if len(poles) == 1:
        return PoleFit.single_pole(poles[0][1], poles[0][0])
    (w1, a1), (w2, a2) = poles
    return PoleFit(a1, w1, a2, w2)


# ---------------------------------------------------------------------------
# Qubit-level references
# ---------------------------------------------------------------------------


def spin_hamiltonian(p: SiamParams) -> np.ndarray:
    z = lambda *qs: pauli_string({q: "z" for q in qs}, 4)  # noqa: E731
    h = (p.u / 4) * (z(0, 2) - z(0) - z(2)) + (p.mu / 2) * (z(0) + z(2)) - (p.epsilon_c / 2) * (z(1) + z(3))
    for a, b in ((0, 1), (2, 3)):
        h = h + (p.v / 2) * (pauli_string({a: "x", b: "x"}, 4) + pauli_string({a: "y", b: "y"}, 4))
    return h


def expm_propagator(p: SiamParams, tau: float) -> np.ndarray:
    return expm(-1j * tau * spin_hamiltonian(p))


def trotter_factors(p: SiamParams, dt: float) -> dict[str, np.ndarray]:
    """Exponentials of the diagonal (``D``) and hopping (``H``) parts over ``dt``."""
    hop = np.zeros((16, 16), dtype=complex)
    for a, b in ((0, 1), (2, 3)):
        hop += (p.v / 2) * (pauli_string({a: "x", b: "x"}, 4) + pauli_string({a: "y", b: "y"}, 4))
    diag = spin_hamiltonian(p) - hop
    return {"D": expm(-1j * dt * diag), "H": expm(-1j * dt * hop)}


def trotter_step_reference(p: SiamParams, dt: float) -> np.ndarray:
    """First-order step ``e^{-i H_hop dt} e^{-i H_diag dt}``."""
    f = trotter_factors(p, dt)
    return f["H"] @ f["D"]


def trotter_pair_reference(p: SiamParams, dt: float) -> np.ndarray:
    """Odd step followed by the mirrored even step: ``D H H D`` as an operator product."""
    f = trotter_factors(p, dt)
    return f["D"] @ f["H"] @ f["H"] @ f["D"]


def direct_matrix_element(alpha: str, beta: str, u_mat: np.ndarray, ground: np.ndarray) -> complex:
    """``<g| U^dag P_alpha U P_beta |g>`` with ``P`` acting on qubit 0."""
    pa = pauli_string({0: alpha}, 4)
    pb = pauli_string({0: beta}, 4)
    g = np.asarray(ground)
    return complex(g.conj() @ u_mat.conj().T @ pa @ u_mat @ pb @ g)


# ---------------------------------------------------------------------------
# Two-site DMFT
# ---------------------------------------------------------------------------


def series_z(fit: PoleFit) -> float:
    """``Z`` from the small-frequency expansion of a particle-hole symmetric ``G``.

    With ``G = g1 w + g3 w^3 + ...``, ``g1 = -2 sum a/w^2`` and
    ``g3 = -2 sum a/w^4``, the regular part of ``-1/G`` has slope
    ``g3/g1^2``, so ``dSigma/dw(0) = 1 + g3/g1^2``.
    """
    poles = [(a, w) for a, w in zip(fit.alphas, fit.omegas) if a > 0]
    g1 = -2 * sum(a / w**2 for a, w in poles)
    g3 = -2 * sum(a / w**4 for a, w in poles)
    slope = 1 + g3 / g1**2
    return min(max(1 / (1 - slope), 0.0), 1.0)


def z_of_v(u: float, v: float, t_star: float = 1.0) -> float:
    return series_z(lehmann_fit(SiamParams(u, u / 2, 0.0, v, t_star)))


def dmft_fixed_point(u: float, t_star: float = 1.0, v_min: float = 1e-3) -> tuple[float, float]:
    """Self-consistent ``(Z, V)`` at half filling by bracketing ``sqrt(Z(V)) t* = V``.

    Returns ``(0, 0)`` when no metallic root exists above ``v_min``.
    """
    g = lambda v: math.sqrt(z_of_v(u, v, t_star)) * t_star - v  # noqa: E731
    if u == 0:
        return 1.0, t_star
    if g(v_min) <= 0:
        return 0.0, 0.0
    v = brentq(g, v_min, t_star, xtol=1e-14, rtol=1e-14)
    return (v / t_star) ** 2, v


def bethe_dos(e, t_star: float = 1.0):
    e = np.asarray(e, dtype=float)
    return np.where(np.abs(e) <= 2 * t_star, np.sqrt(np.clip(4 * t_star**2 - e**2, 0, None)), 0.0) / (
        2 * np.pi * t_star**2
    )


def insulating_spectral(u: float, omegas, t_star: float = 1.0) -> np.ndarray:
    """``A(w) = rho_0(w - U^2/(4w))`` of the atomic-limit self-energy."""
    w = np.asarray(omegas, dtype=float)
    with np.errstate(divide="ignore"):
        arg = np.where(w == 0, np.inf, w - u**2 / (4 * np.where(w == 0, 1.0, w)))
    return bethe_dos(arg, t_star)


def metallic_spectral(u: float, v: float, omegas, t_star: float = 1.0) -> np.ndarray:
    """``A(w)`` with ``Sigma = w + U/2 - V^2/w - 1/G`` from the exact Lehmann ``G``."""
    fit = lehmann_fit(SiamParams(u, u / 2, 0.0, v, t_star))
    w = np.asarray(omegas, dtype=float)
    out = np.zeros_like(w)
    for k, om in enumerate(w):
        if om == 0:
            # Sigma(0) = U/2 exactly for the metallic solution
            out[k] = bethe_dos(0.0, t_star)
            continue
        g = sum(a * (1 / (om - p) + 1 / (om + p)) for a, p in zip(fit.alphas, fit.omegas) if a > 0)
        if g == 0 or not np.isfinite(g):
            continue
        sigma = om + u / 2 - v**2 / om - 1 / g
        out[k] = bethe_dos(om + u / 2 - sigma, t_star)
    return out


def epsilon_c_for_filling(u: float, mu: float, v: float, target: float, start: float = 0.0,
                          lo: float = -4.0, hi: float = 4.0, n_scan: int = 800, tol: float = 1e-10) -> float:
    """Root of ``n_imp(eps_c) = target`` nearest ``start``: fine scan, then bisection."""
    f = lambda e: fock_filling(SiamParams(u, mu, e, v)) - target  # noqa: E731
    nodes = np.linspace(lo, hi, n_scan + 1)
    vals = np.array([f(e) for e in nodes])
    idx = np.flatnonzero(vals[:-1] * vals[1:] <= 0)
    k = idx[np.argmin(np.abs(nodes[idx] - start))]
    a, b, fa = nodes[k], nodes[k + 1], vals[k]
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)
