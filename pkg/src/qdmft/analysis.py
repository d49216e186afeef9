"""Classical post-processing of the measured impurity Green function.

The time series ``i G^R(tau) = 2 [a1 cos(w1 tau) + a2 cos(w2 tau)]`` is fitted
for its residues and pole positions, continued to the frequency domain, and
passed through the Dyson equation to obtain the self-energy, the
quasiparticle weight and the Bethe-lattice spectral function.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError, FitPreconditionError, InsulatingBranchError, PoorFitError, SingularityError
from .interferometry import GreenSeries
from .params import PoleFit, SiamParams

MIN_FIT_POINTS = 12
GRID_SIZE = 200
SUM_PENALTY = 1e3
POOR_FIT_RMS = 0.05
REALITY_TOL = 1e-6
POLISH_ITERATIONS = 50
POLISH_CANDIDATES = 8
FINAL_POLISH_ITERATIONS = 2000
COALESCE_TOL = 1e-4
POLE_TOL = 1e-9
ZERO_G_TOL = 1e-12
Z_STEP = 1e-3
# A zero-frequency self-energy residue below this fraction of V^2 (or of the
# fit's own low-frequency scale) is attributed to fit error, not to a gap.
ZERO_RESIDUE_RTOL = 0.05


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Real frequencies ``omegas`` evaluated at ``omega + i eta``."""

    omegas: np.ndarray
    eta: float = 0.01

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        if w.ndim != 1:
            raise ValueError("omegas must be one-dimensional")
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        object.__setattr__(self, "omegas", w)

    @classmethod
    def default(cls, eta: float = 0.01, lo: float = -8.0, hi: float = 8.0, n: int = 1601) -> "FrequencyGrid":
        return cls(np.linspace(lo, hi, n), eta)

    @property
    def z(self) -> np.ndarray:
        return self.omegas + 1j * self.eta


@dataclass(frozen=True, eq=False)
class SelfEnergyEval:
    omegas: np.ndarray
    values: np.ndarray
    z_weight: float | None = None
    eta: float = 0.0

    def dynamic(self, params: SiamParams) -> np.ndarray:
        """Self-energy with the half-filling Hartree term ``U/2`` removed."""
        return self.values - params.u / 2


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def _model(alphas, omegas, times):
    return 2.0 * sum(a * np.cos(w * times) for a, w in zip(alphas, omegas))


def _solve_pair(gram, proj, yy, i, j):
    """Penalized nonnegative least squares for the residues of poles ``i, j``.

    Returns ``(cost, a_i, a_j)`` arrays. ``gram`` and ``proj`` hold the basis
    Gram matrix and projections of the data, already including the factor 2.
    """
    lam = SUM_PENALTY
    gii, gjj, gij = gram[i, i] + lam, gram[j, j] + lam, gram[i, j] + lam
    bi, bj = proj[i] + lam / 2, proj[j] + lam / 2
    const = yy + lam / 4

    det = gii * gjj - gij**2
    with np.errstate(divide="ignore", invalid="ignore"):
        ai = (gjj * bi - gij * bj) / det
        aj = (gii * bj - gij * bi) / det
    cost_both = const - ai * bi - aj * bj
    ok = (ai >= 0) & (aj >= 0) & np.isfinite(ai) & np.isfinite(aj)
    cost_both = np.where(ok, cost_both, np.inf)

    # one residue pinned at zero
    ai_only = np.maximum(bi / gii, 0.0)
    cost_i = const - 2 * ai_only * bi + ai_only**2 * gii
    aj_only = np.maximum(bj / gjj, 0.0)
    cost_j = const - 2 * aj_only * bj + aj_only**2 * gjj

    stack = np.stack([cost_both, cost_i, cost_j])
    best = np.argmin(stack, axis=0)
    cost = np.take_along_axis(stack, best[None], axis=0)[0]
    a_i = np.choose(best, [np.where(ok, ai, 0.0), ai_only, np.zeros_like(ai)])
    a_j = np.choose(best, [np.where(ok, aj, 0.0), np.zeros_like(aj), aj_only])
    return cost, a_i, a_j


def _polish(x0, times, y, n_poles, max_iter=POLISH_ITERATIONS):
    """Levenberg-Marquardt refinement of ``(alpha, omega)`` pairs."""
    lam = math.sqrt(SUM_PENALTY)

    def residual(x):
        a, w = x[0::2], x[1::2]
        return np.concatenate([_model(a, w, times) - y, [lam * (a.sum() - 0.5)]])

    def jacobian(x):
        jac = np.zeros((times.size + 1, x.size))
        for k in range(n_poles):
            a, w = x[2 * k], x[2 * k + 1]
            jac[:-1, 2 * k] = 2 * np.cos(w * times)
            jac[:-1, 2 * k + 1] = -2 * a * times * np.sin(w * times)
            jac[-1, 2 * k] = lam
        return jac

    res = least_squares(residual, x0[: 2 * n_poles], jac=jacobian, method="lm", max_nfev=max_iter,
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return res.x, float(np.sum(res.fun**2))


def _cost(x, times, y):
    a, w = x[0::2], x[1::2]
    return float(np.sum((_model(a, w, times) - y) ** 2) + SUM_PENALTY * (a.sum() - 0.5) ** 2)


def _local_minima(surface):
    """Indices of finite local minima (8-neighbourhood), lowest first."""
    padded = np.pad(surface, 1, constant_values=np.inf)
    n = surface.shape[0]
    is_min = np.isfinite(surface)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= surface <= padded[1 + di:1 + di + n, 1 + dj:1 + dj + n]
    idx = np.argwhere(is_min)
    order = np.argsort(surface[idx[:, 0], idx[:, 1]])
    return [tuple(map(int, idx[k])) for k in order]


def _polished_candidates(x0, times, y):
    """Polished two-pole and single-pole refinements of one starting point."""
    out = []
    if len(x0) == 4 and min(x0[0], x0[2]) > 0:
        x, _ = _polish(x0, times, y, 2)
        if min(x[0], x[2]) >= 0:
            out.append(x)
            if abs(abs(x[1]) - abs(x[3])) < COALESCE_TOL:
                out.append(_polish(np.array([x[0] + x[2], (x[1] + x[3]) / 2]), times, y, 1)[0])
    if len(x0) == 4:
        k = int(np.argmax(x0[0::2]))
        x0 = x0[2 * k: 2 * k + 2]
    x, _ = _polish(x0, times, y, 1)
    if x[0] >= 0:
        out.append(x)
    return out


def default_omega_max(params: SiamParams | None, times: np.ndarray) -> float:
    """Upper end of the frequency search window.

    ``U/2 + 4V + |mu|`` bounds every excitation energy of the half-filled
    two-site model; without parameters the sampling (Nyquist) limit is used.
    """
    if params is not None:
        return params.u / 2 + 4 * params.v + abs(params.mu)
    dt = float(times[1] - times[0])
    return math.pi / dt


def fit_two_cosine(series: GreenSeries, omega_max: float | None = None) -> PoleFit:
    """Fit ``Re i G^R(tau_k)`` to ``2 [a1 cos(w1 tau) + a2 cos(w2 tau)]``.

    A 200 x 200 grid over ``0 <= w1 < w2 <= omega_max`` is searched with the
    residues solved in closed form (``a_j >= 0``, sum penalized towards 1/2),
    and the best nodes are polished by Levenberg-Marquardt.

    Raises
    ------
    FitPreconditionError
        Fewer than 12 samples, or an imaginary part above ``1e-6``.
    PoorFitError
        The rms residual exceeds 0.05.
    """
    times, values = series.times, series.values
    if times.size < MIN_FIT_POINTS:
        raise FitPreconditionError(f"need at least {MIN_FIT_POINTS} samples, got {times.size}")
    if np.max(np.abs(values.imag)) > REALITY_TOL:
        raise FitPreconditionError(
            f"series is not real (max |Im| = {np.max(np.abs(values.imag)):.2e}); "
            "only particle-hole symmetric input can be fitted"
        )
    y = values.real
    w_max = omega_max if omega_max is not None else default_omega_max(series.params, times)

    grid = np.linspace(0.0, w_max, GRID_SIZE)
    basis = 2.0 * np.cos(np.outer(grid, times))
    gram = basis @ basis.T
    proj = basis @ y
    yy = float(y @ y)

    i, j = np.triu_indices(GRID_SIZE, k=1)
    cost, a_i, a_j = _solve_pair(gram, proj, yy, i, j)
    surface = np.full((GRID_SIZE, GRID_SIZE), np.inf)
    surface[i, j] = cost
    flat = {(ii, jj): k for k, (ii, jj) in enumerate(zip(i, j))}

    # d cos(w tau)/dw vanishes at w = 0, so start off the origin
    nodes = np.maximum(grid, (grid[1] - grid[0]) / 2)
    starts = []
    for ii, jj in _local_minima(surface)[:POLISH_CANDIDATES]:
        k = flat[ii, jj]
        starts.append(np.array([a_i[k], nodes[ii], a_j[k], nodes[jj]]))
    single = np.argmax(np.maximum(proj, 0.0) ** 2 / np.diag(gram))
    starts.append(np.array([0.5, nodes[single]]))

    best_x, best_cost = None, np.inf
    for x0 in starts:
        for x in _polished_candidates(x0, times, y):
            c = _cost(x, times, y)
            # prefer the simpler model when it fits equally well
            if c < best_cost - 1e-24 or (len(x) < len(best_x) and c <= best_cost + 1e-20):
                best_x, best_cost = x, c

    # nearly degenerate low-frequency pairs converge slowly; finish the winner
    best_x, _ = _polish(best_x, times, y, len(best_x) // 2, FINAL_POLISH_ITERATIONS)
    if len(best_x) == 4 and min(best_x[0], best_x[2]) < 0:
        raise FitError("final polish left the nonnegative residue region")
    rms = float(np.sqrt(np.mean((_model(best_x[0::2], best_x[1::2], times) - y) ** 2)))
    if len(best_x) == 2:
        fit = PoleFit.single_pole(best_x[0], best_x[1], rms)
    else:
        fit = PoleFit.canonical(best_x[0], best_x[1], best_x[2], best_x[3], rms)
    if rms > POOR_FIT_RMS:
        raise PoorFitError(f"two-cosine fit rms residual {rms:.3g} exceeds {POOR_FIT_RMS}", fit=fit)
    return fit


def synthetic_series(fit: PoleFit, tau_max: float = 6.0, n_points: int = 24,
                     params: SiamParams | None = None) -> GreenSeries:
    """Noise-free samples of the two-cosine model on the default time grid."""
    times = np.arange(n_points + 1) * (tau_max / n_points)
    return GreenSeries(times, _model(fit.alphas, fit.omegas, times).astype(complex), "exact", None, params)


# ---------------------------------------------------------------------------
# Frequency domain
# ---------------------------------------------------------------------------


def _weighted_poles(fit: PoleFit):
    return [(a, w) for a, w in zip(fit.alphas, fit.omegas) if a > 0]


def green_frequency(fit: PoleFit, grid: FrequencyGrid) -> np.ndarray:
    """``G(w + i eta) = sum_j a_j [1/(z - w_j) + 1/(z + w_j)]``."""
    z = grid.z
    poles = _weighted_poles(fit)
    if grid.eta == 0:
        for _, w in poles:
            if np.any(np.abs(np.abs(grid.omegas) - w) < POLE_TOL):
                raise SingularityError(f"frequency grid hits the Green-function pole at +-{w}")
    g = np.zeros_like(z)
    for a, w in poles:
        g = g + a * (1 / (z - w) + 1 / (z + w))
    return g


def hybridization(params: SiamParams, omega: complex) -> complex:
    """Bath hybridization function ``V^2 / (omega - eps_c)``."""
    if params.v == 0:
        return np.zeros_like(np.asarray(omega, dtype=complex))[()] if np.ndim(omega) else 0j
    d = np.asarray(omega, dtype=complex) - params.epsilon_c
    if np.any(np.abs(d) < POLE_TOL):
        raise SingularityError(f"hybridization evaluated at its pole eps_c = {params.epsilon_c}")
    return (params.v**2 / d)[()]


def noninteracting_green_inverse(params: SiamParams, omega: complex) -> complex:
    """``omega + mu - Delta(omega)``."""
    return (np.asarray(omega, dtype=complex) + params.mu - hybridization(params, omega))[()]


def _inverse_green_polys(fit: PoleFit):
    """Numerator and denominator polynomials of ``1/G``."""
    poles = _weighted_poles(fit)
    num = np.poly1d([0.0])
    den = np.poly1d([1.0])
    for a, w in poles:
        den = den * np.poly1d([1.0, 0.0, -w * w])
    for k, (a, w) in enumerate(poles):
        rest = np.poly1d([1.0])
        for m, (_, w2) in enumerate(poles):
            if m != k:
                rest = rest * np.poly1d([1.0, 0.0, -w2 * w2])
        num = num + 2 * a * np.poly1d([1.0, 0.0]) * rest
    return den, num  # 1/G = den / num


def dyson_self_energy(fit: PoleFit, params: SiamParams, grid: FrequencyGrid,
                      allow_poles: bool = False) -> SelfEnergyEval:
    """``Sigma(w + i eta) = w + mu - Delta(w + i eta) - 1/G(w + i eta)``.

    At ``eta = 0`` the inverse Green function is evaluated as a ratio of
    polynomials, so grid points on poles of ``G`` are harmless. Points where
    ``|G| < 1e-12`` raise :class:`SingularityError` unless ``allow_poles`` is
    set, in which case they (and hybridization poles) evaluate to ``inf``.
    """
    z = grid.z
    if grid.eta > 0:
        g = green_frequency(fit, grid)
        if np.any(np.abs(g) < ZERO_G_TOL):
            raise SingularityError("Green function vanishes on the grid")
        sigma = z + params.mu - hybridization(params, z) - 1 / g
        return SelfEnergyEval(grid.omegas, np.asarray(sigma), None, grid.eta)

    den, num = _inverse_green_polys(fit)
    n_val, d_val = num(grid.omegas), den(grid.omegas)
    bad = np.abs(n_val) <= ZERO_G_TOL * np.abs(d_val)
    on_hyb = (params.v != 0) & (np.abs(grid.omegas - params.epsilon_c) < POLE_TOL)
    if not allow_poles and (np.any(bad) or np.any(on_hyb)):
        raise SingularityError("self-energy evaluated on one of its poles")
    sigma = np.full(grid.omegas.shape, np.inf, dtype=complex)
    ok = ~bad & ~on_hyb
    w = grid.omegas[ok]
    hyb = params.v**2 / (w - params.epsilon_c) if params.v != 0 else 0.0
    sigma[ok] = w + params.mu - hyb - d_val[ok] / n_val[ok]

    # At w = eps_c = 0 the poles of Delta and 1/G cancel for a metal. The
    # combined numerator is even in w, so the regular part there is mu.
    origin = bad & on_hyb & (np.abs(grid.omegas) < POLE_TOL)
    if np.any(origin) and abs(params.epsilon_c) < POLE_TOL:
        try:
            metallic = not self_energy_poles(fit, params).zero_pole_is_physical
        except SingularityError:
            metallic = False
        if metallic:
            sigma[origin] = params.mu
    return SelfEnergyEval(grid.omegas, sigma, None, 0.0)


@dataclass(frozen=True)
class SelfEnergyPoles:
    """Real-axis pole structure of the fitted self-energy.

    ``positions`` are the poles at ``+-Omega`` coming from zeros of ``G``
    away from the origin; ``zero_residue`` is the residue at ``omega = 0``,
    which vanishes for an exact metallic Green function.
    """

    positions: tuple[float, ...]
    zero_residue: float
    zero_scale: float

    @property
    def zero_pole_is_physical(self) -> bool:
        return abs(self.zero_residue) > ZERO_RESIDUE_RTOL * self.zero_scale


def self_energy_poles(fit: PoleFit, params: SiamParams) -> SelfEnergyPoles:
    """Poles of ``Sigma`` implied by a particle-hole symmetric fit.

    The nonzero poles are the zeros of ``G``:
    ``Omega^2 = (a1 w2^2 + a2 w1^2) / (a1 + a2)``. At the origin ``-1/G``
    contributes ``1/(2S)`` with ``S = sum_j a_j / w_j^2`` and the
    hybridization contributes ``-V^2`` when ``eps_c = 0``.
    """
    poles = _weighted_poles(fit)
    if not poles:
        raise SingularityError("fit carries no spectral weight")
    if any(w == 0 for _, w in poles):
        raise SingularityError("fit has a pole at zero frequency; G does not vanish at the origin")
    weight = sum(a for a, _ in poles)
    positions: tuple[float, ...] = ()
    if len(poles) == 2:
        (a1, w1), (a2, w2) = poles
        omega = math.sqrt((a1 * w2**2 + a2 * w1**2) / weight)
        positions = (-omega, omega)
    s = sum(a / w**2 for a, w in poles)
    from_g = 1.0 / (2.0 * s)
    from_hyb = params.v**2 if abs(params.epsilon_c) < POLE_TOL else 0.0
    return SelfEnergyPoles(positions, from_g - from_hyb, max(from_g, from_hyb))


def _sigma_regular_real(fit: PoleFit, params: SiamParams, omegas: np.ndarray, zero_residue: float) -> np.ndarray:
    den, num = _inverse_green_polys(fit)
    hyb = params.v**2 / (omegas - params.epsilon_c) if params.v != 0 else 0.0
    return (omegas + params.mu - hyb - den(omegas) / num(omegas) - zero_residue / omegas).real


def quasiparticle_weight(fit: PoleFit, params: SiamParams, h: float = Z_STEP) -> float:
    """``Z = [1 - d Re Sigma / d w |_0]^{-1}`` by a central difference at ``eta = 0``.

    Any zero-frequency residue of the fitted self-energy smaller than
    ``ZERO_RESIDUE_RTOL`` of its scale is a fit artifact (it vanishes for
    exact data) and is subtracted before differencing; see
    :func:`self_energy_poles`.

    Raises
    ------
    InsulatingBranchError
        A self-energy pole lies within ``[-h, h]``; the caller should use ``Z = 0``.
    """
    poles = self_energy_poles(fit, params)
    if poles.zero_pole_is_physical:
        raise InsulatingBranchError(
            f"self-energy has a pole at the Fermi level (residue {poles.zero_residue:.3g})"
        )
    near = [p for p in poles.positions if abs(p) <= h]
    if params.v != 0 and abs(params.epsilon_c) <= h and params.epsilon_c != 0:
        near.append(params.epsilon_c)
    if near:
        raise InsulatingBranchError(f"self-energy pole at {near[0]:.3g} within +-{h}")
    lo, hi = _sigma_regular_real(fit, params, np.array([-h, h]), poles.zero_residue)
    slope = (hi - lo) / (2 * h)
    if slope >= 1.0:
        return 1.0
    return float(min(max(1.0 / (1.0 - slope), 0.0), 1.0))


# ---------------------------------------------------------------------------
# Lattice quantities
# ---------------------------------------------------------------------------


def bethe_dos(epsilon, t_star: float = 1.0):
    """Semicircular density of states ``sqrt(4 t^2 - e^2) / (2 pi t^2)``."""
    e = np.asarray(epsilon, dtype=float)
    inside = np.abs(e) <= 2 * t_star
    out = np.zeros_like(e)
    out[inside] = np.sqrt(4 * t_star**2 - e[inside] ** 2) / (2 * math.pi * t_star**2)
    return out[()]


def spectral_function(se: SelfEnergyEval, params: SiamParams, grid: FrequencyGrid | None = None) -> np.ndarray:
    """Lattice spectral function ``A(w) = rho_0(w + mu - Re Sigma(w))``.

    Points where the self-energy is infinite (its poles) give ``A = 0``.
    """
    omegas = se.omegas if grid is None else grid.omegas
    arg = omegas + params.mu - se.values.real
    arg = np.where(np.isfinite(arg), arg, np.inf)
    return bethe_dos(arg, params.t_star)


def insulating_fit(u: float) -> PoleFit:
    """Atomic-limit Green function: all weight at ``U/2``."""
    return PoleFit.single_pole(0.5, u / 2)


def lattice_filling(se: SelfEnergyEval, params: SiamParams) -> float:
    """``2 * int_{-inf}^0 A(w) dw`` by trapezoidal quadrature on the grid."""
    a = spectral_function(se, params)
    mask = se.omegas <= 0
    return float(2 * np.trapezoid(a[mask], se.omegas[mask]))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def curve_to_csv(omegas: np.ndarray, values: np.ndarray) -> str:
    """``omega,re,im`` for complex curves, ``omega,a`` for real ones."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    complex_valued = np.iscomplexobj(values)
    w.writerow(["omega", "re", "im"] if complex_valued else ["omega", "a"])
    for om, v in zip(omegas, values):
        if complex_valued:
            w.writerow([repr(float(om)), repr(float(v.real)), repr(float(v.imag))])
        else:
            w.writerow([repr(float(om)), repr(float(v))])
    return buf.getvalue()


def curve_to_json(omegas, values, params: SiamParams, fit: PoleFit, eta: float) -> str:
    values = np.asarray(values)
    doc = {
        "params": params.to_dict(),
        "fit": fit.to_dict(),
        "eta": eta,
        "grid": {"lo": float(omegas[0]), "hi": float(omegas[-1]), "n": int(len(omegas))},
        "omegas": np.asarray(omegas).tolist(),
    }
    if np.iscomplexobj(values):
        doc["re"] = [float(x) if np.isfinite(x) else None for x in values.real]
        doc["im"] = [float(x) if np.isfinite(x) else None for x in values.imag]
    else:
        doc["a"] = values.tolist()
    return json.dumps(doc, indent=2)
