"""Two-site DMFT self-consistency loop.

Each iteration measures the impurity Green function at the current bath
parameters, fits it, extracts the quasiparticle weight ``Z`` from the Dyson
self-energy and updates the hybridization with ``V = sqrt(Z) t*`` (the
second moment of the semicircular density of states is ``t*^2``). Away from
half filling the bath level ``eps_c`` is re-tuned so that the impurity
filling matches the target.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .analysis import (
    FrequencyGrid,
    dyson_self_energy,
    fit_two_cosine,
    insulating_fit,
    lattice_filling,
    quasiparticle_weight,
)
from .errors import BracketingError, DmftError, DomainError, FitError, InsulatingBranchError
from .interferometry import METHODS, measure_green_series
from .params import PoleFit, SiamParams
from .siam import ground_manifold_filling

Z_SLACK = 1e-9
BISECTION_TOL = 1e-9
BRACKET = 4.0
BRACKET_WIDENINGS = 3
SCAN_INTERVALS = 64
NOISE_FLOOR = 1e-3
FILLING_TOL = 1e-6


@dataclass(frozen=True)
class DmftConfig:
    """Loop settings; energies in units of ``t_star``, times in ``1/t_star``.

    With ``half_filling`` the chemical potential is pinned to ``U/2`` and the
    bath level to zero. ``accelerate`` applies Aitken extrapolation to
    ``V^2`` every third iteration, which matters close to the Mott point
    where the plain iteration converges slowly.
    """

    u: float
    mu: float | None = None
    t_star: float = 1.0
    method: str = "xy"
    n_steps: int = 24
    tau_max: float = 6.0
    n_points: int | None = None
    v_init: float = 1.0
    epsilon_c_init: float = 0.0
    half_filling: bool = True
    v_tol: float = 1e-4
    v_floor: float = 1e-4
    max_iter: int = 100
    mixing: float = 1.0
    accelerate: bool = False
    target_n: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.v_init > self.v_floor:
            raise DomainError(f"v_init ({self.v_init}) must exceed v_floor ({self.v_floor})")
        if not 0 < self.mixing <= 1:
            raise DomainError(f"mixing must lie in (0, 1], got {self.mixing}")
        if self.max_iter < 1 or self.n_steps < 1:
            raise DomainError("max_iter and n_steps must be positive")
        if self.half_filling and self.mu is not None and not math.isclose(self.mu, self.u / 2):
            raise DomainError(f"half filling requires mu = U/2 = {self.u / 2}, got {self.mu}")
        if not self.half_filling and self.mu is None:
            raise DomainError("mu is required away from half filling")

    @property
    def chemical_potential(self) -> float:
        return self.u / 2 if self.half_filling else float(self.mu)

    @property
    def grid_points(self) -> int:
        return self.n_points if self.n_points is not None else self.n_steps

    def params(self, v: float, epsilon_c: float) -> SiamParams:
        return SiamParams(self.u, self.chemical_potential, epsilon_c, v, self.t_star)

    def replace(self, **changes) -> "DmftConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    v_in: float
    v_out: float
    z: float
    epsilon_c: float
    n_imp: float
    fit: PoleFit
    v_next: float


@dataclass(frozen=True)
class DmftResult:
    converged: bool
    phase: str
    z_final: float
    v_final: float
    epsilon_c_final: float
    history: tuple[IterationRecord, ...]
    final_fit: PoleFit
    u: float = float("nan")
    error: str | None = None

    @property
    def iterations(self) -> int:
        return len(self.history)

    def to_json(self) -> str:
        doc = asdict(self)
        doc["history"] = [asdict(r) for r in self.history]
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DmftResult":
        doc = json.loads(text)
        history = tuple(
            IterationRecord(**{**r, "fit": PoleFit(**r["fit"])}) for r in doc.pop("history")
        )
        fit = PoleFit(**doc.pop("final_fit"))
        return cls(history=history, final_fit=fit, **doc)


def update_v(z: float, t_star: float = 1.0) -> float:
    """``V = sqrt(Z) t*``, from ``V^2 = Z M2`` with ``M2 = t*^2`` on the Bethe lattice."""
    if z < -Z_SLACK or z > 1 + Z_SLACK:
        raise DomainError(f"quasiparticle weight must lie in [0, 1], got {z}")
    return math.sqrt(min(max(z, 0.0), 1.0)) * t_star


def _filling(config: DmftConfig, v: float, epsilon_c: float) -> float:
    return ground_manifold_filling(config.params(v, epsilon_c))


def update_epsilon_c(config: DmftConfig, target_n: float, current: float, v: float | None = None) -> float:
    """Bath level whose ground state gives impurity filling ``target_n``.

    ``n_imp(eps_c)`` is piecewise smooth but not monotone, because the
    ground-state particle number changes with ``eps_c``. The bracket
    ``[-4 t*, 4 t*]`` (widened twofold up to three times) is therefore scanned
    in ``SCAN_INTERVALS`` pieces for sign changes of ``n_imp - target_n``.
    These are bisected in order of distance from ``current`` until one ends
    on a genuine root rather than on a jump of ``n_imp``. ``current`` is
    returned unchanged when it already meets the target.

    Raises
    ------
    BracketingError
        No sign change in the widest bracket, or only jumps across the target.
    """
    v = config.v_init if v is None else v
    f = lambda e: _filling(config, v, e) - target_n  # noqa: E731
    if abs(f(current)) < 1e-10:
        return current
    half = BRACKET * config.t_star
    for _ in range(BRACKET_WIDENINGS + 1):
        nodes = np.linspace(-half, half, SCAN_INTERVALS + 1)
        values = np.array([f(e) for e in nodes])
        exact = np.flatnonzero(values == 0)
        changes = np.flatnonzero(values[:-1] * values[1:] < 0)
        if exact.size or changes.size:
            break
        half *= 2
    else:
        raise BracketingError(f"filling {target_n} not bracketed for eps_c in [{-half / 2}, {half / 2}]")
    if exact.size:
        return float(nodes[exact[np.argmin(np.abs(nodes[exact] - current))]])
    # a sign change may be a jump of the ground-state particle number rather than a root
    centers = 0.5 * (nodes[changes] + nodes[changes + 1])
    for k in changes[np.argsort(np.abs(centers - current), kind="stable")]:
        root = _bisect(f, nodes[k], nodes[k + 1], values[k], BISECTION_TOL * config.t_star)
        if abs(f(root)) < FILLING_TOL:
            return root
    raise BracketingError(f"filling {target_n} is only crossed by jumps of n_imp(eps_c), never attained")


def _bisect(f, lo: float, hi: float, f_lo: float, tol: float) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0:
            return float(mid)
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def measure_z(config: DmftConfig, v: float, epsilon_c: float) -> tuple[float, PoleFit]:
    """Quasiparticle weight of the impurity problem at ``(v, eps_c)``."""
    params = config.params(v, epsilon_c)
    series = measure_green_series(params, config.tau_max, config.grid_points, config.method, config.n_steps)
    fit = fit_two_cosine(series)
    try:
        z = quasiparticle_weight(fit, params)
    except InsulatingBranchError:
        z = 0.0
    return z, fit


def _target_filling(config: DmftConfig, fit: PoleFit, v: float, epsilon_c: float) -> float:
    if config.target_n is not None:
        return config.target_n
    params = config.params(v, epsilon_c)
    se = dyson_self_energy(fit, params, FrequencyGrid.default(eta=0.0), allow_poles=True)
    return lattice_filling(se, params)


class _Aitken:
    """Aitken delta-squared extrapolation of ``x = V^2`` every third plain step."""

    def __init__(self):
        self.xs: list[float] = []

    def propose(self, x: float) -> float | None:
        self.xs.append(x)
        if len(self.xs) < 3:
            return None
        x0, x1, x2 = self.xs
        self.xs = []
        den = (x2 - x1) - (x1 - x0)
        if abs(den) < 1e-14:
            return None
        xa = x2 - (x2 - x1) ** 2 / den
        if -1 < xa <= max(x0, x1, x2):
            return math.sqrt(max(xa, 0.0))
        return None


def run(config: DmftConfig) -> DmftResult:
    """Iterate to self-consistency.

    Stops when ``|V_new - V_old| < v_tol`` (with acceleration, when the
    estimated distance to the fixed point ``dV/(1 - rho)`` is below
    ``v_tol``), when ``V_new < v_floor`` (the insulating ``V = 0``
    solution), or after ``max_iter`` iterations.

    Raises
    ------
    DmftError
        A Green-function fit failed; ``history`` holds the completed iterations.
    """
    history: list[IterationRecord] = []
    v = config.v_init
    eps = 0.0 if config.half_filling else config.epsilon_c_init
    fit = None
    aitken = _Aitken() if config.accelerate else None
    dv_prev = None

    for it in range(1, config.max_iter + 1):
        try:
            if not config.half_filling and fit is not None:
                eps = update_epsilon_c(config, _target_filling(config, fit, v, eps), eps, v)
            z, fit = measure_z(config, v, eps)
        except (FitError, BracketingError) as exc:
            raise DmftError(f"iteration {it} failed: {exc}", history) from exc
        n_imp = _filling(config, v, eps)
        v_out = update_v(z, config.t_star)
        v_next = config.mixing * v_out + (1 - config.mixing) * v
        jumped = False
        if aitken is not None:
            jump = aitken.propose((v_next / config.t_star) ** 2)
            if jump is not None:
                v_next, jumped = jump * config.t_star, True
        history.append(IterationRecord(it, v, v_out, z, eps, n_imp, fit, v_next))

        if v_next < config.v_floor:
            return DmftResult(True, "insulating", 0.0, 0.0, eps, tuple(history), insulating_fit(config.u), config.u)

        dv = abs(v_next - v)
        if aitken is None:
            done = dv < config.v_tol
        elif jumped:
            done, dv = False, None
        else:
            # the contraction rate needs two plain steps since the last jump
            rho = dv / dv_prev if dv_prev else math.inf
            if rho < 1:
                done = dv / (1 - rho) < config.v_tol
            else:
                # no contraction left: differences are at the noise floor of the fit
                done = dv < NOISE_FLOOR * config.v_tol
        if done:
            return DmftResult(True, "metallic", z, v_next, eps, tuple(history), fit, config.u)
        dv_prev = dv
        v = v_next

    return DmftResult(False, "metallic", z, v, eps, tuple(history), fit, config.u)


def sweep_z(template: DmftConfig, u_values, warm_start: bool = True) -> list[DmftResult]:
    """One self-consistent run per ``U``.

    For ascending ``U`` each run starts from the previous metallic ``V``.
    A failed point is recorded with ``phase='failed'`` and the sweep goes on.
    """
    results = []
    v_prev = None
    prev_u = -math.inf
    for u in u_values:
        v_init = template.v_init
        if warm_start and v_prev is not None and u >= prev_u and v_prev > template.v_floor:
            v_init = v_prev
        cfg = template.replace(u=float(u), v_init=v_init, mu=None if template.half_filling else template.mu)
        try:
            res = run(cfg)
        except DmftError as exc:
            res = DmftResult(False, "failed", float("nan"), float("nan"), float("nan"), tuple(exc.history),
                             PoleFit(0.0, 0.0, 0.0, 0.0), float(u), str(exc))
        results.append(res)
        v_prev = res.v_final if res.phase == "metallic" else None
        prev_u = u
    return results


def sweep_to_csv(results: list[DmftResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "z", "v", "iterations", "converged", "phase"])
    for r in results:
        w.writerow([_fmt(r.u), _fmt(r.z_final), _fmt(r.v_final), r.iterations, str(r.converged).lower(), r.phase])
    return buf.getvalue()


def _fmt(x: float) -> str:
    if x == 0:
        return "0"
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def z_curve(results: list[DmftResult]) -> np.ndarray:
    return np.array([r.z_final for r in results])
