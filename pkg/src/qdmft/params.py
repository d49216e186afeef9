"""Parameter containers shared by the solver, the analysis and the loop."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import DomainError


@dataclass(frozen=True)
class SiamParams:
    """Two-site Anderson impurity model, all energies in units of ``t_star``."""

    u: float
    mu: float
    epsilon_c: float
    v: float
    t_star: float = 1.0

    def __post_init__(self):
        if not self.t_star > 0:
            raise DomainError(f"t_star must be positive, got {self.t_star}")
        if self.u < 0:
            raise DomainError(f"u must be nonnegative, got {self.u}")
        if self.v < 0:
            raise DomainError(f"v must be nonnegative, got {self.v}")

    @classmethod
    def half_filled(cls, u: float, v: float, t_star: float = 1.0) -> "SiamParams":
        """Particle-hole symmetric point ``mu = u/2``, ``epsilon_c = 0``."""
        return cls(u=u, mu=u / 2, epsilon_c=0.0, v=v, t_star=t_star)

    @property
    def is_half_filled(self) -> bool:
        return abs(self.mu - self.u / 2) < 1e-12 and abs(self.epsilon_c) < 1e-12

    def replace(self, **changes) -> "SiamParams":
        data = asdict(self)
        data.update(changes)
        return SiamParams(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PoleFit:
    """Residues and pole positions of the particle-hole symmetric four-pole
    Green function ``G(w) = sum_j alpha_j [1/(w - w_j) + 1/(w + w_j)]``.

    ``omega1 <= omega2``. When one residue is below ``UNIDENTIFIABLE`` the
    corresponding frequency carries no information.
    """

    alpha1: float
    omega1: float
    alpha2: float
    omega2: float
    rms_residual: float = 0.0

    UNIDENTIFIABLE = 1e-6

    @classmethod
    def canonical(cls, alpha1, omega1, alpha2, omega2, rms_residual=0.0) -> "PoleFit":
        """Build a fit with ``omega1 <= omega2`` and nonnegative frequencies."""
        omega1, omega2 = abs(float(omega1)), abs(float(omega2))
        alpha1, alpha2 = float(alpha1), float(alpha2)
        if omega2 < omega1:
            alpha1, omega1, alpha2, omega2 = alpha2, omega2, alpha1, omega1
        return cls(alpha1, omega1, alpha2, omega2, float(rms_residual))

    @classmethod
    def single_pole(cls, alpha: float, omega: float, rms_residual=0.0) -> "PoleFit":
        return cls(float(alpha), abs(float(omega)), 0.0, abs(float(omega)), float(rms_residual))

    @property
    def alphas(self) -> tuple[float, float]:
        return (self.alpha1, self.alpha2)

    @property
    def omegas(self) -> tuple[float, float]:
        return (self.omega1, self.omega2)

    @property
    def weight(self) -> float:
        return self.alpha1 + self.alpha2

    def poles(self) -> list[tuple[float, float]]:
        """(residue, frequency) pairs that carry weight."""
        return [(a, w) for a, w in zip(self.alphas, self.omegas) if a >= self.UNIDENTIFIABLE]

    def to_dict(self) -> dict:
        return asdict(self)
