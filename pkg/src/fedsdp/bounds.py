"""Convergence-bound calculator for the noised global model.

Under smoothness L, weak convexity rho, bounded gradients G_c, bounded
per-client noise N_c, activation rate phi with K active clients, and
learning rate eta < 1/(4L), the expected optimality gap after t rounds is
bounded by

    L * U^t / 2 * d0  +  (1 - phi) * V  +  (1 - U) * W / rho^2  +  S

with U = 1 - eta*rho, V = 2*L*eta^2*E^2*G_c^2,
W = 6*L*G_c^2 + 8*(E-1)^2*G_c^2, and the aggregated-noise term
S = sum_{l=1..K} l*L*N_c^2 = L*N_c^2*K*(K+1)/2.

This module only evaluates the bound for user-supplied constants; it does
not estimate them from training traces.
"""

from dataclasses import dataclass

from .errors import ConstraintError


@dataclass(frozen=True)
class ConvergenceConstants:
    """Constants of the bound; validation enforces the preconditions."""

    smoothness: float          # L
    weak_convexity: float      # rho
    learning_rate: float       # eta
    local_epochs: int          # E
    gradient_bound: float      # G_c
    noise_bound: float         # N_c
    activation_rate: float     # phi
    active_clients: int        # K
    initial_gap: float         # squared distance of the initial model to the optimum

    def __post_init__(self):
        checks = [
            (self.smoothness > 0, "L > 0"),
            (self.weak_convexity > 0, "rho > 0"),
            (self.learning_rate > 0, "eta > 0"),
            (self.local_epochs >= 1, "E >= 1"),
            (self.gradient_bound > 0, "G_c > 0"),
            (self.noise_bound >= 0, "N_c >= 0"),
            (0.0 < self.activation_rate <= 1.0, "0 < phi <= 1"),
            (self.active_clients >= 1, "K >= 1"),
            (self.initial_gap >= 0, "d0 >= 0"),
        ]
        for ok, inequality in checks:
            if not ok:
                raise ConstraintError(f"violated precondition: {inequality}")
        if not self.learning_rate < 1.0 / (4.0 * self.smoothness):
            raise ConstraintError(
                f"violated precondition: eta < 1/(4L) "
                f"(eta={self.learning_rate}, 1/(4L)={1.0 / (4.0 * self.smoothness)})"
            )
        decay = 1.0 - self.learning_rate * self.weak_convexity
        if not 0.0 < decay < 1.0:
            raise ConstraintError(
                f"violated precondition: 0 < 1 - eta*rho < 1 (got {decay})"
            )

    @property
    def decay(self) -> float:
        return 1.0 - self.learning_rate * self.weak_convexity

    @property
    def drift_term(self) -> float:
        """V: client-drift penalty from partial participation."""
        return (2.0 * self.smoothness * self.learning_rate**2
                * self.local_epochs**2 * self.gradient_bound**2)

    @property
    def variance_term(self) -> float:
        """W: gradient-variance penalty from multiple local epochs."""
        g2 = self.gradient_bound**2
        return 6.0 * self.smoothness * g2 + 8.0 * (self.local_epochs - 1) ** 2 * g2

    @property
    def noise_term(self) -> float:
        """Aggregated-noise term: L * N_c^2 * K * (K + 1) / 2."""
        k = self.active_clients
        return self.smoothness * self.noise_bound**2 * k * (k + 1) / 2.0


def convergence_bound(c: ConvergenceConstants, t: int) -> float:
    """Bound on the expected optimality gap after t global rounds."""
    if t < 0:
        raise ConstraintError(f"violated precondition: t >= 0 (got {t})")
    u = c.decay
    return (c.smoothness * u**t / 2.0 * c.initial_gap
            + (1.0 - c.activation_rate) * c.drift_term
            + (1.0 - u) * c.variance_term / c.weak_convexity**2
            + c.noise_term)


def bound_series(c: ConvergenceConstants, t_max: int) -> list[float]:
    """Bound values for t = 0..t_max; strictly decreasing when the initial
    gap is positive (only the decaying term depends on t)."""
    return [convergence_bound(c, t) for t in range(t_max + 1)]
