"""Closed-form convergence diagnostics: the averaged squared-gradient bound,
its tuned learning rate and rate, and the tau at which the bound bottoms out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


class BoundDomainError(ValueError):
    pass


@dataclass(frozen=True)
class BoundParams:
    L: float
    sigma: float
    zeta: float
    rho: float
    eta: float
    tau: float
    H: float
    N: float
    f1: float
    f_star: float = 0.0

    def __post_init__(self):
        for name in ("L", "sigma", "zeta", "rho", "eta", "tau", "H", "N"):
            if getattr(self, name) < 0:
                raise BoundDomainError(f"{name} must be non-negative")
        if not 0.0 <= self.rho < 1.0:
            raise BoundDomainError("rho must lie in [0, 1)")


def _gap(p: BoundParams) -> float:
    return (1.0 - p.rho) ** 2


def remark2_bound(p: BoundParams) -> float:
    """Upper bound on the mean squared norm of the averaged-model gradient over H rounds.

    Raises:
        BoundDomainError: if ``(1-rho)^2 - 27 eta^2 L^2 <= 0`` or ``eta > 1/(4 L tau)``.
    """
    gap = _gap(p)
    c = p.eta ** 2 * p.L ** 2
    if gap - 27.0 * c <= 0:
        raise BoundDomainError("validity requires (1-rho)^2 - 27*eta^2*L^2 > 0")
    if p.eta * 4.0 * p.L * p.tau > 1.0:
        raise BoundDomainError("validity requires eta <= 1/(4*L*tau)")
    if p.eta <= 0 or p.tau <= 0 or p.H <= 0 or p.N <= 0:
        raise BoundDomainError("eta, tau, H and N must be positive")
    ratio = (gap - 3.0 * c) / (gap - 27.0 * c)
    first = 4.0 * (p.f1 - p.f_star) * ratio / (p.eta * p.tau * p.H)
    second = 8.0 * c * (p.sigma ** 2 + 3.0 * p.zeta ** 2) / (gap - 27.0 * c)
    third = ratio * 4.0 * p.L * p.eta * p.tau * p.sigma ** 2 / p.N
    return first + second + third


def corollary1_eta(p: BoundParams) -> float:
    """Learning rate ``1 / (6L/|1-rho| + sigma*tau*sqrt(H/N) + zeta^(2/3) H^(1/3))``."""
    denom = (6.0 * p.L / math.sqrt(_gap(p))
             + p.sigma * p.N ** -0.5 * p.tau * p.H ** 0.5
             + p.zeta ** (2.0 / 3.0) * p.H ** (1.0 / 3.0))
    if not denom > 0 or not math.isfinite(denom):
        raise BoundDomainError("learning-rate denominator must be finite and positive")
    return 1.0 / denom


def corollary1_rate(p: BoundParams) -> float:
    """``sigma/sqrt(NH) + (zeta/H)^(2/3)/(1-rho)^2 + 1/(H tau^2 (1-rho)^2)``."""
    if p.H <= 0 or p.N <= 0 or p.tau <= 0:
        raise BoundDomainError("H, N and tau must be positive")
    gap = _gap(p)
    return (p.sigma / math.sqrt(p.N * p.H)
            + (p.zeta / p.H) ** (2.0 / 3.0) / gap
            + 1.0 / (p.H * p.tau ** 2 * gap))


def tau_threshold(p: BoundParams) -> float:
    """``sqrt(N (f1 - f*) / (L H eta^2 sigma^2))``; +inf if sigma is 0."""
    denom = p.L * p.H * p.eta ** 2 * p.sigma ** 2
    if p.sigma == 0:
        return math.inf
    if denom <= 0:
        raise BoundDomainError("L, H and eta must be positive")
    return math.sqrt(p.N * (p.f1 - p.f_star) / denom)
