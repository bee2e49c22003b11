"""Closed-form predictions for the rotationally invariant equal-cap chaotic ball.

Every function here is a pure function of floats. Angles are radians.
``phi`` is the difference between the two detector settings, folded into
[0, pi]; ``beta`` is the half-angle of the cap each side can resolve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

DOMAIN_TOL = 1e-12
HALF_PI = 0.5 * math.pi

Estimator = Literal["normalised", "unnormalised"]


@dataclass(frozen=True)
class BallParams:
    beta: float
    identical_spins: bool = True

    def __post_init__(self):
        _check_beta(self.beta)


@dataclass(frozen=True)
class CorrelationValue:
    """A correlation ratio that may be undefined (zero denominator)."""

    numerator: float
    denominator: float

    @property
    def defined(self) -> bool:
        return self.denominator != 0.0

    @property
    def value(self) -> float | None:
        if self.denominator == 0.0:
            return None
        return self.numerator / self.denominator


def _check_beta(beta: float) -> None:
    if not (0.0 < beta <= HALF_PI + DOMAIN_TOL):
        raise ValueError(f"beta must lie in (0, pi/2], got {beta!r}")


def _check_phi(phi: float) -> None:
    if not (-DOMAIN_TOL <= phi <= math.pi + DOMAIN_TOL):
        raise ValueError(f"phi must lie in [0, pi], got {phi!r}")


def fold_angle(delta: float) -> float:
    """Fold an arbitrary setting difference into the angle between directions, in [0, pi]."""
    d = math.fmod(delta, 2.0 * math.pi)
    if d < 0.0:
        d += 2.0 * math.pi
    return 2.0 * math.pi - d if d > math.pi else d


def cap_overlap_fraction(alpha: float, beta: float) -> float:
    """Fraction of the sphere inside two caps of half-angle ``beta`` whose axes are ``2*alpha`` apart."""
    if not (-DOMAIN_TOL <= alpha <= HALF_PI + DOMAIN_TOL):
        raise ValueError(f"alpha must lie in [0, pi/2], got {alpha!r}")
    _check_beta(beta)
    alpha = min(max(alpha, 0.0), HALF_PI)
    beta = min(beta, HALF_PI)
    if alpha == 0.0:
        return 0.5 * (1.0 - math.cos(beta))
    if alpha >= beta:
        return 0.0
    # acos(sin a / sin b) and acos(tan a / tan b) rewritten as atan2 with
    # sin^2 b - sin^2 a = sin(b - a) sin(b + a): no cancellation near the
    # branch edges and no argument can leave the acos domain
    root = math.sqrt(max(0.0, math.sin(beta - alpha) * math.sin(beta + alpha)))
    sin_alpha, cos_beta = math.sin(alpha), math.cos(beta)
    first = math.atan2(root, sin_alpha)
    second = math.atan2(root, sin_alpha * cos_beta) * cos_beta
    return max(0.0, (first - second) / math.pi)


def _effective_phi(phi: float, identical_spins: bool) -> float:
    _check_phi(phi)
    phi = min(max(phi, 0.0), math.pi)
    return phi if identical_spins else math.pi - phi


def p_like(phi: float, beta: float, identical_spins: bool = True) -> float:
    """P_SS (= P_NN) per emitted pair."""
    return cap_overlap_fraction(0.5 * _effective_phi(phi, identical_spins), beta)


def p_unlike(phi: float, beta: float, identical_spins: bool = True) -> float:
    """P_NS (= P_SN) per emitted pair."""
    return cap_overlap_fraction(HALF_PI - 0.5 * _effective_phi(phi, identical_spins), beta)


def total_rate(phi: float, beta: float, identical_spins: bool = True) -> float:
    """Total coincidence rate T_obs/N = P_NN + P_SS + P_NS + P_SN."""
    return 2.0 * (p_like(phi, beta, identical_spins) + p_unlike(phi, beta, identical_spins))


def correlation_normalised(phi: float, beta: float, identical_spins: bool = True) -> CorrelationValue:
    like = p_like(phi, beta, identical_spins)
    unlike = p_unlike(phi, beta, identical_spins)
    return CorrelationValue(2.0 * like - 2.0 * unlike, 2.0 * (like + unlike))


def correlation_unnormalised(phi: float, beta: float, identical_spins: bool = True) -> float:
    return 2.0 * p_like(phi, beta, identical_spins) - 2.0 * p_unlike(phi, beta, identical_spins)


def correlation(phi: float, beta: float, estimator: Estimator = "normalised",
                identical_spins: bool = True) -> float | None:
    if estimator == "normalised":
        return correlation_normalised(phi, beta, identical_spins).value
    if estimator == "unnormalised":
        return correlation_unnormalised(phi, beta, identical_spins)
    raise ValueError(f"unknown estimator {estimator!r}")


def chsh_combine(e_ab, e_abp, e_apb, e_apbp):
    """S = E(a,b) - E(a,b') + E(a',b) + E(a',b'); None if any term is None."""
    if e_ab is None or e_abp is None or e_apb is None or e_apbp is None:
        return None
    return e_ab - e_abp + e_apb + e_apbp


def chsh_analytic(beta: float, a: float, a_prime: float, b: float, b_prime: float,
                  estimator: Estimator = "normalised", identical_spins: bool = True) -> float | None:
    """CHSH statistic predicted by the ball model for four setting angles."""
    def e(x, y):
        return correlation(fold_angle(y - x), beta, estimator, identical_spins)

    return chsh_combine(e(a, b), e(a, b_prime), e(a_prime, b), e(a_prime, b_prime))


BELL_ANGLES = (0.0, HALF_PI, 0.25 * math.pi, 0.75 * math.pi)
"""Standard CHSH settings (a, a', b, b')."""


def qm_coincidence(phi: float) -> float:
    """Quantum prediction for P_SS: cos^2(phi/2) / 2."""
    return 0.5 * math.cos(0.5 * phi) ** 2


def qm_correlation(phi: float) -> float:
    return math.cos(phi)


def qm_chsh(a: float, a_prime: float, b: float, b_prime: float) -> float:
    e = qm_correlation
    return e(b - a) - e(b_prime - a) + e(b - a_prime) + e(b_prime - a_prime)
