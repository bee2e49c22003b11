"""Brute-force checks of coincidence probabilities.

Two independent routes evaluate the local-model integral
P(x, y) = int rho(lam) p_A(x | lam) p_B(y | lam) dlam
for arbitrary detector models: a midpoint product rule over
(cos theta, azimuth), and plain Monte Carlo hit counting. Neither route uses
the engine's sampler or outcome code; cap geometry is recomputed here from
the detector fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import DetectorMode, DetectorModel, SourceKind, SourceModel

SIDE_OUTCOMES = ("N", "S", "none")
# side-level probability vectors are stacked in this order; index 3 is "invalid"
_IDX = {"N": 0, "S": 1, "none": 2, "Detect": 0, "NoDetect": 2}


@dataclass(frozen=True)
class QuadratureSpec:
    polar_steps: int = 2000
    azimuth_steps: int = 4000

    def __post_init__(self):
        if self.polar_steps < 1 or self.azimuth_steps < 1:
            raise ValueError("quadrature step counts must be positive")

    @property
    def acceptance_grade(self) -> bool:
        return self.polar_steps * self.azimuth_steps >= 10_000


def _cap_axis(nominal: float, offset: float, sign: float) -> np.ndarray:
    t = nominal + offset
    return sign * np.array([math.cos(t), 0.0, math.sin(t)])


def side_probabilities(x, y, z, detector: DetectorModel, dark_rate: float = 0.0) -> list:
    """Probabilities of (N, S, none, invalid) for one side at points (x, y, z).

    Inputs broadcast against each other; each returned array has the
    broadcast shape.
    """
    n_cap, s_cap = detector.n_cap, detector.s_cap
    shape = np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(z))

    def proj(cap, sign):
        # cap axes lie in the x-z plane
        ax = _cap_axis(cap.nominal_angle, cap.axis_offset, sign)
        return ax[0] * x + ax[2] * z

    if detector.mode is DetectorMode.ANALYSER_REMOVED:
        p_n = np.abs(proj(n_cap, 1.0)) > math.cos(n_cap.half_angle)
        p_s = np.zeros(shape, dtype=bool)
    elif detector.stochastic is not None:
        lam = np.stack(np.broadcast_arrays(x, y, z), axis=-1).reshape(-1, 3)
        p_n = np.asarray(detector.stochastic(lam, n_cap), dtype=float).reshape(shape)
        p_s = np.asarray(detector.stochastic(lam, s_cap), dtype=float).reshape(shape)
    else:
        p_n = proj(n_cap, 1.0) > math.cos(n_cap.half_angle)
        p_s = proj(s_cap, -1.0) > math.cos(s_cap.half_angle)
    if detector.mode is DetectorMode.SINGLE_CHANNEL_N:
        p_s = np.zeros(shape, dtype=p_n.dtype)

    if p_n.dtype == bool and p_s.dtype == bool:
        only_n = (p_n & ~p_s).astype(float)
        only_s = (p_s & ~p_n).astype(float)
        both = (p_n & p_s).astype(float)
        none = 1.0 - only_n - only_s - both
    else:
        only_n = p_n * (1.0 - p_s)
        only_s = p_s * (1.0 - p_n)
        both = p_n * p_s
        none = (1.0 - p_n) * (1.0 - p_s)
    if dark_rate > 0.0:
        d = dark_rate
        if detector.mode is DetectorMode.TWO_CHANNEL:
            to_n, to_s = 0.5 * d, 0.5 * d
        else:
            to_n, to_s = d, 0.0
        only_n, only_s, both, none = (
            only_n * (1.0 - d) + none * to_n,
            only_s * (1.0 - d) + none * to_s,
            both + (only_n + only_s) * d,
            none * (1.0 - d),
        )
    return [np.broadcast_to(v, shape) for v in (only_n, only_s, none, both)]


def _density(source: SourceModel, x, y, z):
    if source.kind is SourceKind.UNIFORM:
        return np.ones_like(x)
    ax = source.axis
    c = ax[0] * x + ax[1] * y + ax[2] * z
    return 1.0 + source.strength * c * c


def _parse_pair(outcome_pair) -> tuple[int, int] | str:
    if outcome_pair == "invalid":
        return "invalid"
    x, y = outcome_pair
    try:
        return _IDX[x], _IDX[y]
    except KeyError:
        raise ValueError(f"unknown outcome pair {outcome_pair!r}") from None


def quad_outcome_table(detector_a: DetectorModel, detector_b: DetectorModel,
                       source: SourceModel | None = None, spec: QuadratureSpec | None = None,
                       identical_spins: bool = True, dark_rate: float = 0.0,
                       rows_per_chunk: int = 100) -> dict:
    """Quadrature of every joint outcome probability.

    Keys are ``(x, y)`` for x, y in ("N", "S", "none") plus ``"invalid"``.
    Accumulation runs in a fixed chunk order, so results are bit-reproducible.
    """
    source = source or SourceModel()
    spec = spec or QuadratureSpec()
    nz, naz = spec.polar_steps, spec.azimuth_steps
    z_mid = -1.0 + (np.arange(nz) + 0.5) * (2.0 / nz)
    az = (np.arange(naz) + 0.5) * (2.0 * math.pi / naz)
    cos_az, sin_az = np.cos(az), np.sin(az)
    sign_b = 1.0 if identical_spins else -1.0

    acc = np.zeros((3, 3))
    weight = 0.0
    for start in range(0, nz, rows_per_chunk):
        z1 = z_mid[start:start + rows_per_chunk, None]
        r = np.sqrt(np.maximum(0.0, 1.0 - z1 * z1))
        x, y, z = r * cos_az, r * sin_az, z1
        pa = side_probabilities(x, y, z, detector_a, dark_rate)[:3]
        pb = side_probabilities(sign_b * x, sign_b * y, sign_b * z, detector_b, dark_rate)[:3]
        if source.kind is SourceKind.UNIFORM:
            weight += x.size
        else:
            rho = _density(source, x, y, z)
            pa = [p * rho for p in pa]
            weight += rho.sum()
        pb = [np.ascontiguousarray(p).ravel() for p in pb]
        for i, p in enumerate(pa):
            p = np.ascontiguousarray(p).ravel()
            for j in range(3):
                acc[i, j] += p @ pb[j]
    if not (math.isfinite(weight) and weight > 0.0):
        raise ValueError("source density is not normalisable")
    probs = acc / weight
    out = {(SIDE_OUTCOMES[i], SIDE_OUTCOMES[j]): float(probs[i, j]) for i in range(3) for j in range(3)}
    out["invalid"] = float(max(0.0, 1.0 - probs.sum()))
    return out


def quad_coincidence_prob(detector_a: DetectorModel, detector_b: DetectorModel,
                          source: SourceModel | None = None, outcome_pair=("S", "S"),
                          spec: QuadratureSpec | None = None, identical_spins: bool = True,
                          dark_rate: float = 0.0) -> float:
    key = _parse_pair(outcome_pair)
    table = quad_outcome_table(detector_a, detector_b, source, spec, identical_spins, dark_rate)
    if key == "invalid":
        return table["invalid"]
    return table[(SIDE_OUTCOMES[key[0]], SIDE_OUTCOMES[key[1]])]


def _inverse_cdf_polar(u: np.ndarray, k: float) -> np.ndarray:
    """Invert the CDF of density (1 + k c^2) on [-1, 1] by Cardano's formula."""
    if k == 0.0:
        return 2.0 * u - 1.0
    # k c^3/3 + c + (1 + k/3) - u (2 + 2k/3) = 0, monotone in c
    p = 3.0 / k
    q = 3.0 * ((1.0 + k / 3.0) - u * (2.0 + 2.0 * k / 3.0)) / k
    disc = np.sqrt(q * q / 4.0 + p ** 3 / 27.0)
    c = np.cbrt(-q / 2.0 + disc) + np.cbrt(-q / 2.0 - disc)
    return np.clip(c, -1.0, 1.0)


def _mc_points(source: SourceModel, rng: np.random.Generator, n: int):
    axis = np.asarray(source.axis)
    k = source.strength if source.kind is SourceKind.ANISOTROPIC else 0.0
    c = _inverse_cdf_polar(rng.random(n), k)
    psi = rng.uniform(0.0, 2.0 * math.pi, n)
    # orthonormal frame around the anisotropy axis
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    r = np.sqrt(np.maximum(0.0, 1.0 - c * c))
    pts = c[:, None] * axis + (r * np.cos(psi))[:, None] * e1 + (r * np.sin(psi))[:, None] * e2
    return pts[:, 0], pts[:, 1], pts[:, 2]


def _draw_side(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs, axis=0)
    return (u[None, :] >= cdf[:-1]).sum(axis=0)


def mc_coincidence_prob(detector_a: DetectorModel, detector_b: DetectorModel,
                        source: SourceModel | None = None, outcome_pair=("S", "S"),
                        n_samples: int = 1_000_000, seed: int = 0, identical_spins: bool = True,
                        dark_rate: float = 0.0, chunk: int = 1 << 20) -> tuple[float, float]:
    """Monte Carlo estimate and binomial standard error sqrt(p(1-p)/n)."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    source = source or SourceModel()
    key = _parse_pair(outcome_pair)
    rng = np.random.default_rng(seed)
    sign_b = 1.0 if identical_spins else -1.0
    hits = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        x, y, z = _mc_points(source, rng, m)
        oa = _draw_side(np.array(side_probabilities(x, y, z, detector_a, dark_rate)), rng.random(m))
        ob = _draw_side(np.array(side_probabilities(sign_b * x, sign_b * y, sign_b * z, detector_b,
                                                    dark_rate)), rng.random(m))
        if key == "invalid":
            hits += int(np.count_nonzero((oa == 3) | (ob == 3)))
        else:
            hits += int(np.count_nonzero((oa == key[0]) & (ob == key[1])))
        done += m
    p = hits / n_samples
    return p, math.sqrt(p * (1.0 - p) / n_samples)
