"""Estimators and test statistics computed from coincidence counts."""

from __future__ import annotations

import dataclasses
import enum
import itertools
import math
from dataclasses import dataclass, fields
from typing import Sequence

from .analytic import chsh_combine, fold_angle
from .engine import CountsTable, ExperimentConfig, ScanResult, run_pair
from .models import DetectorMode

CLASSICAL_BOUND = 2.0
QM_BOUND = 2.0 * math.sqrt(2.0)
# both visibility thresholds in circulation; neither is endorsed here
VISIBILITY_THRESHOLDS = {"inv_sqrt2": 1.0 / math.sqrt(2.0), "half": 0.5}


class DenominatorKind(str, enum.Enum):
    OBSERVED = "observed"   # sum of observed coincidences
    EMITTED = "emitted"     # emitted pairs, less invalid events


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float | None
    standard_error: float
    denominator_kind: DenominatorKind
    coincidence_total: float

    @property
    def defined(self) -> bool:
        return self.value is not None

    def to_dict(self) -> dict:
        return {"value": self.value, "standardError": self.standard_error,
                "denominatorKind": self.denominator_kind.value,
                "coincidenceTotal": _num(self.coincidence_total)}


@dataclass(frozen=True)
class BellReport:
    s_value: float | None
    terms: tuple[CorrelationEstimate, ...]
    violates_classical: bool
    exceeds_qm: bool
    standard_error: float

    def to_dict(self) -> dict:
        return {"sValue": self.s_value, "terms": [t.to_dict() for t in self.terms],
                "violatesClassical": self.violates_classical, "exceedsQm": self.exceeds_qm,
                "standardError": self.standard_error}


@dataclass(frozen=True)
class DiagnosticsReport:
    total_rate_max_relative_variation: float
    bell_angle_totals_equal_within: float | None
    rotational_invariance_max_z: float | None
    ns_sn_asymmetry_z: float
    min_total_rate_phi: float

    def to_dict(self) -> dict:
        return {"totalRateMaxRelativeVariation": self.total_rate_max_relative_variation,
                "bellAngleTotalsEqualWithin": self.bell_angle_totals_equal_within,
                "rotationalInvarianceMaxZ": self.rotational_invariance_max_z,
                "nsSnAsymmetryZ": self.ns_sn_asymmetry_z,
                "minTotalRatePhi": self.min_total_rate_phi}


def _num(x):
    x = float(x)
    return int(x) if x.is_integer() else x


def estimate_e(table: CountsTable, kind: DenominatorKind | str = DenominatorKind.OBSERVED) -> CorrelationEstimate:
    """Correlation E = (NN + SS - NS - SN) / denominator.

    Standard errors come from the delta method with each event scoring
    +1, -1 or 0: var(E) = (mean of squares - E^2) / denominator.
    """
    kind = DenominatorKind(kind)
    like, unlike = float(table.like), float(table.unlike)
    total = like + unlike
    denom = total if kind is DenominatorKind.OBSERVED else float(table.valid)
    if denom <= 0.0:
        return CorrelationEstimate(None, 0.0, kind, total)
    value = (like - unlike) / denom
    value = min(1.0, max(-1.0, value))
    var = max(0.0, total / denom - value * value) / denom
    return CorrelationEstimate(value, math.sqrt(var), kind, total)


def chsh(tables: Sequence[CountsTable], kind: DenominatorKind | str = DenominatorKind.OBSERVED) -> BellReport:
    """CHSH S from four tables ordered (a,b), (a,b'), (a',b), (a',b')."""
    tables = list(tables)
    if len(tables) != 4:
        raise ValueError(f"chsh needs exactly four tables, got {len(tables)}")
    terms = tuple(estimate_e(t, kind) for t in tables)
    s = chsh_combine(*(t.value for t in terms))
    se = math.sqrt(sum(t.standard_error ** 2 for t in terms))
    if s is None:
        return BellReport(None, terms, False, False, se)
    return BellReport(s, terms, abs(s) > CLASSICAL_BOUND, abs(s) > QM_BOUND, se)


_CHANNELS = {
    "like": lambda t: t.nn + t.ss,
    "unlike": lambda t: t.ns + t.sn,
    "nn": lambda t: t.nn, "ss": lambda t: t.ss, "ns": lambda t: t.ns, "sn": lambda t: t.sn,
}


def scan_rates(scan: ScanResult, channel: str = "like") -> list[float]:
    try:
        pick = _CHANNELS[channel]
    except KeyError:
        raise ValueError(f"unknown channel {channel!r}; choose from {sorted(_CHANNELS)}") from None
    return [pick(e.table) / e.table.emitted for e in scan]


def visibility_from_rates(rates: Sequence[float]) -> float:
    if len(rates) < 2:
        raise ValueError("visibility needs at least two rates")
    hi, lo = max(rates), min(rates)
    if hi <= 0.0:
        raise ValueError("visibility undefined: every rate is zero")
    return (hi - lo) / (hi + lo)


def visibility(scan: ScanResult, channel: str = "like") -> float:
    """(max - min) / (max + min) of a coincidence-rate curve."""
    return visibility_from_rates(scan_rates(scan, channel))


def ch74_freedman(rate_low: float, rate_high: float, rate_removed: float) -> float:
    """Freedman form of the single-channel CH74 test.

    ``rate_low`` and ``rate_high`` are single-channel coincidence rates at
    polariser angles 22.5 and 67.5 degrees (ball angles pi/4 and 3pi/4),
    ``rate_removed`` the rate with both analysers removed. Local models give
    a value <= 0.
    """
    if not rate_removed > 0.0:
        raise ValueError("analyser-removed rate must be positive")
    return abs(rate_low - rate_high) / rate_removed - 0.25


def ch74_from_tables(table_low: CountsTable, table_high: CountsTable, table_removed: CountsTable) -> float:
    return ch74_freedman(table_low.nn / table_low.emitted, table_high.nn / table_high.emitted,
                         table_removed.nn / table_removed.emitted)


def ch74_experiment(config: ExperimentConfig, a: float = 0.0) -> float:
    """Run the single-channel protocol on the simulator and return the Freedman statistic.

    Both sides switch to N-channel-only detection at ball angles pi/4 and
    3pi/4, then to analyser-removed detection with aligned settings.
    """
    def with_mode(mode):
        return config.replace(
            detector_a=dataclasses.replace(config.detector_a, mode=mode),
            detector_b=dataclasses.replace(config.detector_b, mode=mode))

    single = with_mode(DetectorMode.SINGLE_CHANNEL_N)
    low = run_pair(single, a, a + 0.25 * math.pi, 0)
    high = run_pair(single, a, a + 0.75 * math.pi, 1)
    removed = run_pair(with_mode(DetectorMode.ANALYSER_REMOVED), a, a, 2)
    return ch74_from_tables(low, high, removed)


@dataclass(frozen=True)
class AccidentalSubtraction:
    table: CountsTable
    estimate: dict
    clipped: tuple[str, ...]


def accidental_estimate(table: CountsTable) -> dict:
    """Uncorrelated-product estimate of accidental coincidences per category."""
    n = table.emitted
    if n <= 0:
        return {k: 0.0 for k in ("nn", "ss", "ns", "sn")}
    a_n = table.nn + table.ns + table.a_only_n
    a_s = table.ss + table.sn + table.a_only_s
    b_n = table.nn + table.sn + table.b_only_n
    b_s = table.ss + table.ns + table.b_only_s
    return {"nn": a_n * b_n / n, "ss": a_s * b_s / n, "ns": a_n * b_s / n, "sn": a_s * b_n / n}


def subtract_accidentals(table: CountsTable, estimate: dict | None = None) -> AccidentalSubtraction:
    """Subtract accidental estimates from the coincidence cells, clipping at zero.

    The result has real-valued cells and no longer sums to ``emitted``.
    """
    if estimate is None:
        estimate = accidental_estimate(table)
    cells = {f.name: getattr(table, f.name) for f in fields(table)}
    clipped = []
    for name in ("nn", "ss", "ns", "sn"):
        adjusted = cells[name] - estimate.get(name, 0.0)
        if adjusted < 0.0:
            clipped.append(name)
            adjusted = 0.0
        cells[name] = adjusted
    return AccidentalSubtraction(CountsTable(**cells), dict(estimate), tuple(clipped))


def _rate_z(k1, n1, k2, n2) -> float:
    p1, p2 = k1 / n1, k2 / n2
    var = p1 * (1.0 - p1) / n1 + p2 * (1.0 - p2) / n2
    if var <= 0.0:
        return 0.0 if p1 == p2 else math.copysign(math.inf, p1 - p2)
    return (p1 - p2) / math.sqrt(var)


def fair_sampling_diagnostics(scan: ScanResult, angle_tol: float = 1e-9) -> DiagnosticsReport:
    """Checks that a fair-sampling analysis silently assumes.

    Total coincidence rate should not vary with phi; entries at pi/4 and
    3pi/4 are compared directly; entries sharing a phi but not (a, b) are
    compared by z-score of their NN rate; NS and SN are tested for
    exchangeability over the whole scan.
    """
    if len(scan) == 0:
        raise ValueError("diagnostics need a non-empty scan")
    phis = [fold_angle(e.phi) for e in scan]
    totals = [e.table.coincidences / e.table.emitted for e in scan]
    hi = max(totals)
    variation = (hi - min(totals)) / hi if hi > 0.0 else 0.0
    min_phi = phis[totals.index(min(totals))]

    def total_at(target):
        for phi, t in zip(phis, totals):
            if abs(phi - target) <= angle_tol:
                return t
        return None

    t1, t3 = total_at(0.25 * math.pi), total_at(0.75 * math.pi)
    bell_gap = abs(t1 - t3) if t1 is not None and t3 is not None else None

    groups: dict[int, list] = {}
    for phi, e in zip(phis, scan):
        groups.setdefault(round(phi / angle_tol), []).append(e.table)
    zs = [abs(_rate_z(x.nn, x.emitted, y.nn, y.emitted))
          for g in groups.values() for x, y in itertools.combinations(g, 2)]
    rot_z = max(zs) if zs else None

    ns = sum(e.table.ns for e in scan)
    sn = sum(e.table.sn for e in scan)
    asym = (ns - sn) / math.sqrt(ns + sn) if ns + sn > 0 else 0.0
    return DiagnosticsReport(variation, bell_gap, rot_z, asym, min_phi)

