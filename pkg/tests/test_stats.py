import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loophole_lab import analytic as A
from loophole_lab.engine import CountsTable, ExperimentConfig, ScanEntry, ScanResult, run_chsh, run_pair, run_scan
from loophole_lab.models import DetectorModel
from loophole_lab.oracle import QuadratureSpec, quad_outcome_table
from loophole_lab.stats import (DenominatorKind, accidental_estimate, ch74_experiment, ch74_freedman,
                                chsh, estimate_e, fair_sampling_diagnostics, subtract_accidentals,
                                visibility, visibility_from_rates)

PI = math.pi


def cfg(beta, n=1_000_000, seed=21, **kw):
    det = DetectorModel.equal_caps(beta)
    return ExperimentConfig(n, seed, det, det, **kw)


def test_estimate_e_hand_counts():
    t = CountsTable(nn=5, ss=5, neither=10, emitted=20).check()
    assert estimate_e(t, "observed").value == 1.0
    assert estimate_e(t, DenominatorKind.EMITTED).value == 0.5
    obs = estimate_e(t, "observed")
    assert obs.standard_error == 0.0 and obs.coincidence_total == 10


def test_estimate_e_undefined():
    t = CountsTable(a_only_n=3, neither=7, emitted=10)
    est = estimate_e(t, "observed")
    assert est.value is None and not est.defined
    assert estimate_e(t, "emitted").value == 0.0


def test_emitted_denominator_excludes_invalid():
    t = CountsTable(nn=4, invalid=2, neither=4, emitted=10).check()
    assert estimate_e(t, "emitted").value == pytest.approx(0.5)


def test_standard_error_delta_method():
    # like fraction p over C coincidences: se(E) = 2 sqrt(p(1-p)/C)
    t = CountsTable(nn=300, ss=300, ns=200, sn=200, emitted=1000)
    p = 0.6
    assert estimate_e(t).standard_error == pytest.approx(2 * math.sqrt(p * (1 - p) / 1000))


def test_large_run_estimates():
    beta = 5 * PI / 12
    t = run_pair(cfg(beta), 0.0, PI / 4)
    obs, emi = estimate_e(t, "observed"), estimate_e(t, "emitted")
    assert abs(obs.value - 0.8328210253) < 4 * obs.standard_error
    assert abs(emi.value) < 0.5


def test_chsh_reports():
    perfect = chsh(run_chsh(cfg(PI / 2), *A.BELL_ANGLES))
    assert abs(perfect.s_value - 2) < 4 * perfect.standard_error
    run75 = run_chsh(cfg(5 * PI / 12), *A.BELL_ANGLES)
    r = chsh(run75)
    assert abs(r.s_value - 3.331) < 4 * r.standard_error + 1e-3
    assert r.violates_classical and r.exceeds_qm
    emitted = chsh(run75, "emitted")
    assert abs(emitted.s_value) <= 2 and not emitted.violates_classical
    assert len(r.terms) == 4 and r.to_dict()["sValue"] == r.s_value


def test_chsh_undefined_propagates():
    empty = CountsTable(neither=10, emitted=10)
    full = CountsTable(nn=10, emitted=10)
    r = chsh([full, full, empty, full])
    assert r.s_value is None and not r.violates_classical
    with pytest.raises(ValueError):
        chsh([full, full, full])


def test_visibility():
    grid = np.linspace(0, PI, 9)
    assert visibility(run_scan(cfg(PI / 2, n=200_000), grid)) == 1.0
    assert visibility(run_scan(cfg(PI / 4, n=200_000), grid)) == 1.0
    assert visibility_from_rates([A.qm_coincidence(p) for p in grid]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        visibility_from_rates([0.0, 0.0])
    with pytest.raises(ValueError):
        visibility_from_rates([0.3])
    with pytest.raises(ValueError):
        visibility(run_scan(cfg(PI / 2, n=100), grid), channel="bogus")


@given(rates=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=20).filter(lambda r: max(r) > 1e-6),
       scale=st.floats(1e-3, 1e3))
def test_visibility_scale_invariant(rates, scale):
    assert visibility_from_rates([scale * r for r in rates]) == pytest.approx(visibility_from_rates(rates))


def test_ch74_values():
    qm = [0.5 * math.cos(math.radians(x)) ** 2 for x in (22.5, 67.5)]
    assert ch74_freedman(*qm, 1.0) == pytest.approx((math.sqrt(2) - 1) / 4)
    assert ch74_freedman(0.3, 0.3, 0.9) == -0.25
    with pytest.raises(ValueError):
        ch74_freedman(0.3, 0.1, 0.0)


def test_ch74_on_perfect_ball_saturates_bound():
    # perfect detection: R(pi/4) - R(3pi/4) = 1/4 exactly in expectation
    delta = ch74_experiment(cfg(PI / 2, n=1_000_000))
    assert abs(delta) < 4 * math.sqrt(2 * 0.375 / 1e6)


def test_accidental_estimate_and_identity():
    t = CountsTable(nn=10, ss=10, ns=2, sn=2, a_only_n=5, a_only_s=5, b_only_n=5, b_only_s=5,
                    neither=56, emitted=100).check()
    est = accidental_estimate(t)
    assert est["nn"] == pytest.approx(17 * 17 / 100)
    same = subtract_accidentals(t, {k: 0.0 for k in est})
    assert same.table == t and same.clipped == ()
    zero = CountsTable(neither=10, emitted=10)
    assert subtract_accidentals(zero).table == zero


def test_subtraction_raises_s_without_darks():
    run = run_chsh(cfg(5 * PI / 12), *A.BELL_ANGLES)
    raw = chsh(run).s_value
    adjusted = chsh([subtract_accidentals(t).table for t in run]).s_value
    assert adjusted >= raw


def test_subtraction_removes_pure_accidentals():
    # caps too small to see any real pair: every coincidence is two dark counts
    c = cfg(1e-4, n=400_000, dark_rate=0.5)
    t = run_pair(c, 0.0, 1.0)
    res = subtract_accidentals(t)
    for cell in ("nn", "ss", "ns", "sn"):
        assert getattr(res.table, cell) <= 5 * math.sqrt(getattr(t, cell))
        assert getattr(res.table, cell) < 0.02 * getattr(t, cell)


def test_diagnostics_perfect_and_missing_bands():
    grid = np.linspace(0, PI, 13)
    perfect = fair_sampling_diagnostics(run_scan(cfg(PI / 2, n=100_000), grid))
    assert perfect.total_rate_max_relative_variation == 0.0
    assert perfect.bell_angle_totals_equal_within == 0.0
    assert perfect.rotational_invariance_max_z is None
    d75 = fair_sampling_diagnostics(run_scan(cfg(5 * PI / 12, n=200_000), grid))
    assert d75.total_rate_max_relative_variation > 0.1
    assert abs(d75.min_total_rate_phi - PI / 2) <= PI / 12 + 1e-9
    assert set(d75.to_dict()) >= {"totalRateMaxRelativeVariation", "nsSnAsymmetryZ"}


def test_diagnostics_rotational_z():
    t1 = CountsTable(nn=500, neither=500, emitted=1000)
    t2 = CountsTable(nn=400, neither=600, emitted=1000)
    scan = ScanResult([ScanEntry(0.0, 0.5, t1), ScanEntry(0.3, 0.8, t2), ScanEntry(0.0, 0.9, t1)])
    d = fair_sampling_diagnostics(scan)
    se = math.sqrt(0.25 / 1000 + 0.24 / 1000)
    assert d.rotational_invariance_max_z == pytest.approx(0.1 / se)


def test_asymmetric_offset_detected():
    beta = math.radians(75)
    det_b = DetectorModel.equal_caps(beta, s_offset=math.radians(5))
    c = ExperimentConfig(1_000_000, 8, DetectorModel.equal_caps(beta), det_b)
    scan = run_scan(c, [PI / 4])
    z = fair_sampling_diagnostics(scan).ns_sn_asymmetry_z
    q = quad_outcome_table(c.detector_a.at(0), det_b.at(PI / 4), spec=QuadratureSpec(800, 1600))
    assert z > 4 and q[("N", "S")] > q[("S", "N")]


def test_symmetric_ns_sn_exchangeable():
    scan = run_scan(cfg(math.radians(75), n=1_000_000), [PI / 4, PI / 2])
    assert abs(fair_sampling_diagnostics(scan).ns_sn_asymmetry_z) < 4


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**63), beta=st.floats(0.05, PI / 2),
       angles=st.lists(st.floats(0, 2 * PI), min_size=4, max_size=4), dark=st.floats(0, 0.3))
def test_emitted_chsh_bounded_with_shared_stream(seed, beta, angles, dark):
    c = cfg(beta, n=2000, seed=seed, dark_rate=dark, shared_stream=True)
    report = chsh(run_chsh(c, *angles), "emitted")
    assert abs(report.s_value) <= 2 + 1e-12
    for term in report.terms:
        assert -1 <= term.value <= 1


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**63), beta=st.floats(0.05, PI / 2), phi=st.floats(0, PI))
def test_observed_e_in_range(seed, beta, phi):
    est = estimate_e(run_pair(cfg(beta, n=500, seed=seed), 0.0, phi))
    assert est.value is None or -1 <= est.value <= 1
