
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qidlaws.bv import PiecewiseBV, hahn_jordan
from qidlaws.convergence import (
    ConvergenceReport,
    TraceTest,
    aitken_limit,
    assess_trace,
    check_difference_convergence,
    default_battery,
    diagnose_basic,
    diagnose_qid_weak_limit,
    diagnose_weak_bv,
    jittered_grid,
    tightness_check,
    verify_criterion,
)
from qidlaws.levy_khinchine import SpectralPair
from qidlaws.scenarios import ScenarioSpec, limit_pair, realize_bv

from strategies import bv_functions

IDX = tuple(2**k for k in range(9))

# verdicts per example: (difference, basic, weak)
EXPECTED = {
    "example1": ("confirmed", "confirmed", "refuted"),
    "example2": ("confirmed", "confirmed", "refuted"),
    "example3": ("refuted", "confirmed", "confirmed"),
    "example4": ("confirmed", "confirmed", "refuted"),
}


def run_example(family):
    spec = ScenarioSpec(family)
    seq, lim = realize_bv(spec), limit_pair(spec).G
    return (
        check_difference_convergence(seq, lim, indices=spec.indices),
        diagnose_basic(seq, lim, spec.indices),
        diagnose_weak_bv(seq, lim, spec.indices),
    )


@pytest.fixture(scope="module")
def examples():
    return {fam: run_example(fam) for fam in EXPECTED}


# --- trace assessment ------------------------------------------------------


def test_assess_trace_cases():
    assert assess_trace(IDX, [0.0] * 9) == ("converged", None)
    status, rate = assess_trace(IDX, [1.0 / n for n in IDX])
    assert status == "decaying" and rate == pytest.approx(-1.0)
    status, rate = assess_trace(IDX, [2.0] * 9)
    assert status == "stalled" and rate == pytest.approx(0.0, abs=1e-12)
    assert assess_trace(IDX, [1.0, 1.0, 1.0, 0, 0, 0, 0, 0, 0])[0] == "converged"
    assert assess_trace((1, 2), [1.0, 1.0])[0] == "undetermined"
    assert assess_trace((), [])[0] == "undetermined"


@given(st.floats(1e-3, 1e3), st.floats(0.3, 3.0))
def test_power_law_decay_passes(c, p):
    status, _ = assess_trace(IDX, [c * n**-p for n in IDX])
    assert status in ("converged", "decaying")


@given(st.floats(1e-5, 1e3), st.floats(-0.05, 0.5))
def test_flat_or_growing_trace_stalls(c, p):
    status, rate = assess_trace(IDX, [c * n**p for n in IDX])
    assert status == "stalled" and rate > -0.1


@given(st.floats(-5, 5), st.floats(-3, 3).filter(lambda c: abs(c) > 1e-3), st.floats(-0.85, 0.85).filter(lambda r: abs(r) > 0.05))
def test_aitken_is_exact_on_geometric_sequences(limit, c, r):
    values = [limit + c * r**k for k in range(6)]
    assert aitken_limit(values) == pytest.approx(limit, abs=1e-9 * (1 + abs(c)))


def test_aitken_fallbacks():
    assert aitken_limit([3.0]) == 3.0
    assert aitken_limit([1.0, 2.0, 3.0]) == 3.0  # ratio 1: no acceleration
    assert aitken_limit([0.5, 0.5, 0.5]) == 0.5


def test_report_invariants():
    ok = TraceTest("a", (1,), (0.0,), 1e-6, True, "converged")
    bad = TraceTest("b", (1, 2, 4), (1.0, 1.0, 1.0), 1e-6, False, "stalled")
    witnessed = TraceTest("b", (1, 2, 4), (1.0, 1.0, 1.0), 1e-6, False, "stalled", 0.0, {"n": 4})
    with pytest.raises(ValueError):
        ConvergenceReport("confirmed", [ok, bad])
    with pytest.raises(ValueError):
        ConvergenceReport("refuted", [ok, bad])
    with pytest.raises(ValueError):
        ConvergenceReport("maybe", [ok])
    report = ConvergenceReport("refuted", [ok, witnessed])
    assert report.failed == [witnessed] and report.test("a") is ok
    with pytest.raises(KeyError):
        report.test("c")


# --- examples --------------------------------------------------------------


@pytest.mark.parametrize("family", sorted(EXPECTED))
def test_example_matrix(examples, family):
    verdicts = tuple(r.verdict for r in examples[family])
    assert verdicts == EXPECTED[family]


def test_example1_cosine_trace(examples):
    weak = examples["example1"][2]
    trace = weak.details["integrals"]["cos(1*pi*x)"]
    assert trace == pytest.approx([2.0 * (-1) ** n for n in IDX], abs=1e-12)
    assert not weak.test("battery:cos(1*pi*x)").passed


def test_example2_variation_and_hat(examples):
    weak = examples["example2"][2]
    assert weak.test("variation_bound").trace == pytest.approx([2.0 * n for n in IDX])
    assert weak.test("variation_bound").status == "growing"
    # sqrt_hat integrates to -sqrt(1/n^2) * n = -1 for every n
    assert weak.details["integrals"]["sqrt_hat"] == pytest.approx([-1.0] * 9, abs=1e-12)
    routes = examples["example2"][1].details["routes"]
    assert routes["transform"].verdict == "inconclusive"
    assert routes["difference"].verdict == "confirmed"


def test_example3_witness(examples):
    diff = examples["example3"][0]
    w = diff.tests[0].witness
    assert w is not None and w["deviation"] == pytest.approx(1.0)
    # the pair straddles the left end of the block [a_n, b_n) inside [0, 1]
    assert -0.01 < w["x1"] < 0.0 <= w["x2"] <= 1.0 and w["x2"] - w["x1"] < 0.02
    assert examples["example3"][1].details["routes"]["transform"].verdict == "confirmed"


def test_example4_mass_anomaly(examples):
    basic = examples["example4"][1]
    assert basic.hypothesis_checks["mass_converges"] is False
    assert basic.hypothesis_checks["mass_trace"] == pytest.approx([2.0] * 9)
    assert any("t = 0 anomaly" in n for n in basic.notes)
    weak = examples["example4"][2]
    assert weak.test("battery:one").witness["integral"] == pytest.approx(2.0)


def test_weak_implies_basic(examples):
    for diff, basic, weak in examples.values():
        if weak.verdict == "confirmed":
            assert basic.verdict == "confirmed"


@given(bv_functions(), bv_functions())
@settings(max_examples=20, deadline=None)
def test_weak_implies_basic_on_perturbations(G, H):
    seq = [G + H * (1.0 / n) for n in IDX]
    weak = diagnose_weak_bv(seq, G, IDX)
    basic = diagnose_basic(seq, G, IDX)
    assert weak.verdict == "confirmed"
    assert basic.verdict == "confirmed"


def test_determinism():
    a = run_example("example3")
    b = run_example("example3")
    for x, y in zip(a, b):
        assert x.verdict == y.verdict
        assert [t.trace for t in x.tests] == [t.trace for t in y.tests]


def test_difference_grid_must_avoid_limit_atoms():
    G = PiecewiseBV.step(0.5)
    with pytest.raises(ValueError, match="atom of the limit"):
        check_difference_convergence([G], G, grid=np.array([0.0, 0.5]))
    assert not np.intersect1d(jittered_grid(), np.arange(-10, 11) / 8).size


def test_basic_without_limit_uses_cauchy_steps():
    seq = realize_bv(ScenarioSpec("example3"))
    report = diagnose_basic(seq, None, IDX)
    assert report.verdict == "confirmed"
    assert "transform_cauchy" in [t.name for t in report.tests]


def test_battery_contents():
    names = [name for name, _ in default_battery()]
    assert names[0] == "one" and "sqrt_hat" in names and len(names) == 23


# --- tightness -------------------------------------------------------------


def test_tightness_examples():
    assert tightness_check([]).verdict == "confirmed"
    escaping = [PiecewiseBV.step(float(n)) for n in IDX]
    report = tightness_check(escaping)
    assert report.verdict == "refuted"
    assert report.tests[0].witness["r"] == 128 and report.tests[0].witness["tail_mass"] == 1.0
    assert tightness_check([PiecewiseBV.step(0.3)] * 5).verdict == "confirmed"
    with pytest.raises(ValueError, match="not non-decreasing"):
        tightness_check([PiecewiseBV.step(0.0, -1.0)])


def test_tightness_of_negative_parts():
    spec = ScenarioSpec("qid_ratio")
    negs = [hahn_jordan(G).negative_part for G in realize_bv(spec)]
    assert tightness_check(negs).verdict == "confirmed"


# --- QID pipeline ----------------------------------------------------------


@pytest.mark.parametrize("family", ["atom_drift", "qid_ratio", "poisson"])
def test_qid_pipeline_confirms(family):
    report = diagnose_qid_weak_limit(ScenarioSpec(family))
    assert report.verdict == "confirmed"
    # extrapolated from n <= 256 of a sequence with O(1/n) error
    expected = limit_pair(ScenarioSpec(family)).gamma
    assert report.hypothesis_checks["gamma_limit"] == pytest.approx(expected, abs=1e-4)


def test_qid_recovers_limit_mass():
    report = diagnose_qid_weak_limit(ScenarioSpec("qid_ratio"), "bounded-negative-part")
    checks = report.hypothesis_checks
    assert report.verdict == "confirmed" and checks["mass_bound_holds"]
    assert checks["g0_estimate"] == pytest.approx(0.5 - 0.2 * 256 / 257, abs=1e-4)
    assert checks["B_estimate"] == pytest.approx(checks["g0_estimate"] + 2 * checks["M_estimate"], abs=1e-4)


def test_qid_hypothesis_violation_is_inconclusive():
    report = diagnose_qid_weak_limit(ScenarioSpec("example2"))
    assert report.verdict == "inconclusive"
    assert report.hypothesis_checks["hypothesis_violated"] is True
    with pytest.raises(ValueError):
        diagnose_qid_weak_limit(ScenarioSpec("poisson"), mode="bounded")


# --- criterion -------------------------------------------------------------


def test_criterion_accepts_true_limit():
    spec = ScenarioSpec("atom_drift", indices=tuple(2**k for k in range(31)))
    report = verify_criterion(spec, limit_pair(spec))
    assert report.verdict == "confirmed"
    assert report.hypothesis_checks["final_cf_deviation"] < 1e-6
    assert report.hypothesis_checks["gamma_residual"] < 1e-6


def test_criterion_refutes_wrong_gamma():
    spec = ScenarioSpec("atom_drift", indices=tuple(2**k for k in range(31)))
    true = limit_pair(spec)
    report = verify_criterion(spec, SpectralPair(true.gamma + 0.1, true.G, true.tau))
    assert report.verdict == "refuted"
    w = report.test("gamma_vs_candidate").witness
    assert w["residual"] == pytest.approx(0.1, abs=1e-9)


def test_criterion_rejects_wrong_measure():
    spec = ScenarioSpec("atom_drift", indices=tuple(2**k for k in range(31)))
    true = limit_pair(spec)
    report = verify_criterion(spec, SpectralPair(true.gamma, PiecewiseBV.step(1.0, 0.6), true.tau))
    assert report.verdict != "confirmed"
    assert not report.test("cf_vs_candidate").passed
