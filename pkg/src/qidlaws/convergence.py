"""Finite-sample diagnostics for weak and basic convergence of BV sequences.

Limits cannot be decided from finitely many indices, so every diagnostic
reduces to traces: one statistic per realized index n.  A trace passes when
it has reached the tolerance over its last third ("converged") or when a
least-squares fit of log(deviation) against log(n) over its second half has
slope <= -0.25 and the last value is at most half the largest
("decaying").  It is "stalled" when the fitted slope is above -0.1 and the
last third stays above tolerance; a stalled trace with a concrete witness is
what turns a verdict into "refuted".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bv import eval_bv, hahn_jordan, limit_at_infinity, stieltjes_integral, total_variation
from .fourier import DistinguishedLog, default_grid, fs_transform
from .levy_khinchine import SpectralPair, cf_evaluator, log_cf, recover_spectral_transform
from .quadrature import QuadratureSettings
from .scenarios import ScenarioSpec, realize

TOL = 1e-6
GRID_JITTER = math.sqrt(2.0) * 1e-3
DECAY_SLOPE = -0.25
STALL_SLOPE = -0.1
GROWTH_SLOPE = 0.1
# the battery holds sqrt_hat, whose derivative blows up at 0, 1 and 2
BATTERY_QUADRATURE = QuadratureSettings(min_width=1e-10)

VERDICTS = ("confirmed", "refuted", "inconclusive")
MODES = ("bounded-variation", "bounded-negative-part")

TIGHTNESS_NOTE = (
    "tightness statistic uses ||G_n^-|| - (|G_n^-|(r) - |G_n^-|(-r)); the displayed "
    "condition with a leading 1 instead of ||G_n^-|| is treated as a misprint"
)


@dataclass(frozen=True)
class TraceTest:
    name: str
    indices: tuple
    trace: tuple
    threshold: float
    passed: bool
    status: str
    rate: float | None = None
    witness: dict | None = None


@dataclass
class ConvergenceReport:
    verdict: str
    tests: list = field(default_factory=list)
    hypothesis_checks: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "refuted" and not any(
            not t.passed and t.witness is not None for t in self.tests
        ):
            raise ValueError("a refuted verdict needs a failed test with a witness")
        if self.verdict == "confirmed" and not all(t.passed for t in self.tests):
            raise ValueError("a confirmed verdict needs every test to pass")

    def test(self, name) -> TraceTest:
        for t in self.tests:
            if t.name == name:
                return t
        raise KeyError(name)

    @property
    def failed(self):
        return [t for t in self.tests if not t.passed]


# --- trace assessment ------------------------------------------------------


def _log_slope(x, y, floor):
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.maximum(np.asarray(y, dtype=float), floor))
    return float(np.polyfit(lx, ly, 1)[0])


def assess_trace(indices, deviations, tol=TOL):
    """Classify a non-negative trace; returns ``(status, rate)``.

    ``status`` is one of converged, decaying, stalled, undetermined; ``rate``
    is the fitted log-log slope (``None`` when no fit was needed).
    """
    d = np.abs(np.asarray(deviations, dtype=float))
    x = np.asarray(indices, dtype=float)
    if d.size == 0:
        return "undetermined", None
    k = max(1, d.size // 3)
    if d[-k:].max() <= tol:
        return "converged", None
    if d.size < 3:
        return "undetermined", None
    m = min(d.size // 2, d.size - 3)
    rate = _log_slope(x[m:], d[m:], tol)
    if rate <= DECAY_SLOPE and d[-1] <= 0.5 * d.max():
        return "decaying", rate
    if rate > STALL_SLOPE and d[-k:].min() > tol:
        return "stalled", rate
    return "undetermined", rate


def _trace_test(name, indices, trace, tol, witness=None):
    status, rate = assess_trace(indices, trace, tol)
    passed = status in ("converged", "decaying")
    return TraceTest(
        name,
        tuple(int(n) for n in indices),
        tuple(float(v) for v in trace),
        tol,
        passed,
        status,
        rate,
        None if passed or status != "stalled" else witness,
    )


def _growth_test(name, indices, values):
    """Passes while ``values`` shows no power-law growth in n over the second half."""
    v = np.abs(np.asarray(values, dtype=float))
    idx = tuple(int(n) for n in indices)
    trace = tuple(float(a) for a in v)
    if v.size < 3 or v.max() == 0.0:
        return TraceTest(name, idx, trace, GROWTH_SLOPE, True, "bounded", None)
    m = min(v.size // 2, v.size - 3)
    rate = _log_slope(idx[m:], v[m:], 1e-300)
    if rate > GROWTH_SLOPE:
        witness = {"quantity": name, "n": idx[-1], "value": trace[-1], "growth_rate": rate}
        return TraceTest(name, idx, trace, GROWTH_SLOPE, False, "growing", rate, witness)
    return TraceTest(name, idx, trace, GROWTH_SLOPE, True, "bounded", rate)


def aitken_limit(values) -> float:
    """Aitken delta-squared estimate from the last three values, else the last value."""
    v = [float(a) for a in values]
    if len(v) < 3:
        return v[-1]
    x0, x1, x2 = v[-3:]
    d1, d2 = x1 - x0, x2 - x1
    if abs(d2) <= 1e-14 * max(1.0, abs(x2)) or d1 == 0.0:
        return x2
    ratio = d2 / d1
    if not abs(ratio) < 0.9:
        return x2
    return x2 - d2 * d2 / (d2 - d1)


def _verdict(tests, witnessed_failure=True):
    if all(t.passed for t in tests):
        return "confirmed"
    if witnessed_failure and any(not t.passed and t.witness is not None for t in tests):
        return "refuted"
    return "inconclusive"


def _default_indices(seq, indices):
    if indices is None:
        return tuple(range(1, len(seq) + 1))
    indices = tuple(int(n) for n in indices)
    if len(indices) != len(seq):
        raise ValueError(f"{len(indices)} indices for {len(seq)} sequence elements")
    return indices


# --- direct differences ----------------------------------------------------


def jittered_grid(lo=-10.0, hi=10.0, n=2001, offset=GRID_JITTER):
    """Uniform x-grid shifted by an irrational offset so it misses rational atoms."""
    return np.linspace(lo, hi, n) + offset


def check_difference_convergence(seq, limit, grid=None, indices=None, tol=TOL):
    """Whole-sequence test of G_n(x2) - G_n(x1) -> G(x2) - G(x1) over grid pairs.

    The statistic at n is the range of G_n - G over the grid, which equals
    the largest |(G_n - G)(x2) - (G_n - G)(x1)| over all grid pairs.
    """
    indices = _default_indices(seq, indices)
    grid = jittered_grid() if grid is None else np.asarray(grid, dtype=float)
    hits = np.intersect1d(grid, limit.atom_locations())
    if hits.size:
        raise ValueError(f"grid point x = {hits[0]!r} is an atom of the limit; jitter the grid")
    base = eval_bv(limit, grid)
    trace = []
    pairs = []
    for G in seq:
        d = eval_bv(G, grid) - base
        hi = int(np.argmax(d))
        # among the minimizers, report the one closest to x2
        cand = np.flatnonzero(d <= d.min() + 1e-15 * (1.0 + abs(d.min())))
        lo = int(cand[np.argmin(np.abs(grid[cand] - grid[hi]))])
        trace.append(float(d[hi] - d[lo]))
        pairs.append((float(grid[min(lo, hi)]), float(grid[max(lo, hi)])))
    k = int(np.argmax(trace[-max(1, len(trace) // 3) :])) + len(trace) - max(1, len(trace) // 3)
    witness = {"x1": pairs[k][0], "x2": pairs[k][1], "n": indices[k], "deviation": trace[k]}
    test = _trace_test("increment_differences", indices, trace, tol, witness)
    notes = [
        "whole-sequence test: it may fail on sequences that converge basically only "
        "along subsequences"
    ]
    return ConvergenceReport(
        _verdict([test]),
        [test],
        {"grid_min": float(grid.min()), "grid_max": float(grid.max()), "grid_points": int(grid.size)},
        notes,
    )


# --- basic convergence -----------------------------------------------------


def _nonzero_grid(t_grid):
    t = default_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    return t[t != 0.0]


def _transform_route(seq, limit, indices, t, tol):
    tests = []
    norms = [total_variation(G) for G in seq]
    tests.append(_growth_test("variation_bound", indices, norms))
    g = [fs_transform(G, t) for G in seq]
    if len(seq) > 1:
        steps = [float(np.mean(np.abs(g[j] - g[j - 1]))) for j in range(1, len(g))]
        j = len(g) - 1
        worst = int(np.argmax(np.abs(g[j] - g[j - 1])))
        tests.append(
            _trace_test(
                "transform_cauchy",
                indices[1:],
                steps,
                tol,
                {"t": float(t[worst]), "n": indices[j], "deviation": float(abs(g[j][worst] - g[j - 1][worst]))},
            )
        )
    if limit is not None:
        g_lim = fs_transform(limit, t)
        devs = [float(np.mean(np.abs(gj - g_lim))) for gj in g]
        worst = int(np.argmax(np.abs(g[-1] - g_lim)))
        tests.append(
            _trace_test(
                "transform_vs_limit",
                indices,
                devs,
                tol,
                {"t": float(t[worst]), "n": indices[-1], "deviation": float(abs(g[-1][worst] - g_lim[worst]))},
            )
        )
    notes = []
    if not tests[0].passed:
        notes.append("||G_n|| grows, so the transform route cannot certify basic convergence")
    verdict = "confirmed" if all(x.passed for x in tests) else "inconclusive"
    if verdict == "inconclusive" and tests[0].passed:
        notes.append("Fourier-Stieltjes transforms do not settle on the t-grid; route inconclusive")
    return ConvergenceReport(verdict, tests, {"B_estimate": max(norms)}, notes)


def diagnose_basic(seq, limit=None, indices=None, t_grid=None, x_grid=None, tol=TOL):
    """Basic convergence through two independent sufficient routes.

    Transform route: bounded variation plus convergence of the transforms
    away from t = 0 (mean absolute deviation over the t-grid).  Difference
    route: :func:`check_difference_convergence` against ``limit``, or
    against the previous element when no limit is given.  Confirmed when
    either route confirms; the route reports are kept in ``details``.
    """
    if not seq:
        raise ValueError("sequence must be nonempty")
    indices = _default_indices(seq, indices)
    t = _nonzero_grid(t_grid)
    transform = _transform_route(seq, limit, indices, t, tol)
    grid = jittered_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    if limit is not None:
        difference = check_difference_convergence(seq, limit, grid, indices, tol)
    elif len(seq) > 1:
        steps = []
        for j in range(1, len(seq)):
            d = eval_bv(seq[j], grid) - eval_bv(seq[j - 1], grid)
            steps.append(float(d.max() - d.min()))
        test = _trace_test("increment_cauchy", indices[1:], steps, tol)
        difference = ConvergenceReport("confirmed" if test.passed else "inconclusive", [test])
    else:
        difference = ConvergenceReport("inconclusive", notes=["a single element has no differences"])

    routes = {"transform": transform, "difference": difference}
    confirming = [r for r in routes.values() if r.verdict == "confirmed"]
    if confirming:
        verdict = "confirmed"
        tests = [x for r in confirming for x in r.tests]
    else:
        verdict = "inconclusive"
        tests = transform.tests + difference.tests
    notes = [f"{name} route: {r.verdict}" for name, r in routes.items()]
    notes += [n for r in routes.values() for n in r.notes]

    masses = [limit_at_infinity(G) for G in seq]
    checks = {
        "B_estimate": transform.hypothesis_checks["B_estimate"],
        "mass_trace": masses,
    }
    if limit is not None:
        target = limit_at_infinity(limit)
        status, _ = assess_trace(indices, [m - target for m in masses], tol)
        checks["limit_mass"] = target
        checks["mass_converges"] = status in ("converged", "decaying")
        if not checks["mass_converges"]:
            notes.append(
                f"t = 0 anomaly: G_n(+inf) = {masses[-1]:.6g} at n = {indices[-1]} does not "
                f"approach the limit mass {target:.6g}, although the route checks exclude t = 0"
            )
    return ConvergenceReport(verdict, tests, checks, notes, {"routes": routes})


# --- weak convergence ------------------------------------------------------


def _bump(center, radius=1.0):
    def h(x):
        x = np.asarray(x, dtype=float)
        u = (x - center) / radius
        out = np.zeros(x.shape)
        inside = np.abs(u) < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return out

    return h


def sqrt_hat(x):
    """sqrt(x) on [0, 1], sqrt(2 - x) on [1, 2], zero elsewhere."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.clip(np.minimum(x, 2.0 - x), 0.0, None))


def default_battery():
    """Bounded continuous test functions as ``(name, h)`` pairs."""
    battery = [("one", lambda x: np.ones(np.shape(x)))]
    for k in range(1, 9):
        battery.append((f"cos({k}*pi*x)", lambda x, k=k: np.cos(k * np.pi * np.asarray(x))))
        battery.append((f"sin({k}*x)", lambda x, k=k: np.sin(k * np.asarray(x))))
    for c in (-2.0, 0.0, 0.5, 1.0, 3.0):
        battery.append((f"bump({c:g})", _bump(c)))
    battery.append(("sqrt_hat", sqrt_hat))
    return battery


def diagnose_weak_bv(seq, limit, indices=None, battery=None, tol=TOL):
    """int h dG_n -> int h dG over a battery, plus the bounded-variation necessary condition.

    A confirmation only says the battery found nothing: weak convergence
    needs every bounded continuous h.
    """
    indices = _default_indices(seq, indices)
    battery = default_battery() if battery is None else battery
    tests = [_growth_test("variation_bound", indices, [total_variation(G) for G in seq])]
    integrals = {}
    for name, h in battery:
        target = stieltjes_integral(limit, h, BATTERY_QUADRATURE)
        values = [stieltjes_integral(G, h, BATTERY_QUADRATURE) for G in seq]
        integrals[name] = values
        devs = [abs(v - target) for v in values]
        witness = {"h": name, "n": indices[-1], "integral": float(np.real(values[-1])), "limit": float(np.real(target))}
        tests.append(_trace_test(f"battery:{name}", indices, devs, tol, witness))
    verdict = _verdict(tests)
    notes = []
    if verdict == "confirmed":
        notes.append("confirmed on the test-function battery only (necessary conditions)")
    return ConvergenceReport(verdict, tests, {"B_estimate": max(tests[0].trace)}, notes, {"integrals": integrals})


# --- tightness -------------------------------------------------------------


def tightness_check(seq, radii=None, tol=TOL):
    """sup_n (||G_n|| - (|G_n|(r) - |G_n|(-r))) as a trace over r in {1, 2, 4, ...}."""
    radii = tuple(2**k for k in range(8)) if radii is None else tuple(radii)
    for i, G in enumerate(seq):
        if not G.is_nondecreasing:
            raise ValueError(f"sequence element {i} is not non-decreasing")
    norms = [total_variation(G) for G in seq]
    trace = []
    worst = []
    for r in radii:
        tails = [norm - (eval_bv(G, r) - eval_bv(G, -r)) for G, norm in zip(seq, norms)]
        j = int(np.argmax(tails)) if tails else 0
        trace.append(max(tails, default=0.0))
        worst.append(j)
    k = len(radii) - 1
    witness = {"r": radii[k], "element": worst[k], "tail_mass": trace[k]}
    test = _trace_test("tail_mass", radii, trace, tol, witness)
    return ConvergenceReport(
        _verdict([test]),
        [test],
        {"sup_variation": max(norms, default=0.0)},
        [TIGHTNESS_NOTE],
    )


# --- quasi-infinitely divisible limits -------------------------------------


def _cf_traces(pairs, t):
    logs = [np.asarray(log_cf(p, t)) for p in pairs]
    return logs, [np.exp(lg) for lg in logs]


def _lower_bound_test(pairs, indices, t, logs):
    violations = []
    witness = None
    for n, p, lg in zip(indices, pairs, logs):
        bound = -(t**2 / 2 + 2) * total_variation(p.G)
        bad = lg.real < bound - 1e-9 * (1.0 + np.abs(bound))
        violations.append(int(bad.sum()))
        if bad.any() and witness is None:
            i = int(np.flatnonzero(bad)[0])
            witness = {"t": float(t[i]), "n": n, "log_abs_f": float(lg.real[i]), "bound": float(bound[i])}
    passed = not any(violations)
    return TraceTest(
        "cf_lower_bound",
        indices,
        tuple(float(v) for v in violations),
        0.0,
        passed,
        "converged" if passed else "violated",
        None,
        witness,
    )


def _recovery_grid():
    return np.linspace(-10.0, 10.0, 81)


def diagnose_qid_weak_limit(scenario: ScenarioSpec, mode="bounded-variation", t_grid=None, tol=TOL):
    """Rebuild the limit pair of a QID sequence from its characteristic functions.

    Steps: CFs on the t-grid with the lower bound exp{-(t^2/2+2)||G_n||},
    CF Cauchy trace, distinguished logs and the gamma_n trace, recovery of
    the limit spectral transform from the last CF, and comparison of the
    transforms of G_n with it.  B, M and g(0) are last-index estimates.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    pairs = realize(scenario)
    indices = scenario.indices
    t = default_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    logs, cfs = _cf_traces(pairs, t)
    tests = [_lower_bound_test(pairs, indices, t, logs)]
    if len(pairs) > 1:
        steps = [float(np.max(np.abs(cfs[j] - cfs[j - 1]))) for j in range(1, len(cfs))]
        i = int(np.argmax(np.abs(cfs[-1] - cfs[-2])))
        tests.append(
            _trace_test("cf_cauchy", indices[1:], steps, tol, {"t": float(t[i]), "n": indices[-1], "deviation": steps[-1]})
        )
    evaluators = [cf_evaluator(p) for p in pairs]
    gammas = [DistinguishedLog(ev, p.tau)(p.tau).imag / p.tau for ev, p in zip(evaluators, pairs)]
    gamma_limit = aitken_limit(gammas)
    tests.append(_trace_test("gamma_trace", indices, [abs(g - gamma_limit) for g in gammas], tol))

    tr = _recovery_grid()
    g, info = recover_spectral_transform(evaluators[-1], tr, full_output=True)
    devs = [float(np.max(np.abs(fs_transform(p.G, tr) - g))) for p in pairs]
    tests.append(_trace_test("transform_vs_recovered", indices, devs, max(tol, 1e-4)))

    norms = [total_variation(p.G) for p in pairs]
    negs = [total_variation(hahn_jordan(p.G).negative_part) for p in pairs]
    g0 = float(g[np.flatnonzero(tr == 0.0)[0]].real)
    checks = {
        "gamma_limit": gamma_limit,
        "gamma_trace": gammas,
        "B_estimate": norms[-1],
        "M_estimate": negs[-1],
        "g0_estimate": g0,
        "recovery_truncation_bound": info["truncation_bound"],
        "hypothesis_violated": False,
    }
    notes = ["CF convergence is certified on a finite t-grid only"]
    if mode == "bounded-variation":
        bound_test = _growth_test("variation_bound", indices, norms)
    else:
        bound_test = _growth_test("negative_part_bound", indices, negs)
        slack = g0 + 2.0 * negs[-1] + 1e-6 - norms[-1]
        checks["mass_bound_slack"] = slack
        checks["mass_bound_holds"] = slack >= 0.0
        tests.append(
            TraceTest(
                "variation_vs_mass_bound",
                (indices[-1],),
                (float(norms[-1]),),
                g0 + 2.0 * negs[-1] + 1e-6,
                slack >= 0.0,
                "converged" if slack >= 0.0 else "violated",
            )
        )
    tests.insert(0, bound_test)
    verdict = _verdict(tests)
    if not bound_test.passed:
        checks["hypothesis_violated"] = True
        verdict = "inconclusive"
        notes.append(f"hypothesis violated: {bound_test.name} grows along the sequence")
    return ConvergenceReport(
        verdict, tests, checks, notes, {"recovery_grid": tr, "recovered_transform": g}
    )


def _equicontinuity_test(pairs, tol):
    hs = [2.0**-k for k in range(9)]
    trace = []
    for h in hs:
        s = np.linspace(-h, h, 129)
        trace.append(max(float(np.max(np.abs(1.0 - np.exp(log_cf(p, s))))) for p in pairs))
    inv = [round(1.0 / h) for h in hs]
    return _trace_test("equicontinuity_at_0", inv, trace, tol, {"h": hs[-1], "sup_deviation": trace[-1]})


def verify_criterion(scenario: ScenarioSpec, candidate: SpectralPair, t_grid=None, tol=TOL):
    """Does the scenario's law converge weakly to the law of ``candidate``?

    Checks equicontinuity of f_n at 0 (relative compactness proxy), gamma_n ->
    gamma, basic convergence G_n -> G, mass convergence G_n(+inf) -> G(+inf)
    (reported only) and f_n -> f on the t-grid.
    """
    pairs = realize(scenario)
    indices = scenario.indices
    t = default_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    tests = [_equicontinuity_test(pairs, tol)]

    gammas = [DistinguishedLog(cf_evaluator(p), p.tau)(p.tau).imag / p.tau for p in pairs]
    gamma_limit = aitken_limit(gammas)
    residual = abs(gamma_limit - candidate.gamma)
    own = _trace_test("gamma_self", indices, [abs(g - gamma_limit) for g in gammas], tol)
    gamma_test = _trace_test("gamma_vs_candidate", indices, [abs(g - candidate.gamma) for g in gammas], tol)
    if not gamma_test.passed and own.passed and residual > tol:
        gamma_test = TraceTest(
            gamma_test.name,
            gamma_test.indices,
            gamma_test.trace,
            tol,
            False,
            gamma_test.status,
            gamma_test.rate,
            {"gamma_limit": gamma_limit, "candidate_gamma": candidate.gamma, "residual": residual},
        )
    tests.append(gamma_test)

    basic = diagnose_basic([p.G for p in pairs], candidate.G, indices, t_grid=t, tol=tol)
    if basic.verdict == "confirmed":
        tests += [replace(x, name=f"basic/{x.name}") for x in basic.tests]
    else:
        tests.append(TraceTest("basic_convergence", indices, (), tol, False, "inconclusive"))

    _, cfs = _cf_traces(pairs, t)
    f_c = np.exp(np.asarray(log_cf(candidate, t)))
    devs = [float(np.max(np.abs(fn - f_c))) for fn in cfs]
    i = int(np.argmax(np.abs(cfs[-1] - f_c)))
    tests.append(_trace_test("cf_vs_candidate", indices, devs, tol, {"t": float(t[i]), "n": indices[-1], "deviation": devs[-1]}))

    masses = [limit_at_infinity(p.G) for p in pairs]
    target = limit_at_infinity(candidate.G)
    mass_status, _ = assess_trace(indices, [m - target for m in masses], tol)
    checks = {
        "gamma_limit": gamma_limit,
        "gamma_residual": residual,
        "final_cf_deviation": devs[-1],
        "mass_trace": masses,
        "mass_converges": mass_status in ("converged", "decaying"),
        "B_estimate": basic.hypothesis_checks["B_estimate"],
    }
    notes = ["G_n(+inf) -> G(+inf) is measured and reported but does not enter the verdict"]
    first_failure = next((x.name for x in tests if not x.passed), None)
    if first_failure:
        notes.append(f"first failing step: {first_failure}")
    return ConvergenceReport(_verdict(tests), tests, checks, notes, {"basic": basic})
