"""Command-line driver: scenario files in, reports and CSV traces out.

Exit status: 0 confirmed or completed, 2 refuted, 3 inconclusive, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import re
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bv import PiecewiseBV, hahn_jordan, total_variation
from .convergence import (
    MODES,
    TOL,
    ConvergenceReport,
    check_difference_convergence,
    diagnose_basic,
    diagnose_qid_weak_limit,
    diagnose_weak_bv,
    tightness_check,
    verify_criterion,
)
from .fourier import DEFAULT_STEP, DEFAULT_T_MAX, fs_transform, uniform_grid
from .levy_khinchine import (
    SpectralPair,
    cf,
    cf_evaluator,
    kernel,
    kernel_via_W,
    lemma_parts,
    recover_gamma,
    recover_spectral_transform,
)
from .scenarios import FAMILIES, ScenarioSpec, limit_pair, realize

SCHEMA_VERSION = 1
OUTPUT_ENV = "QIDLAWS_OUTPUT_DIR"
COMMANDS = ("cf-eval", "transform", "recover", "diagnose", "example", "theorem", "lemma1")
CHECKS = ("basic", "weak", "difference", "tightness", "qid", "criterion")
EXIT = {"confirmed": 0, "completed": 0, "refuted": 2, "inconclusive": 3}


class ScenarioParseError(ValueError):
    pass


# --- scenario documents ----------------------------------------------------


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioParseError(f"{where}: expected a finite number, got {value!r}")
    return float(value)


def _tuples(items, width, where):
    if not isinstance(items, list):
        raise ScenarioParseError(f"{where}: expected a list")
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, list) or len(item) != width:
            raise ScenarioParseError(f"{where}[{i}]: expected a list of {width} numbers, got {item!r}")
        out.append(tuple(_number(v, f"{where}[{i}][{j}]") for j, v in enumerate(item)))
    return out


def _explicit_pair(entry, where):
    if not isinstance(entry, dict):
        raise ScenarioParseError(f"{where}: expected an object")
    unknown = sorted(set(entry) - {"gamma", "tau", "atoms", "segments"})
    if unknown:
        raise ScenarioParseError(f"{where}: unknown field(s) {', '.join(unknown)}")
    if "gamma" not in entry:
        raise ScenarioParseError(f"{where}: missing field 'gamma'")
    gamma = _number(entry["gamma"], f"{where}.gamma")
    tau = _number(entry.get("tau", 1.0), f"{where}.tau")
    atoms = _tuples(entry.get("atoms", []), 2, f"{where}.atoms")
    segments = _tuples(entry.get("segments", []), 3, f"{where}.segments")
    try:
        return SpectralPair(gamma, PiecewiseBV(atoms, segments), tau)
    except ValueError as exc:
        raise ScenarioParseError(f"{where}: {exc}") from exc


def parse_scenario(text: str) -> ScenarioSpec:
    """Parse a JSON scenario document; errors name the line or the field path."""
    if not text.strip():
        raise ScenarioParseError("line 1: empty scenario document")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioParseError("top level: expected an object")
    unknown = sorted(set(doc) - {"schema", "family", "params", "indices", "explicit"})
    if unknown:
        raise ScenarioParseError(f"top level: unknown field(s) {', '.join(unknown)}")
    if doc.get("schema") != SCHEMA_VERSION:
        raise ScenarioParseError(f"schema: expected {SCHEMA_VERSION}, got {doc.get('schema')!r}")
    family = doc.get("family")
    if family not in FAMILIES:
        raise ScenarioParseError(f"family: unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ScenarioParseError("params: expected an object")
    params = {k: _number(v, f"params.{k}") for k, v in params.items()}
    kwargs = {"family": family, "params": params}
    explicit = doc.get("explicit")
    if explicit is not None:
        if not isinstance(explicit, list):
            raise ScenarioParseError("explicit: expected a list")
        kwargs["explicit"] = tuple(_explicit_pair(e, f"explicit[{i}]") for i, e in enumerate(explicit))
    if "indices" in doc:
        indices = doc["indices"]
        if not isinstance(indices, list):
            raise ScenarioParseError("indices: expected a list of integers")
        for i, n in enumerate(indices):
            if isinstance(n, bool) or not isinstance(n, int):
                raise ScenarioParseError(f"indices[{i}]: expected an integer, got {n!r}")
            if i and n <= indices[i - 1]:
                raise ScenarioParseError(f"indices[{i}]: {n} does not exceed the previous index {indices[i - 1]}")
        kwargs["indices"] = tuple(indices)
    elif explicit is not None:
        kwargs["indices"] = tuple(range(1, len(explicit) + 1))
    try:
        return ScenarioSpec(**kwargs)
    except ValueError as exc:
        raise ScenarioParseError(str(exc)) from exc


def scenario_document(spec: ScenarioSpec) -> dict:
    doc = {"schema": SCHEMA_VERSION, "family": spec.family, "params": dict(spec.params), "indices": list(spec.indices)}
    if spec.explicit is not None:
        doc["explicit"] = [
            {
                "gamma": p.gamma,
                "tau": p.tau,
                "atoms": [list(a) for a in p.G.atoms],
                "segments": [list(s) for s in p.G.segments],
            }
            for p in spec.explicit
        ]
    return doc


def serialize_scenario(spec: ScenarioSpec) -> str:
    return json.dumps(scenario_document(spec), indent=2, sort_keys=True) + "\n"


# --- run configuration and artifacts ---------------------------------------


@dataclass
class RunConfig:
    command: str
    scenario_path: str | None = None
    output_dir: str = "qidlaws-out"
    t_min: float = -DEFAULT_T_MAX
    t_max: float = DEFAULT_T_MAX
    t_step: float = DEFAULT_STEP
    tol: float = TOL
    seed: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not (self.t_min < 0 < self.t_max):
            raise ValueError("the t-grid needs t_min < 0 < t_max")
        if not self.t_step > 0:
            raise ValueError("t_step must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def t_grid(self):
        return uniform_grid(self.t_min, self.t_max, self.t_step)


def _fmt(v):
    return format(float(v), ".17g")


class Artifacts:
    """Collects report lines and CSV tables, then writes them in one go."""

    def __init__(self, out: Path):
        self.out = out
        self.lines = []
        self.tables = {}

    def say(self, text=""):
        self.lines.append(text)

    def table(self, name, header, rows):
        self.tables[name] = (header, rows)

    def transform_table(self, name, indices, t, values):
        rows = []
        for n, vals in zip(indices, values):
            rows.extend((n, _fmt(tk), _fmt(v.real), _fmt(v.imag)) for tk, v in zip(t, vals))
        self.table(name, ("n", "t", "re", "im"), rows)

    def scalar_table(self, name, indices, values):
        self.table(name, ("n", "statistic"), [(n, _fmt(v)) for n, v in zip(indices, values)])

    def write(self, meta):
        self.out.mkdir(parents=True, exist_ok=True)
        for name, (header, rows) in self.tables.items():
            with open(self.out / name, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
        (self.out / "report.txt").write_text("\n".join(self.lines) + "\n", encoding="utf-8")
        (self.out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _slug(name):
    return re.sub(r"[^A-Za-z0-9]+", "_", name.replace("-", "m")).strip("_").lower()


def _witness_text(w):
    return ", ".join(f"{k}={_fmt(v) if isinstance(v, float) else v}" for k, v in w.items())


def render_report(art: Artifacts, title: str, report: ConvergenceReport, prefix=""):
    art.say(f"== {title}: {report.verdict}")
    for t in report.tests:
        rate = "" if t.rate is None else f", fitted rate {t.rate:.3f}"
        last = f", last {t.trace[-1]:.6g}" if t.trace else ""
        art.say(f"  [{'pass' if t.passed else 'FAIL'}] {t.name}: {t.status}{rate}{last}")
        if t.witness:
            art.say(f"      witness: {_witness_text(t.witness)}")
        if t.trace:
            art.scalar_table(f"{prefix}{_slug(t.name)}.csv", t.indices[-len(t.trace):], t.trace)
    for k, v in report.hypothesis_checks.items():
        if isinstance(v, (list, tuple)):
            v = "[" + ", ".join(f"{x:.6g}" for x in v) + "]"
        elif isinstance(v, float):
            v = f"{v:.10g}"
        art.say(f"  {k}: {v}")
    for n in report.notes:
        art.say(f"  note: {n}")
    for name, sub in report.details.get("routes", {}).items():
        art.say(f"  -- {name} route: {sub.verdict}")
        for t in sub.tests:
            art.say(f"     [{'pass' if t.passed else 'FAIL'}] {t.name}: {t.status}")
            if t.witness:
                art.say(f"         witness: {_witness_text(t.witness)}")


# --- commands --------------------------------------------------------------


def _load_scenario(config, default=None):
    if config.scenario_path is None:
        if default is None:
            raise ValueError(f"command {config.command!r} needs --scenario")
        return default
    return parse_scenario(Path(config.scenario_path).read_text(encoding="utf-8"))


def _cmd_cf_eval(config, art):
    spec = _load_scenario(config)
    t = config.t_grid()
    pairs = realize(spec)
    art.transform_table("cf.csv", spec.indices, t, [cf(p, t) for p in pairs])
    art.say(f"characteristic functions of {len(pairs)} pairs on {t.size} grid points")
    art.say(f"grid [{t[0]:g}, {t[-1]:g}] step {config.t_step:g}")
    return "completed", spec


def _cmd_transform(config, art):
    spec = _load_scenario(config)
    t = config.t_grid()
    seq = [p.G for p in realize(spec)]
    art.transform_table("transform.csv", spec.indices, t, [fs_transform(G, t) for G in seq])
    art.scalar_table("total_variation.csv", spec.indices, [total_variation(G) for G in seq])
    art.say(f"Fourier-Stieltjes transforms of {len(seq)} spectral functions on {t.size} grid points")
    return "completed", spec


def _cmd_recover(config, art):
    spec = _load_scenario(config)
    t = np.linspace(-10.0, 10.0, 81)
    pairs = realize(spec)
    gammas, errs, recovered = [], [], []
    for p in pairs:
        ev = cf_evaluator(p)
        gammas.append(recover_gamma(ev, p.tau))
        g = recover_spectral_transform(ev, t)
        recovered.append(g)
        errs.append(float(np.max(np.abs(g - fs_transform(p.G, t)))))
    art.transform_table("recovered_transform.csv", spec.indices, t, recovered)
    art.scalar_table("gamma.csv", spec.indices, gammas)
    art.scalar_table("transform_error.csv", spec.indices, errs)
    for n, p, gm, e in zip(spec.indices, pairs, gammas, errs):
        art.say(f"n={n}: gamma {gm:.12g} (error {abs(gm - p.gamma):.2e}), transform error {e:.2e} on |t| <= 10")
    return "completed", spec


def _limit_or_fail(spec):
    lim = limit_pair(spec)
    if lim is None:
        raise ValueError(f"family {spec.family!r} has no builtin limit; this check needs one")
    return lim


def _run_check(check, spec, config, art, mode="bounded-variation"):
    t = config.t_grid()
    seq = [p.G for p in realize(spec)]
    tol = config.tol
    if check == "basic":
        lim = limit_pair(spec)
        report = diagnose_basic(seq, None if lim is None else lim.G, spec.indices, t_grid=t, tol=tol)
    elif check == "weak":
        report = diagnose_weak_bv(seq, _limit_or_fail(spec).G, spec.indices, tol=tol)
    elif check == "difference":
        report = check_difference_convergence(seq, _limit_or_fail(spec).G, indices=spec.indices, tol=tol)
    elif check == "tightness":
        report = tightness_check([hahn_jordan(G).negative_part for G in seq], tol=tol)
    elif check == "qid":
        report = diagnose_qid_weak_limit(spec, mode, t_grid=t, tol=tol)
    else:
        report = verify_criterion(spec, _limit_or_fail(spec), t_grid=t, tol=tol)
    render_report(art, f"{check} ({spec.family})", report, prefix=f"{check}_")
    return report


def _cmd_diagnose(config, art):
    spec = _load_scenario(config)
    opts = config.options
    report = _run_check(opts.get("check", "basic"), spec, config, art, opts.get("mode", "bounded-variation"))
    art.say(f"note: CF and transform convergence is certified on the t-grid [{config.t_min:g}, {config.t_max:g}] only")
    return report.verdict, spec


# measured (difference, basic, weak) verdicts that reproduce each example's classification
EXAMPLE_MATRIX = {
    1: ("confirmed", "confirmed", "refuted"),
    2: ("confirmed", "confirmed", "refuted"),
    3: ("refuted", "confirmed", "confirmed"),
    4: ("confirmed", "confirmed", "refuted"),
}


def _cmd_example(config, art):
    k = int(config.options.get("id", 1))
    if k not in EXAMPLE_MATRIX:
        raise ValueError(f"example id must be 1-4, got {k}")
    spec = ScenarioSpec(f"example{k}")
    got = tuple(_run_check(c, spec, config, art).verdict for c in ("difference", "basic", "weak"))
    weak = diagnose_weak_bv([p.G for p in realize(spec)], PiecewiseBV(), spec.indices)
    witness = {1: "cos(1*pi*x)", 2: "sqrt_hat", 3: "sin(1*x)", 4: "one"}[k]
    values = [float(np.real(v)) for v in weak.details["integrals"][witness]]
    art.scalar_table(f"integral_{_slug(witness)}.csv", spec.indices, values)
    art.say(f"int {witness} dG_n: " + ", ".join(f"n={n}: {v:.12g}" for n, v in zip(spec.indices, values)))
    expected = EXAMPLE_MATRIX[k]
    labels = ("difference route", "basic", "weak")
    art.say("classification: " + ", ".join(f"{lab} {v}" for lab, v in zip(labels, got)))
    if got == expected:
        art.say(f"example {k}: measured classification matches the expected one")
        return "confirmed", spec
    art.say(f"example {k}: expected " + ", ".join(f"{lab} {v}" for lab, v in zip(labels, expected)))
    return "inconclusive", spec


THEOREM_DEFAULTS = {
    1: ("basic", ScenarioSpec("example3"), None),
    4: ("tightness", ScenarioSpec("qid_ratio"), None),
    5: ("qid", ScenarioSpec("atom_drift"), "bounded-variation"),
    6: ("qid", ScenarioSpec("qid_ratio"), "bounded-negative-part"),
    8: ("criterion", ScenarioSpec("atom_drift", indices=tuple(2**k for k in range(31))), None),
}


def _cmd_theorem(config, art):
    k = int(config.options.get("id", 5))
    if k not in THEOREM_DEFAULTS:
        raise ValueError(f"theorem id must be one of {sorted(THEOREM_DEFAULTS)}, got {k}")
    check, default, mode = THEOREM_DEFAULTS[k]
    spec = _load_scenario(config, default)
    report = _run_check(check, spec, config, art, mode or "bounded-variation")
    return report.verdict, spec


def _cmd_lemma1(config, art):
    t = float(config.options.get("t", 1.0))
    tau = float(config.options.get("tau", 1.0))
    x = np.linspace(-20.0, 20.0, 401)
    direct = kernel(t, x, tau)
    via = kernel_via_W(t, x, tau)
    res = np.abs(direct - via)
    parts = lemma_parts(t, tau)
    art.table("lemma1.csv", ("x", "residual"), [(_fmt(a), _fmt(r)) for a, r in zip(x, res)])
    s_out = parts.support_bound + 1.0
    rho_out = max(abs(parts.rho(s_out)), abs(parts.rho(-s_out)))
    worst = int(np.argmax(res))
    art.say(f"kernel identity through W at t={t:g}, tau={tau:g} on 401 points in [-20, 20]")
    art.say(f"max |kernel - kernel_via_W| = {res[worst]:.3e} at x = {x[worst]:g}")
    art.say(f"rho at +-(support bound + 1) = {rho_out:g}")
    ok = res[worst] < 1e-6 and rho_out == 0.0
    return ("confirmed" if ok else "inconclusive"), None


HANDLERS = {
    "cf-eval": _cmd_cf_eval,
    "transform": _cmd_transform,
    "recover": _cmd_recover,
    "diagnose": _cmd_diagnose,
    "example": _cmd_example,
    "theorem": _cmd_theorem,
    "lemma1": _cmd_lemma1,
}


def run(config: RunConfig) -> int:
    art = Artifacts(Path(config.output_dir))
    art.say(f"qidlaws {__version__}: {config.command}")
    try:
        verdict, spec = HANDLERS[config.command](config, art)
    except Exception as exc:  # every failure becomes exit status 1 with a diagnostic
        msg = f"error in {config.command}: {type(exc).__name__}: {exc}"
        print(msg, file=sys.stderr)
        art.say(msg)
        verdict, spec = "error", None
    status = EXIT.get(verdict, 1)
    art.say(f"verdict: {verdict} (exit {status})")
    meta = {
        "command": config.command,
        "config": asdict(config),
        "scenario": None if spec is None else scenario_document(spec),
        "verdict": verdict,
        "exit_status": status,
        "versions": {
            "qidlaws": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    try:
        art.write(meta)
    except OSError as exc:
        print(f"error: cannot write to {config.output_dir}: {exc}", file=sys.stderr)
        return 1
    return status


def build_parser():
    p = argparse.ArgumentParser(prog="qidlaws", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", help="scenario document (JSON)")
    p.add_argument(
        "--output-dir",
        default=os.environ.get(OUTPUT_ENV, "qidlaws-out"),
        help=f"where report.txt, CSVs and meta.json go (default: ${OUTPUT_ENV} or ./qidlaws-out)",
    )
    p.add_argument("--t-min", type=float, default=-DEFAULT_T_MAX)
    p.add_argument("--t-max", type=float, default=DEFAULT_T_MAX)
    p.add_argument("--t-step", type=float, default=DEFAULT_STEP)
    p.add_argument("--tol", type=float, default=TOL, help="trace tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--id", type=int, help="example (1-4) or theorem (1, 4, 5, 6, 8) number")
    p.add_argument("--check", choices=CHECKS, default="basic", help="diagnostic run by 'diagnose'")
    p.add_argument("--mode", choices=MODES, default="bounded-variation")
    p.add_argument("--t", type=float, default=1.0, help="lemma1: t")
    p.add_argument("--tau", type=float, default=1.0, help="lemma1: tau")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    options = {"check": args.check, "mode": args.mode, "t": args.t, "tau": args.tau}
    if args.id is not None:
        options["id"] = args.id
    try:
        config = RunConfig(
            args.command,
            args.scenario,
            args.output_dir,
            args.t_min,
            args.t_max,
            args.t_step,
            args.tol,
            args.seed,
            options,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
