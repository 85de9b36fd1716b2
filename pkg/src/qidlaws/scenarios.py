"""Declarative sequences of spectral pairs and their builtin generators.

A scenario names a family, its numeric parameters and the indices n at which
the sequence is realized.  The example families are plain BV sequences; they
are realized as pairs with gamma = 0 so every diagnostic takes the same input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .bv import PiecewiseBV
from .levy_khinchine import SpectralPair

FAMILIES = (
    "example1",
    "example2",
    "example3",
    "example4",
    "atom_drift",
    "qid_ratio",
    "poisson",
    "custom",
)

DEFAULT_INDICES = tuple(2**k for k in range(9))  # 1, 2, 4, ..., 256

# accepted parameters and their defaults, per family
FAMILY_PARAMS = {
    "example1": {},
    "example2": {},
    "example3": {},
    "example4": {},
    "atom_drift": {
        "weight": 0.5,
        "location": 1.0,
        "location_drift": 1.0,
        "gamma": 0.0,
        "gamma_drift": 1.0,
        "tau": 1.0,
    },
    "qid_ratio": {"lambda1": 1.0, "lambda2": 0.25, "tau": 1.0},
    "poisson": {"lambda": 1.0, "location": 1.0, "tau": 1.0},
    "custom": {},
}


@dataclass(frozen=True)
class ScenarioSpec:
    family: str
    params: dict = field(default_factory=dict)
    indices: tuple = DEFAULT_INDICES
    explicit: tuple | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        allowed = FAMILY_PARAMS[self.family]
        unknown = sorted(set(self.params) - set(allowed))
        if unknown:
            raise ValueError(f"family {self.family!r} has no parameter(s) {', '.join(unknown)}")
        params = {k: float(v) for k, v in self.params.items()}
        object.__setattr__(self, "params", params)
        indices = tuple(int(n) for n in self.indices)
        if not indices:
            raise ValueError("indices must be nonempty")
        if any(n < 1 for n in indices):
            raise ValueError("indices must be positive integers")
        for i in range(1, len(indices)):
            if indices[i] <= indices[i - 1]:
                raise ValueError(f"indices must be strictly increasing (position {i}: {indices[i]})")
        object.__setattr__(self, "indices", indices)
        if self.family == "custom":
            if not self.explicit:
                raise ValueError("family 'custom' requires explicit pairs")
            if len(self.explicit) != len(indices):
                raise ValueError(
                    f"custom scenario has {len(self.explicit)} explicit pairs but {len(indices)} indices"
                )
            object.__setattr__(self, "explicit", tuple(self.explicit))
        elif self.explicit is not None:
            raise ValueError("explicit pairs are only allowed for family 'custom'")

    def param(self, name):
        return self.params.get(name, FAMILY_PARAMS[self.family][name])


def dyadic_block(n: int):
    """(a_n, b_n) for the moving interval of the example3 family: 2^k <= n < 2^(k+1)."""
    k = n.bit_length() - 1
    scale = 2.0**k
    return (n - scale) / scale, (n + 1 - scale) / scale


def _example(family, n):
    if family == "example1":
        return PiecewiseBV([(n, 1.0), (n + 1, -1.0)])
    if family == "example2":
        return PiecewiseBV([(0.0, n), (1.0 / n**2, -float(n))])
    if family == "example3":
        a, b = dyadic_block(n)
        return PiecewiseBV([(a, 1.0), (b, -1.0)])
    return PiecewiseBV.ramp(-n, n, 1.0 / n)  # example4


def qid_ratio_pair(lam1, lam2, tau=1.0) -> SpectralPair:
    """Pair with log f(t) = lam1 (e^{it} - 1) - lam2 (e^{2it} - 1).

    Unit jumps with rate lam1 against double jumps with rate lam2; dG = x^2/(1+x^2) dnu
    gives weights lam1/2 at 1 and -4 lam2/5 at 2.
    """
    G = PiecewiseBV([(1.0, lam1 / 2), (2.0, -4.0 * lam2 / 5)])
    gamma = (lam1 * math.sin(tau) - lam2 * math.sin(2 * tau)) / tau
    return SpectralPair(gamma, G, tau)


def _pair(spec: ScenarioSpec, n: int) -> SpectralPair:
    fam = spec.family
    p = spec.param
    if fam.startswith("example"):
        return SpectralPair(0.0, _example(fam, n))
    if fam == "atom_drift":
        G = PiecewiseBV.step(p("location") + p("location_drift") / n, p("weight"))
        return SpectralPair(p("gamma") + p("gamma_drift") / n, G, p("tau"))
    if fam == "qid_ratio":
        return qid_ratio_pair(p("lambda1"), p("lambda2") * n / (n + 1), p("tau"))
    if fam == "poisson":
        lam, loc, tau = p("lambda"), p("location"), p("tau")
        G = PiecewiseBV.step(loc, lam * loc * loc / (1 + loc * loc))
        return SpectralPair(lam * math.sin(tau * loc) / tau, G, tau)
    raise AssertionError(fam)


def realize(spec: ScenarioSpec) -> list[SpectralPair]:
    """The pairs (gamma_n, G_n) at ``spec.indices``."""
    if spec.family == "custom":
        return list(spec.explicit)
    return [_pair(spec, n) for n in spec.indices]


def realize_bv(spec: ScenarioSpec) -> list[PiecewiseBV]:
    return [pair.G for pair in realize(spec)]


def limit_pair(spec: ScenarioSpec) -> SpectralPair | None:
    """Closed-form limit of a builtin family, or ``None`` for custom scenarios."""
    fam = spec.family
    p = spec.param
    if fam.startswith("example"):
        return SpectralPair(0.0, PiecewiseBV())
    if fam == "atom_drift":
        return SpectralPair(p("gamma"), PiecewiseBV.step(p("location"), p("weight")), p("tau"))
    if fam == "qid_ratio":
        return qid_ratio_pair(p("lambda1"), p("lambda2"), p("tau"))
    if fam == "poisson":
        return _pair(spec, 1)
    return None
