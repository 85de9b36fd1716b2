"""Right-continuous signed functions of bounded variation with G(-inf) = 0.

A :class:`PiecewiseBV` is a finite sum of jumps (atoms) and a continuous part
whose density is constant on finitely many disjoint intervals.  Everything
the package manipulates, spectral functions, their Hahn-Jordan parts and the
kernel functions U, V, W, lives in this class, so variation, decomposition
and Fourier-Stieltjes transforms stay closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .quadrature import DEFAULT_QUADRATURE, QuadratureError, adaptive_simpson, vectorized


class Atom(NamedTuple):
    location: float
    weight: float


class Segment(NamedTuple):
    left: float
    right: float
    slope: float


def _normalize_atoms(atoms):
    groups = {}
    for loc, w in atoms:
        loc = float(loc)
        w = float(w)
        if not (math.isfinite(loc) and math.isfinite(w)):
            raise ValueError(f"non-finite atom ({loc}, {w})")
        if loc == 0.0:
            loc = 0.0  # fold -0.0 into 0.0
        groups.setdefault(loc, []).append(w)
    out = []
    for loc in sorted(groups):
        ws = groups[loc]
        w = ws[0] if len(ws) == 1 else math.fsum(ws)
        if w != 0.0:
            out.append(Atom(loc, w))
    return tuple(out)


def _normalize_segments(segments):
    segs = []
    for left, right, slope in segments:
        left, right, slope = float(left), float(right), float(slope)
        if not (math.isfinite(left) and math.isfinite(right) and math.isfinite(slope)):
            raise ValueError(f"non-finite segment ({left}, {right}, {slope})")
        if not left < right:
            raise ValueError(f"segment needs left < right, got [{left}, {right}]")
        if slope != 0.0:
            segs.append((left, right, slope))
    if not segs:
        return ()
    segs.sort()
    disjoint = all(segs[i][1] <= segs[i + 1][0] for i in range(len(segs) - 1))
    if disjoint:
        pieces = segs
    else:
        # split at every endpoint and sum the slopes covering each elementary piece
        points = sorted({p for s in segs for p in s[:2]})
        index = {p: i for i, p in enumerate(points)}
        cover = [[] for _ in range(len(points) - 1)]
        for left, right, slope in segs:
            for i in range(index[left], index[right]):
                cover[i].append(slope)
        pieces = []
        for i, slopes in enumerate(cover):
            if not slopes:
                continue
            slope = slopes[0] if len(slopes) == 1 else math.fsum(slopes)
            if slope != 0.0:
                pieces.append((points[i], points[i + 1], slope))
    merged = []
    for left, right, slope in pieces:
        if merged and merged[-1][1] == left and merged[-1][2] == slope:
            merged[-1] = (merged[-1][0], right, slope)
        else:
            merged.append((left, right, slope))
    return tuple(Segment(*s) for s in merged)


class PiecewiseBV:
    """Signed BV function: ``sum w_j 1[a_j, inf)(x)`` plus a piecewise-linear ramp part.

    Atoms at equal locations are merged and zero weights or slopes dropped, so
    two instances describing the same function compare equal.  Overlapping
    segments are allowed on input and summed.  Instances are immutable.
    """

    __slots__ = ("atoms", "segments", "_aloc", "_aw", "_sl", "_sr", "_ss")

    def __init__(self, atoms: Iterable = (), segments: Iterable = ()):
        object.__setattr__(self, "atoms", _normalize_atoms(atoms))
        object.__setattr__(self, "segments", _normalize_segments(segments))
        arr = lambda xs, i: np.array([x[i] for x in xs], dtype=float)
        object.__setattr__(self, "_aloc", arr(self.atoms, 0))
        object.__setattr__(self, "_aw", arr(self.atoms, 1))
        object.__setattr__(self, "_sl", arr(self.segments, 0))
        object.__setattr__(self, "_sr", arr(self.segments, 1))
        object.__setattr__(self, "_ss", arr(self.segments, 2))
        for a in (self._aloc, self._aw, self._sl, self._sr, self._ss):
            a.flags.writeable = False

    def __setattr__(self, name, value):
        raise AttributeError("PiecewiseBV is immutable")

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def step(cls, location, weight=1.0):
        """``weight * 1[location, inf)``."""
        return cls(atoms=[(location, weight)])

    @classmethod
    def ramp(cls, left, right, slope):
        return cls(segments=[(left, right, slope)])

    def __eq__(self, other):
        if not isinstance(other, PiecewiseBV):
            return NotImplemented
        return self.atoms == other.atoms and self.segments == other.segments

    def __hash__(self):
        return hash((self.atoms, self.segments))

    def __repr__(self):
        atoms = [tuple(a) for a in self.atoms]
        segs = [tuple(s) for s in self.segments]
        return f"PiecewiseBV(atoms={atoms}, segments={segs})"

    def __bool__(self):
        return bool(self.atoms or self.segments)

    def __add__(self, other):
        return combine(1.0, self, 1.0, other)

    def __sub__(self, other):
        return combine(1.0, self, -1.0, other)

    def __neg__(self):
        return combine(-1.0, self, 0.0, self)

    def __mul__(self, scalar):
        return combine(float(scalar), self, 0.0, self)

    __rmul__ = __mul__

    def __call__(self, x):
        return eval_bv(self, x)

    @property
    def is_empty(self):
        return not self

    @property
    def is_atomic(self):
        return not self.segments

    @property
    def is_nondecreasing(self):
        return all(a.weight > 0 for a in self.atoms) and all(s.slope > 0 for s in self.segments)

    def support_hull(self):
        """Smallest closed interval carrying the measure, or ``None`` for the zero function."""
        pts = list(self._aloc) + list(self._sl) + list(self._sr)
        if not pts:
            return None
        return min(pts), max(pts)

    def atom_locations(self):
        return self._aloc

    def _cumulative(self, x, weights, slopes):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        if weights.size:
            cw = np.concatenate([[0.0], np.cumsum(weights)])
            out = out + cw[np.searchsorted(self._aloc, x, side="right")]
        if slopes.size:
            full = np.concatenate([[0.0], np.cumsum(slopes * (self._sr - self._sl))])
            k = np.searchsorted(self._sl, x, side="right")  # segments with left <= x
            j = np.maximum(k - 1, 0)
            part = slopes[j] * (np.minimum(x, self._sr[j]) - self._sl[j])
            seg = np.where(k > 0, full[j] + part, 0.0)
            out = out + seg
        return out


@dataclass(frozen=True)
class JordanPair:
    positive_part: PiecewiseBV
    negative_part: PiecewiseBV


def _scalar(x, value):
    return float(value) if np.ndim(x) == 0 else value


def eval_bv(G: PiecewiseBV, x):
    """G(x); right-continuous, vectorised over ``x``."""
    return _scalar(x, G._cumulative(x, G._aw, G._ss))


def variation_function(G: PiecewiseBV, x):
    """|G|(x), the total variation of G on (-inf, x]."""
    return _scalar(x, G._cumulative(x, np.abs(G._aw), np.abs(G._ss)))


def total_variation(G: PiecewiseBV) -> float:
    v = 0.0
    if G._aw.size:
        v = float(np.cumsum(np.abs(G._aw))[-1])
    if G._ss.size:
        v = v + float(np.cumsum(np.abs(G._ss) * (G._sr - G._sl))[-1])
    return v


def limit_at_infinity(G: PiecewiseBV) -> float:
    """G(+inf), the total signed mass."""
    v = 0.0
    if G._aw.size:
        v = float(np.cumsum(G._aw)[-1])
    if G._ss.size:
        v = v + float(np.cumsum(G._ss * (G._sr - G._sl))[-1])
    return v


def hahn_jordan(G: PiecewiseBV) -> JordanPair:
    """Split G into non-decreasing parts carried by disjoint sets."""
    pos = PiecewiseBV(
        [a for a in G.atoms if a.weight > 0], [s for s in G.segments if s.slope > 0]
    )
    neg = PiecewiseBV(
        [(a.location, -a.weight) for a in G.atoms if a.weight < 0],
        [(s.left, s.right, -s.slope) for s in G.segments if s.slope < 0],
    )
    return JordanPair(pos, neg)


def combine(a: float, G: PiecewiseBV, b: float, H: PiecewiseBV) -> PiecewiseBV:
    """Exact representation of ``a*G + b*H``."""
    a = float(a)
    b = float(b)
    atoms = []
    segments = []
    for coef, F in ((a, G), (b, H)):
        if coef == 0.0:
            continue
        atoms.extend((x.location, coef * x.weight) for x in F.atoms)
        segments.extend((s.left, s.right, coef * s.slope) for s in F.segments)
    return PiecewiseBV(atoms, segments)


def stieltjes_integral(G: PiecewiseBV, h, quad=DEFAULT_QUADRATURE, full_output=False):
    """Lebesgue-Stieltjes integral of ``h`` against dG.

    Atoms contribute ``w * h(a)`` exactly; each segment contributes
    ``slope * int h`` by adaptive Simpson.  ``h`` should accept numpy arrays.
    The total error target is ``quad.tol``.  With ``full_output`` the
    result is ``(value, error_estimate)``.

    Raises :class:`~qidlaws.quadrature.QuadratureError` if a segment integral
    does not converge; its ``partial_value`` covers the whole integral.
    """
    f = vectorized(h)
    value = 0.0
    if G.atoms:
        value = np.sum(G._aw * f(G._aloc))
    err = 0.0
    nseg = len(G.segments)
    for i, s in enumerate(G.segments):
        seg_tol = quad.tol / (nseg * abs(s.slope))
        try:
            v, e = adaptive_simpson(f, s.left, s.right, quad, tol=seg_tol)
        except QuadratureError as exc:
            partial = value + s.slope * exc.partial_value
            for rest in G.segments[i + 1 :]:
                try:
                    partial = partial + rest.slope * adaptive_simpson(f, rest.left, rest.right, quad)[0]
                except QuadratureError as inner:
                    partial = partial + rest.slope * inner.partial_value
            raise QuadratureError(
                f"segment [{s.left}, {s.right}]: {exc}", partial, err + abs(s.slope) * exc.error_estimate
            ) from exc
        value = value + s.slope * v
        err += abs(s.slope) * e
    if isinstance(value, np.generic):
        value = value.item()
    if full_output:
        return value, err
    return value
