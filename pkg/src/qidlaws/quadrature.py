"""Vectorised adaptive Simpson quadrature for real or complex integrands.

The integrand is called on whole numpy arrays of abscissae, one refinement
level at a time, so a few thousand panels cost only a few dozen calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureSettings:
    tol: float = 1e-10
    max_depth: int = 40
    # initial panel width; Simpson sampling must not alias oscillatory integrands
    panel_width: float = 0.25
    max_panels: int = 1 << 15
    max_active: int = 1 << 21
    # panels narrower than min_width * (b - a) are accepted as they are;
    # 0 disables this, > 0 lets integrable endpoint singularities such as sqrt(x) through
    min_width: float = 0.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not self.panel_width > 0:
            raise ValueError("panel_width must be positive")
        if not 0.0 <= self.min_width < 1.0:
            raise ValueError("min_width must lie in [0, 1)")


DEFAULT_QUADRATURE = QuadratureSettings()


class QuadratureError(RuntimeError):
    """Adaptive refinement hit ``max_depth`` before meeting the tolerance.

    ``partial_value`` is the sum over all accepted and unaccepted panels, and
    ``error_estimate`` the corresponding Richardson error bound.
    """

    def __init__(self, message, partial_value, error_estimate):
        super().__init__(message)
        self.partial_value = partial_value
        self.error_estimate = error_estimate


def vectorized(h):
    """Return a version of ``h`` that maps an ndarray to an ndarray of the same shape."""

    def call(x):
        x = np.asarray(x, dtype=float)
        try:
            y = np.asarray(h(x))
        except TypeError:  # scalar-only functions such as math.cos
            return np.array([h(float(v)) for v in x.ravel()]).reshape(x.shape)
        if y.shape == x.shape:
            return y
        if y.shape == ():
            # constant functions such as ``lambda x: 1.0``
            try:
                return np.broadcast_to(y, x.shape).copy()
            except ValueError:
                pass
        return np.array([h(float(v)) for v in x.ravel()]).reshape(x.shape)

    return call


def adaptive_simpson(h, a, b, settings=DEFAULT_QUADRATURE, tol=None):
    """Integrate ``h`` over ``[a, b]``; returns ``(value, error_estimate)``.

    ``tol`` overrides ``settings.tol`` as the absolute target for the whole
    interval. Raises :class:`QuadratureError` when some panel still fails the
    local test after ``settings.max_depth`` bisections.
    """
    a = float(a)
    b = float(b)
    if tol is None:
        tol = settings.tol
    if a == b:
        return 0.0, 0.0
    if b < a:
        v, e = adaptive_simpson(h, b, a, settings, tol)
        return -v, e
    f = vectorized(h)
    length = b - a
    n0 = min(max(1, math.ceil(length / settings.panel_width)), settings.max_panels)
    nodes = np.linspace(a, b, 2 * n0 + 1)
    fx = f(nodes)
    lo = nodes[0:-1:2]
    hi = nodes[2::2]
    flo = fx[0:-1:2]
    fmid = fx[1::2]
    fhi = fx[2::2]
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    local_tol = np.full(n0, tol / n0)

    total = 0.0
    err = 0.0
    depth = 0
    while lo.size:
        depth += 1
        mid = 0.5 * (lo + hi)
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        fl, fr = np.split(f(np.concatenate([lmid, rmid])), 2)
        half = (hi - lo) / 12.0
        left = half * (flo + 4.0 * fl + fmid)
        right = half * (fmid + 4.0 * fr + fhi)
        delta = left + right - whole
        ok = np.abs(delta) <= 15.0 * local_tol
        if settings.min_width:
            ok |= (hi - lo) <= settings.min_width * length
        if ok.any():
            total = total + np.sum(left[ok] + right[ok] + delta[ok] / 15.0)
            err += float(np.sum(np.abs(delta[ok]))) / 15.0
        bad = ~ok
        if not bad.any():
            break
        if depth >= settings.max_depth or 2 * int(bad.sum()) > settings.max_active:
            partial = total + np.sum(left[bad] + right[bad])
            rest = float(np.sum(np.abs(delta[bad]))) / 15.0
            worst = int(np.argmax(np.where(bad, np.abs(delta), -1.0)))
            raise QuadratureError(
                f"adaptive Simpson on [{a}, {b}] did not converge to {tol:g} "
                f"within depth {depth} (worst panel [{lo[worst]!r}, {hi[worst]!r}])",
                partial,
                err + rest,
            )
        lo, mid, hi = lo[bad], mid[bad], hi[bad]
        flo, fl, fmid, fr, fhi = flo[bad], fl[bad], fmid[bad], fr[bad], fhi[bad]
        left, right = left[bad], right[bad]
        local_tol = local_tol[bad] / 2.0
        lo = np.concatenate([lo, mid])
        hi = np.concatenate([mid, hi])
        flo, fmid, fhi = (
            np.concatenate([flo, fmid]),
            np.concatenate([fl, fr]),
            np.concatenate([fmid, fhi]),
        )
        whole = np.concatenate([left, right])
        local_tol = np.concatenate([local_tol, local_tol])
    if isinstance(total, np.generic):
        total = total.item()
    return total, err
