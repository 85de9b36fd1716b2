"""Fourier-Stieltjes transforms, distinguished logarithms and CF inversion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc, gammainccinv

from .bv import PiecewiseBV
from .quadrature import DEFAULT_QUADRATURE, QuadratureError, adaptive_simpson

DEFAULT_STEP = 0.01
DEFAULT_T_MAX = 40.0
_CHUNK = 1 << 22


class VanishingCFError(ValueError):
    """A sampled function has a zero, so it cannot be the CF of a QID law."""


class GridTooCoarseError(ValueError):
    """Consecutive grid points leave the phase increment ambiguous."""

    def __init__(self, message, interval):
        super().__init__(message)
        self.interval = interval


class InconclusiveError(RuntimeError):
    def __init__(self, message, partial_value, tail_estimate):
        super().__init__(message)
        self.partial_value = partial_value
        self.tail_estimate = tail_estimate


@dataclass(frozen=True)
class TransformSamples:
    """Complex samples of a function on a strictly increasing grid through t = 0."""

    grid: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=complex)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if grid.size == 0 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be non-empty and strictly increasing")
        if not np.any(grid == 0.0):
            raise ValueError("grid must contain t = 0")
        grid.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def zero_index(self) -> int:
        return int(np.flatnonzero(self.grid == 0.0)[0])

    def at(self, t: float) -> complex:
        i = np.searchsorted(self.grid, t)
        if i >= self.grid.size or self.grid[i] != t:
            raise KeyError(f"t = {t} is not a grid point")
        return complex(self.values[i])

    def __len__(self):
        return self.grid.size


def uniform_grid(t_min=-DEFAULT_T_MAX, t_max=DEFAULT_T_MAX, step=DEFAULT_STEP):
    """Grid ``k * step`` covering ``[t_min, t_max]``; always contains 0 exactly."""
    if not (t_min <= 0 <= t_max and step > 0):
        raise ValueError("need t_min <= 0 <= t_max and step > 0")
    lo = math.ceil(t_min / step - 1e-9)
    hi = math.floor(t_max / step + 1e-9)
    return np.arange(lo, hi + 1) * step


def default_grid():
    return uniform_grid()


def fs_transform(G: PiecewiseBV, t):
    """Closed-form ``int e^{itx} dG(x)``, vectorised over ``t``.

    A segment [a, b] with slope s contributes ``s (e^{itb} - e^{ita}) / (it)``,
    evaluated as ``s e^{ita} L E(tL)`` with ``E(z) = (e^{iz} - 1)/(iz)`` in a
    cancellation-free form, so t = 0 needs no special case.
    """
    t_arr = np.asarray(t, dtype=float)
    flat = t_arr.ravel()
    out = np.zeros(flat.shape, dtype=complex)
    width = max(1, G._aw.size + G._ss.size)
    chunk = max(1, _CHUNK // width)
    for start in range(0, flat.size, chunk):
        tc = flat[start : start + chunk, None]
        acc = np.zeros(tc.shape[0], dtype=complex)
        if G._aw.size:
            acc += np.exp(1j * tc * G._aloc) @ G._aw
        if G._ss.size:
            length = G._sr - G._sl
            z = tc * length
            e = np.sinc(z / np.pi) + 1j * (0.5 * z) * np.sinc(z / (2 * np.pi)) ** 2
            acc += (np.exp(1j * tc * G._sl) * e) @ (G._ss * length)
        out[start : start + chunk] = acc
    out = out.reshape(t_arr.shape)
    return complex(out) if out.ndim == 0 else out


def principal_log(f, t):
    """Principal-branch log of ``f`` at ``t``.

    Evaluators exposing ``principal_log`` are asked directly, which keeps
    ``ln|f|`` finite where ``|f|`` itself would underflow.
    """
    t = np.asarray(t, dtype=float)
    if hasattr(f, "principal_log"):
        return np.asarray(f.principal_log(t), dtype=complex)
    v = np.asarray(f(t), dtype=complex)
    if v.shape != t.shape:
        v = np.broadcast_to(v, t.shape)
    bad = ~(np.abs(v) > 0) | ~np.isfinite(v)
    if np.any(bad):
        i = int(np.flatnonzero(bad.ravel())[0])
        raise VanishingCFError(
            f"function vanishes at t = {t.ravel()[i]!r}; a quasi-infinitely divisible "
            "characteristic function has no zeros"
        )
    return np.log(v)


def _wrap(d):
    return (d + np.pi) % (2 * np.pi) - np.pi


def _unwrap(grid, logs, max_phase_step):
    """Continuous-branch imaginary part, anchored at the grid point t = 0."""
    i0 = int(np.flatnonzero(grid == 0.0)[0])
    if abs(logs[i0]) > 1e-12:
        raise ValueError(f"value at t = 0 must be 1, its log is {logs[i0]!r}")
    im = logs.imag
    d = _wrap(np.diff(im))
    big = np.flatnonzero(np.abs(d) >= max_phase_step)
    if big.size:
        k = int(big[0])
        raise GridTooCoarseError(
            f"phase increment {d[k]:.3f} on [{grid[k]!r}, {grid[k + 1]!r}] is too large; "
            "refine the grid",
            (float(grid[k]), float(grid[k + 1])),
        )
    theta = np.empty_like(im)
    theta[i0] = 0.0
    theta[i0 + 1 :] = np.cumsum(d[i0:])
    theta[:i0] = -np.cumsum(d[:i0][::-1])[::-1]
    # snap to principal value + 2*pi*k so rounding in the cumsum cannot accumulate
    theta = im + 2 * np.pi * np.round((theta - im) / (2 * np.pi))
    theta[i0] = 0.0
    return logs.real + 1j * theta


def _densify(f, grid, logs, threshold, rounds):
    for _ in range(rounds):
        d = np.abs(_wrap(np.diff(logs.imag)))
        coarse = np.flatnonzero(d > threshold)
        if not coarse.size:
            break
        left = grid[coarse]
        width = grid[coarse + 1] - left
        extra = (left[:, None] + width[:, None] * np.arange(1, 10) / 10.0).ravel()
        new_logs = principal_log(f, extra)
        grid = np.concatenate([grid, extra])
        logs = np.concatenate([logs, new_logs])
        order = np.argsort(grid, kind="stable")
        grid, logs = grid[order], logs[order]
    return grid, logs


def sample(f, grid=None, densify=True, rounds=3):
    """Sample ``f`` on ``grid`` (default: step 0.01 on [-40, 40]) as TransformSamples.

    With ``densify``, every interval whose phase increment exceeds pi/2 is
    split into ten, up to ``rounds`` times.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if densify:
        logs = principal_log(f, grid)
        grid, _ = _densify(f, grid, logs, np.pi / 2, rounds)
    values = np.asarray(f(grid), dtype=complex)
    return TransformSamples(grid, values)


def distinguished_log(samples: TransformSamples, max_phase_step=0.75 * np.pi) -> TransformSamples:
    """Continuous branch of log along the grid with Ln f(0) = 0.

    The phase is unwrapped outward from t = 0.  A zero sample raises
    :class:`VanishingCFError`; a principal phase increment of at least
    ``max_phase_step`` raises :class:`GridTooCoarseError`.
    """
    v = samples.values
    zero = np.flatnonzero(~(np.abs(v) > 0))
    if zero.size:
        t = samples.grid[zero[0]]
        raise VanishingCFError(
            f"sample vanishes at t = {t!r}; a quasi-infinitely divisible "
            "characteristic function has no zeros"
        )
    return TransformSamples(samples.grid, _unwrap(samples.grid, np.log(v), max_phase_step))


class DistinguishedLog:
    """Distinguished logarithm of ``f`` at arbitrary points of ``[-t_max, t_max]``.

    The phase is tracked once on a fine grid; off-grid queries take the
    principal value shifted by the multiple of 2*pi closest to the
    interpolated tracked phase.
    """

    def __init__(self, f, t_max, step=DEFAULT_STEP, max_phase_step=0.75 * np.pi):
        self.f = f
        self.t_max = float(t_max)
        grid = uniform_grid(-self.t_max, self.t_max, step)
        if grid[-1] < self.t_max:
            grid = np.concatenate([-np.array([self.t_max]), grid, [self.t_max]])
        logs = principal_log(f, grid)
        grid, logs = _densify(f, grid, logs, np.pi / 2, 3)
        self.grid = grid
        self.logs = _unwrap(grid, logs, max_phase_step)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(np.abs(t) > self.t_max * (1 + 1e-12)):
            raise ValueError(f"|t| exceeds the tracked range {self.t_max}")
        pl = principal_log(self.f, t)
        ref = np.interp(t, self.grid, self.logs.imag)
        im = pl.imag + 2 * np.pi * np.round((ref - pl.imag) / (2 * np.pi))
        out = pl.real + 1j * im
        return complex(out) if out.ndim == 0 else out


def _window_scale(t_max, order):
    # u where the flat-top window has decayed to 1e-16
    return t_max / math.sqrt(2.0 * gammainccinv(order, 1e-16))


def gil_pelaez_cdf(
    f,
    x,
    quad=DEFAULT_QUADRATURE,
    t_max=200.0,
    window_order=4,
    tail_tol=1e-6,
    full_output=False,
):
    """F(x) = 1/2 - (1/pi) int_0^inf Im(e^{-itx} f(t)) / t dt.

    The integral is truncated at ``t_max``.  Characteristic functions of
    laws with atoms do not decay, so by default the integrand is damped by
    the flat-top window ``Q(m, u^2/2)`` (regularised upper incomplete gamma,
    m = ``window_order``), which equals 1 - O(u^{2m}) near 0 and is 1e-16 at
    ``t_max``.  This smooths F by a kernel of width ~0.05 whose first 2m-1
    moments vanish.  ``window_order=0`` gives the plain truncation.

    Raises :class:`InconclusiveError` when the last-lobe tail estimate
    exceeds ``tail_tol``.  With ``full_output`` returns ``(F, info)``.
    """
    x = float(x)
    scale = _window_scale(t_max, window_order) if window_order else None
    h0 = 1e-6
    # Im(e^{-itx} f(t))/t -> mean - x as t -> 0
    limit0 = float(np.imag(principal_log(f, np.array([h0]))[0])) / h0 - x

    def weight(t):
        if scale is None:
            return np.ones_like(t)
        return gammaincc(window_order, 0.5 * (t / scale) ** 2)

    def raw_integrand(t):
        v = np.asarray(f(t), dtype=complex) * np.exp(-1j * t * x)
        return v.imag / t

    # Near 0 the quotient loses digits to cancellation inside f, which stalls
    # the adaptive refinement; interpolate linearly from the limit instead.
    t_lin = 1e-3
    slope0 = (raw_integrand(np.array([t_lin]))[0] - limit0) / t_lin

    def integrand(t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape)
        far = t >= t_lin
        out[far] = raw_integrand(t[far])
        out[~far] = limit0 + slope0 * t[~far]
        return out * weight(t)

    try:
        value, err = adaptive_simpson(integrand, 0.0, t_max, quad)
    except QuadratureError as exc:
        raise InconclusiveError(
            f"Gil-Pelaez integral did not converge: {exc}",
            min(1.0, max(0.0, 0.5 - exc.partial_value / np.pi)),
            exc.error_estimate,
        ) from exc
    last = np.linspace(0.98 * t_max, t_max, 201)
    lobe = np.max(np.abs(np.asarray(f(last), dtype=complex)) * weight(last))
    tail = 2.0 * lobe / (np.pi * t_max)
    raw = 0.5 - value / np.pi
    F = min(1.0, max(0.0, raw))
    if tail > tail_tol:
        raise InconclusiveError(
            f"CF does not decay: tail estimate {tail:.2e} exceeds {tail_tol:.1e}", F, tail
        )
    if full_output:
        return F, {"quad_error": err / np.pi, "tail_estimate": tail, "unclamped": raw}
    return F
