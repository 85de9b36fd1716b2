"""Levy-Khinchine characteristic functions of spectral pairs and their inversion.

The characteristic function of a spectral pair (gamma, G) with centering
scale tau is

    f(t) = exp{ i t gamma + int (e^{itx} - 1 - (it/tau) sin(tau x)) (1+x^2)/x^2 dG(x) }.

G is any :class:`~qidlaws.bv.PiecewiseBV`; a non-monotone G gives a
quasi-infinitely divisible law.  An atom of G at 0 with weight w contributes
the Gaussian factor exp(-w t^2 / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .bv import PiecewiseBV, combine, hahn_jordan, stieltjes_integral, total_variation
from .fourier import DistinguishedLog, TransformSamples, distinguished_log, fs_transform, principal_log
from .quadrature import DEFAULT_QUADRATURE, QuadratureError, adaptive_simpson

_CHUNK = 1 << 22


@dataclass(frozen=True)
class SpectralPair:
    gamma: float
    G: PiecewiseBV
    tau: float = 1.0

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not math.isfinite(self.gamma):
            raise ValueError("gamma must be finite")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "tau", float(self.tau))


def _cubic_defect(y):
    """(y - sin y) / y^3, accurate through y = 0 where it equals 1/6."""
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape)
    small = np.abs(y) < 0.1
    ys = y[small] ** 2
    out[small] = 1 / 6 - ys * (1 / 120 - ys * (1 / 5040 - ys * (1 / 362880 - ys / 39916800)))
    yb = y[~small]
    out[~small] = (yb - np.sin(yb)) / yb**3
    return out


def kernel(t, x, tau):
    """(e^{itx} - 1 - (it/tau) sin(tau x)) (1+x^2)/x^2, with value -t^2/2 at x = 0.

    Uses cos(y) - 1 = -2 sin^2(y/2) for the real part and the
    (y - sin y)/y^3 form for the imaginary part, so there is no
    cancellation near x = 0 and no branch to switch.  Broadcasts over t, x.
    """
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    tau = float(tau)
    re = -0.5 * t**2 * np.sinc(t * x / (2 * np.pi)) ** 2
    im = t * x * (tau**2 * _cubic_defect(tau * x) - t**2 * _cubic_defect(t * x))
    out = (re + 1j * im) * (1.0 + x**2)
    return complex(out) if out.ndim == 0 else out


def _sinc(y):
    return np.sinc(y / np.pi)


def _cin(z):
    """int_0^z (1 - cos s)/s ds for z >= 0; the series avoids cancellation near 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape)
    small = z < 0.5
    zs = z[small] ** 2
    out[small] = zs * (1 / 4 - zs * (1 / 96 - zs * (1 / 4320 - zs / 322560)))
    zb = z[~small]
    out[~small] = np.euler_gamma + np.log(zb) - special.sici(zb)[1]
    return out


def _kernel_primitive(t, x, tau):
    """An antiderivative in x of kernel(t, x, tau), continuous through x = 0.

    The kernel splits into e^{itx} - 1 - (it/tau) sin(tau x), which integrates
    in elementary terms, and the same expression over x^2, whose real and
    imaginary parts integrate through Si and Cin.
    """
    u = np.abs(x)
    smooth = -(t**2) * x**3 * _cubic_defect(t * x) + 0.5j * t * x**2 * (
        _sinc(t * x / 2) ** 2 - _sinc(tau * x / 2) ** 2
    )
    even = 0.5 * t**2 * u * _sinc(t * u / 2) ** 2 - t * special.sici(t * u)[0]
    odd = t * (_sinc(tau * u) - _sinc(t * u)) + t * (_cin(tau * u) - _cin(np.abs(t) * u))
    return smooth + np.sign(x) * even + 1j * odd


def _segment_integrals(G, t, tau):
    """sum_k slope_k int_{seg_k} kernel(t, x, tau) dx in closed form."""
    out = np.zeros(t.shape, dtype=complex)
    for s in G.segments:
        out += s.slope * (_kernel_primitive(t, s.right, tau) - _kernel_primitive(t, s.left, tau))
    return out


def log_cf(pair: SpectralPair, t, quad=None):
    """Exponent of the Levy-Khinchine formula (the distinguished log of the CF).

    Atoms are summed exactly and segments in closed form through the sine
    and cosine integrals, or by adaptive Simpson through :func:`~qidlaws.bv.stieltjes_integral` when
    ``quad`` is given (slow; meant for cross-checks).
    """
    t_arr = np.asarray(t, dtype=float)
    flat = t_arr.ravel()
    G = pair.G
    out = 1j * pair.gamma * flat
    if G.atoms:
        chunk = max(1, _CHUNK // len(G.atoms))
        for start in range(0, flat.size, chunk):
            tc = flat[start : start + chunk]
            out[start : start + chunk] += kernel(tc[:, None], G._aloc[None, :], pair.tau) @ G._aw
    if G.segments:
        if quad is None:
            out = out + _segment_integrals(G, flat, pair.tau)
        else:
            ramp = PiecewiseBV(segments=G.segments)
            out = out + np.array(
                [stieltjes_integral(ramp, lambda x, tt=tt: kernel(tt, x, pair.tau), quad) for tt in flat]
            )
    out = out.reshape(t_arr.shape)
    return complex(out) if out.ndim == 0 else out


def cf(pair: SpectralPair, t):
    """Characteristic function value(s); exactly 1 at t = 0."""
    out = np.exp(log_cf(pair, t))
    return complex(out) if np.ndim(out) == 0 else out


class PairCF:
    """Callable characteristic function of a spectral pair.

    ``principal_log`` returns ln|f| + i Arg f straight from the exponent, so
    distinguished-log tracking keeps working where |f| underflows.
    """

    def __init__(self, pair: SpectralPair):
        self.pair = pair

    def __call__(self, t):
        return cf(self.pair, t)

    def principal_log(self, t):
        lc = np.asarray(log_cf(self.pair, t))
        return lc.real + 1j * ((lc.imag + np.pi) % (2 * np.pi) - np.pi)


def cf_evaluator(pair: SpectralPair) -> PairCF:
    return PairCF(pair)


def add_pairs(p: SpectralPair, q: SpectralPair) -> SpectralPair:
    """Pair of the convolution: shifts add, spectral functions add."""
    if p.tau != q.tau:
        raise ValueError("pairs must share tau")
    return SpectralPair(p.gamma + q.gamma, combine(1.0, p.G, 1.0, q.G), p.tau)


def factor_pairs(pair: SpectralPair):
    """Infinitely divisible pairs (gamma, G+) and (0, G-) with f = f+ / f-."""
    jp = hahn_jordan(pair.G)
    return (
        SpectralPair(pair.gamma, jp.positive_part, pair.tau),
        SpectralPair(0.0, jp.negative_part, pair.tau),
    )


def from_levy_measure(atoms=(), drift=0.0, gaussian_variance=0.0, tau=1.0) -> SpectralPair:
    """Pair for log f(t) = i*drift*t - var*t^2/2 + sum_j m_j (e^{i t x_j} - 1).

    ``atoms`` are (x_j, m_j) of an atomic Levy measure nu with x_j != 0,
    mapped through dG = x^2/(1+x^2) dnu; m_j < 0 is allowed and yields a
    quasi-infinitely divisible pair.  The shift absorbs the sin-centering.
    """
    g_atoms = []
    gamma = float(drift)
    for x, m in atoms:
        x = float(x)
        if x == 0.0:
            raise ValueError("Levy measure atoms must avoid 0")
        g_atoms.append((x, m * x * x / (1.0 + x * x)))
        gamma += m * math.sin(tau * x) / tau
    if gaussian_variance:
        g_atoms.append((0.0, gaussian_variance))
    return SpectralPair(gamma, PiecewiseBV(g_atoms), tau)


def poisson_pair(lam=1.0, tau=1.0, location=1.0) -> SpectralPair:
    """Poisson law with rate ``lam`` on the lattice ``location * Z``: log f = lam (e^{it loc} - 1)."""
    return from_levy_measure([(location, lam)], tau=tau)


# --- kernel representation through W = U + V -------------------------------


def rho(t, tau, s):
    """-1/2 (|s-t| - |s| - t/(2 tau) (|s-tau| - |s+tau|))."""
    s = np.asarray(s, dtype=float)
    out = -0.5 * (np.abs(s - t) - np.abs(s) - t / (2 * tau) * (np.abs(s - tau) - np.abs(s + tau)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LemmaKernelParts:
    U: PiecewiseBV
    rho_breakpoints: tuple
    V: PiecewiseBV
    W: PiecewiseBV
    support_bound: float

    def rho(self, s):
        """rho interpolated from its breakpoints; zero outside them."""
        xs, ys = zip(*self.rho_breakpoints)
        out = np.interp(s, xs, ys, left=0.0, right=0.0)
        return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=256)
def lemma_parts(t: float, tau: float, mesh: float = 5e-4) -> LemmaKernelParts:
    """U, rho, V, W with (e^{itx}-1-(it/tau)sin(tau x))(1+x^2)/x^2 = int e^{isx} dW(s).

    V = int rho is piecewise quadratic; it is stored as a PiecewiseBV whose
    slopes are the averages of rho over subintervals of length <= ``mesh``,
    so V is exact at the mesh nodes and the transform error is O(mesh^2).
    """
    t = float(t)
    tau = float(tau)
    if not tau > 0:
        raise ValueError("tau must be positive")
    c = t / (2 * tau)
    U = PiecewiseBV([(t, 1.0), (0.0, -1.0), (tau, -c), (-tau, c)])
    points = sorted({-tau, 0.0, t, tau})
    breaks = tuple((p, rho(t, tau, p)) for p in points)
    segments = []
    if t != 0.0:
        for (a, ra), (b, rb) in zip(breaks, breaks[1:]):
            n = max(1, math.ceil((b - a) / mesh))
            nodes = np.linspace(a, b, n + 1)
            vals = ra + (rb - ra) * (nodes - a) / (b - a)
            avg = 0.5 * (vals[:-1] + vals[1:])
            segments.extend(zip(nodes[:-1], nodes[1:], avg))
    V = PiecewiseBV(segments=segments)
    W = combine(1.0, U, 1.0, V)
    return LemmaKernelParts(U, breaks, V, W, max(abs(t), tau))


def kernel_via_W(t, x, tau, mesh=5e-4):
    """The kernel as the Fourier-Stieltjes transform of W_{t,tau} at x."""
    return fs_transform(lemma_parts(float(t), float(tau), mesh).W, x)


# --- recovery from a characteristic function --------------------------------


def recover_gamma(f, tau: float) -> float:
    """Im(Ln f(tau)) / tau; exact for pairs with this tau since the kernel is real at t = tau.

    ``f`` is a CF evaluator or :class:`~qidlaws.fourier.TransformSamples`
    whose grid contains ``tau``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if isinstance(f, TransformSamples):
        return distinguished_log(f).at(tau).imag / tau
    return DistinguishedLog(f, tau)(tau).imag / tau


def psi(f, t, s, tracker=None):
    """Ln f(t) - (Ln f(t-s) + Ln f(t+s)) / 2."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("s must be non-negative")
    if tracker is None:
        reach = float(np.max(np.abs(t) + s)) if t.size and s.size else 0.0
        tracker = DistinguishedLog(f, max(reach, 0.01))
    out = tracker(t) - 0.5 * (tracker(t - s) + tracker(t + s))
    return complex(out) if np.ndim(out) == 0 else out


def recover_spectral_transform(f, t, quad=DEFAULT_QUADRATURE, s_max=40.0, full_output=False):
    """int_0^inf psi(t, s) e^{-s} ds, which equals int e^{itx} dG(x) for a QID pair.

    The s-integral is truncated at ``s_max``; the reported truncation bound
    is B0 (s^2/2 + 1) e^{-s} integrated over the tail, with B0 the largest
    observed ratio |psi| / (s^2/2 + 1).
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    tracker = DistinguishedLog(f, float(np.max(np.abs(t_arr))) + s_max)
    values = np.empty(t_arr.shape, dtype=complex)
    errs = np.empty(t_arr.shape)
    probe = np.linspace(0.0, s_max, 401)
    b0 = 0.0
    for i, ti in enumerate(t_arr):

        def integrand(s, ti=ti):
            return psi(f, ti, s, tracker) * np.exp(-s)

        values[i], errs[i] = adaptive_simpson(integrand, 0.0, s_max, quad)
        b0 = max(b0, float(np.max(np.abs(psi(f, ti, probe, tracker)) / (probe**2 / 2 + 1))))
    bound = b0 * math.exp(-s_max) * (s_max**2 / 2 + s_max + 2)
    out = complex(values[0]) if np.ndim(t) == 0 else values
    if full_output:
        return out, {"quad_error": float(np.max(errs)), "truncation_bound": bound, "B0": b0}
    return out


def default_delta(f, floor=1e-6, k_max=40) -> float:
    """Largest 2^-k (k >= 0) with |f| > ``floor`` on [0, delta]."""
    for k in range(k_max + 1):
        delta = 2.0**-k
        s = np.linspace(0.0, delta, 257)
        if np.all(principal_log(f, s).real > math.log(floor)):
            return delta
    raise ValueError("f is below the floor arbitrarily close to 0")


def khinchine_functional(f, delta=None, quad=DEFAULT_QUADRATURE) -> float:
    """-(1/delta) int_0^delta ln|f(s)| ds."""
    if delta is None:
        delta = default_delta(f)
    if not delta > 0:
        raise ValueError("delta must be positive")
    try:
        principal_log(f, np.linspace(0.0, delta, 1025))
        value, _ = adaptive_simpson(
            lambda s: principal_log(f, s).real, 0.0, delta, quad, tol=quad.tol * delta
        )
    except (ValueError, QuadratureError) as exc:
        raise ValueError(f"f vanishes in [0, {delta}]; choose a smaller delta ({exc})") from exc
    return -value / delta


def sinc_kernel(x, delta):
    """(1 - sin(delta x)/(delta x)) (1+x^2)/x^2, equal to delta^2/6 at x = 0."""
    x = np.asarray(x, dtype=float)
    out = delta**2 * _cubic_defect(delta * x) * (1.0 + x**2)
    return float(out) if out.ndim == 0 else out


def chi_identity_rhs(G: PiecewiseBV, delta, quad=DEFAULT_QUADRATURE) -> float:
    """int (1 - sin(delta x)/(delta x)) (1+x^2)/x^2 dG(x)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return float(np.real(stieltjes_integral(G, lambda x: sinc_kernel(x, delta), quad)))


def sinc_kernel_bounds(delta, n=200001):
    """Numerical (inf, sup) of :func:`sinc_kernel` over the line.

    Candidates: a log-spaced grid on [1e-6, 1e6] (the kernel is even), the
    value delta^2/6 at 0 and the limit 1 at infinity.  The grid extremes are
    then polished by a bounded scalar search between their neighbours.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    x = np.geomspace(1e-6 / delta, 1e6 / delta, n)
    vals = sinc_kernel(x, delta)
    lo, hi = min(delta**2 / 6, 1.0), max(delta**2 / 6, 1.0)
    for sign in (1.0, -1.0):
        i = int(np.argmin(sign * vals))
        a, b = x[max(i - 1, 0)], x[min(i + 1, n - 1)]
        res = optimize.minimize_scalar(
            lambda v: sign * sinc_kernel(v, delta), bounds=(a, b), method="bounded", options={"xatol": 1e-14}
        )
        best = min(sign * vals[i], float(res.fun)) * sign
        lo, hi = min(lo, best), max(hi, best)
    return float(lo), float(hi)


def cf_lower_bound(G: PiecewiseBV, t):
    """exp{-(t^2/2 + 2) ||G||}, a lower bound for |f| at t."""
    return np.exp(-(np.asarray(t, dtype=float) ** 2 / 2 + 2) * total_variation(G))
