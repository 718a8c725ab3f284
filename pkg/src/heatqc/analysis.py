"""Function-space diagnostics for a weight and its logarithm.

Mean oscillation, BMO/VMO profiles, the A-infinity ratio, John-Nirenberg
level-set tails, the Hardy-Littlewood maximal function and the
Littlewood-Paley square function.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, SingularityError, ZeroMeanRequired
from .kernels import Kernel
from .quadrature import FunctionSource, QuadratureConfig, convolve_many, integrate
from .weights import WeightSpec, interval_mass


@dataclass(frozen=True)
class Handle:
    """A real function on the line with the structure quadrature needs.

    ``points`` are jumps or kinks, ``singular`` maps points to a power
    exponent (``0`` for a log singularity), and ``mean_fn(a, b)`` may give
    the mean over ``[a, b]`` in closed form.
    """

    fn: Callable
    points: tuple = ()
    singular: dict = field(default_factory=dict)
    mean_fn: Callable | None = None
    name: str = "function"

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def cuts(self, a, b):
        return sorted(p for p in set(self.points) | set(self.singular) if a < p < b)

    def integral(self, a, b, cfg=None, absolute_of=None):
        cfg = cfg or QuadratureConfig()
        f = self if absolute_of is None else absolute_of
        sing = {p: e for p, e in self.singular.items() if a <= p <= b}
        # callers divide by the length, so abs_tol is scaled to apply to the mean
        return integrate(f, a, b, points=self.cuts(a, b), singular=sing,
                         rel_tol=min(cfg.rel_tol, 1e-10), abs_tol=cfg.abs_tol * (b - a), max_panels=20000)

    def mean(self, a, b, cfg=None):
        if self.mean_fn is not None:
            m = self.mean_fn(a, b)
            if m is not None:
                return float(m)
        return self.integral(a, b, cfg).value / (b - a)

    def scaled(self, c: float, shift: float = 0.0) -> "Handle":
        """``c * h + shift``."""
        mf = None
        if self.mean_fn is not None:
            mf = lambda a, b: None if self.mean_fn(a, b) is None else c * self.mean_fn(a, b) + shift
        return Handle(lambda x: c * self.fn(x) + shift, self.points, dict(self.singular), mf, self.name)


def log_abs(c: float = 1.0) -> Handle:
    """``c log|x|`` with its closed-form interval mean."""

    def F(x):  # antiderivative of log|x|
        return 0.0 if x == 0 else x * math.log(abs(x)) - x

    def fn(x):
        with np.errstate(divide="ignore"):
            return c * np.log(np.abs(x))

    return Handle(fn, (0.0,), {0.0: 0.0}, lambda a, b: c * (F(b) - F(a)) / (b - a), f"{c}*log|x|")


def log_weight(spec: WeightSpec) -> Handle:
    """``alpha = log w`` of a catalog or user weight."""
    return Handle(spec.log, tuple(spec.breakpoints()), {p: 0.0 for p in spec.singular_points()},
                  spec.log_mean, f"log {spec.family}")


def as_handle(obj) -> Handle:
    if isinstance(obj, Handle):
        return obj
    if isinstance(obj, WeightSpec):
        return log_weight(obj)
    if callable(obj):
        return Handle(obj)
    raise TypeError(f"cannot use {obj!r} as a function handle")


def _interval(I):
    a, b = (float(v) for v in I)
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise DomainError(f"interval must be bounded and nonempty, got {I}")
    return a, b


def _level_crossings(h: Handle, a, b, level, n=257):
    """Points where ``h`` crosses ``level``, so that ``|h - level|`` is split at its kinks."""
    edges = [a] + h.cuts(a, b) + [b]
    roots = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        # sample strictly inside to stay off singular endpoints
        x = lo + (hi - lo) * (np.arange(n) + 0.5) / n
        y = h(x) - level
        for i in np.flatnonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0):
            roots.append(brentq(lambda z: float(h(z)) - level, x[i], x[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return roots


def mean_oscillation(alpha, I, cfg: QuadratureConfig | None = None) -> float:
    """``(1/|I|) int_I |alpha - alpha_I|`` with ``alpha_I`` the mean over ``I``."""
    h = as_handle(alpha)
    a, b = _interval(I)
    m = h.mean(a, b, cfg)
    if not math.isfinite(m):
        raise SingularityError(f"mean of {h.name} over {I} is not finite")
    pts = sorted(set(h.cuts(a, b)) | set(_level_crossings(h, a, b, m)))
    cfg = cfg or QuadratureConfig()
    sing = {p: e for p, e in h.singular.items() if a <= p <= b}
    # abs_tol applies to the returned mean, hence the |I| factor
    r = integrate(lambda x: np.abs(h(x) - m), a, b, points=pts, singular=sing,
                  rel_tol=min(cfg.rel_tol, 1e-10), abs_tol=cfg.abs_tol * (b - a))
    return r.value / (b - a)


@dataclass
class JNTail:
    samples: list        # (lambda, fraction)
    slope: float         # d log(fraction) / d lambda over the positive fractions
    intercept: float
    mean: float


@dataclass
class OscillationReport:
    per_scale: list                       # (delta, sup over sampled |I| <= delta)
    bmo_norm_estimate: float
    vmo_modulus: list                     # (delta, value), non-decreasing in delta
    ainfty_ratio_sup: float | None = None
    jn_tail_samples: list = field(default_factory=list)
    doubling_estimate: float | None = None

    def modulus(self, delta: float) -> float:
        for d, v in self.vmo_modulus:
            if math.isclose(d, delta, rel_tol=1e-12):
                return v
        raise KeyError(delta)

    def to_dict(self):
        return asdict(self)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def sample_intervals(window, delta, n, rng, features=()):
    """Intervals of length at most ``delta`` inside ``window``.

    Stratified random centers (one per stratum, lengths in ``[delta/2, delta]``),
    the dyadic subintervals of the window of the largest dyadic length not
    exceeding ``delta``, and intervals of length ``delta`` straddling each
    feature point at stratified offsets (a point singularity is only seen by
    intervals that touch it).
    """
    a, b = window
    W = b - a
    ell = min(delta, W)
    out = []
    edges = np.linspace(a, b, n + 1)
    centers = edges[:-1] + rng.random(n) * np.diff(edges)
    lengths = ell * (0.5 + 0.5 * rng.random(n))
    for c, L in zip(centers, lengths):
        lo = min(max(c - L / 2, a), b - L)
        out.append((lo, lo + L))
    m = max(0, math.ceil(math.log2(W / ell) - 1e-12))
    dy = W / 2**m
    k = np.arange(2**m)
    if k.size > 4 * n:
        # a spread subset, plus the cells next to feature points
        near = [int(np.clip((p - a) // dy + j, 0, 2**m - 1)) for p in features for j in (-1, 0)]
        k = np.unique(np.concatenate([np.round(np.linspace(0, 2**m - 1, 4 * n)).astype(int), near]))
    out += [(a + i * dy, a + (i + 1) * dy) for i in k]
    theta = np.concatenate([[0.0, 0.5, 1.0], (np.arange(n) + rng.random(n)) / n])
    for p in features:
        if not a <= p <= b:
            continue
        for th in theta:
            lo = min(max(p - th * ell, a), b - ell)
            out.append((lo, lo + ell))
    return out


def bmo_vmo_profile(alpha, window, scales, samples_per_scale: int = 32, cfg: QuadratureConfig | None = None,
                    seed: int = 0) -> OscillationReport:
    """Per-scale sup of mean oscillation over sampled subintervals of ``window``.

    The modulus at ``delta`` is the max over every sampled interval with
    ``|I| <= delta`` (all scales pooled), so it is non-decreasing by
    construction.  ``bmo_norm_estimate`` is a lower bound for the BMO norm
    on the window.
    """
    h = as_handle(alpha)
    window = _interval(window)
    scales = [float(d) for d in scales]
    if not scales or any(d <= 0 for d in scales):
        raise DomainError("scales must be positive")
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise DomainError("scales must be strictly decreasing")
    rng = np.random.default_rng(seed)
    feats = sorted(p for p in set(h.points) | set(h.singular) if window[0] <= p <= window[1])
    found = []  # (length, oscillation)
    per_scale = []
    for d in scales:
        best = 0.0
        for lo, hi in sample_intervals(window, d, samples_per_scale, rng, feats):
            v = mean_oscillation(h, (lo, hi), cfg)
            found.append((hi - lo, v))
            best = max(best, v)
        per_scale.append((d, best))
    lengths = np.array([f[0] for f in found])
    vals = np.array([f[1] for f in found])
    modulus = [(d, float(vals[lengths <= d * (1 + 1e-12)].max(initial=0.0))) for d in scales]
    return OscillationReport(per_scale, float(vals.max(initial=0.0)), modulus)


def ainfty_ratio(spec: WeightSpec, I, cfg: QuadratureConfig | None = None) -> float:
    """Arithmetic over geometric mean of the weight on ``I``; at least 1 by Jensen."""
    a, b = _interval(I)
    tol = (cfg or QuadratureConfig()).abs_tol
    arith = float(interval_mass(spec, a, b, tol)) / (b - a)
    lm = log_weight(spec).mean(a, b, cfg)
    if not math.isfinite(lm):
        raise SingularityError(f"log of the weight is not integrable on {I}")
    ratio = arith / math.exp(lm)
    # Jensen: anything below 1 is roundoff
    assert ratio >= 1.0 - 1e-9, ratio
    return max(ratio, 1.0)


def jn_tail(alpha, I, lambdas, n_samples: int = 100_000) -> JNTail:
    """Level-set fractions ``|{x in I: |alpha - alpha_I| > lambda}| / |I|`` by midpoint sampling."""
    h = as_handle(alpha)
    a, b = _interval(I)
    lam = np.asarray(lambdas, dtype=float)
    if lam.size and (np.any(lam <= 0) or np.any(np.diff(lam) <= 0)):
        raise DomainError("lambdas must be positive and increasing")
    if n_samples < 1:
        raise DomainError("n_samples must be positive")
    m = h.mean(a, b)
    x = a + (b - a) * (np.arange(n_samples) + 0.5) / n_samples
    dev = np.sort(np.abs(h(x) - m))
    frac = 1.0 - np.searchsorted(dev, lam, side="right") / n_samples
    pos = frac > 0
    if pos.sum() >= 2:
        slope, icpt = np.polyfit(lam[pos], np.log(frac[pos]), 1)
    else:
        slope, icpt = math.nan, math.nan
    return JNTail([(float(l), float(f)) for l, f in zip(lam, frac)], float(slope), float(icpt), float(m))


# -- maximal and square functions -------------------------------------------------

def _local_mass(h: Handle, x, s, restriction, cfg):
    ra, rb = restriction
    lo, hi = max(x - s, ra), min(x + s, rb)
    if hi <= lo:
        return 0.0
    # fl(x + s) - fl(x - s) is not 2s; take the mean over [lo, hi] and rescale to the nominal length
    covered = 2.0 * s if (lo == x - s and hi == x + s) else hi - lo
    return h.integral(lo, hi, cfg, absolute_of=lambda y: np.abs(h(y))).value / (hi - lo) * covered


def maximal_function_bounds(g, x: float, restriction, cfg: QuadratureConfig | None = None,
                            n_grid: int = 40, s_range=None):
    """``(lower, upper, s_star)`` for ``sup_s (1/2s) int_{|x-y|<s} |g 1_R|``.

    The lower bound is the best mean found by a 40-point log-s grid, the
    endpoint radii ``|x - a|``, ``|x - b|`` and a bounded local refinement.
    The upper bound brackets each grid cell by ``mass(s_{i+1}) / (2 s_i)``
    and covers ``s >= s_range[0]``.
    """
    h = as_handle(g)
    ra, rb = _interval(restriction)
    cfg = cfg or QuadratureConfig()
    far = max(abs(x - ra), abs(x - rb))
    s_lo, s_hi = s_range or (1e-6 * (rb - ra), 4.0 * far)
    grid = np.geomspace(s_lo, s_hi, n_grid)
    ends = [r for r in (abs(x - ra), abs(x - rb)) if s_lo < r < s_hi]
    cand = np.unique(np.concatenate([grid, ends]))
    mass = np.array([_local_mass(h, x, s, (ra, rb), cfg) for s in cand])
    means = mass / (2 * cand)
    i = int(np.argmax(means))
    best, s_star = float(means[i]), float(cand[i])
    lo_i, hi_i = cand[max(i - 1, 0)], cand[min(i + 1, cand.size - 1)]
    if hi_i > lo_i:
        r = minimize_scalar(lambda ls: -_local_mass(h, x, math.exp(ls), (ra, rb), cfg) / (2 * math.exp(ls)),
                            bounds=(math.log(lo_i), math.log(hi_i)), method="bounded",
                            options={"xatol": 1e-10})
        if -r.fun > best:
            best, s_star = float(-r.fun), float(math.exp(r.x))
    upper = float(max(np.max(mass[1:] / (2 * cand[:-1])), mass[-1] / (2 * cand[-1]), best))
    return best, upper, s_star


def maximal_function(g, x: float, restriction, cfg: QuadratureConfig | None = None) -> float:
    """Hardy-Littlewood maximal function of ``g 1_R`` at ``x`` (certified lower bound)."""
    return maximal_function_bounds(g, x, restriction, cfg)[0]


def lp_square_function(g, kernel: Kernel, x: float, s_range, cfg: QuadratureConfig | None = None,
                       panels_per_decade: int = 4, max_doublings: int = 6) -> float:
    """``(int (g * gamma_s)(x)^2 ds/s)^{1/2}`` over ``s_range``, length-scale dilation.

    Composite Gauss-Legendre in ``log s``, doubled until two passes agree
    to the quadrature tolerance.
    """
    if abs(kernel.moments[0]) > 1e-12:
        raise ZeroMeanRequired(f"kernel {kernel.name} has integral {kernel.moments[0]}")
    s0, s1 = (float(v) for v in s_range)
    if not 0 < s0 < s1:
        raise DomainError("need 0 < s_min < s_max")
    cfg = cfg or QuadratureConfig()
    h = as_handle(g)
    src = FunctionSource(h, breakpoints=h.points, singular=h.singular, name=h.name)
    z, w = np.polynomial.legendre.leggauss(8)
    lo, hi = math.log(s0), math.log(s1)
    n = max(1, math.ceil(panels_per_decade * (hi - lo) / math.log(10)))
    prev = None
    for _ in range(max_doublings):
        e = np.linspace(lo, hi, n + 1)
        ls = (0.5 * (e[:-1, None] + e[1:, None]) + 0.5 * np.diff(e)[:, None] * z).ravel()
        ws = (0.5 * np.diff(e)[:, None] * w).ravel()
        b = convolve_many(src, [kernel], np.full(ls.size, float(x)), np.exp(ls), cfg)
        val = float(ws @ b.values[0] ** 2)
        if prev is not None and abs(val - prev) <= max(cfg.abs_tol, cfg.rel_tol * abs(val)):
            break
        prev, n = val, 2 * n
    return math.sqrt(max(val, 0.0))
