"""Convolutions ``(w * gamma_L)(x) = int w(x - L z) gamma(z) dz`` on the whole line.

The integration layout in ``z`` is a core ``|z| < 1`` plus dyadic shells
``2^(n-1) <= |z| < 2^n``.  Each elementary panel is integrated with an
embedded Gauss-Kronrod 7/15 pair and bisected until the per-point error
target is met.  Panels are pre-split at kernel jumps and at breakpoints of
the convolved function; panels ending at a power singularity ``|y|^a`` are
integrated in ``v`` with ``z = z_s + w v^q`` so the integrand becomes smooth.

The tail beyond the last shell is bounded with the kernel envelope times a
geometric growth of the ball masses of ``|w|`` (the doubling mechanism).
Everything is vectorized over many evaluation points and several kernels at
once: all kernels share the nodes and the weight evaluations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NonDoublingSuspected, ToleranceNotMet
from .kernels import Kernel, ScaleKind

# Gauss-Kronrod 7/15 nodes and weights on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
W_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_wg_full = np.zeros(8)
_wg_full[1::2] = _WG
W_GAUSS = np.concatenate([_wg_full[:-1], _wg_full[::-1]])

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_panels: int = 4096
    annulus_budget: int = 16
    oracle_mode: bool = False

    def __post_init__(self):
        if not (0 < self.rel_tol < 1 and 0 < self.abs_tol < 1):
            raise ConfigError("rel_tol and abs_tol must lie in (0, 1)")
        if self.max_panels < 16:
            raise ConfigError("max_panels must be >= 16")
        if self.annulus_budget < 4:
            raise ConfigError("annulus_budget must be >= 4")

    def tightened(self, factor: float = 10.0) -> "QuadratureConfig":
        return replace(self, rel_tol=self.rel_tol / factor, abs_tol=max(self.abs_tol / factor, 1e-300))


@dataclass
class QuadratureResult:
    value: float
    error_estimate: float
    panels_used: int
    truncation_bound: float
    converged: bool = True
    shell_contributions: tuple = field(default=(), repr=False)
    status: str = "ok"


# -- integrand sources ---------------------------------------------------------------

class Source:
    """What gets convolved: values plus non-smooth points.

    ``singular`` maps points to exponents ``a`` where the function behaves
    like ``|y - p|^a`` times a smooth factor.  ``doubling`` is an a-priori
    doubling constant for ``|values|`` if one is known.
    """

    name = "source"
    breakpoints: tuple = ()
    singular: dict = {}
    doubling: float | None = None

    def values(self, y):
        raise NotImplementedError


class WeightSource(Source):
    def __init__(self, spec):
        self.spec = spec
        self.name = spec.family
        self.breakpoints = tuple(spec.breakpoints())
        self.singular = dict(spec.singular_points())
        self.doubling = spec.claimed_doubling

    def values(self, y):
        return self.spec(y)


class PrimitiveSource(Source):
    """``f(y) = int_0^y w``; singular exponents shift by one."""

    def __init__(self, spec, tol=1e-13):
        self.spec = spec
        self.tol = tol
        self.name = spec.family + "_primitive"
        self.breakpoints = tuple(spec.breakpoints())
        self.singular = {p: a + 1.0 for p, a in spec.singular_points().items()}
        self.doubling = None

    def values(self, y):
        return self.spec.primitive(y, self.tol)


class FunctionSource(Source):
    def __init__(self, fn: Callable, breakpoints=(), singular=None, name="function"):
        self.fn = fn
        self.breakpoints = tuple(breakpoints)
        self.singular = dict(singular or {})
        self.name = name
        self.doubling = None

    def values(self, y):
        return np.asarray(self.fn(y), dtype=float) * np.ones_like(y)


def as_source(obj) -> Source:
    if isinstance(obj, Source):
        return obj
    if hasattr(obj, "singular_points") and hasattr(obj, "primitive"):
        return WeightSource(obj)
    if callable(obj):
        return FunctionSource(obj)
    raise TypeError(f"cannot convolve {type(obj).__name__}")


def _transform_power(a: float) -> float:
    """Integer exponent ``q`` for ``z = z_s + w v^q`` that regularizes ``|z - z_s|^a``."""
    if a >= 0 and abs(a - round(a)) < 1e-12:
        return 1.0
    for q in range(2, 9):
        c = q * (a + 1.0) - 1.0
        if c >= -1e-12 and abs(c - round(c)) < 1e-9:
            return float(q)
    return 8.0


# -- layout ---------------------------------------------------------------------

def shells_needed(kernels: Sequence[Kernel], budget: int) -> int:
    """Number of dyadic shells beyond which every kernel envelope is negligible."""
    need = 0
    for k in kernels:
        if math.isfinite(k.support):
            n = max(0, math.ceil(math.log2(k.support))) if k.support > 1 else 0
        else:
            A, b = k.envelope
            n = 2
            while n < budget and (1 + 4.0**n) * math.exp(-b * 4.0**n) >= 1e-30:
                n += 1
        need = max(need, n)
    return min(need, budget)


@dataclass
class _Panels:
    owner: np.ndarray
    z0: np.ndarray      # anchor of the map in z
    y0: np.ndarray      # matching anchor in y (exact at singular points)
    sgn: np.ndarray     # -1: z = z0 + w m(v); +1: z = z0 - w m(v)
    width: np.ndarray
    q: np.ndarray
    va: np.ndarray
    vb: np.ndarray
    shell: np.ndarray

    def take(self, idx):
        return _Panels(*(getattr(self, f)[idx] for f in self.__dataclass_fields__))

    @staticmethod
    def concat(parts):
        return _Panels(*(np.concatenate([getattr(p, f) for p in parts]) for f in _Panels.__dataclass_fields__))


def _initial_panels(src: Source, kernels, xs, Ls, n_shells):
    n = xs.size
    R = 2.0**n_shells
    layout = np.array([-(2.0**k) for k in range(n_shells, -1, -1)] + [2.0**k for k in range(n_shells + 1)])
    fixed = np.array(sorted({-R, R} | {j for k in kernels for j in k.jumps if -R < j < R}))
    removable = np.array([b for b in layout if b not in set(fixed.tolist())])
    bpts = np.array(sorted(set(src.breakpoints) | set(src.singular)), dtype=float)
    qpts = np.array([_transform_power(src.singular[p]) if p in src.singular else 1.0 for p in bpts])

    # source breakpoints mapped to z; outside (-R, R) they are dropped
    if bpts.size:
        zb = (xs[:, None] - bpts[None, :]) / Ls[:, None]
        zb = np.where((zb > -R) & (zb < R), zb, np.nan)
        # layout cuts too close to a breakpoint are dropped to avoid sliver panels
        pb = xs[:, None] - Ls[:, None] * removable[None, :]
        j = np.clip(np.searchsorted(bpts, pb), 1, bpts.size) if bpts.size > 1 else np.zeros(pb.shape, int)
        lo = np.abs(pb - bpts[np.maximum(j - 1, 0)])
        hi = np.abs(pb - bpts[np.minimum(j, bpts.size - 1)])
        near = np.minimum(lo, hi) / Ls[:, None] < 1e-2 * np.maximum(1.0, np.abs(removable))[None, :]
        lay = np.where(near, np.nan, removable[None, :])
    else:
        zb = np.empty((n, 0))
        lay = np.broadcast_to(removable, (n, removable.size))
    cuts = np.concatenate([np.broadcast_to(fixed, (n, fixed.size)), lay, zb], axis=1)
    tag = np.concatenate([np.full(fixed.size + removable.size, -1), np.arange(bpts.size)])
    order = np.argsort(cuts, axis=1, kind="stable")
    cuts = np.take_along_axis(cuts, order, axis=1)
    tag = tag[order]
    za, zbb = cuts[:, :-1], cuts[:, 1:]
    ta, tb = tag[:, :-1], tag[:, 1:]
    valid = np.isfinite(zbb) & (zbb > za)
    own = np.broadcast_to(np.arange(n)[:, None], za.shape)[valid]
    za, zbb, ta, tb = za[valid], zbb[valid], ta[valid], tb[valid]
    x, L = xs[own], Ls[own]
    qa = np.where(ta >= 0, qpts[np.maximum(ta, 0)] if bpts.size else 1.0, 1.0)
    qb = np.where(tb >= 0, qpts[np.maximum(tb, 0)] if bpts.size else 1.0, 1.0)
    ya = np.where(ta >= 0, bpts[np.maximum(ta, 0)] if bpts.size else 0.0, x - L * za)
    yb = np.where(tb >= 0, bpts[np.maximum(tb, 0)] if bpts.size else 0.0, x - L * zbb)
    mid = 0.5 * (za + zbb)
    with np.errstate(divide="ignore"):
        sh = np.where(np.abs(mid) < 1, 0, np.ceil(np.log2(np.maximum(np.abs(mid), 1.0)))).astype(np.int64)

    both = (qa > 1) & (qb > 1)
    right = (qb > 1) & ~both
    # left-anchored panels (plain or singular at za)
    la = ~right
    w_l = np.where(both, mid - za, zbb - za)
    parts = [
        (own[la], za[la], ya[la], np.full(la.sum(), -1.0), w_l[la], qa[la], sh[la]),
        (own[right], zbb[right], yb[right], np.ones(right.sum()), (zbb - za)[right], qb[right], sh[right]),
        (own[both], zbb[both], yb[both], np.ones(both.sum()), (zbb - mid)[both], qb[both], sh[both]),
    ]
    cols = [np.concatenate([p[c] for p in parts]) for c in range(7)]
    o = np.lexsort((cols[1], cols[3], cols[0]))
    cols = [c[o] for c in cols]
    m = cols[0].size
    return _Panels(owner=cols[0].astype(np.int64), z0=cols[1], y0=cols[2], sgn=cols[3], width=cols[4],
                   q=cols[5], va=np.zeros(m), vb=np.ones(m), shell=cols[6].astype(np.int64))


def _eval_panels(src: Source, kernels, P: _Panels, Ls):
    """Kronrod value, Gauss value and Kronrod |.|-mass per kernel, plus |src| mass."""
    mid = 0.5 * (P.va + P.vb)
    half = 0.5 * (P.vb - P.va)
    v = mid[:, None] + half[:, None] * NODES[None, :]
    q = P.q[:, None]
    mv = np.where(q == 1.0, v, v**q)
    jac = P.width[:, None] * np.where(q == 1.0, 1.0, q * v ** (q - 1.0)) * half[:, None]
    off = P.width[:, None] * mv
    z = P.z0[:, None] - P.sgn[:, None] * off
    y = P.y0[:, None] + P.sgn[:, None] * Ls[P.owner][:, None] * off
    f = src.values(y) * jac
    af = np.abs(f)
    nk = len(kernels)
    K = np.empty((nk, len(mid)))
    G = np.empty((nk, len(mid)))
    M = np.empty((nk, len(mid)))
    for j, ker in enumerate(kernels):
        g = ker(z)
        fg = f * g
        # row sums, not BLAS: gemv reduction order depends on the batch size
        K[j] = (fg * W_KRONROD).sum(axis=1)
        G[j] = (fg * W_GAUSS).sum(axis=1)
        M[j] = (af * np.abs(g) * W_KRONROD).sum(axis=1)
    mass = (af * W_KRONROD).sum(axis=1)
    return K, G, M, mass


def _sum_by_owner(owner, vals, n):
    if vals.ndim == 1:
        return np.bincount(owner, weights=vals, minlength=n)
    return np.stack([np.bincount(owner, weights=row, minlength=n) for row in vals])


def _tail_bound(kernels, n_shells, ball, rho):
    """Bound on the discarded tail beyond radius 2^n_shells, per kernel and owner."""
    out = np.zeros((len(kernels), ball.size))
    for j, ker in enumerate(kernels):
        if math.isfinite(ker.support) and ker.support <= 2.0**n_shells:
            continue
        total = np.zeros(ball.size)
        for m in range(n_shells + 1, n_shells + 40):
            env = float(ker.envelope_at(2.0 ** (m - 1)))
            if env == 0.0:
                break
            with np.errstate(over="ignore"):
                total = total + env * rho ** (m - n_shells) * ball
        out[j] = total
    return out


CHUNK = 4096
_BATCH_AXIS = {"values": 1, "errors": 1, "truncation": 1, "converged": 0, "tail_ok": 0,
               "panels": 0, "shell_sums": 1, "shell_ratios": 0}


@dataclass
class BatchResult:
    values: np.ndarray        # (n_kernels, n_points)
    errors: np.ndarray
    truncation: np.ndarray
    converged: np.ndarray     # (n_points,)
    tail_ok: np.ndarray
    panels: np.ndarray
    shell_sums: np.ndarray    # (n_kernels, n_points, n_shells + 1)
    shell_ratios: np.ndarray  # (n_points, n_shells)

    def result(self, j, i) -> QuadratureResult:
        status = "ok" if self.converged[i] else ("non_doubling" if not self.tail_ok[i] else "not_converged")
        return QuadratureResult(
            value=float(self.values[j, i]), error_estimate=float(self.errors[j, i]),
            panels_used=int(self.panels[i]), truncation_bound=float(self.truncation[j, i]),
            converged=bool(self.converged[i]),
            shell_contributions=tuple(float(v) for v in self.shell_sums[j, i]), status=status,
        )


def convolve_many(source, kernels: Sequence[Kernel], xs, Ls, cfg: QuadratureConfig | None = None) -> BatchResult:
    """Batch convolution of one source against several kernels at shared lengths.

    Convergence and panel decisions are made per point, and per-point sums
    run in a canonical panel order, so a point's result does not depend on
    the other points in the batch.
    """
    cfg = cfg or QuadratureConfig()
    src = as_source(source)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    Ls = np.broadcast_to(np.atleast_1d(np.asarray(Ls, dtype=float)), xs.shape).copy()
    n = xs.size
    if n > CHUNK:
        # results are per point, so chunking only bounds memory
        parts = [convolve_many(src, kernels, xs[i:i + CHUNK], Ls[i:i + CHUNK], cfg) for i in range(0, n, CHUNK)]
        return BatchResult(*(np.concatenate([getattr(p, f.name) for p in parts], axis=_BATCH_AXIS[f.name])
                             for f in fields(BatchResult)))
    n_shells = shells_needed(kernels, cfg.annulus_budget)
    P = _initial_panels(src, kernels, xs, Ls, n_shells)
    K, G, M, mass = _eval_panels(src, kernels, P, Ls)

    # ball masses of |src| give the measured shell growth
    nb = n_shells + 1
    shell_mass = np.bincount(P.owner * nb + P.shell, weights=mass, minlength=n * nb).reshape(n, nb)
    balls = np.cumsum(shell_mass, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(balls[:, :-1] > 0, balls[:, 1:] / balls[:, :-1], 1.0)
    if src.doubling is not None:
        rho = np.full(n, max(src.doubling, 2.0))
    else:
        rho = np.maximum(ratios.max(axis=1) if n_shells > 0 else np.ones(n), 2.0)
    trunc = _tail_bound(kernels, n_shells, balls[:, -1], rho)

    while True:
        val = _sum_by_owner(P.owner, K, n)
        err = _sum_by_owner(P.owner, np.abs(K - G), n)
        mk = _sum_by_owner(P.owner, M, n)
        target = np.maximum(np.maximum(cfg.abs_tol, cfg.rel_tol * np.abs(val)), 64 * _EPS * mk)
        chan_ok = err + trunc <= target
        tail_ok = np.all(trunc <= target, axis=0)
        converged = np.all(chan_ok, axis=0)
        counts = np.bincount(P.owner, minlength=n)
        active = ~converged & tail_ok & (counts < cfg.max_panels)
        if not active.any():
            break
        share = (target / np.maximum(counts, 1))[:, P.owner]
        pe = np.abs(K - G)
        split = active[P.owner] & np.any((pe > 0.5 * share) & ~chan_ok[:, P.owner], axis=0)
        # respect the per-point panel budget
        sidx = np.flatnonzero(split)
        if sidx.size:
            owners_s = P.owner[sidx]
            starts = np.searchsorted(owners_s, np.arange(n))
            rank = np.arange(sidx.size) - starts[owners_s]
            split = np.zeros_like(split)
            split[sidx[rank < (cfg.max_panels - counts)[owners_s]]] = True
        if not split.any():
            break
        sp = P.take(split)
        vm = 0.5 * (sp.va + sp.vb)
        kids = _Panels.concat([replace(sp, vb=vm), replace(sp, va=vm)])
        Kk, Gk, Mk, mk_ = _eval_panels(src, kernels, kids, Ls)
        keep = ~split
        P = _Panels.concat([P.take(keep), kids])
        K = np.concatenate([K[:, keep], Kk], axis=1)
        G = np.concatenate([G[:, keep], Gk], axis=1)
        M = np.concatenate([M[:, keep], Mk], axis=1)
        mass = np.concatenate([mass[keep], mk_])
        order = np.lexsort((P.va, P.z0, P.sgn, P.owner))
        P = P.take(order)
        K, G, M, mass = K[:, order], G[:, order], M[:, order], mass[order]

    shell_sums = np.stack([
        np.bincount(P.owner * nb + P.shell, weights=K[j], minlength=n * nb).reshape(n, nb)
        for j in range(len(kernels))
    ])
    return BatchResult(val, err, trunc, converged, tail_ok, counts, shell_sums, ratios)


def convolve_point(spec, kernel: Kernel, scale_kind: ScaleKind, scale: float, x: float,
                   cfg: QuadratureConfig | None = None, strict: bool = False) -> QuadratureResult:
    """``(w * gamma_scale)(x)`` with a certified error.

    Raises ``NonDoublingSuspected`` if the tail bound cannot be closed.  A
    result that missed the tolerance within the panel budget comes back with
    ``converged=False``; with ``strict`` it raises ``ToleranceNotMet`` instead.
    """
    cfg = cfg or QuadratureConfig()
    L = scale_kind.length(scale)
    if cfg.oracle_mode:
        return QuadratureResult(oracle_convolve(spec, kernel, float(x), L), 0.0, 0, 0.0, True, (), "oracle")
    b = convolve_many(spec, [kernel], [x], [L], cfg)
    res = b.result(0, 0)
    if not b.tail_ok[0]:
        raise NonDoublingSuspected(
            f"tail bound {res.truncation_bound:.3e} does not close; shell ratios {np.round(b.shell_ratios[0], 3)}",
            shell_ratios=b.shell_ratios[0],
        )
    if strict and not res.converged:
        raise ToleranceNotMet(f"tolerance not met with {res.panels_used} panels", res)
    return res


def convolve_grid(spec, kernel: Kernel, scale_kind: ScaleKind, points, cfg: QuadratureConfig | None = None):
    """Elementwise ``convolve_point`` over ``(x, scale)`` pairs.

    Failures are recorded per point in ``status`` instead of being raised.
    """
    cfg = cfg or QuadratureConfig()
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.size == 0:
        return []
    Ls = np.atleast_1d(scale_kind.length(pts[:, 1]))
    if cfg.oracle_mode:
        return [QuadratureResult(oracle_convolve(spec, kernel, x, L), 0.0, 0, 0.0, True, (), "oracle")
                for x, L in zip(pts[:, 0], Ls)]
    b = convolve_many(spec, [kernel], pts[:, 0], Ls, cfg)
    return [b.result(0, i) for i in range(pts.shape[0])]


# -- independent dense oracle ---------------------------------------------------------

def oracle_convolve(spec, kernel: Kernel, x: float, L: float, n_nodes: int = 2_000_000,
                    half_width: float = 40.0) -> float:
    """Naive fixed-grid midpoint sum over ``|z| <= half_width``.

    Segments are cut at kernel jumps and source breakpoints so that no node
    sits on a discontinuity; a segment ending at a power singularity is
    summed in ``v`` with ``z = z_s + w v^2``.  Used only as a cross-check.
    """
    src = as_source(spec)
    R = min(half_width, kernel.support)
    cuts = {-R, R} | {j for j in kernel.jumps if -R < j < R}
    special = {}
    for p in set(src.breakpoints) | set(src.singular):
        z = (x - p) / L
        if -R < z < R:
            cuts.add(z)
            special[z] = p
    cuts = sorted(cuts)
    total_len = cuts[-1] - cuts[0]
    acc = 0.0
    for za, zb in zip(cuts[:-1], cuts[1:]):
        m = max(2000, int(n_nodes * (zb - za) / total_len))
        sa = special.get(za) in src.singular
        sb = special.get(zb) in src.singular
        if sa and sb:
            zm = 0.5 * (za + zb)
            pieces = [(za, zm, "left"), (zm, zb, "right")]
        elif sa or sb:
            pieces = [(za, zb, "left" if sa else "right")]
        else:
            pieces = [(za, zb, None)]
        for a, b, side in pieces:
            v = (np.arange(m) + 0.5) / m
            w = b - a
            if side is None:
                z = a + w * v
                y = special[a] - L * w * v if a in special else x - L * z
                jac = w
            else:
                p = special[a] if side == "left" else special[b]
                off = w * v * v
                jac = 2.0 * w * v
                z, y = (a + off, p - L * off) if side == "left" else (b - off, p + L * off)
            acc += float(np.sum(src.values(y) * kernel(z) * jac)) / m
    return acc


# -- plain 1D adaptive integration -------------------------------------------------------

@dataclass
class Integral:
    value: float
    error_estimate: float
    panels_used: int
    converged: bool


def integrate(fn, a: float, b: float, points=(), rel_tol: float = 1e-10, abs_tol: float = 1e-14,
              max_panels: int = 20000, singular=None) -> Integral:
    """Adaptive Gauss-Kronrod on a finite ``[a, b]``.

    ``points`` are interior breakpoints.  ``singular`` maps breakpoints to an
    exponent (e.g. ``0`` for a log singularity); panels touching them use the
    ``v^q`` substitution.
    """
    if not b > a:
        if a == b:
            return Integral(0.0, 0.0, 0, True)
        r = integrate(fn, b, a, points, rel_tol, abs_tol, max_panels, singular)
        return Integral(-r.value, r.error_estimate, r.panels_used, r.converged)
    singular = dict(singular or {})
    cuts = sorted({a, b} | {p for p in points if a < p < b} | {p for p in singular if a <= p <= b})
    panels = []  # (z0, sgn, width, q, va, vb)
    for za, zb in zip(cuts[:-1], cuts[1:]):
        qa = 2.0 if za in singular else 1.0
        qb = 2.0 if zb in singular else 1.0
        if qa > 1 and qb > 1:
            zm = 0.5 * (za + zb)
            panels += [(za, -1.0, zm - za, qa, 0.0, 1.0), (zb, 1.0, zb - zm, qb, 0.0, 1.0)]
        elif qb > 1:
            panels.append((zb, 1.0, zb - za, qb, 0.0, 1.0))
        else:
            panels.append((za, -1.0, zb - za, qa, 0.0, 1.0))
    P = np.array(panels, dtype=float)

    def ev(P):
        z0, sgn, w, q, va, vb = P.T
        mid, half = 0.5 * (va + vb), 0.5 * (vb - va)
        v = mid[:, None] + half[:, None] * NODES[None, :]
        qq = q[:, None]
        mv = np.where(qq == 1.0, v, v**qq)
        jac = w[:, None] * np.where(qq == 1.0, 1.0, qq * v ** (qq - 1.0)) * half[:, None]
        x = z0[:, None] - sgn[:, None] * w[:, None] * mv
        f = np.asarray(fn(x), dtype=float) * np.ones_like(x) * jac
        return f @ W_KRONROD, f @ W_GAUSS

    Kv, Gv = ev(P)
    while True:
        total = Kv.sum()
        errs = np.abs(Kv - Gv)
        tol = max(abs_tol, rel_tol * abs(total), 64 * _EPS * np.abs(Kv).sum())
        if errs.sum() <= tol or len(P) >= max_panels:
            break
        split = errs > 0.5 * tol / len(P)
        if not split.any():
            split = errs >= errs.max()
        sp = P[split]
        vm = 0.5 * (sp[:, 4] + sp[:, 5])
        L_, R_ = sp.copy(), sp.copy()
        L_[:, 5] = vm
        R_[:, 4] = vm
        kids = np.concatenate([L_, R_])
        Kk, Gk = ev(kids)
        P = np.concatenate([P[~split], kids])
        Kv = np.concatenate([Kv[~split], Kk])
        Gv = np.concatenate([Gv[~split], Gk])
    err = float(np.abs(Kv - Gv).sum())
    return Integral(float(Kv.sum()), err, len(P), err <= max(abs_tol, rel_tol * abs(Kv.sum()), 64 * _EPS * np.abs(Kv).sum()))
