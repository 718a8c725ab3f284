"""Carleson box energies of ``|mu|^2 dx ds / s`` and their small-scale behaviour.

A box over ``I(x0, t) = (x0 - t, x0 + t)`` carries

    A     = (1/t) int_0^t int_I |mu(x, s)|^2 dx ds/s
    thm3  = (1/t) int_0^{t^2} int_I (u'/u)^2 dx dsigma            = (2/t) int int (V_x/U_x)^2 dx ds/s
    thm5  = (1/t) int_0^{t^2} int_I sigma (u''/u)^2 dx dsigma     = (2/t) int int (s^2 u''/u)^2 dx ds/s

where ``u`` is evaluated at ``sigma = s^2``.  The sweep runs on
``[s_min, t]``; below ``s_min`` each x-integrated profile is extended by a
power law fitted on the smallest decade.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, NonQuasiconformalSample
from .extension import check_quasiconformal, derivative_arrays, heat_arrays
from .parallel import ordered_map
from .quadrature import QuadratureConfig

log = logging.getLogger(__name__)

S_MIN_FACTOR = 1e-4
# squared ratios below this are roundoff (about (1e3 eps)^2)
_NOISE = 1e-25

_GL4 = np.polynomial.legendre.leggauss(4)
_GL8 = np.polynomial.legendre.leggauss(8)


@dataclass
class CarlesonBox:
    x0: float
    t: float
    A: float
    thm3_energy: float
    thm5_energy: float
    quad_error: float
    samples: int
    tails: tuple = (0.0, 0.0, 0.0)
    status: str = "ok"


@dataclass
class CarlesonReport:
    boxes: list
    sup_estimate: float
    refinement_history: list = field(default_factory=list)
    vanishing_profile: list = field(default_factory=list)

    def sup_of(self, attr: str) -> float:
        vals = [getattr(b, attr) for b in self.boxes if b.status == "ok"]
        return float(max(vals)) if vals else math.nan

    def to_dict(self):
        return {
            "sup_estimate": self.sup_estimate,
            "refinement_history": [list(h) for h in self.refinement_history],
            "vanishing_profile": [list(v) for v in self.vanishing_profile],
            "boxes": [asdict(b) for b in self.boxes],
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def to_csv(self, path):
        write_boxes_csv(self.boxes, path)


def write_boxes_csv(boxes, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x0", "t", "A", "thm3", "thm5", "err"])
        for b in boxes:
            w.writerow([format(v, ".17g") for v in (b.x0, b.t, b.A, b.thm3_energy, b.thm5_energy, b.quad_error)])


# -- node construction -------------------------------------------------------

def _gauss_panels(cuts, rule):
    cuts = np.asarray(cuts, dtype=float)
    a, b = cuts[:-1, None], cuts[1:, None]
    z, w = rule
    return (0.5 * (a + b) + 0.5 * (b - a) * z).ravel(), (0.5 * (b - a) * w).ravel()


def log_s_nodes(s_min: float, s_max: float, ns: int):
    """Composite 4-point Gauss rule in ``log s``; weights are for ``ds/s``."""
    n_panels = max(2, ns // 4)
    lo, hi = math.log(s_min), math.log(s_max)
    ls, w = _gauss_panels(np.linspace(lo, hi, n_panels + 1), _GL4)
    return np.exp(ls), w


def x_nodes(spec, x0: float, t: float, s: float, nx: int):
    """8-point Gauss panels on ``(x0 - t, x0 + t)``, graded around feature points.

    Near a feature point the extension varies on the length ``s``, so cuts
    are added at ``p +- s 2^j`` up to the base panel width.
    """
    a, b = x0 - t, x0 + t
    n_base = max(1, nx // 8)
    fl = spec.feature_length()
    if math.isfinite(fl):
        n_base = max(n_base, math.ceil(2 * t / fl))
    cuts = [np.linspace(a, b, n_base + 1)]
    h = 2 * t / n_base
    for p in spec.feature_points():
        if p < a - h or p > b + h:
            continue
        top = max(0, math.ceil(math.log2(h / s))) if h > s else 0
        offs = s * 2.0 ** np.arange(-3, top + 1)
        cuts.append(np.concatenate([[p], p - offs, p + offs]))
    c = np.unique(np.clip(np.concatenate(cuts), a, b))
    c = c[np.concatenate([[True], np.diff(c) > 1e-14 * max(1.0, abs(b))])]
    return _gauss_panels(c, _GL8)


def _sweep_nodes(spec, x0, t, s_lo, s_hi, inner_grid, sigma_space=False):
    nx, ns = inner_grid
    if nx < 8 or ns < 8:
        raise DomainError("inner grid sizes must be >= 8")
    if sigma_space:
        sig, ws = log_s_nodes(s_lo**2, s_hi**2, ns)
        s_nodes = np.sqrt(sig)
    else:
        s_nodes, ws = log_s_nodes(s_lo, s_hi, ns)
    X, WX, IDX = [], [], []
    for k, s in enumerate(s_nodes):
        xk, wk = x_nodes(spec, x0, t, s, nx)
        X.append(xk)
        WX.append(wk)
        IDX.append(np.full(xk.size, k))
    return s_nodes, ws, np.concatenate(X), np.concatenate(WX), np.concatenate(IDX)


def power_tail(scales, profile, lo_scale, floor: float = 0.0):
    """Mass of ``int_0^{lo} g(s) ds/s`` assuming ``g ~ c s^p`` on the smallest decade.

    Returns ``(tail, p)``.  A profile at or below ``floor`` on that decade is
    roundoff and contributes nothing; one that does not decay gives ``inf``.
    """
    sel = (scales <= 10.0 * lo_scale) & (profile > 0)
    if not np.any(profile[scales <= 10.0 * lo_scale] > floor):
        return 0.0, math.inf
    if sel.sum() < 2:
        sel = np.argsort(scales)[:2]
    ls, lg = np.log(scales[sel]), np.log(profile[sel])
    p, c = np.polyfit(ls, lg, 1)
    if not p > 0:
        return math.inf, float(p)
    return float(math.exp(c + p * math.log(lo_scale)) / p), float(p)


def _profile(vals, wx, idx, n):
    return np.bincount(idx, weights=wx * vals, minlength=n)


# -- energies ------------------------------------------------------------------

def box_energy(spec, x0: float, t: float, cfg: QuadratureConfig | None = None,
               inner_grid=(32, 32), s_min_factor: float = S_MIN_FACTOR) -> CarlesonBox:
    """Box energy ``A(x0, t)`` with the ``thm3`` and ``thm5`` heat-flow energies from the same sweep."""
    if not t > 0:
        raise DomainError("t must be positive")
    cfg = cfg or QuadratureConfig()
    s_min = s_min_factor * t
    s_nodes, ws, X, WX, IDX = _sweep_nodes(spec, x0, t, s_min, t, inner_grid)
    S = s_nodes[IDX]
    d = derivative_arrays(spec, X, S, cfg)
    check_quasiconformal(d, X, S)
    m2 = d.abs_mu2
    r3 = (d.V_x / d.U_x) ** 2
    r5 = (d.u_xx * S**2 / d.U_x) ** 2
    ns = s_nodes.size
    floor = 2 * t * _NOISE
    out, tails = [], []
    for vals, scale in ((m2, 1.0), (r3, 2.0), (r5, 2.0)):
        g = _profile(vals, WX, IDX, ns)
        tail, _ = power_tail(s_nodes, g, s_min, floor)
        out.append(scale / t * (ws @ g))
        tails.append(scale / t * tail)
    # first-order propagation of the pointwise |mu| budget
    mu_err = 2.0 * np.sqrt(m2) * np.minimum(d.mu_error, 1.0)
    err = (ws @ _profile(mu_err, WX, IDX, ns)) / t + tails[0]
    status = "ok" if np.all(d.converged) and math.isfinite(tails[0]) else "unconverged"
    return CarlesonBox(
        x0=float(x0), t=float(t), A=float(out[0] + tails[0]), thm3_energy=float(out[1] + tails[1]),
        thm5_energy=float(out[2] + tails[2]), quad_error=float(err), samples=int(X.size),
        tails=tuple(float(v) for v in tails), status=status,
    )


def _sigma_energy(spec, x0, t, cfg, inner_grid, which, s_min_factor=S_MIN_FACTOR):
    """``(1/t) int_0^{t^2} int_I e(x, sigma) dx dsigma`` from time-scale heat values."""
    if not t > 0:
        raise DomainError("t must be positive")
    cfg = cfg or QuadratureConfig()
    s_min = s_min_factor * t
    s_nodes, wl, X, WX, IDX = _sweep_nodes(spec, x0, t, s_min, t, inner_grid, sigma_space=True)
    sig = s_nodes**2
    SIG = sig[IDX]
    (u, u1, u2), _ = heat_arrays(spec, X, SIG, cfg)
    if which == 3:
        e = (u1 / u) ** 2
    else:
        e = SIG * (u2 / u) ** 2
    # d sigma = sigma d(log sigma)
    g = sig * _profile(e, WX, IDX, sig.size)
    tail, _ = power_tail(sig, g, s_min**2, 2 * t * _NOISE)
    return float((wl @ g + tail) / t)


def thm3_energy(spec, x0: float, t: float, cfg: QuadratureConfig | None = None, inner_grid=(32, 32)) -> float:
    """``(1/t) int_0^{t^2} int_{|x-x0|<t} (u'/u)^2 dx dsigma`` in the heat variable."""
    return _sigma_energy(spec, x0, t, cfg, inner_grid, 3)


def thm5_energy(spec, x0: float, t: float, cfg: QuadratureConfig | None = None, inner_grid=(32, 32)) -> float:
    """``(1/t) int_0^{t^2} int_{|x-x0|<t} sigma (u''/u)^2 dx dsigma``."""
    return _sigma_energy(spec, x0, t, cfg, inner_grid, 5)


def _safe_box(spec, x0, t, cfg, inner_grid):
    try:
        return box_energy(spec, x0, t, cfg, inner_grid)
    except (NonQuasiconformalSample, ArithmeticError, RuntimeError) as exc:
        log.warning("box (%g, %g) failed: %s", x0, t, exc)
        return CarlesonBox(float(x0), float(t), math.nan, math.nan, math.nan, math.inf, 0,
                           status=f"failed: {type(exc).__name__}")


# -- scans ----------------------------------------------------------------------

_FINE = 12  # box coordinates live on a fixed dyadic lattice so refinements reuse boxes


def carleson_scan(spec, region, box_grid, cfg: QuadratureConfig | None = None, inner_grid=(32, 32),
                  max_rounds: int = 3, rel_change: float = 0.05, watch=("A", "thm3_energy", "thm5_energy"),
                  workers: int | None = None) -> CarlesonReport:
    """Box energies over an x0-uniform, t-log-uniform grid, doubled until the sups settle.

    Each round maps ``n -> 2n - 1`` per axis so earlier boxes are reused and
    the recorded sups cannot decrease.  ``refinement_history`` holds
    ``(n_x0, n_t, sup A, sup thm3, sup thm5)`` per round.
    """
    (xa, xb), (ta, tb) = region
    nx0, nt = box_grid
    if nx0 < 4 or nt < 4:
        raise DomainError("box grid must be at least 4 x 4")
    if not (xa < xb and 0 < ta < tb):
        raise DomainError("region must be bounded with 0 < t_min < t_max")
    cfg = cfg or QuadratureConfig()
    cache: dict = {}
    span_i, span_j = (nx0 - 1) << _FINE, (nt - 1) << _FINE
    history = []

    def coords(key):
        i, j = key
        x = xa + (xb - xa) * i / span_i
        t = math.exp(math.log(ta) + (math.log(tb) - math.log(ta)) * j / span_j)
        return x, t

    boxes = []
    for level in range(max_rounds):
        step = 1 << (_FINE - level)
        ni, nj = ((nx0 - 1) << level) + 1, ((nt - 1) << level) + 1
        keys = [(i * step, j * step) for j in range(nj) for i in range(ni)]
        todo = [k for k in keys if k not in cache]
        for k, b in zip(todo, ordered_map(lambda k: _safe_box(spec, *coords(k), cfg, inner_grid), todo, workers)):
            cache[k] = b
        boxes = [cache[k] for k in keys]
        rep = CarlesonReport(boxes, 0.0)
        sups = tuple(rep.sup_of(a) for a in ("A", "thm3_energy", "thm5_energy"))
        history.append((ni, nj) + sups)
        log.info("scan round %d: %dx%d boxes, sups %s", level, ni, nj, sups)
        if len(history) > 1:
            prev = history[-2][2:]
            names = ("A", "thm3_energy", "thm5_energy")
            settled = all(
                abs(now - old) <= rel_change * max(abs(old), 1e-300) or now == old
                for name, now, old in zip(names, sups, prev) if name in watch
            )
            if settled:
                break
    return CarlesonReport(boxes, CarlesonReport(boxes, 0.0).sup_of("A"), history)


def vanishing_profile(spec, x0_grid, t_decades, cfg: QuadratureConfig | None = None, inner_grid=(32, 32),
                      workers: int | None = None):
    """``[(t, sup over x0 of A(x0, t))]`` with the boxes behind each row."""
    ts = [float(t) for t in t_decades]
    if any(b >= a for a, b in zip(ts, ts[1:])):
        raise DomainError("t_decades must be strictly decreasing")
    if any(not t > 0 for t in ts):
        raise DomainError("t_decades must be positive")
    x0s = [float(x) for x in np.atleast_1d(x0_grid)]
    if not x0s:
        raise DomainError("empty x0 grid")
    jobs = [(x0, t) for t in ts for x0 in x0s]
    boxes = ordered_map(lambda j: _safe_box(spec, j[0], j[1], cfg, inner_grid), jobs, workers)
    prof = []
    for k, t in enumerate(ts):
        row = boxes[k * len(x0s):(k + 1) * len(x0s)]
        prof.append((t, max(b.A for b in row)))
    return prof, boxes


def brute_force_box(spec, x0: float, t: float, n: int = 512, cfg: QuadratureConfig | None = None,
                    s_min_factor: float = S_MIN_FACTOR) -> float:
    """Double midpoint Riemann sum of ``A`` on an ``n x n`` grid, ``s`` log-spaced.

    No grading, no tail; an independent check on :func:`box_energy`.
    """
    cfg = cfg or QuadratureConfig()
    lo, hi = math.log(s_min_factor * t), math.log(t)
    ls = lo + (np.arange(n) + 0.5) * (hi - lo) / n
    xs = x0 - t + (np.arange(n) + 0.5) * 2 * t / n
    X, LS = np.meshgrid(xs, ls)
    d = derivative_arrays(spec, X.ravel(), np.exp(LS.ravel()), cfg)
    return float(d.abs_mu2.sum() * (2 * t / n) * ((hi - lo) / n) / t)
