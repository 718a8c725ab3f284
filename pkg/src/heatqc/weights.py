"""Doubling weights on the line, their primitives and a classified catalog."""
from __future__ import annotations

import enum
import json
import math
import threading
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import DomainError, SingularityError

_GL20_X, _GL20_W = np.polynomial.legendre.leggauss(20)


class Tri(str, enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Classification:
    is_ainfty: Tri = Tri.UNKNOWN
    log_in_bmo: Tri = Tri.UNKNOWN
    log_in_vmo: Tri = Tri.UNKNOWN

    def to_dict(self):
        return {k: v.value for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: Tri(v) for k, v in (d or {}).items()})


@dataclass(frozen=True)
class WeightSpec:
    """Base class.  Subclasses implement ``_eval`` and optionally ``_primitive``."""

    claimed_doubling: float | None = field(default=None, kw_only=True)
    classification: Classification = field(default_factory=Classification, kw_only=True)

    family = "abstract"

    # -- evaluation ---------------------------------------------------------
    def __call__(self, y):
        return self._eval(np.asarray(y, dtype=float))

    def log(self, y):
        return np.log(self(y))

    def params(self) -> dict:
        raise NotImplementedError

    # Points where the weight is not smooth, and power-type singularities
    # {point: exponent} so quadrature can split and regularize panels there.
    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def singular_points(self) -> dict[float, float]:
        return {}

    def feature_points(self) -> tuple[float, ...]:
        """Points near which the extension varies on every scale."""
        return ()

    def feature_length(self) -> float:
        """Shortest length on which the weight itself varies."""
        return math.inf

    def primitive(self, x, tol: float = 1e-12):
        return self._primitive(np.asarray(x, dtype=float), tol)

    def log_mean(self, a: float, b: float) -> float | None:
        """Closed-form mean of ``log w`` over ``[a, b]`` when available."""
        return None


@dataclass(frozen=True)
class Constant(WeightSpec):
    c: float = 1.0
    family = "constant"

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError("Constant weight needs c > 0")

    def _eval(self, y):
        return np.full_like(y, self.c, dtype=float)

    def _primitive(self, x, tol):
        return self.c * x

    def params(self):
        return {"c": self.c}

    def log_mean(self, a, b):
        return math.log(self.c)


def _xlogx_minus_x(x):
    ax = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ax > 0, x * np.log(np.where(ax > 0, ax, 1.0)) - x, 0.0)


@dataclass(frozen=True)
class Power(WeightSpec):
    """``|x|^a`` with ``a > -1``."""

    a: float = 0.5
    family = "power"

    def __post_init__(self):
        if not self.a > -1:
            raise DomainError("Power weight needs a > -1")

    def _eval(self, y):
        if self.a < 0 and np.any(y == 0):
            raise SingularityError("Power weight with a < 0 is singular at 0")
        return np.abs(y) ** self.a

    def _primitive(self, x, tol):
        b = self.a + 1.0
        return np.sign(x) * np.abs(x) ** b / b

    def params(self):
        return {"a": self.a}

    def breakpoints(self):
        return () if self.a == 0 else (0.0,)

    def singular_points(self):
        return {} if self.a == 0 else {0.0: self.a}

    def feature_points(self):
        return self.breakpoints()

    def log_mean(self, a, b):
        if b <= a:
            raise DomainError("empty interval")
        return self.a * float(_xlogx_minus_x(b) - _xlogx_minus_x(a)) / (b - a)


class PrimitiveCache:
    """Append-only table of ``f`` at equispaced anchors ``j*h``.

    Cell integrals come from adaptive quadrature; partial cells use a
    20-point Gauss-Legendre rule whose adequacy is checked against the
    adaptive value on every cell that is added.
    """

    def __init__(self, weight, h: float, tol: float = 1e-13):
        self.weight = weight
        self.h = float(h)
        self.tol = tol
        self._lo = 0  # anchor index range [lo, hi]
        self._cum = np.zeros(1)  # cum[j - lo] = f(j h)
        self._lock = threading.Lock()

    @property
    def anchors(self):
        return self.h * np.arange(self._lo, self._lo + self._cum.size)

    @property
    def cumulative(self):
        return self._cum.copy()

    def _cells(self, j0, j1):
        """Integrals over cells [j h, (j+1) h] for j in [j0, j1)."""
        from .quadrature import integrate

        out = np.empty(j1 - j0)
        for i, j in enumerate(range(j0, j1)):
            a, b = j * self.h, (j + 1) * self.h
            r = integrate(self.weight, a, b, rel_tol=1e-14, abs_tol=self.tol * 1e-2)
            gl = self._gl(np.array([a]), np.array([b]))[0]
            if abs(gl - r.value) > self.tol:
                raise RuntimeError(f"partial-cell rule inadequate on [{a}, {b}]")
            out[i] = r.value
        return out

    def _gl(self, a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid[:, None] + half[:, None] * _GL20_X[None, :]
        return half * (self.weight(nodes) * _GL20_W).sum(axis=1)

    def _ensure(self, jmin, jmax):
        with self._lock:
            lo, hi = self._lo, self._lo + self._cum.size - 1
            if jmax > hi:
                cells = self._cells(hi, jmax)
                self._cum = np.concatenate([self._cum, self._cum[-1] + np.cumsum(cells)])
            if jmin < lo:
                cells = self._cells(jmin, lo)
                self._cum = np.concatenate([self._cum[0] - np.cumsum(cells[::-1])[::-1], self._cum])
                self._lo = jmin

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        if flat.size == 0:
            return x.copy()
        j = np.floor(flat / self.h).astype(np.int64)
        self._ensure(int(j.min()), int(j.max()) + 1)
        a = j * self.h
        base = self._cum[j - self._lo]
        return (base + self._gl(a, flat)).reshape(x.shape)


_CACHES: dict = {}
_CACHES_LOCK = threading.Lock()


def _cache_for(weight, h, tol):
    key = (weight, h)
    with _CACHES_LOCK:
        c = _CACHES.get(key)
        if c is None:
            c = _CACHES[key] = PrimitiveCache(weight, h, tol)
    return c


@dataclass(frozen=True)
class ExpSine(WeightSpec):
    """``exp(eps * sin(k x))``; its log is Lipschitz, hence in VMO."""

    eps: float = 1.0
    k: float = 1.0
    family = "expsine"

    def __post_init__(self):
        if not (self.eps >= 0 and self.k > 0):
            raise DomainError("ExpSine needs eps >= 0 and k > 0")

    def _eval(self, y):
        return np.exp(self.eps * np.sin(self.k * y))

    def log(self, y):
        return self.eps * np.sin(self.k * np.asarray(y, dtype=float))

    def _primitive(self, x, tol):
        return _cache_for(self, math.pi / (4.0 * self.k), tol)(x)

    def params(self):
        return {"eps": self.eps, "k": self.k}

    def feature_length(self):
        return 1.0 / self.k


@dataclass(frozen=True)
class DyadicStep(WeightSpec):
    """Piecewise constant: ``value`` on each listed interval, 1 elsewhere."""

    levels: tuple = ()
    family = "dyadic_step"

    def __post_init__(self):
        lv = tuple(sorted(((float(a), float(b)), float(v)) for (a, b), v in self.levels))
        object.__setattr__(self, "levels", lv)
        for (a, b), v in lv:
            if not (a < b and v > 0):
                raise DomainError(f"bad level ({a}, {b}) -> {v}")
        for ((_, b0), _), ((a1, _), _) in zip(lv, lv[1:]):
            if a1 < b0:
                raise DomainError("DyadicStep intervals overlap")

    def _eval(self, y):
        out = np.ones_like(y, dtype=float)
        for (a, b), v in self.levels:
            out = np.where((y >= a) & (y < b), v, out)
        return out

    def _primitive(self, x, tol):
        out = x.astype(float).copy()
        for (a, b), v in self.levels:
            # signed length of [0, x] intersected with [a, b]
            lo = np.clip(np.minimum(0.0, x), a, b)
            hi = np.clip(np.maximum(0.0, x), a, b)
            out += (v - 1.0) * np.sign(x) * (hi - lo)
        return out

    def params(self):
        return {"levels": [[[a, b], v] for (a, b), v in self.levels]}

    def breakpoints(self):
        pts = sorted({p for (a, b), _ in self.levels for p in (a, b) if math.isfinite(p)})
        return tuple(pts)

    def feature_points(self):
        return self.breakpoints()

    def log_mean(self, a, b):
        if b <= a:
            raise DomainError("empty interval")
        total = 0.0
        for (lo, hi), v in self.levels:
            total += math.log(v) * max(0.0, min(b, hi) - max(a, lo))
        return total / (b - a)


@dataclass(frozen=True)
class Sampled(WeightSpec):
    """Linear interpolation of tabulated positive values, constant beyond the table."""

    xs: tuple = ()
    ws: tuple = ()
    family = "sampled"

    def __post_init__(self):
        xs = tuple(float(v) for v in self.xs)
        ws = tuple(float(v) for v in self.ws)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ws", ws)
        if len(xs) < 2 or len(xs) != len(ws):
            raise DomainError("Sampled needs at least two (x, w) pairs")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise DomainError("Sampled nodes must be strictly increasing")
        if any(not w > 0 for w in ws):
            raise DomainError("Sampled values must be positive")

    def _eval(self, y):
        return np.interp(y, self.xs, self.ws)

    def _cum(self):
        xs, ws = np.array(self.xs), np.array(self.ws)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (ws[1:] + ws[:-1]) * np.diff(xs))])
        return xs, ws, cum

    def _F(self, x):
        # antiderivative anchored at xs[0]
        xs, ws, cum = self._cum()
        below = (x - xs[0]) * ws[0]
        above = cum[-1] + (x - xs[-1]) * ws[-1]
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
        dx = x - xs[i]
        slope = (ws[i + 1] - ws[i]) / (xs[i + 1] - xs[i])
        inside = cum[i] + ws[i] * dx + 0.5 * slope * dx * dx
        return np.where(x < xs[0], below, np.where(x > xs[-1], above, inside))

    def _primitive(self, x, tol):
        return self._F(x) - self._F(np.array(0.0))

    def params(self):
        return {"xs": list(self.xs), "ws": list(self.ws)}

    def breakpoints(self):
        return self.xs

    def feature_length(self):
        return float(np.min(np.diff(self.xs)))


FAMILIES = {cls.family: cls for cls in (Constant, Power, ExpSine, DyadicStep, Sampled)}


# -- module-level operations ---------------------------------------------------

def weight_eval(spec: WeightSpec, x):
    out = spec(x)
    return float(out) if np.ndim(out) == 0 else out


def weight_primitive(spec: WeightSpec, x, tol: float = 1e-12):
    """``f(x) = int_0^x w``, closed form where available."""
    if not tol > 0:
        raise DomainError("tol must be positive")
    out = spec.primitive(x, tol)
    return float(out) if np.ndim(out) == 0 else out


def interval_mass(spec: WeightSpec, a, b, tol: float = 1e-12):
    return np.asarray(spec.primitive(b, tol)) - np.asarray(spec.primitive(a, tol))


def doubling_estimate(spec: WeightSpec, centers, scales) -> float:
    """Largest sampled ratio ``w(2I) / w(I)``: a lower bound for the doubling constant."""
    c = np.asarray(centers, dtype=float).ravel()
    r = np.asarray(scales, dtype=float).ravel()
    if c.size == 0 or r.size == 0:
        raise DomainError("empty grid")
    if np.any(r <= 0):
        raise DomainError("scales must be positive")
    C, R = np.meshgrid(c, r, indexing="ij")
    inner = interval_mass(spec, C - R, C + R)
    outer = interval_mass(spec, C - 2 * R, C + 2 * R)
    return float(np.max(outer / inner))


# -- serialization ---------------------------------------------------------------

def to_json(spec: WeightSpec) -> dict:
    doc = {"family": spec.family, "params": spec.params(), "classification": spec.classification.to_dict()}
    if spec.claimed_doubling is not None:
        doc["claimed_doubling"] = spec.claimed_doubling
    return doc


def from_json(doc: dict) -> WeightSpec:
    try:
        cls = FAMILIES[doc["family"]]
    except KeyError:
        raise DomainError(f"unknown weight family {doc.get('family')!r}") from None
    params = dict(doc.get("params", {}))
    if cls is DyadicStep:
        params["levels"] = tuple(((float(a), float(b)), float(v)) for (a, b), v in params.get("levels", []))
    if cls is Sampled:
        params = {"xs": tuple(params["xs"]), "ws": tuple(params["ws"])}
    return cls(
        **params,
        claimed_doubling=doc.get("claimed_doubling"),
        classification=Classification.from_dict(doc.get("classification")),
    )


# -- catalog --------------------------------------------------------------------

Y, N = Tri.YES, Tri.NO

STEP_LEVELS = (((-1.0, 0.0), 0.5), ((0.0, 1.0), 2.0), ((1.0, 2.0), 0.5), ((2.0, 4.0), 2.0))


def catalog() -> list[tuple[str, WeightSpec]]:
    return [
        ("unit", Constant(1.0, claimed_doubling=2.0, classification=Classification(Y, Y, Y))),
        ("sqrt", Power(0.5, claimed_doubling=2.0**1.5, classification=Classification(Y, Y, N))),
        ("invsqrt", Power(-0.5, classification=Classification(Y, Y, N))),
        ("expsine", ExpSine(1.0, 1.0, classification=Classification(Y, Y, Y))),
        ("step", DyadicStep(STEP_LEVELS, classification=Classification(Y, Y, N))),
    ]


def lookup(name: str) -> WeightSpec:
    for key, spec in catalog():
        if key == name:
            return spec
    raise KeyError(f"unknown catalog weight {name!r}")


def resolve(name_or_path: str) -> WeightSpec:
    """Catalog name, or a path to a JSON weight document."""
    try:
        return lookup(name_or_path)
    except KeyError:
        pass
    p = Path(name_or_path)
    if not p.is_file():
        raise KeyError(f"{name_or_path!r} is neither a catalog weight nor a spec file")
    return from_json(json.loads(p.read_text()))
