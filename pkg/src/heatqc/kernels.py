"""Convolution kernels and their two dilation conventions.

Every kernel stores only its base profile ``gamma``.  Dilations are derived
views: the time-scale convention uses ``s**-0.5 * gamma(x / sqrt(s))`` and the
length-scale convention uses ``t**-1 * gamma(x / t)``.  Both reduce to a single
length ``L`` (``sqrt(s)`` or ``t``), which is what the quadrature layer sees.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

SQRT_PI = math.sqrt(math.pi)
_ETA_AMP = 4.0 * math.sqrt(2.0) / SQRT_PI


class ScaleKind(enum.Enum):
    TIME = "time"
    LENGTH = "length"

    def length(self, scale):
        """Length ``L`` with ``gamma_scale(x) = gamma(x / L) / L``."""
        scale = np.asarray(scale, dtype=float)
        if np.any(~(scale > 0)):
            raise DomainError(f"scale must be positive, got {scale}")
        out = np.sqrt(scale) if self is ScaleKind.TIME else scale
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Kernel:
    """A convolution profile with analytic metadata.

    ``envelope = (A, b)`` certifies ``|gamma(x)| <= A (1 + x^2) exp(-b x^2)``.
    ``jumps`` lists discontinuities of the profile so that quadrature can
    split panels there; ``support`` is the radius outside which the profile
    vanishes identically (``inf`` for the Gaussian family).
    """

    name: str
    profile: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    moments: tuple[float, float, float]
    envelope: tuple[float, float]
    parity: str
    abs_integral: float
    support: float = math.inf
    jumps: tuple[float, ...] = ()

    def __call__(self, x):
        return self.profile(np.asarray(x, dtype=float))

    def envelope_at(self, x):
        A, b = self.envelope
        x = np.asarray(x, dtype=float)
        out = A * (1.0 + x * x) * np.exp(-b * x * x)
        if math.isfinite(self.support):
            out = np.where(np.abs(x) > self.support, 0.0, out)
        return out


def _heat(z):
    return np.exp(-z * z) / SQRT_PI


def _heat_dx(z):
    return -2.0 * z * np.exp(-z * z) / SQRT_PI


def _heat_dxx(z):
    return (4.0 * z * z - 2.0) * np.exp(-z * z) / SQRT_PI


def _phi_tilde(z):
    return z * z * np.exp(-z * z) / SQRT_PI


def _eta(z):
    return -_ETA_AMP * z * np.exp(-2.0 * z * z)


def _box(z):
    return np.where(np.abs(z) <= 1.0, 0.5, 0.0)


def make_ba_sign(r: float = 2.0) -> Kernel:
    """Classical odd box kernel ``(r/2) 1_[-1,0] - (r/2) 1_[0,1]``."""
    if not r > 0:
        raise DomainError("r must be positive")
    half = 0.5 * r

    def profile(z):
        return np.where((z >= -1.0) & (z < 0.0), half, np.where((z >= 0.0) & (z <= 1.0), -half, 0.0))

    return Kernel(
        name="ba_sign",
        profile=profile,
        moments=(0.0, -half, 0.0),
        envelope=(half * math.e, 1.0),
        parity="odd",
        abs_integral=r,
        support=1.0,
        jumps=(-1.0, 0.0, 1.0),
    )


_C_DXX = 1.0 / math.sqrt(2.0)

KERNELS: dict[str, Kernel] = {
    "heat": Kernel("heat", _heat, (1.0, 0.0, 0.5), (1.0 / SQRT_PI, 1.0), "even", 1.0),
    "phi": Kernel("phi", _heat, (1.0, 0.0, 0.5), (1.0 / SQRT_PI, 1.0), "even", 1.0),
    "psi": Kernel("psi", _heat_dx, (0.0, -1.0, 0.0), (1.0 / SQRT_PI, 1.0), "odd", 2.0 / SQRT_PI),
    "phi_tilde": Kernel("phi_tilde", _phi_tilde, (0.5, 0.0, 0.75), (1.0 / SQRT_PI, 1.0), "even", 0.5),
    "eta": Kernel(
        "eta", _eta, (0.0, -1.0, 0.0), (0.5 * _ETA_AMP, 2.0), "odd", 2.0 * math.sqrt(2.0) / SQRT_PI
    ),
    "heat_dx": Kernel("heat_dx", _heat_dx, (0.0, -1.0, 0.0), (1.0 / SQRT_PI, 1.0), "odd", 2.0 / SQRT_PI),
    # |4x^2 - 2| <= 4 (1 + x^2); sign changes at +-1/sqrt(2)
    "heat_dxx": Kernel(
        "heat_dxx",
        _heat_dxx,
        (0.0, 0.0, 2.0),
        (4.0 / SQRT_PI, 1.0),
        "even",
        8.0 * _C_DXX * math.exp(-0.5) / SQRT_PI,
    ),
    "ba_box": Kernel(
        "ba_box", _box, (1.0, 0.0, 1.0 / 3.0), (0.5 * math.e, 1.0), "even", 1.0, 1.0, (-1.0, 1.0)
    ),
    "ba_sign": make_ba_sign(2.0),
}


def get_kernel(name: str, r: float | None = None) -> Kernel:
    if name == "ba_sign" and r is not None:
        return make_ba_sign(r)
    try:
        return KERNELS[name]
    except KeyError:
        raise KeyError(f"unknown kernel {name!r}; known: {sorted(KERNELS)}") from None


def kernel_eval(kernel: Kernel, scale_kind: ScaleKind, scale: float, x):
    """Value of the dilated profile at ``x``.  Exact formula, no quadrature."""
    L = scale_kind.length(scale)
    out = kernel(np.asarray(x, dtype=float) / L) / L
    return float(out) if np.ndim(out) == 0 else out


def kernel_moments(kernel: Kernel, verify: bool = False, tol: float = 1e-10):
    """Analytic ``(m0, m1, m2)``.  With ``verify`` the moments are recomputed
    by adaptive quadrature and a mismatch raises ``AssertionError``."""
    if verify:
        measured = numeric_moments(kernel)
        for k, (a, b) in enumerate(zip(kernel.moments, measured)):
            if abs(a - b) > tol * max(1.0, abs(a)):
                raise AssertionError(f"{kernel.name}: moment m{k} analytic {a!r} vs quadrature {b!r}")
    return kernel.moments


def _kernel_breaks(kernel: Kernel, radius: float):
    if math.isfinite(kernel.support):
        radius = kernel.support
    pts = {-radius, radius, 0.0, *kernel.jumps}
    return sorted(p for p in pts if -radius <= p <= radius)


def numeric_moments(kernel: Kernel, radius: float = 30.0):
    from .quadrature import integrate

    breaks = _kernel_breaks(kernel, radius)
    return tuple(
        integrate(lambda z, k=k: z**k * kernel(z), breaks[0], breaks[-1], points=breaks[1:-1],
                  rel_tol=1e-13, abs_tol=1e-15).value
        for k in range(3)
    )


def dilated_integral(kernel: Kernel, scale_kind: ScaleKind, scale: float, absolute: bool = False):
    """Integral of the dilated kernel (or of its absolute value) over the line."""
    from .quadrature import integrate

    L = scale_kind.length(scale)
    radius = 30.0 if not math.isfinite(kernel.support) else kernel.support
    breaks = [L * p for p in _kernel_breaks(kernel, radius)]
    if absolute:
        fn = lambda x: np.abs(kernel_eval(kernel, scale_kind, scale, x))
        if kernel.name == "heat_dxx":
            breaks = sorted(set(breaks) | {-L * _C_DXX, L * _C_DXX})
    else:
        fn = lambda x: kernel_eval(kernel, scale_kind, scale, x)
    return integrate(fn, breaks[0], breaks[-1], points=breaks[1:-1], rel_tol=1e-13, abs_tol=1e-15).value


def eta_identity_residual(xs, tol: float | None = None, cfg=None) -> float:
    """Sup over ``xs`` of ``|Phi'(x) - (eta * Phi_{1/2})(x)|``.

    The convolution runs through the quadrature module with ``eta`` as the
    convolved function and the heat kernel at time scale 1/2.  If ``tol`` is
    given the caller gets an ``AssertionError`` when the residual exceeds it.
    """
    from .quadrature import QuadratureConfig, convolve_grid, FunctionSource

    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if xs.size == 0:
        raise DomainError("empty grid")
    cfg = cfg or QuadratureConfig(rel_tol=1e-12, abs_tol=1e-15)
    src = FunctionSource(KERNELS["eta"].profile, name="eta")
    res = convolve_grid(src, KERNELS["heat"], ScaleKind.TIME, [(x, 0.5) for x in xs], cfg)
    conv = np.array([r.value for r in res])
    resid = float(np.max(np.abs(_heat_dx(xs) - conv)))
    if tol is not None and resid >= tol:
        raise AssertionError(f"eta identity residual {resid:.3e} >= {tol:.1e}")
    return resid
