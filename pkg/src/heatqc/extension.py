"""Heat solution, the extension F = (U, V) and its complex dilatation.

With ``phi(x) = exp(-x^2)/sqrt(pi)``, ``psi = phi'`` and
``phi_tilde(x) = x^2 phi(x)``, all at length scale ``t``:

    U_x = w * phi_t          = u(x, t^2)
    V_x = w * psi_t          = t u'(x, t^2)
    U_t = V_x / 2
    V_t = 2 (w * phi_tilde_t) = u(x, t^2) + (t^2 / 2) u''(x, t^2)

so every derivative comes from one multi-kernel convolution of the weight;
no finite differences are involved.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonQuasiconformalSample
from .kernels import KERNELS
from .quadrature import PrimitiveSource, QuadratureConfig, convolve_many

log = logging.getLogger(__name__)

_DIL_KERNELS = [KERNELS["phi"], KERNELS["psi"], KERNELS["phi_tilde"], KERNELS["heat_dxx"]]
_HEAT_KERNELS = [KERNELS["heat"], KERNELS["heat_dx"], KERNELS["heat_dxx"]]
_F_KERNELS = [KERNELS["phi"], KERNELS["psi"]]


@dataclass(frozen=True)
class HeatSolution:
    u: float
    u_x: float
    u_xx: float
    x: float
    s: float
    errors: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ExtensionSample:
    U: float
    V: float
    U_x: float
    U_t: float
    V_x: float
    V_t: float
    mu: complex
    K: float
    J: float
    x: float
    t: float
    error_budget: float
    flagged: bool = False


def _positive(name, v):
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError(f"{name} must be positive")
    return v


def heat_arrays(spec, xs, ss, cfg=None):
    """``u, u', u''`` at time scales ``ss`` (arrays) plus their error estimates."""
    cfg = cfg or QuadratureConfig()
    ss = _positive("s", ss)
    L = np.sqrt(ss)
    b = convolve_many(spec, _HEAT_KERNELS, xs, L, cfg)
    scale = np.stack([np.ones_like(L), 1.0 / L, 1.0 / L**2])
    return b.values * scale, (b.errors + b.truncation) * scale


def heat_solution(spec, x: float, s: float, cfg: QuadratureConfig | None = None) -> HeatSolution:
    vals, errs = heat_arrays(spec, [x], [s], cfg)
    return HeatSolution(*(float(v) for v in vals[:, 0]), x=float(x), s=float(s),
                        errors=tuple(float(e) for e in errs[:, 0]))


@dataclass
class Derivatives:
    """Vectorized closed-form derivatives at points ``(x, t)``."""

    U_x: np.ndarray
    V_x: np.ndarray
    V_t: np.ndarray
    u_xx: np.ndarray  # u''(x, t^2)
    err: np.ndarray   # combined absolute error of (U_x, V_x, V_t)
    converged: np.ndarray

    @property
    def U_t(self):
        return 0.5 * self.V_x

    @property
    def J(self):
        return self.U_x * self.V_t - self.U_t * self.V_x

    @property
    def sum_sq(self):
        return self.U_x**2 + self.U_t**2 + self.V_x**2 + self.V_t**2

    @property
    def mu(self):
        dz = 0.5 * ((self.U_x + self.V_t) + 1j * (self.V_x - self.U_t))
        dzbar = 0.5 * ((self.U_x - self.V_t) + 1j * (self.V_x + self.U_t))
        with np.errstate(divide="ignore", invalid="ignore"):
            return dzbar / dz

    @property
    def abs_mu2(self):
        """``|mu|^2`` through the sum-of-squares identity, cancellation free."""
        num = (self.U_x - self.V_t) ** 2 + (self.U_t + self.V_x) ** 2
        den = (self.U_x + self.V_t) ** 2 + (self.V_x - self.U_t) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            return num / den

    @property
    def K(self):
        m2 = self.abs_mu2
        return (1 + m2) / (1 - m2)

    @property
    def mu_error(self):
        # first-order propagation: d|mu| <= 2 (|dUx| + |dVx| + |dVt|) / |dF|
        den = np.sqrt((self.U_x + self.V_t) ** 2 + (self.V_x - self.U_t) ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            return 2.0 * self.err / den


def derivative_arrays(spec, xs, ts, cfg: QuadratureConfig | None = None) -> Derivatives:
    cfg = cfg or QuadratureConfig()
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ts = np.broadcast_to(_positive("t", np.atleast_1d(ts)), xs.shape)
    b = convolve_many(spec, _DIL_KERNELS, xs, ts, cfg)
    e = b.errors + b.truncation
    return Derivatives(
        U_x=b.values[0], V_x=b.values[1], V_t=2.0 * b.values[2], u_xx=b.values[3] / ts**2,
        err=e[0] + e[1] + 2.0 * e[2], converged=b.converged,
    )


def derivative_matrix(spec, x: float, t: float, cfg: QuadratureConfig | None = None):
    """``(U_x, U_t, V_x, V_t)`` at ``(x, t)``."""
    d = derivative_arrays(spec, [x], [t], cfg)
    return float(d.U_x[0]), float(d.U_t[0]), float(d.V_x[0]), float(d.V_t[0])


def extension_arrays(spec, xs, ts, cfg: QuadratureConfig | None = None):
    """``U = f * phi_t`` and ``V = f * psi_t`` with ``f`` the primitive of the weight."""
    cfg = cfg or QuadratureConfig()
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ts = np.broadcast_to(_positive("t", np.atleast_1d(ts)), xs.shape)
    b = convolve_many(PrimitiveSource(spec), _F_KERNELS, xs, ts, cfg)
    return b.values[0], b.values[1], b.errors + b.truncation


def extension_point(spec, x: float, t: float, cfg: QuadratureConfig | None = None):
    U, V, _ = extension_arrays(spec, [x], [t], cfg)
    return float(U[0]), float(V[0])


def check_quasiconformal(d: Derivatives, xs, ts, slack: float = 1.0):
    """Flags for near-degenerate samples; raises for violations the budget cannot explain."""
    J = d.J
    m = np.sqrt(d.abs_mu2)
    e = slack * d.mu_error
    jerr = slack * d.err * (np.abs(d.U_x) + np.abs(d.V_t) + np.abs(d.V_x))
    bad = (J <= -jerr) | (m >= 1.0 + e) | ~np.isfinite(m)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NonQuasiconformalSample(
            f"J={J[i]:.3e}, |mu|={m[i]:.6f} at x={xs[i]}, t={ts[i]}",
            {"x": float(xs[i]), "t": float(ts[i]), "J": float(J[i]), "abs_mu": float(m[i]),
             "U_x": float(d.U_x[i]), "V_x": float(d.V_x[i]), "V_t": float(d.V_t[i])},
        )
    return (J <= jerr) | (m >= 1.0 - e)


def beltrami_arrays(spec, xs, ts, cfg: QuadratureConfig | None = None, with_f: bool = True):
    """Vectorized samples as a dict of arrays (the CSV column set)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ts = np.broadcast_to(np.atleast_1d(np.asarray(ts, dtype=float)), xs.shape)
    d = derivative_arrays(spec, xs, ts, cfg)
    flagged = check_quasiconformal(d, xs, ts)
    if flagged.any():
        log.warning("%d near-degenerate samples flagged", int(flagged.sum()))
    mu = d.mu
    out = {"x": xs, "t": ts}
    if with_f:
        U, V, _ = extension_arrays(spec, xs, ts, cfg)
        out.update(U=U, V=V)
    out.update(
        U_x=d.U_x, U_t=d.U_t, V_x=d.V_x, V_t=d.V_t, re_mu=mu.real, im_mu=mu.imag,
        abs_mu=np.sqrt(d.abs_mu2), K=d.K, J=d.J, err=d.mu_error, flagged=flagged,
    )
    return out


def beltrami(spec, x: float, t: float, cfg: QuadratureConfig | None = None) -> ExtensionSample:
    """One sample of the extension with its complex dilatation.

    ``mu`` comes from the four closed-form derivatives; ``|mu|^2`` is also
    checked against ``(sum D^2 - 2J) / (sum D^2 + 2J)``.
    """
    a = beltrami_arrays(spec, [x], [t], cfg)
    d = {k: (v[0] if isinstance(v, np.ndarray) else v) for k, v in a.items()}
    mu = complex(d["re_mu"], d["im_mu"])
    s2 = d["U_x"] ** 2 + d["U_t"] ** 2 + d["V_x"] ** 2 + d["V_t"] ** 2
    ident = (s2 - 2 * d["J"]) / (s2 + 2 * d["J"])
    if abs(ident - abs(mu) ** 2) > 1e-9 * max(1.0, s2 / max(d["J"], 1e-300)):
        raise NonQuasiconformalSample(f"|mu|^2 identity mismatch {ident} vs {abs(mu)**2}")
    return ExtensionSample(
        U=float(d["U"]), V=float(d["V"]), U_x=float(d["U_x"]), U_t=float(d["U_t"]), V_x=float(d["V_x"]),
        V_t=float(d["V_t"]), mu=mu, K=float(d["K"]), J=float(d["J"]), x=float(x), t=float(t),
        error_budget=float(d["err"]), flagged=bool(d["flagged"]),
    )
