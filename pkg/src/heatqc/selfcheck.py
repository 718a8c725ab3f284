"""Kernel self-checks: moments, dilation invariance, envelopes and the eta identity."""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize_scalar

from .kernels import KERNELS, SQRT_PI, ScaleKind, dilated_integral, eta_identity_residual, kernel_eval, kernel_moments

SCALES = (1e-2, 1.0, 1e2)
ETA_ABS = 2.0 * math.sqrt(2.0) / SQRT_PI


def _check(name, fn):
    try:
        ok, detail = fn()
    except AssertionError as exc:
        ok, detail = False, str(exc)
    return name, bool(ok), detail


def check_moments():
    for k in KERNELS.values():
        kernel_moments(k, verify=True, tol=1e-10)
    return True, f"{len(KERNELS)} kernels agree with quadrature to 1e-10"


def check_dilated_mass(tol=1e-8):
    worst = 0.0
    for k in KERNELS.values():
        for kind in ScaleKind:
            for s in SCALES:
                worst = max(worst, abs(dilated_integral(k, kind, s) - k.moments[0]))
    return worst < tol, f"max |int gamma_s - m0| = {worst:.2e} over scales {SCALES}"


def check_envelopes():
    x = np.linspace(-20, 20, 40001)
    bad = [k.name for k in KERNELS.values() if np.any(np.abs(k(x)) > k.envelope_at(x) * (1 + 1e-12) + 1e-300)]
    return not bad, "all envelopes hold on |x| <= 20" if not bad else f"envelope violated: {bad}"


def check_eta_identity(tol=1e-6):
    r = eta_identity_residual(np.linspace(-5, 5, 101))
    return r < tol, f"sup residual {r:.2e} on 101 points of [-5, 5]"


def check_eta_abs(tol=1e-8):
    worst = max(abs(dilated_integral(KERNELS["eta"], ScaleKind.LENGTH, t, absolute=True) - ETA_ABS) for t in SCALES)
    return worst < tol, f"max |int|eta_t| - 2 sqrt2/sqrt(pi)| = {worst:.2e}"


def check_bridge(tol=1e-12):
    x = np.linspace(-5, 5, 1001)
    worst = 0.0
    for t in (0.1, 1.0, 3.0):
        a = kernel_eval(KERNELS["phi"], ScaleKind.LENGTH, t, x)
        b = kernel_eval(KERNELS["heat"], ScaleKind.TIME, t * t, x)
        worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))))
    return worst < tol, f"length t vs time t^2 max rel diff {worst:.1e}"


def check_gradient_max(tol=1e-6):
    """``max_{|x|<sqrt s} |(Phi_s)'|`` against its closed form at ``x = sqrt(s/2)``."""
    worst = 0.0
    for s in (0.01, 1.0, 100.0):
        r = math.sqrt(s)
        f = lambda x: -abs(kernel_eval(KERNELS["heat_dx"], ScaleKind.TIME, s, x)) / r
        grid = np.linspace(0, r, 2001)
        i = int(np.argmin([f(x) for x in grid]))
        res = minimize_scalar(f, bounds=(grid[max(i - 1, 0)], grid[min(i + 1, 2000)]), method="bounded",
                              options={"xatol": 1e-12 * r})
        exact = math.sqrt(2.0) / (math.sqrt(math.e * math.pi) * s)
        worst = max(worst, abs(-res.fun - exact) / exact, abs(res.x - r / math.sqrt(2)) / r)
    return worst < tol, f"max rel deviation {worst:.1e}"


def run_selfcheck(cfg=None):
    return [
        _check("moments", check_moments),
        _check("dilated mass", check_dilated_mass),
        _check("envelopes", check_envelopes),
        _check("eta identity", check_eta_identity),
        _check("eta absolute integral", check_eta_abs),
        _check("scale bridge", check_bridge),
        _check("gradient maximum", check_gradient_max),
    ]
