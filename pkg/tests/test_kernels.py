import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatqc.errors import DomainError
from heatqc.kernels import (KERNELS, SQRT_PI, ScaleKind, dilated_integral, eta_identity_residual, get_kernel,
                            kernel_eval, kernel_moments, make_ba_sign, numeric_moments)
from heatqc.quadrature import FunctionSource, QuadratureConfig, convolve_point
from heatqc.selfcheck import check_gradient_max, run_selfcheck

scales = st.floats(min_value=1e-2, max_value=1e2)
kinds = st.sampled_from(list(ScaleKind))


def test_registry_names():
    assert set(KERNELS) == {"heat", "phi", "psi", "phi_tilde", "eta", "heat_dx", "heat_dxx", "ba_box", "ba_sign"}
    with pytest.raises(KeyError):
        get_kernel("nope")


def test_kernel_eval_examples():
    assert kernel_eval(KERNELS["phi"], ScaleKind.LENGTH, 1.0, 0.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    assert kernel_eval(KERNELS["heat"], ScaleKind.TIME, 1.0, 1.0) == pytest.approx(1 / (math.e * SQRT_PI), rel=1e-15)
    expected = -2 * math.sqrt(2) * math.exp(-0.5) / SQRT_PI
    assert kernel_eval(KERNELS["eta"], ScaleKind.LENGTH, 1.0, 0.5) == pytest.approx(expected, rel=1e-15)
    assert expected == pytest.approx(-0.967883, abs=1e-6)


def test_time_scale_formula():
    # s^{-1/2} gamma(x / sqrt(s)) against the heat kernel written out
    for s, x in [(0.3, 0.7), (4.0, -1.5)]:
        direct = math.exp(-x * x / s) / math.sqrt(math.pi * s)
        assert kernel_eval(KERNELS["heat"], ScaleKind.TIME, s, x) == pytest.approx(direct, rel=1e-14)


@pytest.mark.parametrize("kind", list(ScaleKind))
@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan])
def test_nonpositive_scale(kind, bad):
    with pytest.raises(DomainError):
        kernel_eval(KERNELS["phi"], kind, bad, 0.0)


def test_moment_examples():
    assert kernel_moments(KERNELS["phi"]) == (1.0, 0.0, 0.5)
    assert kernel_moments(KERNELS["psi"]) == (0.0, -1.0, 0.0)
    assert kernel_moments(KERNELS["eta"])[0] == 0.0


def test_moment_oracles():
    # Gaussian moment oracle: int x^2 e^{-x^2} / sqrt(pi) = 1/2; integration by parts: int x phi' = -1
    from scipy.integrate import quad

    assert quad(lambda x: x * x * math.exp(-x * x) / SQRT_PI, -np.inf, np.inf)[0] == pytest.approx(0.5, abs=1e-12)
    assert quad(lambda x: -2 * x * x * math.exp(-x * x) / SQRT_PI, -np.inf, np.inf)[0] == pytest.approx(-1, abs=1e-12)


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_moments_verified(name):
    kernel_moments(KERNELS[name], verify=True, tol=1e-10)


@pytest.mark.parametrize("r", [0.5, 2.0, 3.0])
def test_ba_sign_parameter(r):
    k = make_ba_sign(r)
    assert k.moments == (0.0, -r / 2, 0.0)
    assert np.allclose(numeric_moments(k), k.moments, atol=1e-12)
    assert get_kernel("ba_sign", r).abs_integral == r


def test_ba_sign_rejects_bad_r():
    with pytest.raises(DomainError):
        make_ba_sign(0.0)


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_envelope_dense_grid(name):
    k = KERNELS[name]
    x = np.linspace(-20, 20, 200001)
    assert np.all(np.abs(k(x)) <= k.envelope_at(x) * (1 + 1e-12))


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_abs_integral(name):
    k = KERNELS[name]
    assert dilated_integral(k, ScaleKind.LENGTH, 1.0, absolute=True) == pytest.approx(k.abs_integral, rel=1e-9)


@given(name=st.sampled_from(sorted(KERNELS)), kind=kinds, scale=scales)
def test_dilated_mass_is_m0(name, kind, scale):
    k = KERNELS[name]
    assert abs(dilated_integral(k, kind, scale) - k.moments[0]) < 1e-8


@given(t=scales)
def test_eta_abs_integral_scale_free(t):
    v = dilated_integral(KERNELS["eta"], ScaleKind.LENGTH, t, absolute=True)
    assert abs(v - 2 * math.sqrt(2) / SQRT_PI) < 1e-8


@given(t=st.floats(min_value=0.05, max_value=20), x=st.floats(min_value=-30, max_value=30))
def test_length_time_bridge(t, x):
    a = kernel_eval(KERNELS["phi"], ScaleKind.LENGTH, t, x)
    b = kernel_eval(KERNELS["heat"], ScaleKind.TIME, t * t, x)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_eta_identity_origin():
    assert eta_identity_residual([0.0]) < 1e-15


def test_eta_identity_at_one():
    # direct formula oracle for Phi'(1) = -2 e^{-1} / sqrt(pi)
    src = FunctionSource(KERNELS["eta"].profile, name="eta")
    r = convolve_point(src, KERNELS["heat"], ScaleKind.TIME, 0.5, 1.0, QuadratureConfig(rel_tol=1e-12, abs_tol=1e-15))
    assert r.value == pytest.approx(-2 * math.exp(-1) / SQRT_PI, abs=1e-12)
    assert r.value == pytest.approx(-0.415107, abs=1e-6)


def test_eta_identity_grid_against_dense_oracle():
    xs = np.linspace(-5, 5, 101)
    assert eta_identity_residual(xs) < 1e-6
    # brute-force dense trapezoid on [-30, 30]
    y = np.linspace(-30, 30, 600001)
    h = y[1] - y[0]
    eta = KERNELS["eta"](y)
    for x in xs[::10]:
        f = eta * np.exp(-2 * (x - y) ** 2) * math.sqrt(2 / math.pi)
        conv = h * (f.sum() - 0.5 * (f[0] + f[-1]))
        assert abs(conv - KERNELS["heat_dx"](np.array(x))) < 1e-6


def test_eta_identity_tol_argument():
    with pytest.raises(AssertionError):
        eta_identity_residual(np.linspace(-5, 5, 11), tol=1e-30)
    with pytest.raises(DomainError):
        eta_identity_residual([])


def test_gradient_maximum():
    ok, detail = check_gradient_max()
    assert ok, detail


def test_selfcheck_all_pass():
    results = run_selfcheck()
    assert all(ok for _, ok, _ in results), results
