import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad, simpson

from heatqc.errors import DomainError, SingularityError
from heatqc.weights import (STEP_LEVELS, Classification, Constant, DyadicStep, ExpSine, PrimitiveCache, Power,
                            Sampled, Tri, catalog, doubling_estimate, from_json, lookup, resolve, to_json,
                            weight_eval, weight_primitive)

CATALOG = dict(catalog())
names = st.sampled_from(sorted(CATALOG))
SAMPLED = Sampled((-2.0, -0.5, 0.0, 1.0, 3.0), (1.0, 2.0, 0.5, 1.5, 1.0))


def _quad(spec, a, b):
    pts = [p for p in spec.breakpoints() if a < p < b]
    return quad(spec, a, b, points=pts or None, limit=500, epsabs=1e-14, epsrel=1e-13)[0]


def test_eval_examples():
    assert weight_eval(Constant(1.0), 3.7) == 1.0
    assert weight_eval(Power(0.5), 4.0) == 2.0
    assert weight_eval(ExpSine(0.5, 1.0), math.pi / 2) == pytest.approx(math.exp(0.5), rel=1e-15)


def test_power_singular_point():
    with pytest.raises(SingularityError):
        weight_eval(Power(-0.5), 0.0)
    assert weight_eval(Power(0.5), 0.0) == 0.0


@pytest.mark.parametrize("bad", [lambda: Power(-1.0), lambda: Constant(0.0), lambda: ExpSine(-1.0, 1.0),
                                 lambda: ExpSine(1.0, 0.0), lambda: DyadicStep((((0, 1), -1.0),)),
                                 lambda: DyadicStep((((0, 2), 2.0), ((1, 3), 2.0))),
                                 lambda: Sampled((0.0, 0.0), (1.0, 1.0)), lambda: Sampled((0.0, 1.0), (1.0, 0.0))])
def test_invalid_parameters(bad):
    with pytest.raises(DomainError):
        bad()


def test_primitive_examples():
    assert weight_primitive(Constant(1.0), 2.5) == 2.5
    assert weight_primitive(Power(0.5), 1.0) == pytest.approx(2 / 3, rel=1e-15)


def test_expsine_primitive_against_dense_simpson():
    # brute-force Simpson with 1e5 panels
    y = np.linspace(0.0, 1.0, 100001)
    oracle = simpson(np.exp(0.5 * np.sin(y)), x=y)
    assert abs(weight_primitive(ExpSine(0.5, 1.0), 1.0) - oracle) < 1e-8


def test_step_primitive_closed_form():
    w = DyadicStep(STEP_LEVELS)
    # int_0^3 = 2*1 + 0.5*1 + 2*1
    assert weight_primitive(w, 3.0) == pytest.approx(4.5, abs=1e-15)
    assert weight_primitive(w, -2.0) == pytest.approx(-1.5, abs=1e-15)


def test_primitive_negative_tol():
    with pytest.raises(DomainError):
        weight_primitive(Constant(1.0), 1.0, tol=0.0)


def test_doubling_examples():
    assert doubling_estimate(Constant(1.0), np.linspace(-3, 3, 7), [0.1, 1.0, 5.0]) == pytest.approx(2.0, abs=1e-14)
    # analytic ratio (2t)^{a+1} / t^{a+1}
    assert doubling_estimate(Power(0.5), [0.0], [0.01, 1.0, 100.0]) == pytest.approx(2**1.5, rel=1e-12)
    eps = 0.7
    rho = doubling_estimate(ExpSine(eps, 1.0), np.linspace(-4, 4, 17), np.geomspace(1e-2, 10, 9))
    assert 2 * math.exp(-2 * eps) <= rho <= 2 * math.exp(2 * eps)


def test_doubling_bad_grids():
    with pytest.raises(DomainError):
        doubling_estimate(Constant(1.0), [], [1.0])
    with pytest.raises(DomainError):
        doubling_estimate(Constant(1.0), [0.0], [0.0])


def _same(w, ref):
    return type(w) is type(ref) and w.params() == ref.params()


def test_catalog_flags():
    Y, N = Tri.YES, Tri.NO
    assert _same(CATALOG["unit"], Constant(1.0))
    assert CATALOG["unit"].classification == Classification(Y, Y, Y)
    assert _same(CATALOG["sqrt"], Power(0.5))
    assert CATALOG["sqrt"].classification == Classification(Y, Y, N)
    assert _same(CATALOG["invsqrt"], Power(-0.5)) and CATALOG["invsqrt"].classification.is_ainfty is Y
    assert CATALOG["invsqrt"].classification.log_in_vmo is N
    assert _same(CATALOG["expsine"], ExpSine(1.0, 1.0)) and CATALOG["expsine"].classification == Classification(Y, Y, Y)
    assert isinstance(CATALOG["step"], DyadicStep) and CATALOG["step"].classification.log_in_vmo is N
    assert lookup("sqrt").classification.log_in_vmo is N
    with pytest.raises(KeyError):
        lookup("missing")


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_positivity(name):
    w = CATALOG[name]
    x = np.random.default_rng(1).uniform(-50, 50, 10_000)
    assert np.all(w(x) > 0)


@given(name=names, x1=st.floats(-20, 20), dx=st.floats(1e-6, 20))
def test_primitive_monotone(name, x1, dx):
    w = CATALOG[name]
    assert weight_primitive(w, x1) < weight_primitive(w, x1 + dx)


@given(name=names, a=st.floats(-15, 15), length=st.floats(1e-3, 10))
def test_primitive_additivity(name, a, length):
    w = CATALOG[name]
    b = a + length
    lhs = weight_primitive(w, b) - weight_primitive(w, a)
    assert lhs == pytest.approx(_quad(w, a, b), rel=1e-9, abs=1e-11)


@given(a=st.floats(-0.9, 2.0), lam=st.floats(0.01, 100), x=st.floats(-10, 10))
def test_power_dilation_covariance(a, lam, x):
    w = Power(a)
    assert weight_primitive(w, lam * x) == pytest.approx(lam ** (a + 1) * weight_primitive(w, x), rel=1e-8, abs=1e-300)


def test_primitive_zero_at_origin():
    for w in list(CATALOG.values()) + [SAMPLED]:
        assert weight_primitive(w, 0.0) == 0.0


def test_primitive_cache_anchors():
    cache = PrimitiveCache(ExpSine(1.0, 2.0), h=0.25)
    vals = cache(np.linspace(-3, 3, 31))
    assert np.all(np.diff(cache.cumulative) > 0)
    assert cache.cumulative[np.argmin(np.abs(cache.anchors))] == 0.0
    assert np.all(np.diff(vals) > 0)
    assert vals[15] == pytest.approx(0.0, abs=1e-15)


def test_sampled_weight():
    w = SAMPLED
    assert w(np.array(-0.5)) == 2.0
    assert w(np.array(10.0)) == 1.0 and w(np.array(-10.0)) == 1.0
    for a, b in [(-3, 4), (-0.7, 0.2), (0.5, 5.0)]:
        assert weight_primitive(w, b) - weight_primitive(w, a) == pytest.approx(_quad(w, a, b), rel=1e-12)


@pytest.mark.parametrize("spec", [w for _, w in catalog()] + [SAMPLED])
def test_json_roundtrip(spec):
    doc = json.loads(json.dumps(to_json(spec)))
    back = from_json(doc)
    assert back == spec
    assert back.classification == spec.classification


def test_resolve_file(tmp_path):
    p = tmp_path / "w.json"
    p.write_text(json.dumps({"family": "power", "params": {"a": 0.25},
                             "classification": {"is_ainfty": "yes", "log_in_bmo": "yes", "log_in_vmo": "no"}}))
    w = resolve(str(p))
    assert _same(w, Power(0.25)) and w.classification.log_in_vmo is Tri.NO
    assert _same(resolve("unit"), Constant(1.0))
    with pytest.raises(KeyError):
        resolve(str(tmp_path / "missing.json"))
    with pytest.raises(DomainError):
        from_json({"family": "nope"})


def test_log_mean_closed_forms():
    for w, (a, b) in [(Power(0.5), (-1.0, 2.0)), (DyadicStep(STEP_LEVELS), (-0.5, 3.2)), (Constant(3.0), (0, 1))]:
        pts = [p for p in w.breakpoints() if a < p < b]
        num = quad(lambda y: float(w.log(y)) if y != 0 else 0.0, a, b, points=pts or None, limit=200)[0] / (b - a)
        assert w.log_mean(a, b) == pytest.approx(num, rel=1e-9, abs=1e-12)
