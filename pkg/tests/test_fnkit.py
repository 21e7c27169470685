import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from transdyn import fnkit
from transdyn.catalog import CATALOG
from transdyn.fnkit import (
    CLASS_E,
    CLASS_M,
    CLASS_P,
    RATIONAL,
    ClassificationAmbiguous,
    ExpressionSyntaxError,
    UnsupportedFunction,
    parse,
)


# ---------------------------------------------------------------------------
# parse / serialize


def test_parse_three_term_sum():
    f = parse("z + 1 + exp(-z)")
    terms = []

    def flatten(n):
        if isinstance(n, fnkit.Add):
            flatten(n.left)
            flatten(n.right)
        else:
            terms.append(n)

    flatten(f.ast)
    assert len(terms) == 3
    z = 0.7 - 0.2j
    assert f(z) == pytest.approx(z + 1 + np.exp(-z), rel=1e-14)


def test_identity():
    f = parse("z")
    assert f.eval(3 + 4j).value == 3 + 4j


def test_scaled_exp_at_zero():
    assert parse("0.3*exp(z)").eval(0).value == pytest.approx(0.3, rel=1e-15)


@pytest.mark.parametrize(
    "text, z, expected",
    [
        ("z^3 - z + 1", 2.0, 7.0),
        ("2*i*z", 1.0, 2j),
        ("(z+1)^2/(z-1)", 3.0, 8.0),
        ("sin(z)^2 + cos(z)^2", 0.3 + 0.4j, 1.0),
        ("z^-2", 2.0, 0.25),
        ("-z", 1 + 1j, -1 - 1j),
    ],
)
def test_eval_values(text, z, expected):
    assert parse(text)(z) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("bad, pos", [("z +", 3), ("exp(z", 5), ("2**", 3), ("z $ 1", 2), ("(z))", 3)])
def test_syntax_error_has_position(bad, pos):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse(bad)
    assert info.value.position == pos


def test_unsupported_function():
    with pytest.raises(UnsupportedFunction):
        parse("log(z)")


def test_non_integer_power_rejected():
    with pytest.raises(ExpressionSyntaxError):
        parse("z^0.5")


# ---------------------------------------------------------------------------
# eval


def test_tan_quarter_pi():
    assert parse("tan(z)").eval(math.pi / 4).value == pytest.approx(1.0, rel=1e-15)


def test_tan_pole():
    assert parse("tan(z)").eval(math.pi / 2).kind == "pole"


def test_class_p_pole_at_zero():
    assert parse("exp(z)/z").eval(0).kind == "pole"


def test_pole_hints_flag_nearby_points():
    f = parse("z", pole_hints=[1.0])
    assert f.eval(1 + 1e-12).kind == "pole"
    assert f.eval(1 + 1e-6).kind == "finite"


def test_overflow_reported():
    assert parse("exp(exp(z))").eval(10).kind == "overflow"


def test_vectorized_matches_scalar(rng):
    f = parse("z + 1 + exp(-z)")
    z = rng.uniform(-3, 3, 50) + 1j * rng.uniform(-3, 3, 50)
    w, status = f.evaluate(z)
    assert np.all(status == fnkit.FINITE)
    assert all(w[k] == f.eval(z[k]).value for k in range(z.size))


# ---------------------------------------------------------------------------
# differentiate


def test_derivative_of_exp():
    assert fnkit.differentiate(parse("exp(z)")).text == "exp(z)"


def test_derivative_of_tan_at_zero():
    assert fnkit.differentiate(parse("tan(z)")).eval(0).value == pytest.approx(1.0, rel=1e-15)


def test_newton_map_derivative_identity(rng):
    g = parse("z^3 - z + 0.70710678")
    g1, g2 = g.derivative, g.derivative.derivative
    nm = parse(f"z - ({g.text})/({g1.text})")
    z = rng.uniform(-2, 2, 40) + 1j * rng.uniform(-2, 2, 40)
    lhs = nm.derivative(z)
    rhs = g(z) * g2(z) / g1(z) ** 2
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-12)


# ---------------------------------------------------------------------------
# classify


@pytest.mark.parametrize(
    "text, cls",
    [
        ("exp(z)", CLASS_E),
        ("exp(z)/z", CLASS_P),
        ("2*tan(z)", CLASS_M),
        ("z^3 - z + 1", RATIONAL),
        ("1/z - exp(z)", CLASS_M),
        ("z*exp(z)", CLASS_E),
        ("exp(z^2)/(z-1)^3", CLASS_M),  # pole at 1 but omits 0
        ("1 + exp(z^2)/(z-1)^3", CLASS_P),
        ("sin(z)", CLASS_E),
    ],
)
def test_classify(text, cls):
    assert fnkit.classify_class(parse(text)) == cls


def test_classification_ambiguous_and_override():
    with pytest.raises(ClassificationAmbiguous):
        parse("sin(z)/z").fn_class
    assert parse("sin(z)/z", fn_class=CLASS_E).fn_class == CLASS_E


@pytest.mark.parametrize("key", sorted(CATALOG))
def test_catalog_class_soundness(key):
    e = CATALOG[key]
    f = parse(e.text)  # no annotation: the syntactic test must agree
    assert f.fn_class == e.fn_class
    assert parse(fnkit.serialize(f)).fn_class == e.fn_class


# ---------------------------------------------------------------------------
# properties

_leaf = st.one_of(
    st.just("z"),
    st.sampled_from(["1", "2", "0.5", "i", "3.25", "0.3"]),
)


def _extend(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*", "/"]), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})")
    powers = st.tuples(children, st.integers(-2, 3)).map(lambda t: f"({t[0]})^{t[1]}")
    funcs = st.tuples(st.sampled_from(["exp", "sin", "cos", "tan"]), children).map(lambda t: f"{t[0]}({t[1]})")
    neg = children.map(lambda c: f"-({c})")
    return st.one_of(binary, powers, funcs, neg)


expressions = st.recursive(_leaf, _extend, max_leaves=6)


def _points(seed: int, n: int) -> np.ndarray:
    r = np.random.default_rng(seed)
    rad = 5 * np.sqrt(r.uniform(0, 1, n))
    return rad * np.exp(2j * np.pi * r.uniform(0, 1, n))


@settings(max_examples=120, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(expressions)
def test_fd1_finite_difference(text):
    f = parse(text)
    fp = fnkit.differentiate(f)
    z = _points(7, 200)
    h = 1e-6
    w, s = f.evaluate(z)
    d, sd = fp.evaluate(z)
    wp, sp = f.evaluate(z + h)
    wm, sm = f.evaluate(z - h)
    ok = (s == 0) & (sd == 0) & (sp == 0) & (sm == 0)
    # stay clear of poles and of astronomically large values, where the
    # central difference itself loses every digit
    ok &= (np.abs(w) < 1e4) & (np.abs(d) < 1e6)
    assume(ok.any())
    fd = (wp - wm) / (2 * h)
    err = np.abs(d - fd) / np.maximum(1.0, np.abs(d))
    assert np.all(err[ok] <= 1e-6), (text, float(np.max(err[ok])))


@settings(max_examples=200, deadline=None)
@given(expressions)
def test_round_trip_bitwise(text):
    f = parse(text)
    g = parse(fnkit.serialize(f))
    z = _points(11, 100)
    w1, s1 = f.evaluate(z)
    w2, s2 = g.evaluate(z)
    assert np.array_equal(s1, s2)
    same = (w1.view(np.float64) == w2.view(np.float64)) | (np.isnan(w1.view(np.float64)) & np.isnan(w2.view(np.float64)))
    assert same.all()


@settings(max_examples=100, deadline=None)
@given(expressions)
def test_class_stable_under_reparse(text):
    f = parse(text)
    try:
        cls = f.fn_class
    except ClassificationAmbiguous:
        with pytest.raises(ClassificationAmbiguous):
            parse(f.text).fn_class
        return
    assert parse(f.text).fn_class == cls


@pytest.mark.parametrize("key", sorted(CATALOG))
def test_fd1_catalog(key):
    f = parse(CATALOG[key].text)
    z = _points(3, 200)
    h = 1e-6
    w, s = f.evaluate(z)
    d, sd = f.derivative.evaluate(z)
    fd = (f(z + h) - f(z - h)) / (2 * h)
    ok = (s == 0) & (sd == 0) & (np.abs(w) < 1e4)
    err = np.abs(d - fd) / np.maximum(1.0, np.abs(d))
    assert np.all(err[ok] <= 1e-6)
