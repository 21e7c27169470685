import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transdyn.bouquet import (
    BranchMiss,
    LambdaOutOfRange,
    StripExit,
    SymbolOutOfRange,
    configure,
    endpoint_from_itinerary,
    escape_probe,
    itinerary,
    random_itineraries,
    rectangle_condition,
    report,
    strip_index,
    verify_conjugacy,
)


@pytest.fixture(scope="module")
def cfg1():
    return configure(0.3, 1)


@pytest.fixture(scope="module")
def cfg2():
    return configure(0.3, 2)


# ---------------------------------------------------------------------------
# configure


def test_configure_example(cfg1):
    assert cfg1.c == 4
    assert cfg1.q == pytest.approx(0.48940222718, abs=1e-10)
    assert 0.3 * math.exp(cfg1.q) == pytest.approx(cfg1.q, rel=1e-14)
    assert 0.3 * math.exp(cfg1.q) < 1
    assert 0.3 * math.exp(4) > 4 + 3 * math.pi


def test_smaller_c_rejected():
    assert not rectangle_condition(0.3, 1, 3)
    assert rectangle_condition(0.3, 1, 4)


def test_lambda_out_of_range():
    for lam in (0.5, 0.0, -0.1, 1 / math.e):
        with pytest.raises(LambdaOutOfRange):
            configure(lam, 1)


@given(st.floats(0.01, 0.36), st.integers(1, 5))
def test_configure_invariants(lam, n):
    cfg = configure(lam, n)
    assert rectangle_condition(lam, n, cfg.c)
    assert cfg.c == 2 or not rectangle_condition(lam, n, cfg.c - 1)
    assert lam * math.exp(cfg.q) == pytest.approx(cfg.q, rel=1e-12)
    assert lam * math.exp(cfg.q) < 1


# ---------------------------------------------------------------------------
# itinerary


def test_real_point_in_strip_zero(cfg1):
    assert itinerary(cfg1, 2.0, 1) == (0,)


def test_fixed_point_leaves_at_once(cfg1):
    out = itinerary(cfg1, cfg1.q, 5)
    assert isinstance(out, StripExit)
    assert out.step == 0


def test_strip_index_edges(cfg2):
    assert strip_index(cfg2, complex(2, 2 * math.pi)) == 1
    assert strip_index(cfg2, complex(2, -4 * math.pi)) == -2
    assert strip_index(cfg2, complex(2, 6 * math.pi)) is None
    assert strip_index(cfg2, complex(0.5, 0)) is None


# ---------------------------------------------------------------------------
# endpoint_from_itinerary


def test_constructed_endpoint_has_its_itinerary(cfg1):
    s = (1, 0, -1, 0, 1, 0, -1, 0)
    z = endpoint_from_itinerary(cfg1, s)
    assert itinerary(cfg1, z, len(s)) == s


def test_all_zero_itinerary_is_real(cfg1):
    z = endpoint_from_itinerary(cfg1, (0,) * 10)
    assert abs(z.imag) < 1e-15
    assert 1 < z.real < cfg1.c
    w = z
    for _ in range(10):
        assert abs(w.imag) < 1e-12 and strip_index(cfg1, w) == 0
        w = cfg1.E(w)


def test_single_symbol(cfg1):
    z = endpoint_from_itinerary(cfg1, (1,))
    assert math.pi < z.imag < 3 * math.pi


@pytest.mark.xfail(
    strict=True,
    reason="an 8-symbol prefix fixes the endpoint only to within its cylinder, about 7e-5 wide here",
)
def test_alternating_depths_agree(cfg1):
    s = (1, 0) * 6
    assert abs(endpoint_from_itinerary(cfg1, s[:8]) - endpoint_from_itinerary(cfg1, s)) < 1e-6


def test_deepening_is_cauchy(cfg1):
    s = (1, 0) * 10
    pts = [endpoint_from_itinerary(cfg1, s[:k]) for k in (4, 8, 12, 16, 20)]
    gaps = np.abs(np.diff(pts))
    assert np.all(gaps[1:] < gaps[:-1])
    assert gaps[-1] < 1e-6


def test_symbol_bound(cfg1):
    with pytest.raises(SymbolOutOfRange):
        endpoint_from_itinerary(cfg1, (0, 2, 0))


def test_branch_miss_for_small_c(cfg1):
    from dataclasses import replace

    bad = replace(cfg1, c=2.0)
    with pytest.raises(BranchMiss):
        endpoint_from_itinerary(bad, (1, 1, 1))


# ---------------------------------------------------------------------------
# verify_conjugacy


def test_conjugacy_constant(cfg1):
    assert verify_conjugacy(cfg1, (0,) * 6, 4)


def test_conjugacy_alternating_signs(cfg1):
    assert verify_conjugacy(cfg1, (1, -1) * 4, 6)


def test_conjugacy_symbol_bound(cfg1):
    with pytest.raises(SymbolOutOfRange):
        verify_conjugacy(cfg1, (0, 0, 2, 0, 0, 0), 4)


def test_conjugacy_needs_enough_symbols(cfg1):
    with pytest.raises(ValueError):
        verify_conjugacy(cfg1, (0, 0, 0), 3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-2, 2), min_size=10, max_size=14))
def test_conjugacy_property(s):
    cfg = configure(0.3, 2)
    assert verify_conjugacy(cfg, s, 8)


def test_conjugacy_random_batch(cfg2):
    its = random_itineraries(cfg2, 100, 10)
    assert all(verify_conjugacy(cfg2, s, 8) for s in its)


# ---------------------------------------------------------------------------
# expansion and escape


def _perturb(cfg, s, j):
    s = list(s)
    s[j] = s[j] + 1 if s[j] < cfg.N else s[j] - 1
    return s


def test_expansion(cfg2):
    its = random_itineraries(cfg2, 50, 10, seed=7)
    quotients = []
    for s in its:
        z = endpoint_from_itinerary(cfg2, s)
        d = [abs(z - endpoint_from_itinerary(cfg2, _perturb(cfg2, s, j))) for j in range(4)]
        assert d[0] >= math.pi
        quotients += [d[j] / d[j + 1] for j in range(3)]
    assert np.mean(quotients) >= 1.5


def test_escape_probes(cfg2):
    for s in random_itineraries(cfg2, 20, 10, seed=3):
        escaped, step = escape_probe(cfg2, s)
        assert escaped, s
        assert step < 60


def test_random_itineraries_deterministic(cfg2):
    a = random_itineraries(cfg2, 5, 6, seed=1)
    assert a == random_itineraries(cfg2, 5, 6, seed=1)
    assert all(len(s) == 6 and max(map(abs, s)) <= 2 for s in a)


def test_report_json(cfg2):
    d = json.loads(report(cfg2, [(0,) * 10, (1, -1) * 5], 8))
    assert d["config"]["c"] == 5 and d["k"] == 8
    assert [r["conjugacy"] for r in d["endpoints"]] == [True, True]


def test_small_depth_cylinders_are_exhaustive(cfg1):
    # every length-3 word over {-1, 0, 1} is realized
    for s in itertools.product((-1, 0, 1), repeat=3):
        z = endpoint_from_itinerary(cfg1, s)
        assert itinerary(cfg1, z, 3) == s
