import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transdyn import parse
from transdyn.newton import newton_map
from transdyn.periodic import (
    ATTRACTING,
    IRRATIONALLY_INDIFFERENT,
    RATIONALLY_INDIFFERENT,
    REPELLING,
    SUPERATTRACTING,
    classify_multiplier,
    cycle_multiplier,
    find_periodic,
    orbit_segment,
)

SMALE = "z^3 - z + 0.7071067811865476"


def exp_fixed_point_oracle(seed=0.3 + 1.3j):
    z = seed
    for _ in range(100):
        z -= (cmath.exp(z) - z) / (cmath.exp(z) - 1)
    return z


# ---------------------------------------------------------------------------
# classify_multiplier


@pytest.mark.parametrize(
    "lam, kind, q",
    [
        (0, SUPERATTRACTING, None),
        (1, RATIONALLY_INDIFFERENT, 1),
        (5 / 6, ATTRACTING, None),
        (-1, RATIONALLY_INDIFFERENT, 2),
        (cmath.exp(2j * math.pi / 3), RATIONALLY_INDIFFERENT, 3),
        (cmath.exp(2j * math.pi * (math.sqrt(5) - 1) / 2), IRRATIONALLY_INDIFFERENT, None),
        (1.5j, REPELLING, None),
        (1e-10, SUPERATTRACTING, None),
    ],
)
def test_classify_multiplier(lam, kind, q):
    s = classify_multiplier(lam)
    assert s.kind == kind
    assert s.q == q


@given(st.floats(0, 10, allow_nan=False), st.floats(-math.pi, math.pi))
def test_classify_multiplier_thresholds(r, theta):
    s = classify_multiplier(cmath.rect(r, theta))
    if r < 1e-9:
        assert s.kind == SUPERATTRACTING
    elif abs(r - 1) < 1e-6:
        assert s.kind in (RATIONALLY_INDIFFERENT, IRRATIONALLY_INDIFFERENT)
    elif r < 1:
        assert s.kind == ATTRACTING
    else:
        assert s.kind == REPELLING


# ---------------------------------------------------------------------------
# find_periodic


def test_newton_two_cycle():
    f = newton_map(parse(SMALE))
    res = find_periodic(f, 2, (-2, 2, -2, 2), 100)
    zero = [p for p in res if abs(p.location) < 1e-9]
    assert len(zero) == 1
    p = zero[0]
    assert p.stability.kind == SUPERATTRACTING
    assert abs(p.multiplier) < 1e-9
    assert {round(c.real, 12) for c in p.cycle} == {0.0, round(1 / math.sqrt(2), 12)}


def test_fixed_point_free_map_small_grid():
    res = find_periodic(parse("exp(z) + z"), 1, (-50, 50, -50, 50), 100)
    assert len(res) == 0


def test_exp_fixed_point():
    oracle = exp_fixed_point_oracle()
    assert oracle == pytest.approx(0.3181 + 1.3372j, abs=1e-4)
    res = find_periodic(parse("exp(z)"), 1, (-3, 3, -3, 3), 60)
    locs = np.array([p.location for p in res])
    # the conjugate pair of fixed points; each is its own one-point cycle
    assert locs.size == 2
    assert np.min(np.abs(locs - oracle)) < 1e-12
    assert np.min(np.abs(locs - oracle.conjugate())) < 1e-12
    for p in res:
        assert abs(p.multiplier) == pytest.approx(abs(oracle), rel=1e-12)
        assert abs(p.multiplier) == pytest.approx(1.374, abs=1e-3)
        assert p.stability.kind == REPELLING


def test_cube_roots_of_unity_superattracting():
    f = newton_map(parse("z^3 - 1"))
    res = find_periodic(f, 1, (-2, 2, -2, 2), 40)
    roots = np.exp(2j * np.pi * np.arange(3) / 3)
    for r in roots:
        hits = [p for p in res if abs(p.location - r) < 1e-10]
        assert len(hits) == 1
        assert hits[0].stability.kind == SUPERATTRACTING


@pytest.mark.parametrize("text, n, box", [("exp(z)", 2, (-6, 6, -6, 6)), ("exp(z)", 3, (-4, 4, -4, 4)), ("z^2 - 1 + 0.3*i", 3, (-2, 2, -2, 2))])
def test_periodic_invariants(text, n, box):
    f = parse(text)
    res = find_periodic(f, n, box, 80)
    assert len(res) > 0
    for p in res:
        pts, _, _ = orbit_segment(f, p.location, n)
        scale = max(1.0, abs(p.location))
        assert abs(complex(pts[-1]) - p.location) < 1e-10 * scale
        # minimality against proper divisors
        for m in range(1, n):
            if n % m == 0:
                assert abs(complex(pts[m]) - p.location) >= 1e-4
        # multiplier is a chain product, the same from every member
        lams = [cycle_multiplier(f, c, n) for c in p.cycle]
        for lam in lams:
            assert abs(lam - p.multiplier) <= 1e-8 * max(1.0, abs(p.multiplier))
        # representative rule
        aim = min(abs(c.imag) for c in p.cycle)
        assert abs(p.location.imag) <= aim + 1e-9
    # one representative per cycle
    reps = np.array([p.location for p in res])
    d = np.abs(reps[:, None] - reps[None, :])
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1e-6


def test_exp_has_repelling_cycles_small():
    res = find_periodic(parse("exp(z)"), 2, (-10, 10, -10, 10), 120)
    rep = [p for p in res if p.stability.kind == REPELLING]
    assert len(rep) >= 5
    assert all(abs(p.multiplier) > 1 + 1e-6 for p in res)


def test_report_json_fields():
    res = find_periodic(parse("exp(z)"), 1, (-3, 3, -3, 3), 40)
    rows = json.loads(res.to_json())
    assert rows and set(rows[0]) == {"location", "minimal_period", "multiplier", "stability", "residual"}


def test_period_must_be_positive():
    with pytest.raises(ValueError):
        find_periodic(parse("z^2"), 0, (-1, 1, -1, 1), 10)


def test_failures_counted_not_raised():
    res = find_periodic(parse("tan(z)"), 1, (-5, 5, -3, 3), 40)
    assert sum(res.failures.values()) > 0  # seeds that ran into poles
    x = 4.493409457909064  # tan x = x
    for target in (x, -x):
        hits = [p for p in res if abs(p.location - target) < 1e-9]
        assert len(hits) == 1
        assert hits[0].multiplier == pytest.approx(1 + x * x, rel=1e-9)


@pytest.mark.parametrize(
    "f, n, box",
    [
        (newton_map(parse(SMALE)), 2, (-2, 2, -2, 2)),
        (parse("exp(z)"), 2, (-6, 6, -6, 6)),
        (parse("exp(z) + z"), 2, (-20, 20, -20, 20)),
    ],
)
def test_each_cycle_reported_once(f, n, box):
    # conjugate members tie on |Im| and Re, so this catches a loose tie-break
    res = find_periodic(f, n, box, 80)
    for i, p in enumerate(res):
        for q in list(res)[i + 1 :]:
            assert min(abs(q.location - c) for c in p.cycle) > 1e-6
