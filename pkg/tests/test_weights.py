"""Weight model: exponents, transforms, piecewise powers, parsing."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenrelax import (
    Exponent,
    Interval,
    PiecewisePowerWeight,
    PowerPiece,
    WeightSpecError,
    builtin_cascade,
    builtin_figure1,
    builtin_power,
    eval_weight,
    neg_power_transform,
    parse_weight_arg,
    weight_from_csv,
    weight_from_spec,
)


def test_exponent_rejects_bad_values():
    for bad in (1.0, 0.5, 0.0, -2.0, math.inf, math.nan):
        with pytest.raises(WeightSpecError):
            Exponent(bad)


def test_conjugate_exponent_relation():
    p = Exponent(3.0)
    assert abs(1.0 / p.p + 1.0 / p.conj - 1.0) < 1e-15


@given(st.floats(min_value=1.01, max_value=50.0))
def test_conjugate_is_involutive(pv):
    p = Exponent(pv)
    q = Exponent(p.conj)
    assert abs(q.conj - p.p) < 1e-9 * p.p


@given(st.floats(min_value=1.1, max_value=10.0),
       st.floats(min_value=0.1, max_value=8.0))
def test_transform_power_reciprocity(pv, alpha):
    # (p-1)(conj-1) == 1, so alpha_p of p composed with conj-1 recovers alpha
    p = Exponent(pv)
    ap = p.alpha_p(alpha)
    assert abs(ap * (p.p - 1.0) - alpha) < 1e-12 * max(1.0, alpha)


def test_figure1_values():
    w = builtin_figure1()
    assert w.domain.lo == -2.0 and w.domain.hi == 2.0
    x = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    np.testing.assert_allclose(w(x), [9.0, 0.0, 1.0, 0.0, 9.0], atol=0)
    zs = w.known_zeros()
    assert sorted(z.location for z in zs) == [-1.0, 1.0]
    assert all(z.left_exponent == 2.0 and z.right_exponent == 2.0 for z in zs)


def test_transform_maps_zeros_to_inf():
    w = builtin_figure1()
    sigma = neg_power_transform(w, Exponent(2.0))
    vals = sigma(np.array([-1.0, 0.0, 1.0]))
    assert vals[0] == math.inf and vals[2] == math.inf
    assert vals[1] == 1.0


def test_eval_weight_rejects_negative():
    w = type("Bad", (), {"__call__": lambda self, x: np.asarray(x) - 10.0,
                         "domain": Interval(0.0, 1.0)})()
    with pytest.raises(ValueError):
        eval_weight(w, np.array([0.5]))


def test_piecewise_power_uncovered_is_zero():
    pieces = [PowerPiece(0.2, 0.5, 1.0, 0.2, 1.0)]
    w = PiecewisePowerWeight(Interval(0.0, 1.0), pieces)
    assert float(w(np.array([0.1]))[0]) == 0.0
    assert float(w(np.array([0.9]))[0]) == 0.0
    assert float(w(np.array([0.3]))[0]) == pytest.approx(0.1)
    assert w.zero_regions() == ((0.0, 0.2), (0.5, 1.0))


def test_piecewise_local_exponent_metadata():
    pieces = [PowerPiece(0.0, 0.5, 2.0, 0.0, 3.0), PowerPiece(0.5, 1.0, 2.0, 1.0, 3.0)]
    w = PiecewisePowerWeight(Interval(0.0, 1.0), pieces)
    assert w.local_exponent_at(0.0, +1) == 3.0
    assert w.local_exponent_at(1.0, -1) == 3.0
    assert w.local_exponent_at(0.25, +1) == 0.0  # strictly positive there


def test_cascade_scales_do_not_round():
    # the later bumps carry scales like 2^(alpha_p * i); values must stay
    # finite and exact in the log2 sense even when scale overflows a float
    p = Exponent(1.05)
    w = builtin_cascade(2.0, p, 20)  # alpha_p = 40, scale_20 = 2^840
    x = w.pieces[-1].lo + 0.25 * (w.pieces[-1].hi - w.pieces[-1].lo)
    v = float(w(np.array([x]))[0])
    assert math.isfinite(v) and v > 0.0
    assert w.truncated and w.truncation_count == 20


def test_cascade_requires_supercritical_alpha():
    with pytest.raises(WeightSpecError):
        builtin_cascade(2.0, Exponent(3.0), 4)


@given(st.floats(min_value=1.2, max_value=3.0, exclude_max=True),
       st.integers(min_value=1, max_value=8),
       st.floats(min_value=1e-6, max_value=1.0))
@settings(max_examples=60, deadline=None)
def test_cascade_bumps_are_continuous_at_their_peak(pv, bumps, frac):
    # alpha = 2 keeps every p below 3 supercritical
    # each bump rises to its midpoint and falls symmetrically; the two
    # half-pieces must agree there up to rounding in the big scale
    p = Exponent(pv)
    w = builtin_cascade(2.0, p, bumps)
    piece = w.pieces[2 * (bumps - 1)]
    mid = piece.hi  # rising half ends at the bump midpoint
    eps = 1e-9 * (piece.hi - piece.lo) * frac
    left, right = (float(v) for v in w(np.array([mid - eps, mid + eps])))
    assert left >= 0 and right >= 0
    if left > 0 and right > 0:
        assert abs(left - right) <= 1e-6 * max(left, right)


def test_parse_weight_arg_grammar():
    w = parse_weight_arg("figure1")
    assert w.family == "figure1"
    w = parse_weight_arg("power:alpha=2")
    assert w.domain == Interval(0.0, 1.0)
    assert float(w(np.array([0.5]))[0]) == pytest.approx(0.25)
    w = parse_weight_arg("cascade:alpha=2,bumps=3", Exponent(2.0))
    assert w.truncated
    with pytest.raises((WeightSpecError, ValueError)):
        parse_weight_arg("power:alpha=oops")
    with pytest.raises(WeightSpecError):
        parse_weight_arg("nosuchfamily")


def test_weight_spec_dict_round_trip():
    w = builtin_power(1.5)
    w2 = weight_from_spec(w.spec_dict())
    xs = np.linspace(-1, 1, 17)
    np.testing.assert_allclose(w(xs), w2(xs), rtol=0, atol=0)


def test_weight_from_csv(tmp_path):
    path = tmp_path / "w.csv"
    xs = np.linspace(0.0, 1.0, 101)
    with open(path, "w") as fh:
        fh.write("x,w\n")
        for x in xs:
            fh.write(f"{x:.17g},{x * (1 - x):.17g}\n")
    w = weight_from_csv(str(path))
    assert w.domain == Interval(0.0, 1.0)
    v = float(w(np.array([0.5]))[0])
    assert v == pytest.approx(0.25, abs=1e-12)
    # between nodes the grid interpolates; stays within the hat's range
    v = float(w(np.array([0.505]))[0])
    assert 0.24 < v <= 0.25


def test_unit_weight_is_one_everywhere(unit_weight):
    xs = np.linspace(0, 1, 9)
    np.testing.assert_allclose(unit_weight(xs), 1.0, rtol=0, atol=0)
    assert unit_weight.zero_regions() == ()
