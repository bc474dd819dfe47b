from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brflow import catalog as cat
from brflow.catalog import ClassId, ClassParams, EndBehavior, InitialData
from brflow.errors import InvalidMetric, NoClosedForm, TimeOutOfRange, WrongParams
from brflow.verification import random_initial, random_params

CLOSED_FORM = (ClassId.A1, ClassId.A2, ClassId.A3, ClassId.A4, ClassId.A6, ClassId.A7ii, ClassId.A10i,
               *(c for c in ClassId if not c.is_lie_group))
IMPLICIT = (ClassId.A7i, ClassId.A8, ClassId.A9ii, ClassId.A10ii_ABgtC, ClassId.A10ii_AgtBC)


def _data(cid: ClassId, seed: int = 0):
    rng = np.random.default_rng([seed, list(ClassId).index(cid)])
    p = cat.get_spec(cid).resolve_params(random_params(cid, rng))
    return p, random_initial(cid, p, rng, equal_ab=cid is ClassId.A3)


def _span(cid, init, p):
    t0 = cat.t0_exact_eval(cid, init, p)
    return 0.9 * t0 if t0 is not None else 10.0


# -- catalog contents ------------------------------------------------------

def test_catalog_has_all_25_classes_in_order():
    ids = [s.id for s in cat.catalog()]
    assert ids == list(ClassId)
    assert len(ids) == 25


def test_lie_classes_carry_brackets_and_b_classes_do_not():
    for spec in cat.catalog():
        if spec.id.is_lie_group:
            spec.structure_constants()
        else:
            with pytest.raises(WrongParams):
                spec.structure_constants()
            assert spec.has_closed_form


def test_a7i_conserved_names():
    assert set(cat.get_spec("A7i").conserved) == {"BCD^2", "AD(B-C)"}


@pytest.mark.parametrize(
    "cid, behaviors",
    [
        ("A1", {"Trivial"}),
        ("A7i", {"Line-1", "Pancake-1", "Pancake-2", "Pancake-3", "Tube"}),
        ("A7ii", {"Line-1", "Pancake-1", "Pancake-2", "Pancake-3", "Tube"}),
        ("B10", {"Point"}),
        ("B5", {"Pancake-4"}),
    ],
)
def test_predicted_behaviors(cid, behaviors):
    assert {b.value for b in cat.get_spec(cid).predicted_behaviors} == behaviors


def test_predicted_behaviors_never_include_unresolved():
    for spec in cat.catalog():
        assert EndBehavior.Unresolved not in spec.predicted_behaviors
        assert spec.predicted_behaviors


# -- right-hand sides, conserved quantities, curvature tables -------------

@pytest.mark.parametrize(
    "cid, g, expected",
    [
        ("A4", (1, 1, 1, 1), (-1, 1, 0, -1)),
        ("A9i", (1, 1, 1, 1), (-3, -3, 1, 0)),
        ("A1", (2, 3, 5, 7), (0, 0, 0, 0)),
    ],
)
def test_rhs_examples(cid, g, expected):
    assert cat.rhs_eval(cid, None, g) == pytest.approx(expected, abs=1e-14)


def test_rhs_rejects_bad_metric_and_params():
    with pytest.raises(InvalidMetric):
        cat.rhs_eval("A4", None, (1, 0, 1, 1))
    with pytest.raises(WrongParams):
        cat.rhs_eval("A4", ClassParams(k=1.0), (1, 1, 1, 1))


@pytest.mark.parametrize(
    "cid, g, expected",
    [
        ("A7i", (2, 3, 4, 5), {"BCD^2": 300.0, "AD(B-C)": -10.0}),
        ("A4", (2, 3, 1, 5), {"AB": 6.0, "A/D": 0.4}),
    ],
)
def test_conserved_examples(cid, g, expected):
    assert cat.conserved_eval(cid, None, g) == pytest.approx(expected, rel=1e-15)


def test_a3_product_ab():
    assert cat.conserved_eval("A3", None, (2, 2, 1, 1))["AB"] == 4.0


def test_a4_curvature_table_at_unit_metric():
    k = cat.curvature_table_eval("A4", None, (1, 1, 1, 1))
    # K12, K13, K14, K23, K24, K34
    assert k == pytest.approx((0.25, 0.0, -0.75, 0.0, 0.25, 0.0), abs=1e-15)


def test_a7ii_curvature_table_at_unit_metric():
    k = cat.curvature_table_eval("A7ii", ClassParams(alpha=0.0), (1, 1, 1, 1))
    assert k == pytest.approx((-1.0, -1.0, 0.0, 0.25, 0.25, 0.25), abs=1e-15)


def test_a1_curvature_is_zero():
    assert cat.curvature_table_eval("A1", None, (1, 2, 3, 4)) == (0.0,) * 6


# -- closed forms ----------------------------------------------------------

def test_a4_closed_form_example():
    g = cat.closed_form_eval("A4", InitialData((1, 1, 5, 1)), None, 7.0 / 24.0)
    np.testing.assert_allclose(list(g), [0.5, 2.0, 5.0, 0.5], rtol=1e-14)


def test_a2_closed_form_example():
    g = cat.closed_form_eval("A2", InitialData((1, 1, 1, 12)), ClassParams(k=1.0), 0.5)
    np.testing.assert_allclose(list(g), [1, 1, 1, 6], rtol=1e-15)


def test_b4_closed_form_example():
    g = cat.closed_form_eval("B4", None, ClassParams(r1=1.0, r2=1.0), 1.0)
    np.testing.assert_allclose(list(g), [3, 3, 3, 3], rtol=1e-15)


@pytest.mark.parametrize("cid", ["A5", "A9i", "A10iii"])
def test_no_closed_form(cid):
    init = InitialData((3, 2, 1, 1))
    with pytest.raises(NoClosedForm):
        cat.closed_form_eval(cid, init, None, 0.1)


def test_a3_unequal_has_no_closed_form():
    with pytest.raises(NoClosedForm):
        cat.closed_form_eval("A3", InitialData((1, 2, 1, 1)), None, 0.01)
    assert not cat.has_exact_solution("A3", InitialData((1, 2, 1, 1)))
    assert cat.has_exact_solution("A3", InitialData((2, 2, 1, 1)))


def test_closed_form_time_range():
    init = InitialData((1, 1, 1, 1))
    with pytest.raises(TimeOutOfRange):
        cat.closed_form_eval("A4", init, None, 1.0 / 3.0)
    with pytest.raises(TimeOutOfRange):
        cat.closed_form_eval("A4", init, None, -0.1)


@pytest.mark.parametrize("cid", CLOSED_FORM + IMPLICIT, ids=lambda c: c.value)
def test_exact_solution_derivative_matches_rhs(cid):
    p, init = _data(cid)
    end = _span(cid, init, p)
    for t in np.linspace(0.05, 0.95, 20) * end:
        h = 1e-6 * end
        gp = np.array(list(cat.exact_solution(cid, init, p, t + h)))
        gm = np.array(list(cat.exact_solution(cid, init, p, t - h)))
        fd = (gp - gm) / (2 * h)
        rhs = np.array(cat.rhs_eval(cid, p, cat.exact_solution(cid, init, p, t)))
        scale = max(1.0, float(np.max(np.abs(rhs))))
        np.testing.assert_allclose(fd, rhs, atol=1e-6 * scale)


@pytest.mark.parametrize("cid", [c for c in CLOSED_FORM + IMPLICIT if cat.get_spec(c).conserved], ids=lambda c: c.value)
def test_conserved_constant_along_exact_solution(cid):
    p, init = _data(cid)
    end = _span(cid, init, p)
    ref = cat.conserved_eval(cid, p, cat.initial_metric(cid, init, p))
    for t in np.linspace(0.0, end, 25):
        val = cat.conserved_eval(cid, p, cat.exact_solution(cid, init, p, t))
        for name in ref:
            # closed forms are exact algebra; implicit ones inherit the
            # root-finder's bracket width
            tol = 1e-12 if cid in CLOSED_FORM else 1e-10
            assert val[name] == pytest.approx(ref[name], rel=tol), name


# -- implicit solutions ----------------------------------------------------

def test_a7i_equal_lambdas_is_linear():
    g = cat.implicit_solve("A7i", InitialData((4, 3, 3, 1)), None, 0.5)
    assert g.A == pytest.approx(2.0, rel=1e-13)


def test_a10ii_initial_condition_recovered():
    init = InitialData((2, 2, 1, 1))
    assert cat.derived_constants("A10ii_ABgtC", init)["Lambda"] == 0.5
    assert cat.implicit_solve("A10ii_ABgtC", init, None, 0.0).A == 2.0


def test_a8_relation_holds_at_start():
    init = InitialData((1, 1, 1, 1))
    assert cat.derived_constants("A8", init)["k"] == pytest.approx(1.0)
    assert abs(cat.implicit_residual("A8", init, None, 0.0, (1, 1, 1, 1))) <= 1e-12


@pytest.mark.parametrize("cid", IMPLICIT, ids=lambda c: c.value)
def test_implicit_relation_residual(cid):
    for seed in range(3):
        p, init = _data(cid, seed)
        end = _span(cid, init, p)
        for t in np.linspace(0.0, end, 50):
            g = cat.implicit_solve(cid, init, p, t)
            assert abs(cat.implicit_residual(cid, init, p, t, g)) <= 1e-10


def test_a9ii_d_is_constant():
    init = InitialData((1, 1, 2, 3))
    g = cat.implicit_solve("A9ii", init, ClassParams(a3=2.0), 0.1)
    assert g.D == 3.0
    assert g.A == g.B


# -- singular times --------------------------------------------------------

@pytest.mark.parametrize(
    "cid, init, params, expected",
    [
        ("A2", (1, 1, 1, 12), ClassParams(k=1.0), 1.0),
        ("A4", (1, 1, 7, 1), None, 1.0 / 3.0),
        ("A7ii", (4, 1, 1, 1), ClassParams(alpha=0.0), 1.0 / 3.0),
        ("A6", (1, 1, 1, 1), None, 1.0 / 3.0),
    ],
)
def test_t0_examples(cid, init, params, expected):
    assert cat.t0_exact_eval(cid, InitialData(init), params) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("cid", ["A1", "A10i", "B2", "B4", "B7", "B9"])
def test_immortal_classes_have_no_t0(cid):
    init = InitialData((1, 1, 1, 1)) if cid.startswith("A") else None
    assert cat.t0_exact_eval(cid, init) is None


@pytest.mark.parametrize("cid", [c for c in CLOSED_FORM + IMPLICIT], ids=lambda c: c.value)
def test_solution_degenerates_at_t0(cid):
    p, init = _data(cid)
    t0 = cat.t0_exact_eval(cid, init, p)
    if t0 is None:
        return
    g0 = np.array(cat.initial_metric(cid, init, p))
    near = np.array(list(cat.exact_solution(cid, init, p, (1 - 1e-8) * t0)))
    assert np.all(near > 0.0)
    ratio = near / g0
    assert ratio.min() < 1e-2 or ratio.max() > 1e2


# -- validation and resolution ---------------------------------------------

@pytest.mark.parametrize(
    "cid, lam, params, fragment",
    [
        ("A7ii", (1, 1, 1, 1), ClassParams(alpha=0.5), "lambda2 = (1 - alpha^2) * lambda3"),
        ("A9ii", (1, 2, 1, 1), None, "lambda1 = lambda2"),
        ("A10i", (1, 2, 1, 1), None, "lambda1 = lambda2 = lambda3"),
        ("A10iii", (3, 3, 1, 1), None, "lambda1 > lambda2 > lambda3"),
    ],
)
def test_constraint_violations_quote_the_constraint(cid, lam, params, fragment):
    with pytest.raises(WrongParams) as info:
        cat.initial_metric(cid, InitialData(lam), params)
    assert fragment in str(info.value)


def test_alpha_must_keep_lambda2_positive():
    with pytest.raises(WrongParams):
        cat.get_spec("A7ii").resolve_params(ClassParams(alpha=1.0))


def test_b6_needs_distinct_radii():
    with pytest.raises(WrongParams):
        cat.get_spec("B6").resolve_params(ClassParams(r1=1.0, r2=1.0))


@pytest.mark.parametrize(
    "name, lam, expected, perm",
    [
        ("A10", (1, 1, 1, 1), "A10i", (0, 1, 2, 3)),
        ("A10", (1, 2, 2, 1), "A10ii_ABgtC", (1, 2, 0, 3)),
        ("A10", (3, 1, 1, 1), "A10ii_AgtBC", (0, 1, 2, 3)),
        ("A10", (1, 3, 2, 1), "A10iii", (1, 2, 0, 3)),
        ("A7", (1, 1, 2, 1), "A7i", (0, 2, 1, 3)),
        ("A9", (1, 2, 1, 1), "A9i", (1, 0, 2, 3)),
    ],
)
def test_family_resolution(name, lam, expected, perm):
    r = cat.resolve_class(name, lam)
    assert r.id.value == expected
    assert r.permutation == perm
    assert sorted(r.init.lambdas) == sorted(float(x) for x in lam)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=0.1, max_value=10.0), min_size=3, max_size=3))
def test_a10_resolution_orders_coefficients(lam3):
    r = cat.resolve_class("A10", (*lam3, 1.0))
    a, b, c = r.init.lambdas[:3]
    assert a >= b >= c


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from([c for c in ClassId if c.is_lie_group]),
    st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=4, max_size=4),
    st.floats(min_value=1e-2, max_value=1e2),
)
def test_rhs_is_scale_invariant(cid, logs, lam):
    # Ric does not change under g -> lam g, so neither does dg/dt
    p = cat.get_spec(cid).resolve_params(None)
    g = np.exp(np.array(logs))
    r1 = np.array(cat.rhs_eval(cid, p, g))
    r2 = np.array(cat.rhs_eval(cid, p, lam * g))
    np.testing.assert_allclose(r2, r1, rtol=1e-9, atol=1e-12 * max(1.0, float(np.max(np.abs(r1)))))
