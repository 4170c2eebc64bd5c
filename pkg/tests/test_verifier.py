import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from angenent import verifier as V
from angenent.geometry import MetricContext
from angenent.initializer import InitializerConstants


def _gamma_quad(u, v):
    val, _ = integrate.quad(lambda x: x ** (u - 1) * math.exp(-x), v, math.inf, epsabs=0, epsrel=1e-13, limit=200)
    return val


def test_incomplete_gamma_examples():
    assert V.incomplete_gamma(1.0, 0.0) == 1.0
    assert V.incomplete_gamma(3.5, 0.0) == math.gamma(3.5)
    assert V.incomplete_gamma(1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert V.incomplete_gamma(1.0, 1.0) == pytest.approx(_gamma_quad(1.0, 1.0), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 30.0), st.floats(0.0, 60.0))
def test_incomplete_gamma_against_mpmath(u, v):
    ref = float(mpmath.gammainc(u, v))
    got = V.incomplete_gamma(u, v)
    assert got == pytest.approx(ref, rel=1e-12, abs=1e-300)
    low = float(mpmath.gammainc(u, 0, v))
    assert V.lower_incomplete_gamma(u, v) == pytest.approx(low, rel=1e-11, abs=1e-300)


def test_incomplete_gamma_against_scipy_and_quad():
    for u, v in [(0.5, 0.3), (2.0, 5.0), (4.5, 1.2), (1.25, 9.0)]:
        got = V.incomplete_gamma(u, v)
        assert got == pytest.approx(special.gammaincc(u, v) * special.gamma(u), rel=1e-12)
        assert got == pytest.approx(_gamma_quad(u, v), rel=1e-10)


def test_incomplete_gamma_domain():
    with pytest.raises(ValueError):
        V.incomplete_gamma(0.0, 1.0)
    with pytest.raises(ValueError):
        V.incomplete_gamma(1.0, -1.0)


def test_report_pass_iff_positive_margin():
    r = V.VerificationReport.make("s", 2.0, "q", 1.0, 1.0)
    assert r.margin == 0.0 and not r.passed
    d = V.VerificationReport.make("s", 2.0, "q", 0.5, 1.0, t=0.1).as_dict()
    assert d["pass"] is True and d["lambda"] == 2.0 and d["t"] == 0.1
    assert set(V.VerificationReport.make("s", 2.0, "q", 0.5, 1.0).as_dict()) == {
        "suite", "lambda", "quantity", "lhs", "rhs", "margin", "pass"}


def test_P_less_C_examples():
    r2 = V.verify_P_less_C([2.0])[0]
    assert r2.lhs == pytest.approx(2.0, rel=1e-14)
    assert r2.rhs == pytest.approx(MetricContext(2.0).len_cylinder, rel=1e-14)
    assert r2.margin == pytest.approx(1.04, abs=5e-3)
    r4 = V.verify_P_less_C([4.0])[0]
    assert r4.lhs == pytest.approx(8.0, rel=1e-14)
    assert r4.rhs == pytest.approx(2 * math.sqrt(math.pi) * (6 / math.e) ** 1.5, rel=1e-14)
    assert r4.rhs == pytest.approx(11.62492, abs=1e-5)
    near1 = V.verify_P_less_C([1.0 + 1e-9])[0]
    assert near1.margin == pytest.approx(math.sqrt(math.pi), abs=1e-6)


def test_P_less_C_default_grid_passes():
    rows = V.verify_P_less_C()
    assert len(rows) == 3 * 380
    assert all(r.passed for r in rows)
    assert max(r.lam for r in rows) == 20.0


@pytest.mark.parametrize("lam, ab", [(7.0, (2.0, 6.0)), (1.0, (0.0, 4.0)),
                                     (3.0, (-2 + 2 * math.sqrt(2), 2 + 2 * math.sqrt(2)))])
def test_critical_points(lam, ab):
    a, b = V.critical_points(lam)
    assert a == pytest.approx(ab[0], abs=1e-15) and b == pytest.approx(ab[1], abs=1e-15)
    if lam > 1:
        fa, gb = V.critical_point_residuals(lam, InitializerConstants().M)
        assert abs(fa) < 1e-8 and abs(gb) < 1e-8


def test_base_case_lhs_examples():
    assert V.base_case_lhs(7.0) == pytest.approx(math.exp(-1) + 9 ** 3 * math.exp(-9), rel=1e-14)
    assert V.base_case_lhs(7.0) == pytest.approx(0.458, abs=5e-4)
    # 0^0 = 1 at lam = 1, and the limit from above agrees
    assert V.base_case_lhs(1.0) == pytest.approx(1 + math.exp(-4), rel=1e-15)
    assert V.base_case_lhs(1.0 + 1e-10) == pytest.approx(V.base_case_lhs(1.0), abs=1e-8)


def test_base_case_rhs_matches_quadrature():
    for lam in (1.5, 2.0, 4.0, 7.0):
        a, b = V.critical_points(lam)
        u = lam / 2
        lower, _ = integrate.quad(lambda x: x ** (u - 1) * math.exp(-x), 0, a * a / 4, epsabs=0, epsrel=1e-13)
        upper = _gamma_quad(u, b * b / 4)
        assert V.base_case_rhs(lam) == pytest.approx(2 * (lower + upper), rel=1e-10)


def test_base_case_rhs_at_two_is_below_one():
    # the stated bound RHS > 1 does not hold; frozen value from two independent routes
    assert V.base_case_rhs(2.0) == pytest.approx(0.11268, abs=1e-5)
    assert not V.verify_base_case([2.0])[1].passed


def test_base_case_grid_rejects_out_of_range():
    with pytest.raises(ValueError):
        V.verify_base_case([7.5])


def test_target_direct_threshold():
    rows = {round(r.lam, 2): r for r in V.verify_target_direct()}
    assert not rows[1.95].passed and rows[2.0].passed
    assert all(r.passed for lam, r in rows.items() if lam >= 2.0)


def test_induction_chain_consistent_above_seven():
    rows = V.verify_target_direct(np.linspace(7.05, 12.0, 100))
    assert all(r.passed for r in rows)
    grid = np.linspace(V.LAMBDA0 + 0.01, 10.0, 8)
    assert all(r.passed for r in V.verify_pointwise(grid, n_t=11))


def test_lambda0():
    assert V.LAMBDA0 == pytest.approx(6.3448, abs=5e-5)


def test_pointwise_default_passes_and_t0_is_tightest():
    rows = [r for r in V.verify_pointwise() if r.quantity == "log pointwise"]
    assert len(rows) == 7 * 101
    assert all(r.passed for r in rows)
    for lam in V.default_pointwise_grid():
        ms = [r.margin for r in rows if r.lam == lam]
        assert ms[0] <= min(ms[1:])


def test_pointwise_direct_at_ten():
    lam = 10.0
    r4, r2 = math.sqrt(2 * (lam + 3)), math.sqrt(2 * (lam + 1))
    h = lambda l, s: math.exp(-s * s / 4) * s ** l
    H = lambda l, s: h(l, s - 2) + h(l, s + 2)
    lhs = 2 * r4 * H(lam, r4)
    rhs = 2 * lam * 2 * r2 * H(lam - 2, r2)
    lo, ro = V.pointwise_sides_log(lam, 0.0)
    assert lo == pytest.approx(math.log(lhs), rel=1e-13)
    assert ro == pytest.approx(math.log(rhs), rel=1e-13)
    assert rhs > lhs


def test_pointwise_rejects_small_lambda():
    with pytest.raises(ValueError):
        V.verify_pointwise([6.0])


def test_Q_examples():
    r5 = 2 * math.sqrt(2)
    q2 = math.exp(-4 * math.sqrt(2)) * ((r5 + 2) / (r5 - 2)) ** 2
    assert V.q_value(2.0) == pytest.approx(q2, rel=1e-14)
    assert V.q_value(2.0) == pytest.approx(0.1186, abs=2e-4)
    assert V.q_value(2.0) == pytest.approx(V.q_from_derivatives(2.0), rel=1e-12)
    assert 0 < V.q_value(1.0 + 1e-9) < 1
    assert all(r.passed for r in V.verify_Q())


def test_Q_large_lambda_tends_to_one_from_below():
    # the e^-4 bound is false; 1 - Q ~ 16 / (3 r)
    for lam in (50.0, 200.0, 1000.0):
        r = V.r_index(lam + 3)
        q = V.q_value(lam)
        assert q > math.exp(-4) and q < 1
        assert (1 - q) * 3 * r / 16 == pytest.approx(1.0, abs=8 / r)


@pytest.mark.parametrize("lam", [1.5, 2.0, 3.7, 8.0, 20.0])
def test_ibp_identity(lam):
    assert V.ibp_identity_defect(lam) < 1e-10


@pytest.mark.parametrize("lam", np.linspace(V.LAMBDA0 + 0.01, 50.0, 12))
def test_concavity_window_and_gap(lam):
    assert all(V.concavity_window(lam))
    assert V.H_second_difference_min(lam) > 0
    assert V.r_gap_concave(lam)


def test_run_all_summary(tmp_path):
    rep = V.run_all()
    assert set(rep["summary"]) == {"P_less_C", "base_case", "pointwise", "Q"}
    assert rep["summary"]["base_case"]["failures"] > 0
    assert rep["passed"] is False
    p = tmp_path / "v.json"
    V.dump_json(rep, p)
    assert json.loads(p.read_text())["summary"] == json.loads(json.dumps(rep["summary"]))
