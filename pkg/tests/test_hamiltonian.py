import json

import numpy as np
import pytest

from mongehj.graph import MetricGraph, Point
from mongehj.hamiltonian import (CoercivityError, DomainError, HamiltonianSpec, audit_assumptions, eval_H,
                                 lagrangian_view, legendre_H_back, legendre_L, numeric_L, power_coefficient,
                                 sample_locus, sample_times, search_radius)

X = Point(0, 0.3)


@pytest.fixture(scope="module")
def seg():
    return MetricGraph.segment()


def test_eval_H_examples():
    assert eval_H(HamiltonianSpec.eikonal(0.0), X, 0.1, 1.0) == 1.0
    assert eval_H(HamiltonianSpec.power(a=1.0, alpha=2.0), X, 0.1, 3.0) == pytest.approx(9.0)
    assert eval_H(HamiltonianSpec.eikonal(2.0), X, 0.1, 0.0) == -2.0


def test_eval_H_rejects_negative_slope():
    with pytest.raises(DomainError):
        eval_H(HamiltonianSpec.power(), X, 0.0, -0.5)


def test_spec_validation():
    with pytest.raises(DomainError):
        HamiltonianSpec.power(alpha=1.0)
    with pytest.raises(DomainError):
        HamiltonianSpec("cubic")
    with pytest.raises(DomainError):
        HamiltonianSpec.tabulated([1, 2], [0, 1])


def test_eikonal_lagrangian():
    spec = HamiltonianSpec.eikonal(3.0)
    assert legendre_L(spec, X, 0.0, 0.5) == 3.0
    assert legendre_L(spec, X, 0.0, 2.0) == np.inf


def test_half_square_lagrangian_matches_brute_force():
    spec = HamiltonianSpec.power(a=0.5, alpha=2.0)
    p = np.arange(0, 100.0005, 0.001)
    for q in (0.0, 0.3, 1.0, 2.5, 7.0):
        brute = np.max(p * q - 0.5 * p**2)
        assert legendre_L(spec, X, 0.0, q) == pytest.approx(q**2 / 2, abs=1e-12)
        assert brute == pytest.approx(q**2 / 2, abs=1e-4)


def test_power_coefficient_closed_form():
    # L(q) = q^2 / (4 a) for alpha = 2
    assert power_coefficient(2.0, 2.0) == pytest.approx(1 / 8)
    assert power_coefficient(1.0, 3.0) == pytest.approx(2 * 3 ** -1.5)


@pytest.mark.parametrize("spec", [HamiltonianSpec.power(a="1 + x", alpha=1.5, f="sin(x)"),
                                  HamiltonianSpec.quadlin(a=2.0, b=0.5, f=1.0),
                                  HamiltonianSpec.eikonal("x*t")])
def test_L_at_zero_is_minus_H_at_zero(spec):
    x = np.array([0]), np.array([0.4])
    assert legendre_L(spec, x, 0.5, 0.0)[0] == pytest.approx(-spec.H(*x, 0.5, 0.0)[0], abs=1e-12)


def test_closed_form_agrees_with_numeric_conjugate():
    spec = HamiltonianSpec.power(a="1 + 0.5*x", alpha=3.0, f=0.2)
    q = np.linspace(0, 6, 25)
    e, s = np.zeros(25, int), np.full(25, 0.7)
    assert np.allclose(numeric_L(spec, (e, s), 0.0, q), legendre_L(spec, (e, s), 0.0, q), atol=1e-8)


def test_tabulated_L_diverges_past_final_slope():
    spec = HamiltonianSpec.tabulated([0, 1, 2, 3], [0, 1, 3, 6])
    assert legendre_L(spec, X, 0.0, 2.0) == pytest.approx(max(2 * p - h for p, h in zip([0, 1, 2, 3], [0, 1, 3, 6])))
    with pytest.raises(CoercivityError):
        legendre_L(spec, X, 0.0, 5.0)


def test_H_back_examples(seg):
    view = lagrangian_view(HamiltonianSpec.eikonal(3.0), seg)
    assert legendre_H_back(view, X, 0.0, 2.0) == pytest.approx(-1.0, abs=1e-9)
    assert legendre_H_back(view, X, 0.0, 0.0) == pytest.approx(-3.0, abs=1e-9)
    view = lagrangian_view(HamiltonianSpec.power(a=1.0, alpha=2.0), seg)
    assert legendre_H_back(view, X, 0.0, 3.0) == pytest.approx(9.0, abs=1e-4)
    assert legendre_H_back(view, X, 0.0, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_L_is_monotone_and_midpoint_convex():
    spec = HamiltonianSpec.quadlin(a=1.5, b=0.4, f=-0.3, alpha=2.5)
    q = np.linspace(0, 8, 401)
    e, s = np.zeros_like(q, dtype=int), np.full_like(q, 0.2)
    L = legendre_L(spec, (e, s), 0.0, q)
    assert np.all(np.diff(L) >= -1e-12)
    assert np.all(L[1:-1] <= (L[:-2] + L[2:]) / 2 + 1e-12)


def test_power_audit_passes_everything(seg):
    audit = audit_assumptions(HamiltonianSpec.power(a=1.0, alpha=2.0), seg)
    for name in ("H1", "coercivity", "H2", "H3", "H4", "H5"):
        assert audit.verdicts[name].passed, name
    assert audit.route == "general"
    assert audit.constants["L0"] == pytest.approx(0.0, abs=1e-12)
    assert audit.constants["L1"] == pytest.approx(0.25, abs=1e-12)


def test_eikonal_audit_routes_to_eikonal(seg):
    audit = audit_assumptions(HamiltonianSpec.eikonal(0.0), seg)
    assert audit.verdicts["H1"].passed
    cv = audit.verdicts["coercivity"]
    assert cv.passed is False and "eikonal route required" in cv.detail
    assert all(v == pytest.approx(1.0) for _, v in audit.coercivity_profile)
    assert audit.route == "eikonal"


def test_nonconvex_table_fails_H1_with_triple_witness(seg):
    audit = audit_assumptions(HamiltonianSpec.tabulated([0, 1, 2, 3], [0, 2, 2.5, 5]), seg)
    h1 = audit.verdicts["H1"]
    assert h1.passed is False
    assert len(h1.witness["p"]) == 3 and len(h1.witness["H"]) == 3
    p, H = h1.witness["p"], h1.witness["H"]
    # the middle value sits above the chord
    assert H[1] > H[0] + (H[2] - H[0]) * (p[1] - p[0]) / (p[2] - p[0])
    assert audit.route is None
    assert audit.repairs


def test_time_jump_fails_H5(seg):
    spec = HamiltonianSpec.power(f="where(t < 0.5, 0, 1)")
    audit = audit_assumptions(spec, seg)
    assert audit.verdicts["H5"].passed is False
    assert audit.verdicts["H5"].witness is not None
    assert audit.route is None


def test_audit_report_serializes(seg):
    audit = audit_assumptions(HamiltonianSpec.power(a="1 + x", alpha=2.0, f="0.1*x"), seg)
    obj = json.loads(json.dumps(audit.to_json(), default=float))
    assert set(obj["constants"]) >= {"L0", "L1", "R"}
    assert obj["verdicts"]["H1"]["pass"] is True


def test_audit_rejects_tiny_samples(seg):
    with pytest.raises(DomainError):
        audit_assumptions(HamiltonianSpec.power(), seg, per_edge=2)


def test_search_radius_examples(seg):
    view = lagrangian_view(HamiltonianSpec.power(a=0.25, alpha=2.0), seg)  # L(q) = q^2
    assert search_radius(view, 1.0) == pytest.approx(1 + 5**0.5, abs=1e-8)
    assert search_radius(view, 0.0) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(DomainError, match="use unit radius"):
        search_radius(lagrangian_view(HamiltonianSpec.eikonal(0.0), seg), 1.0)


def test_view_bounds_and_envelope(seg):
    spec = HamiltonianSpec.power(a="1 + x", alpha=2.0, f="0.3*sin(4*x)")
    view = lagrangian_view(spec, seg)
    # the guarantee covers a 10x denser verification grid
    e, s = sample_locus(seg, 39)
    for t in sample_times(spec.T, 90):
        assert np.all(np.abs(spec.L(e, s, t, np.zeros(len(e)))) <= view.L0 + 1e-12)
        assert np.all(np.abs(spec.L(e, s, t, np.ones(len(e)))) <= view.L1 + 1e-12)
    q = np.geomspace(1e-3, 1e3, 300)
    for x in np.linspace(0, 1, 11):
        L = spec.L(np.zeros_like(q, dtype=int), np.full_like(q, x), 0.0, q)
        assert np.all(L >= view.m(q) - 1e-9)


def test_spec_json_round_trip():
    spec = HamiltonianSpec.quadlin(a="1 + x", b=0.5, f="t", alpha=3.0, T=2.0)
    back = HamiltonianSpec.from_json(spec.to_json())
    x = np.array([0]), np.array([0.4])
    assert back.H(*x, 0.3, 2.0) == pytest.approx(spec.H(*x, 0.3, 2.0))
