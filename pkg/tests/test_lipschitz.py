import csv

import numpy as np
import pytest

from cyclecert import (BoxDomain, GapReport, OdeSystem, apply_change,
                       cell_domain, cell_system, cone_condition_check,
                       estimate_lipschitz, gap_report, region_scan,
                       satellite_domain, satellite_system, sym_eigen)


def zero_system(A):
    n = A.shape[0]
    return OdeSystem(n=n, A=A, F=lambda x: np.zeros(n),
                     jac_F=lambda x: np.zeros((n, n)))


def cell_gap_inputs(k, q):
    sys_ = cell_system(k, q)
    dom = cell_domain(k, q)
    ch = sys_.gap_change
    return apply_change(sys_, ch), dom, ch.forward


def test_satellite_K_exactly_one():
    sys_ = satellite_system(0.05, 0.05, 2.1)
    dom = satellite_domain(0.05, 0.05, 2.1)
    est = estimate_lipschitz(sys_, dom, grid=8, refine_levels=1)
    assert abs(est.K - 1.0) <= 1e-10
    assert abs(est.K_bound - 1.0) <= 1e-10


def test_zero_field_K_zero():
    est = estimate_lipschitz(zero_system(np.eye(3)),
                             BoxDomain(lower=np.zeros(3), upper=np.ones(3)))
    assert est.K == 0.0


def test_grid_minimum_enforced():
    with pytest.raises(ValueError):
        estimate_lipschitz(zero_system(np.eye(2)),
                           BoxDomain(lower=np.zeros(2), upper=np.ones(2)), grid=4)


def test_K_monotone_in_refinement_and_bounded():
    gsys, dom, pmap = cell_gap_inputs(3.0, 0.1)
    prev = -np.inf
    for levels in (0, 1, 2):
        est = estimate_lipschitz(gsys, dom, grid=10, refine_levels=levels,
                                 point_map=pmap)
        assert est.K >= prev - 1e-12
        assert est.K <= est.K_bound + 1e-12
        prev = est.K


def test_gap_report_satellite():
    sys_ = satellite_system(0.05, 0.05, 2.1)
    dom = satellite_domain(0.05, 0.05, 2.1)
    rep = gap_report(sys_, dom, grid=8, refine_levels=1)
    assert abs(rep.gap - 2.05) <= 1e-12
    assert abs(rep.margin - 0.05) <= 1e-9
    assert rep.passed
    assert rep.eps_cone > 0
    assert abs(rep.lambda_cone - 1.075) <= 1e-12


def test_gap_report_rejects_degenerate_gap():
    sys_ = zero_system(np.diag([0.0, 1.0, 1.0]))
    dom = BoxDomain(lower=np.zeros(3), upper=np.ones(3))
    with pytest.raises(ValueError, match="degenerate"):
        gap_report(sys_, dom, m=2, grid=8, refine_levels=0)
    with pytest.raises(ValueError, match="out of range"):
        gap_report(sys_, dom, m=3, grid=8, refine_levels=0)


def _norm_maxima(k, q):
    # the norms peak in a narrow band near z ~ 1: sample z densely
    from cyclecert.linalg import norm_1, norm_inf
    gsys, dom, pmap = cell_gap_inputs(k, q)
    worst1 = worst_inf = 0.0
    for p in dom.grid([7, 25, 301]):
        J = gsys.jac_F(pmap(p))
        worst1 = max(worst1, norm_1(J))
        worst_inf = max(worst_inf, norm_inf(J))
    return worst1, worst_inf


def test_cell_gap_value_and_infinity_norm_bound():
    gsys, dom, pmap = cell_gap_inputs(3.0, 0.1)
    rep = gap_report(gsys, dom, grid=16, refine_levels=1, point_map=pmap)
    assert abs(rep.gap - 2.9) <= 1e-12
    assert rep.K_bound >= 1.0
    # the infinity-norm component stays below 1.209 over the whole region
    assert _norm_maxima(3.0, 0.1)[1] <= 1.209


@pytest.mark.xfail(strict=True, reason="published 1-norm bound 1.166 is not "
                   "reproducible; measured max is ~2.19")
def test_cell_one_norm_bound_published():
    assert _norm_maxima(3.0, 0.1)[0] <= 1.166


@pytest.mark.xfail(strict=True, reason="published K bound 1.187 is not "
                   "reproducible; measured K_bound is ~1.55")
def test_cell_K_bound_published():
    gsys, dom, pmap = cell_gap_inputs(3.0, 0.1)
    rep = gap_report(gsys, dom, grid=16, refine_levels=1, point_map=pmap)
    assert rep.K_bound <= 1.187


def test_K_bound_monotone_in_k_direction():
    def kb(k, q):
        gsys, dom, pmap = cell_gap_inputs(k, q)
        return estimate_lipschitz(gsys, dom, grid=14, refine_levels=1,
                                  point_map=pmap).K_bound
    assert kb(3.5, 0.1) <= kb(3.0, 0.1) + 1e-9


@pytest.mark.xfail(strict=True, reason="monotonicity fails when q grows: the "
                   "transformed Jacobian contains -q directly")
def test_K_bound_monotone_with_q_grown():
    def kb(k, q):
        gsys, dom, pmap = cell_gap_inputs(k, q)
        return estimate_lipschitz(gsys, dom, grid=14, refine_levels=1,
                                  point_map=pmap).K_bound
    assert kb(3.5, 0.6) <= kb(3.0, 0.1) + 1e-9


def test_cone_condition_satellite():
    sys_ = satellite_system(0.05, 0.05, 2.1)
    dom = satellite_domain(0.05, 0.05, 2.1)
    rep = gap_report(sys_, dom, grid=8, refine_levels=1)
    slack, used, skipped = cone_condition_check(sys_, dom, rep, n_pairs=50,
                                                horizon=5.0, seed=0)
    assert used == 50
    assert slack <= 1e-3


def test_cone_condition_cell_with_reference_constants():
    # empirical run with externally supplied cone constants (lambda, eps)
    sys_ = cell_system(3.0, 0.1)
    dom = cell_domain(3.0, 0.1)
    rep = GapReport(K=1.187, K_bound=1.187, m=2, gap=2.9, margin=2.9 - 2 * 1.187,
                    lambda_cone=1.55, eps_cone=2.9 / 2 - 1.187, passed=True,
                    spectrum=sym_eigen(sys_.A))
    slack, used, _ = cone_condition_check(sys_, dom, rep, n_pairs=50,
                                          horizon=5.0, change=sys_.gap_change,
                                          seed=0)
    assert used == 50
    assert slack <= 1e-3


def test_region_scan_satellite(tmp_path):
    out = tmp_path / "scan.csv"
    rows = region_scan("satellite",
                       [(0.05, 0.05, 2.1), (0.1, 0.1, 2.2), (1.0, 1.0, 1.0)],
                       csv_path=str(out))
    assert rows[0]["passed"] and abs(rows[0]["gap_margin"] - 0.05) <= 1e-9
    assert abs(rows[0]["instability_lhs"] - 1.00525) <= 1e-9
    assert abs(rows[0]["instability_rhs"] - 0.4675) <= 1e-9
    assert not rows[1]["passed"]  # instability fails: 1.022 < 1.08
    assert abs(rows[1]["instability_lhs"] - 1.022) <= 1e-9
    assert not rows[2]["passed"]
    with open(out, newline="") as fh:
        parsed = list(csv.DictReader(fh))
    assert len(parsed) == 3
    assert parsed[0]["passed"] == "True"


def test_region_scan_cell_k_growth():
    rows = region_scan("cell", [(3.0, 0.1), (3.5, 0.1)],
                       grid=10, refine_levels=1)
    # growing k with q fixed widens the gap and does not raise K_bound
    assert rows[1]["K_bound"] <= rows[0]["K_bound"] + 1e-9
    assert rows[1]["gap"] > rows[0]["gap"]
