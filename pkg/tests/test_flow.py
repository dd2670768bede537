import math

import numpy as np
import pytest

from cyclecert import (BoxDomain, CycleSettings, OdeSystem, cell_domain,
                       cell_system, exponential_tracking_probe,
                       graph_property_check, hopf_domain, hopf_oracle,
                       integrate, liouville_check, locate_cycle, monodromy,
                       monodromy_from_anchor, satellite_domain,
                       satellite_system, sym_eigen)
from cyclecert.flow import CycleInfo, CycleSearchError


def decay_system(n=3):
    return OdeSystem(n=n, A=np.eye(n), F=lambda x: np.zeros(n),
                     jac_F=lambda x: np.zeros((n, n)))


def hopf_endpoint_error(tol_rel):
    sys_ = hopf_oracle(1.0, 1.0)
    traj = integrate(sys_, np.array([2.0, 0.0, 1.0]), (0.0, 20.0),
                     tol_rel=tol_rel, tol_abs=1e-12)
    # closed-form: r(t) = (1 + (1/r0^2 - 1) e^(-2t))^(-1/2), angle t, z = e^-t
    r0 = 2.0
    r = (1.0 + (1.0 / r0 ** 2 - 1.0) * math.exp(-40.0)) ** -0.5
    expect = np.array([r * math.cos(20.0), r * math.sin(20.0), math.exp(-20.0)])
    return np.linalg.norm(traj.final - expect)


@pytest.fixture(scope="module")
def hopf_cycle():
    sys_ = hopf_oracle(1.0, 1.0)
    return sys_, hopf_domain(), locate_cycle(sys_, hopf_domain(), np.zeros(3),
                                             CycleSettings())


def test_integrate_linear_decay():
    traj = integrate(decay_system(), np.ones(3), (0.0, 1.0), 1e-10, 1e-12)
    assert np.abs(traj.final - math.exp(-1.0)).max() <= 1e-9


def test_integrate_tolerance_validation():
    sys_ = decay_system()
    with pytest.raises(ValueError):
        integrate(sys_, np.ones(3), (0.0, 1.0), tol_rel=1e-2)
    with pytest.raises(ValueError):
        integrate(sys_, np.ones(3), (0.0, 1.0), tol_rel=1e-9, tol_abs=1e-13)


def test_integrate_hopf_closed_form():
    assert hopf_endpoint_error(1e-9) <= 1e-6


def test_integrator_high_order_regime():
    coarse = hopf_endpoint_error(1e-6)
    fine = hopf_endpoint_error(1e-9)
    assert coarse / max(fine, 1e-16) >= 8.0


def test_trajectory_monotone_time_and_continuity():
    sys_ = hopf_oracle(1.0, 1.0)
    traj = integrate(sys_, np.array([0.5, 0.0, 0.5]), (0.0, 10.0), 1e-9, 1e-12)
    assert np.all(np.diff(traj.t) > 0)
    # interpolant agrees with stored samples at the step joints
    for t, x in zip(traj.t, traj.x):
        assert np.abs(traj(t) - x).max() <= 1e-8 * (1 + np.abs(x).max())


def test_locate_cycle_hopf(hopf_cycle):
    _, _, cyc = hopf_cycle
    assert abs(cyc.period - 2 * math.pi) <= 1e-6
    assert abs(np.linalg.norm(cyc.anchor[:2]) - 1.0) <= 1e-6
    assert abs(cyc.anchor[2]) <= 1e-6
    assert cyc.stable and cyc.verdict == "stable"
    assert cyc.closure_error <= 1e-7 * (1 + np.linalg.norm(cyc.anchor))
    assert cyc.trivial_multiplier_error <= 1e-3
    assert cyc.period >= cyc.period_lower_bound
    assert cyc.samples.shape[0] >= 256


def test_locate_cycle_section_robustness(hopf_cycle):
    sys_, dom, cyc = hopf_cycle
    later = locate_cycle(sys_, dom, np.zeros(3),
                         CycleSettings(section_delay=math.pi / 2))
    assert abs(later.period - cyc.period) <= 1e-6 * cyc.period


def test_locate_cycle_no_cycle():
    sys_ = decay_system()
    dom = BoxDomain(lower=-np.ones(3), upper=np.ones(3))
    with pytest.raises(CycleSearchError):
        locate_cycle(sys_, dom, np.zeros(3), CycleSettings(max_returns=8))


def test_monodromy_hopf(hopf_cycle):
    sys_, _, cyc = hopf_cycle
    res = monodromy(sys_, cyc)
    mods = np.sort(np.abs(res.multipliers))
    expect = np.sort([1.0, math.exp(-4 * math.pi), math.exp(-2 * math.pi)])
    assert np.abs(mods - expect).max() <= 1e-4


def test_monodromy_rejects_bad_closure(hopf_cycle):
    sys_, _, cyc = hopf_cycle
    fake = CycleInfo(anchor=cyc.anchor, period=cyc.period,
                     t_samples=cyc.t_samples, samples=cyc.samples,
                     multipliers=cyc.multipliers, stable=True,
                     verdict="stable", period_lower_bound=cyc.period_lower_bound,
                     closure_error=1.0, section_normal=cyc.section_normal,
                     section_point=cyc.section_point)
    with pytest.raises(ValueError, match="closure"):
        monodromy(sys_, fake)


def test_liouville_hopf(hopf_cycle):
    sys_, _, cyc = hopf_cycle
    log_det, trace_int, rel = liouville_check(sys_, cyc.anchor, cyc.period,
                                              1e-11, 1e-12)
    assert rel <= 1e-4
    assert abs(trace_int - (-6 * math.pi)) <= 1e-6  # trace is -3 on the cycle


def test_graph_property_planar_cycle():
    spec = sym_eigen(np.diag([0.0, 0.1, 3.0]))
    ts = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    samples = np.stack([np.cos(ts), np.sin(ts), np.zeros_like(ts)], axis=-1)
    cyc = CycleInfo(anchor=samples[0], period=1.0, t_samples=ts,
                    samples=samples, multipliers=np.array([1.0 + 0j]),
                    stable=True, verdict="stable", period_lower_bound=0.1,
                    closure_error=0.0, section_normal=np.array([0, 1.0, 0]),
                    section_point=samples[0])
    ok, ratio = graph_property_check(cyc, spec, m=2)
    assert ok and ratio <= 1e-12


def test_graph_property_needs_samples():
    spec = sym_eigen(np.eye(3))
    cyc = CycleInfo(anchor=np.zeros(3), period=1.0,
                    t_samples=np.zeros(10), samples=np.zeros((10, 3)),
                    multipliers=np.array([1.0 + 0j]), stable=True,
                    verdict="stable", period_lower_bound=0.1,
                    closure_error=0.0, section_normal=np.array([1.0, 0, 0]),
                    section_point=np.zeros(3))
    with pytest.raises(ValueError, match="256"):
        graph_property_check(cyc, spec)


def test_tracking_rate_hopf(hopf_cycle):
    sys_, dom, cyc = hopf_cycle
    res = exponential_tracking_probe(sys_, dom, cyc,
                                     starts=np.array([[0.5, 0.0, 0.0]]),
                                     horizon=12.0)
    assert res.converged == [True]
    assert abs(res.rate - (-2.0)) <= 0.4  # within 20 percent


def test_tracking_probe_on_orbit(hopf_cycle):
    sys_, dom, cyc = hopf_cycle
    res = exponential_tracking_probe(sys_, dom, cyc,
                                     starts=cyc.anchor[None, :], horizon=6.0)
    assert res.converged == [True] and res.stray == 0


def test_satellite_cycle_quick():
    sys_ = satellite_system(0.05, 0.05, 2.1)
    dom = satellite_domain(0.05, 0.05, 2.1)
    from cyclecert import find_equilibria
    eq = find_equilibria(sys_, dom)[0]
    cyc = locate_cycle(sys_, dom, eq.x_s, CycleSettings(lipschitz_k=1.0))
    assert abs(cyc.period - 13.812352) <= 1e-4
    assert cyc.stable
    assert cyc.period >= 2 * math.pi / (2.1 + 1.0)
    assert all(dom.contains(p, tol=1e-9 * dom.diameter) for p in cyc.samples)


def test_cell_probes_converge_to_cycle():
    sys_ = cell_system(3.0, 0.1)
    dom = cell_domain(3.0, 0.1)
    from cyclecert import find_equilibria
    eq = find_equilibria(sys_, dom)[0]
    cyc = locate_cycle(sys_, dom, eq.x_s, CycleSettings(lipschitz_k=1.5515))
    res = exponential_tracking_probe(sys_, dom, cyc, n_probes=3,
                                     horizon=3000.0, seed=0, n_times=800)
    assert all(res.converged) and res.stray == 0
