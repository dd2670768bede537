"""End-to-end certification: run the checklist and aggregate a verdict.

The checklist, in order: (i) the box is strictly positive invariant and holds
a unique unstable equilibrium with nonzero Jacobian determinant; (ii) the
nonlinearity is real analytic on the domain (a user assertion, not machine
checkable); (iii) the eigenvalue gap of A beats twice the Lipschitz constant
of F over the domain. When all three hold, a stable limit cycle exists in the
domain and the pipeline goes on to locate it and verify its Floquet stability
and graph geometry.
"""

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from sklearn.base import BaseEstimator

from .equilibria import find_equilibria
from .flow import (CycleSearchError, CycleSettings, graph_property_check,
                   liouville_check, locate_cycle)
from .invariance import check_inward, empirical_trapping
from .lipschitz import cone_condition_check, gap_report
from .linalg import sym_eigen
from .systems import apply_change


def _plain(obj):
    """Recursively convert numpy scalars/arrays so the result is JSON-clean."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


@dataclass
class CertifyConfig:
    m: int = 2
    grid: int = 32
    refine: int = 3
    tol_rel: float = 1e-9
    tol_abs: float = 1e-12
    transient_factor: float = 50.0
    seed: int = 0
    analytic: bool | None = None  # None: take the system's own flag
    cone_check: bool = False
    cone_pairs: int = 50
    cone_horizon: float = 5.0
    samples_per_face: int = 144
    trapping_starts: int = 27
    trapping_horizon: float = 200.0
    n_samples: int = 2048
    locate: bool = True


@dataclass
class TheoremVerdict:
    """Machine-readable certification report; all fields JSON-plain."""

    overall: str  # 'certified' | 'refuted(<h>)' | 'inconclusive(<h>)'
    hypothesis_i: dict | None = None
    hypothesis_ii: dict | None = None
    hypothesis_iii: dict | None = None
    conclusion: dict | None = None
    witness: list | None = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def certify(sys, dom, config=None):
    """Run the full checklist on (sys, dom) and aggregate a TheoremVerdict."""
    cfg = config or CertifyConfig()
    notes = []

    # hypothesis (i), part 1: strict positive invariance of the box
    inv = check_inward(sys, dom, samples_per_face=cfg.samples_per_face)
    trapping = empirical_trapping(
        sys, dom, n_starts=cfg.trapping_starts, horizon=cfg.trapping_horizon,
        tol_rel=cfg.tol_rel, tol_abs=cfg.tol_abs)
    h1 = {"invariance": inv.to_dict(), "trapping_fraction": trapping}
    if inv.verdict == "fail":
        return TheoremVerdict(
            overall="refuted(i)", hypothesis_i=_plain(h1),
            witness=_plain(inv.witness),
            notes=["boundary field points outward at the witness point"])
    if trapping < 1.0:
        notes.append(
            f"empirical trapping fraction {trapping:.3f} < 1 despite inward test")

    # hypothesis (i), part 2: unique unstable equilibrium, det != 0
    eqs = find_equilibria(sys, dom)
    if not eqs:
        h1["equilibria"] = []
        return TheoremVerdict(
            overall="inconclusive(i)", hypothesis_i=_plain(h1),
            notes=notes + ["no equilibrium found by multistart Newton"])
    h1["equilibria"] = [e.to_dict() for e in eqs]
    if len(eqs) > 1:
        return TheoremVerdict(
            overall="inconclusive(i)", hypothesis_i=_plain(h1),
            notes=notes + [f"{len(eqs)} equilibria found; uniqueness fails"])
    eq = eqs[0]
    if not eq.unstable:
        return TheoremVerdict(
            overall="refuted(i)", hypothesis_i=_plain(h1),
            witness=_plain(eq.x_s),
            notes=notes + ["the unique equilibrium is not unstable"])
    if abs(eq.det) < 1e-12 * (1.0 + float(np.abs(eq.jac).max()) ** sys.n):
        return TheoremVerdict(
            overall="inconclusive(i)", hypothesis_i=_plain(h1),
            notes=notes + ["Jacobian determinant at the equilibrium is ~0"])

    # hypothesis (ii): analyticity is asserted, not computed
    analytic = sys.analytic if cfg.analytic is None else cfg.analytic
    h2 = {"analytic": bool(analytic)}
    if not analytic:
        return TheoremVerdict(
            overall="inconclusive(ii)", hypothesis_i=_plain(h1),
            hypothesis_ii=h2,
            notes=notes + ["analyticity of F not asserted"])

    # hypothesis (iii): spectral gap against the Lipschitz estimate
    change = sys.gap_change
    gap_sys = apply_change(sys, change) if change is not None else sys
    point_map = change.forward if change is not None else None
    try:
        rep = gap_report(gap_sys, dom, m=cfg.m, grid=cfg.grid,
                         refine_levels=cfg.refine, point_map=point_map)
    except ValueError as exc:
        return TheoremVerdict(
            overall="inconclusive(iii)", hypothesis_i=_plain(h1),
            hypothesis_ii=h2, notes=notes + [str(exc)])
    h3 = rep.to_dict()
    if cfg.cone_check and rep.passed:
        slack, used, skipped = cone_condition_check(
            gap_sys if change is None else sys, dom, rep,
            n_pairs=cfg.cone_pairs, horizon=cfg.cone_horizon,
            change=change, seed=cfg.seed,
            tol_rel=cfg.tol_rel, tol_abs=cfg.tol_abs)
        h3["cone_worst_slack"] = slack
        h3["cone_pairs_used"] = used
        h3["cone_pairs_skipped"] = skipped
    if not rep.passed:
        return TheoremVerdict(
            overall="refuted(iii)", hypothesis_i=_plain(h1), hypothesis_ii=h2,
            hypothesis_iii=_plain(h3), witness=[rep.margin],
            notes=notes + [
                f"gap margin {rep.margin:.6g} <= 0: spectral gap not established"])

    if not cfg.locate:
        return TheoremVerdict(
            overall="certified", hypothesis_i=_plain(h1), hypothesis_ii=h2,
            hypothesis_iii=_plain(h3),
            notes=notes + ["cycle location skipped by configuration"])

    # conclusion: locate the guaranteed cycle and verify its stability
    settings = CycleSettings(
        tol_rel=cfg.tol_rel, tol_abs=cfg.tol_abs,
        transient_factor=cfg.transient_factor, n_samples=cfg.n_samples,
        lipschitz_k=rep.K_bound)
    try:
        cycle = locate_cycle(sys, dom, eq.x_s, settings)
    except CycleSearchError as exc:
        return TheoremVerdict(
            overall="inconclusive(conclusion)", hypothesis_i=_plain(h1),
            hypothesis_ii=h2, hypothesis_iii=_plain(h3),
            notes=notes + [
                f"cycle search failed ({exc.reason}); the hypotheses hold, so "
                "tightening numerical settings should recover the cycle"])

    spec_for_graph = rep.spectrum if rep.spectrum is not None else sym_eigen(sys.A)
    graph_ok, graph_ratio = graph_property_check(
        cycle, spec_for_graph, m=cfg.m, change=change)
    cycle.graph_check_ok = graph_ok
    in_domain = all(dom.contains(p, tol=1e-9 * dom.diameter) for p in cycle.samples)

    _, _, liouville_rel = liouville_check(
        sys, cycle.anchor, cycle.period, min(cfg.tol_rel, 1e-11), cfg.tol_abs)

    concl = {
        "anchor": cycle.anchor, "period": cycle.period,
        "period_lower_bound": cycle.period_lower_bound,
        "closure_error": cycle.closure_error,
        "multipliers": [[v.real, v.imag] for v in cycle.multipliers],
        "stability": cycle.verdict, "stable": cycle.stable,
        "graph_ok": graph_ok, "graph_ratio": graph_ratio,
        "in_domain": in_domain, "liouville_rel_error": liouville_rel,
        "n_samples": int(cycle.samples.shape[0]),
    }
    ok = (cycle.stable and graph_ok and in_domain
          and cycle.period >= cycle.period_lower_bound - 1e-9
          and cycle.trivial_multiplier_error <= 1e-3)
    if not ok:
        return TheoremVerdict(
            overall="inconclusive(conclusion)", hypothesis_i=_plain(h1),
            hypothesis_ii=h2, hypothesis_iii=_plain(h3), conclusion=_plain(concl),
            notes=notes + ["a cycle was found but fails a conclusion check"])
    return TheoremVerdict(
        overall="certified", hypothesis_i=_plain(h1), hypothesis_ii=h2,
        hypothesis_iii=_plain(h3), conclusion=_plain(concl), notes=notes)


class LimitCycleCertifier(BaseEstimator):
    """Estimator-style wrapper around the certification pipeline.

    Parameters mirror CertifyConfig; fit(system, domain) runs the pipeline
    and exposes verdict_, gap_, equilibria_ and cycle_ attributes.
    """

    def __init__(self, m=2, grid=32, refine=3, tol_rel=1e-9, tol_abs=1e-12,
                 transient_factor=50.0, seed=0, analytic=None,
                 cone_check=False, n_samples=2048):
        self.m = m
        self.grid = grid
        self.refine = refine
        self.tol_rel = tol_rel
        self.tol_abs = tol_abs
        self.transient_factor = transient_factor
        self.seed = seed
        self.analytic = analytic
        self.cone_check = cone_check
        self.n_samples = n_samples

    def fit(self, system, domain):
        cfg = CertifyConfig(
            m=self.m, grid=self.grid, refine=self.refine, tol_rel=self.tol_rel,
            tol_abs=self.tol_abs, transient_factor=self.transient_factor,
            seed=self.seed, analytic=self.analytic, cone_check=self.cone_check,
            n_samples=self.n_samples)
        verdict = certify(system, domain, cfg)
        self.verdict_ = verdict
        self.gap_ = verdict.hypothesis_iii
        self.equilibria_ = (verdict.hypothesis_i or {}).get("equilibria")
        self.cycle_ = verdict.conclusion
        return self

    def predict(self, _=None):
        if not hasattr(self, "verdict_"):
            raise RuntimeError("call fit first")
        return self.verdict_.overall
