"""Lipschitz-constant estimation, spectral-gap reports, cone checks and
parameter-region scans.

K estimates are grid maxima of the spectral norm of the nonlinearity's
Jacobian with local refinement around the running argmax; K_bound is the
companion sqrt(norm_1 * norm_inf) bound evaluated on the same points. Grid
sampling is a desk computation, not a rigorous maximum; density and number of
refinement rounds are knobs.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .linalg import norm_1, norm_2, norm_inf, sym_eigen
from .systems import BoxDomain


@dataclass(frozen=True)
class LipschitzEstimate:
    K: float
    K_bound: float
    argmax: np.ndarray  # in the coordinates the Jacobian was evaluated at
    grid: int
    refine_levels: int


def _eval_max(sys, points, point_map):
    best_K, best_Kb, arg = -math.inf, -math.inf, None
    for p in points:
        x = point_map(p) if point_map is not None else p
        J = np.asarray(sys.jac_F(x), dtype=float)
        if not np.all(np.isfinite(J)):
            raise ValueError(f"Jacobian has non-finite entries at {list(x)}")
        s2 = norm_2(J)
        if s2 > best_K:
            best_K, arg = s2, x
        kb = math.sqrt(norm_1(J) * norm_inf(J))
        best_Kb = max(best_Kb, kb)
    return best_K, best_Kb, arg


def estimate_lipschitz(sys, dom, grid=32, refine_levels=3, point_map=None):
    """Max of ||F'||_2 over the closed box, with local grid refinement.

    point_map, if given, maps each lattice point of dom before evaluating the
    Jacobian — used when the maximization domain is a linear image of a box.
    """
    if grid < 8:
        raise ValueError("grid must be at least 8 points per axis")
    pts = dom.grid(grid)
    K, Kb, arg = _eval_max(sys, pts, point_map)
    half = (dom.upper - dom.lower) / (grid - 1)
    # argmax of the raw grid in *domain* coordinates drives the refinement
    arg_dom = pts[np.argmin([np.linalg.norm((point_map(p) if point_map else p) - arg)
                             for p in pts])] if point_map is not None else arg
    for _ in range(refine_levels):
        lo = np.maximum(dom.lower, arg_dom - half)
        hi = np.minimum(dom.upper, arg_dom + half)
        sub = BoxDomain(lower=lo, upper=hi)
        # factor-4 density relative to the cell being zoomed
        pts = sub.grid(9)
        K2, Kb2, arg2 = _eval_max(sys, pts, point_map)
        if K2 > K:
            K = K2
            arg = arg2
            arg_dom = pts[np.argmin(
                [np.linalg.norm((point_map(p) if point_map else p) - arg2) for p in pts]
            )] if point_map is not None else arg2
        Kb = max(Kb, Kb2)
        half = half / 4.0
    return LipschitzEstimate(K=float(K), K_bound=float(Kb), argmax=np.asarray(arg),
                             grid=grid, refine_levels=refine_levels)


@dataclass(frozen=True)
class GapReport:
    """Spectral gap of A against the Lipschitz data of F over the domain."""

    K: float
    K_bound: float
    m: int
    gap: float
    margin: float  # gap - 2*K_bound (the verdict margin)
    lambda_cone: float
    eps_cone: float
    passed: bool
    spectrum: object = None  # SymSpectrum of A

    def to_dict(self):
        return {
            "K": self.K, "K_bound": self.K_bound, "m": self.m, "gap": self.gap,
            "margin": self.margin, "lambda_cone": self.lambda_cone,
            "eps_cone": self.eps_cone, "passed": self.passed,
        }


def gap_report(sys, dom, m=2, grid=32, refine_levels=3, point_map=None):
    """Check lambda_{m+1} - lambda_m > 2K with K the grid estimate over dom.

    The pass verdict uses the conservative K_bound; both K and K_bound are
    reported. The cone parameters are lambda = (l_{m+1}+l_m)/2 and
    eps = (l_{m+1}-l_m)/2 - K_bound.
    """
    spec = sym_eigen(sys.A)
    lam = spec.eigenvalues
    if not (1 <= m < sys.n):
        raise ValueError(f"gap index m={m} out of range for n={sys.n}")
    gap = float(lam[m] - lam[m - 1])
    if gap <= 0.0:
        raise ValueError(
            f"degenerate gap: lambda_{m} = lambda_{m + 1} = {lam[m]:.6g}")
    est = estimate_lipschitz(sys, dom, grid=grid, refine_levels=refine_levels,
                             point_map=point_map)
    margin = gap - 2.0 * est.K_bound
    return GapReport(
        K=est.K, K_bound=est.K_bound, m=m, gap=gap, margin=margin,
        lambda_cone=float(0.5 * (lam[m] + lam[m - 1])),
        eps_cone=float(0.5 * gap - est.K_bound),
        passed=bool(margin > 0.0), spectrum=spec,
    )


def cone_condition_check(sys, dom, report, n_pairs=50, horizon=5.0, change=None,
                         seed=0, n_times=1024, tol_rel=1e-9, tol_abs=1e-12):
    """Empirical check of dV/dt + 2*lambda*V + eps*||w||^2 <= slack on pairs.

    V(w) = ||Q w||^2 - ||P w||^2 with P/Q the projectors onto the slow/fast
    eigenvector spans. Trajectory pairs start at random points of dom; if a
    change of variables is given, the quadratic form is evaluated in the new
    coordinates (where the gap estimate holds). Pairs that leave the domain
    before the horizon are skipped and counted.

    Returns (worst_slack, n_used, n_skipped).
    """
    from .flow import integrate

    spec = report.spectrum if report.spectrum is not None else sym_eigen(sys.A)
    m = report.m
    n = sys.n
    P = spec.projector(range(m))
    Q = np.eye(n) - P
    lam = report.lambda_cone
    eps = report.eps_cone

    rng = np.random.default_rng(seed)
    ts = np.linspace(0.0, horizon, n_times)
    dt = ts[1] - ts[0]
    worst = -math.inf
    used = skipped = 0
    while used < n_pairs and used + skipped < 8 * n_pairs:
        x0, y0 = dom.sample(rng, 2)
        tx = integrate(sys, x0, (0.0, horizon), tol_rel, tol_abs)
        ty = integrate(sys, y0, (0.0, horizon), tol_rel, tol_abs)
        X, Y = tx(ts), ty(ts)
        inside = all(dom.contains(p, tol=1e-9) for p in X) and \
            all(dom.contains(p, tol=1e-9) for p in Y)
        if not inside:
            skipped += 1
            continue
        W = X - Y
        if change is not None:
            W = W @ change.C_inv.T
        V = np.einsum("ij,ij->i", W @ Q.T, W @ Q.T) - \
            np.einsum("ij,ij->i", W @ P.T, W @ P.T)
        nrm2 = np.einsum("ij,ij->i", W, W)
        dV = (V[2:] - V[:-2]) / (2.0 * dt)
        expr = dV + 2.0 * lam * V[1:-1] + eps * nrm2[1:-1]
        scale = max(nrm2.max(), 1e-300)
        worst = max(worst, float(expr.max() / scale))
        used += 1
    if used == 0:
        raise RuntimeError("cone check: every sampled pair left the domain")
    return worst, used, skipped


def satellite_region_predicates(mu1, mu2, mu3):
    """Gap and instability margins for the satellite family with the default g.

    Gap margin: (l3 - l2) - 2 (K = 1 for the admissible class).
    Instability margin: (-g'(nu) + l1 l2 l3) - (sum l)(sum pairwise) with
    g'(nu) = -1 for the default g.
    """
    lam = sorted([mu1, mu2, mu3])
    gap_margin = (lam[2] - lam[1]) - 2.0
    lhs = 1.0 + lam[0] * lam[1] * lam[2]
    rhs = sum(lam) * (lam[0] * lam[1] + lam[0] * lam[2] + lam[1] * lam[2])
    return {
        "gap_margin": gap_margin,
        "instability_lhs": lhs,
        "instability_rhs": rhs,
        "instability_margin": lhs - rhs,
        "passed": gap_margin > 0.0 and lhs > rhs,
    }


def cell_region_predicates(k, q, T=10.0, L=1e6, grid=16, refine_levels=2):
    """Gap and instability margins for the cell family at (k, q)."""
    from .equilibria import find_equilibria
    from .systems import apply_change, cell_domain, cell_system

    try:
        sys = cell_system(k, q, T=T, L=L)
        dom = cell_domain(k, q, T=T, L=L)
    except Exception as exc:  # inadmissible parameters are data, not errors
        return {"error": str(exc), "passed": False}
    changed = apply_change(sys, sys.gap_change)
    point_map = sys.gap_change.forward
    rep = gap_report(changed, dom, m=2, grid=grid, refine_levels=refine_levels,
                     point_map=point_map)
    eqs = find_equilibria(sys, dom)
    unstable = bool(eqs) and eqs[0].unstable
    return {
        "K_bound": rep.K_bound,
        "gap": rep.gap,
        "gap_margin": rep.margin,
        "unstable": unstable,
        "passed": rep.passed and unstable,
    }


def region_scan(family, grid_values, csv_path=None, **family_kwargs):
    """Evaluate the certification predicates of a model family over a grid.

    family: 'satellite' (grid_values: iterable of (mu1, mu2, mu3)) or
    'cell' (iterable of (k, q)). Returns a list of row dicts and optionally
    writes them as CSV.
    """
    rows = []
    for point in grid_values:
        if family == "satellite":
            rec = satellite_region_predicates(*point)
            rec = {"mu1": point[0], "mu2": point[1], "mu3": point[2], **rec}
        elif family == "cell":
            rec = cell_region_predicates(*point, **family_kwargs)
            rec = {"k": point[0], "q": point[1], **rec}
        else:
            raise ValueError(f"unknown model family {family!r}")
        rows.append(rec)
    if csv_path is not None:
        fields = sorted({k for r in rows for k in r},
                        key=lambda k: (k in ("passed", "error"), k))
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            w.writerows(rows)
    return rows
