"""Trajectory integration and cycle machinery.

Integration is the Dormand-Prince 5(4) embedded pair with PI step control and
dense output (scipy's RK45). On top of it: Poincare-section cycle location,
monodromy/Floquet multipliers, the graph-over-plane check and exponential
tracking probes.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .linalg import sym_eigen


class IntegrationError(RuntimeError):
    """Integrator failure (stiffness, step underflow, non-finite field)."""

    def __init__(self, message, t=None, x=None):
        self.t = t
        self.x = x
        super().__init__(message)


class CycleSearchError(RuntimeError):
    """Cycle location failed; .reason is one of
    'no-crossings' | 'invariance-contradiction' | 'stalled'."""

    def __init__(self, message, reason, iterates=None):
        self.reason = reason
        self.iterates = iterates
        super().__init__(message)


@dataclass
class Trajectory:
    """Dense solution of one integration: samples plus per-step interpolants."""

    t: np.ndarray
    x: np.ndarray  # shape (len(t), n)
    sol: object  # scipy OdeSolution
    t_events: list | None = None

    def __call__(self, t):
        out = self.sol(np.asarray(t, dtype=float))
        return out.T if out.ndim == 2 else out

    @property
    def final(self):
        return self.x[-1]

    @property
    def t_final(self):
        return float(self.t[-1])


def _check_tols(tol_rel, tol_abs):
    for tol in (tol_rel, tol_abs):
        if not (1e-12 <= tol <= 1e-3):
            raise ValueError(f"tolerance {tol:g} outside [1e-12, 1e-3]")


def integrate(sys, x0, t_span, tol_rel=1e-9, tol_abs=1e-12, events=None,
              max_step=np.inf):
    """Integrate the system with the RK 5(4) pair; dense output always on."""
    _check_tols(tol_rel, tol_abs)
    x0 = np.asarray(x0, dtype=float)

    def rhs(t, x):
        dx = sys.f(x)
        if not np.all(np.isfinite(dx)):
            raise IntegrationError("field returned a non-finite value", t=t, x=x)
        return dx

    res = solve_ivp(rhs, t_span, x0, method="RK45", rtol=tol_rel, atol=tol_abs,
                    dense_output=True, events=events, max_step=max_step)
    if res.status == -1:
        raise IntegrationError(
            f"integration failed at t = {res.t[-1]:.6g}: {res.message}",
            t=res.t[-1], x=res.y[:, -1],
        )
    return Trajectory(t=res.t, x=res.y.T, sol=res.sol, t_events=res.t_events)


@dataclass
class CycleInfo:
    """A located closed orbit with its stability data."""

    anchor: np.ndarray
    period: float
    t_samples: np.ndarray
    samples: np.ndarray  # shape (n_samples, n)
    multipliers: np.ndarray  # complex, sorted by descending modulus
    stable: bool
    verdict: str  # 'stable' | 'marginal' | 'unstable'
    period_lower_bound: float
    closure_error: float
    section_normal: np.ndarray
    section_point: np.ndarray
    graph_check_ok: bool | None = None
    monodromy_matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def trivial_multiplier_error(self):
        return float(np.min(np.abs(self.multipliers - 1.0)))

    def resample(self, sys, n_samples, tol_rel=1e-9, tol_abs=1e-12):
        """Re-sample the orbit at a different density from the anchor."""
        traj = integrate(sys, self.anchor, (0.0, self.period), tol_rel, tol_abs)
        ts = np.linspace(0.0, self.period, n_samples, endpoint=False)
        return ts, traj(ts)


def _section_basis(normal):
    """Orthonormal basis of the hyperplane orthogonal to the normal."""
    n = normal.size
    M = np.eye(n) - np.outer(normal, normal)
    # columns of an orthonormal basis via QR of the projected identity
    q, r = np.linalg.qr(M)
    cols = [q[:, j] for j in range(n) if abs(r[j, j]) > 1e-8]
    return np.stack(cols[: n - 1], axis=-1)


def _first_return(sys, x0, normal, point, t_cap, tol_rel, tol_abs, t_skip):
    """Integrate until the first positive oriented crossing of the section.

    The start typically lies exactly on the section, so a short unarmed
    pre-advance keeps the event from firing at t = 0.
    """

    def event(t, x):
        return float(normal @ (x - point))

    event.direction = 1.0
    event.terminal = True
    pre = integrate(sys, x0, (0.0, t_skip), tol_rel, tol_abs)
    traj = integrate(sys, pre.final, (0.0, t_cap), tol_rel, tol_abs, events=[event])
    te = traj.t_events[0]
    if te.size == 0:
        return None, None
    t_ret = float(te[0])
    return traj(t_ret), t_skip + t_ret


@dataclass
class CycleSettings:
    tol_rel: float = 1e-9
    tol_abs: float = 1e-12
    transient_factor: float = 50.0
    transient_cap: float = 1e4
    max_returns: int = 256
    n_samples: int = 2048
    return_tol_factor: float = 1e-8  # convergence: step < factor * diam
    lipschitz_k: float | None = None  # K of the nonlinearity; estimated if None
    section_delay: float = 0.0  # extra time past the transient before anchoring


def locate_cycle(sys, dom, x_s, settings=None):
    """Find the stable cycle spiralling off the unstable equilibrium x_s.

    Steps: leave x_s along its most unstable eigendirection, run a transient,
    anchor a Poincare section at the late-time point with the flow direction
    as normal, iterate the first-return map until returns settle, then polish
    the fixed point with a Broyden solve on section coordinates.
    """
    st = settings or CycleSettings()
    x_s = np.asarray(x_s, dtype=float)

    K = st.lipschitz_k
    if K is None:
        from .lipschitz import estimate_lipschitz
        K = estimate_lipschitz(sys, dom, grid=9, refine_levels=1).K
    lam = sym_eigen(sys.A).eigenvalues
    K1 = float(lam[-1] + K)
    period_bound = 2.0 * math.pi / K1

    evals, evecs = np.linalg.eig(sys.jac_f(x_s))
    lead = int(np.argmax(evals.real))
    v = np.real(evecs[:, lead])
    if np.linalg.norm(v) < 1e-12:
        v = np.abs(evecs[:, lead])
    v = v / np.linalg.norm(v)
    delta = 1e-3 * dom.diameter
    x0 = x_s + delta * v
    if not dom.contains(x0):
        x0 = x_s - delta * v

    horizon = min(st.transient_factor * period_bound, st.transient_cap)
    if st.section_delay > 0.0:
        horizon += st.section_delay
    traj = integrate(sys, x0, (0.0, horizon), st.tol_rel, st.tol_abs)
    p_ref = traj.final

    fref = sys.f(p_ref)
    nf = np.linalg.norm(fref)
    # a genuine cycle moves at a speed comparable to K1 * (orbit size); a
    # vanishing field at the anchor means the flow collapsed onto a stable
    # equilibrium and there is no cycle to section
    if nf <= 1e-9 * K1 * dom.diameter:
        raise CycleSearchError("transient ended at an equilibrium", "no-crossings")
    normal = fref / nf

    # per-return integration cap: generous, grown on demand
    t_cap = max(200.0 * period_bound, 4.0 * horizon)
    t_skip = 1e-3 * period_bound
    step_tol = st.return_tol_factor * dom.diameter

    returns = [p_ref]
    times = []
    point = p_ref
    converged = False
    for _ in range(st.max_returns):
        nxt, t_ret = _first_return(sys, point, normal, p_ref, t_cap,
                                   st.tol_rel, st.tol_abs, t_skip)
        if nxt is None:
            if len(returns) == 1:
                raise CycleSearchError(
                    f"no section crossings within horizon {t_cap:g}", "no-crossings")
            break
        if not dom.contains(nxt, tol=1e-6 * dom.diameter):
            raise CycleSearchError(
                "return map left the domain (invariance contradiction)",
                "invariance-contradiction", iterates=returns)
        returns.append(nxt)
        times.append(t_ret)
        if np.linalg.norm(returns[-1] - returns[-2]) < step_tol:
            converged = True
            break
        point = nxt
    if not converged:
        raise CycleSearchError(
            f"return iterates did not settle after {len(times)} returns",
            "stalled", iterates=returns)

    if times[-1] < 0.5 * period_bound:
        # a genuine cycle cannot return faster than the Lipschitz period
        # bound; sub-bound "returns" are numerical artifacts (e.g. the flow
        # collapsing onto an equilibrium sitting on the section)
        raise CycleSearchError(
            f"return time {times[-1]:.3g} is below the period bound "
            f"{period_bound:.3g}; no cycle found", "no-crossings",
            iterates=returns)

    anchor, period = _broyden_polish(
        sys, returns[-1], normal, p_ref, t_cap, t_skip, st)

    closure = float(np.linalg.norm(
        integrate(sys, anchor, (0.0, period), st.tol_rel, st.tol_abs).final - anchor))

    ts = np.linspace(0.0, period, st.n_samples, endpoint=False)
    loop = integrate(sys, anchor, (0.0, period), st.tol_rel, st.tol_abs)
    samples = loop(ts)

    mono = monodromy_from_anchor(sys, anchor, period, st.tol_rel, st.tol_abs)
    multipliers = mono.multipliers
    nontrivial = np.delete(np.abs(multipliers),
                           int(np.argmin(np.abs(multipliers - 1.0))))
    if np.all(nontrivial < 1.0 - 1e-4):
        verdict = "stable"
    elif np.all(nontrivial <= 1.0 + 1e-4):
        verdict = "marginal"
    else:
        verdict = "unstable"

    return CycleInfo(
        anchor=anchor, period=period, t_samples=ts, samples=samples,
        multipliers=multipliers, stable=(verdict == "stable"), verdict=verdict,
        period_lower_bound=period_bound, closure_error=closure,
        section_normal=normal, section_point=p_ref,
        monodromy_matrix=mono.matrix,
    )


def _broyden_polish(sys, x_star, normal, point, t_cap, t_skip, st):
    """Broyden solve of R(x) - x = 0 restricted to the section hyperplane."""
    B = _section_basis(normal)
    base = x_star

    def residual(xi):
        x = base + B @ xi
        nxt, t_ret = _first_return(sys, x, normal, point, t_cap,
                                   st.tol_rel, st.tol_abs, t_skip)
        if nxt is None:
            raise CycleSearchError("lost the section during polish", "stalled")
        return B.T @ (nxt - x), t_ret

    m = B.shape[1]
    xi = np.zeros(m)
    g, t_ret = residual(xi)
    target = 1e-9 * (1.0 + np.linalg.norm(base))
    if np.linalg.norm(g) <= target:
        return base + B @ xi, t_ret
    # finite-difference Jacobian once, then Broyden updates
    h = max(1e-7 * (1.0 + np.linalg.norm(base)), 1e-10)
    J = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        gj, _ = residual(xi + e)
        J[:, j] = (gj - g) / h
    for _ in range(25):
        try:
            step = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            break
        xi_new = xi + step
        g_new, t_ret = residual(xi_new)
        denom = step @ step
        if denom > 0:
            J += np.outer(g_new - g, step) / denom
        xi, g = xi_new, g_new
        if np.linalg.norm(g) <= target:
            break
    return base + B @ xi, t_ret


@dataclass
class MonodromyResult:
    matrix: np.ndarray
    multipliers: np.ndarray  # sorted by descending modulus
    trace_integral: float  # integral of trace f'(x(t)) over one period

    @property
    def liouville_determinant(self):
        return math.exp(self.trace_integral)


def monodromy_from_anchor(sys, anchor, period, tol_rel=1e-9, tol_abs=1e-12):
    """Integrate the variational equation Psi' = f'(x) Psi over one period."""
    _check_tols(tol_rel, tol_abs)
    n = sys.n
    s0 = np.concatenate([np.asarray(anchor, float), np.eye(n).ravel(), [0.0]])

    def rhs(t, s):
        x = s[:n]
        Psi = s[n:-1].reshape(n, n)
        J = sys.jac_f(x)
        return np.concatenate([sys.f(x), (J @ Psi).ravel(), [np.trace(J)]])

    res = solve_ivp(rhs, (0.0, period), s0, method="RK45",
                    rtol=tol_rel, atol=tol_abs)
    if res.status != 0:
        raise IntegrationError(f"variational integration failed: {res.message}")
    M = res.y[n:-1, -1].reshape(n, n)
    mults = np.linalg.eigvals(M)
    order = np.argsort(-np.abs(mults))
    return MonodromyResult(matrix=M, multipliers=mults[order],
                           trace_integral=float(res.y[-1, -1]))


def liouville_check(sys, anchor, period, tol_rel=1e-9, tol_abs=1e-12,
                    n_segments=None):
    """Compare log det of the monodromy against the trace integral.

    The determinant of the fundamental matrix can under/overflow doubles on
    strongly contracting cycles, so the product is accumulated as a sum of
    per-segment log-determinants, with enough segments that each factor stays
    well conditioned. Returns (log_det, trace_integral, rel_error) where
    rel_error = |exp(log_det - trace_integral) - 1| is the relative
    determinant discrepancy.
    """
    _check_tols(tol_rel, tol_abs)
    n = sys.n

    def tr_rhs(t, s):
        return np.concatenate([sys.f(s[:n]), [np.trace(sys.jac_f(s[:n]))]])

    res = solve_ivp(tr_rhs, (0.0, period), np.concatenate([anchor, [0.0]]),
                    method="RK45", rtol=tol_rel, atol=tol_abs, dense_output=True)
    if res.status != 0:
        raise IntegrationError(f"trace integration failed: {res.message}")
    trace_integral = float(res.y[-1, -1])

    if n_segments is None:
        n_segments = max(1, math.ceil(abs(trace_integral) / 10.0))
    bounds = np.linspace(0.0, period, n_segments + 1)
    log_det = 0.0
    for a, b in zip(bounds[:-1], bounds[1:]):
        x0 = res.sol(a)[:n]
        seg = monodromy_from_anchor(sys, x0, b - a, tol_rel, tol_abs)
        sign, ld = np.linalg.slogdet(seg.matrix)
        if sign <= 0.0:
            raise IntegrationError(
                "segment monodromy determinant non-positive; shorten segments")
        log_det += float(ld)
    rel_error = abs(math.expm1(log_det - trace_integral))
    return log_det, trace_integral, rel_error


def monodromy(sys, cycle, tol_rel=1e-9, tol_abs=1e-12):
    """Monodromy matrix and Floquet multipliers of a located cycle."""
    closure_bound = 1e-7 * (1.0 + np.linalg.norm(cycle.anchor))
    if cycle.closure_error > closure_bound:
        raise ValueError(
            f"cycle closure error {cycle.closure_error:.3e} exceeds {closure_bound:.3e}")
    return monodromy_from_anchor(sys, cycle.anchor, cycle.period, tol_rel, tol_abs)


def graph_property_check(cycle, spectrum, m=2, tol=1e-6, max_pairs_samples=1024,
                         change=None):
    """Check the orbit is a (Lipschitz-1) graph over the slow eigenplane.

    For all sample pairs p, p' the component orthogonal to the span of the
    first m eigenvectors must not exceed the in-plane component. If a change
    of variables is given, samples are mapped into those coordinates first.
    """
    if cycle.samples.shape[0] < 256:
        raise ValueError("graph check needs at least 256 orbit samples")
    samples = cycle.samples
    if change is not None:
        samples = samples @ change.C_inv.T
    if samples.shape[0] > max_pairs_samples:
        idx = np.linspace(0, samples.shape[0] - 1, max_pairs_samples).astype(int)
        samples = samples[idx]
    V = spectrum.eigenvectors
    P = V[:, :m] @ V[:, :m].T
    Q = np.eye(V.shape[0]) - P
    worst = 0.0
    ok = True
    N = samples.shape[0]
    for i in range(N - 1):
        d = samples[i + 1 :] - samples[i]
        pn = np.linalg.norm(d @ P.T, axis=1)
        qn = np.linalg.norm(d @ Q.T, axis=1)
        mask = pn > 0
        if np.any(qn[~mask] > 0):
            ok = False
            worst = np.inf
            continue
        if not np.any(mask):
            continue
        r = (qn[mask] / pn[mask]).max()
        worst = max(worst, float(r))
        if r > 1.0 + tol:
            ok = False
    return ok, worst


def _distance_to_polyline(points, orbit):
    """Min distance from each point to the closed polyline through orbit samples."""
    a = orbit
    b = np.roll(orbit, -1, axis=0)
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0.0] = 1.0
    out = np.empty(points.shape[0])
    for i, p in enumerate(points):
        ap = p - a
        t = np.clip(np.einsum("ij,ij->i", ap, ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        out[i] = np.sqrt(((p - proj) ** 2).sum(axis=1).min())
    return out


@dataclass
class TrackingResult:
    rates: list
    converged: list  # per probe: final distance below the convergence bound
    stray: int  # probes that never came near the orbit (other attractors?)

    @property
    def rate(self):
        good = [r for r in self.rates if r is not None]
        return float(np.mean(good)) if good else math.nan


def exponential_tracking_probe(sys, dom, cycle, n_probes=8, horizon=30.0,
                               seed=0, starts=None, tol_rel=1e-9, tol_abs=1e-12,
                               n_times=600):
    """Fit the exponential decay rate of the distance to the located orbit."""
    rng = np.random.default_rng(seed)
    if starts is None:
        starts = dom.sample(rng, n_probes)
    orbit = cycle.samples
    scale = float(np.mean(np.linalg.norm(orbit - orbit.mean(axis=0), axis=1)))
    conv_bound = 1e-4 * dom.diameter
    rates, converged = [], []
    stray = 0
    for x0 in np.atleast_2d(starts):
        traj = integrate(sys, x0, (0.0, horizon), tol_rel, tol_abs)
        ts = np.linspace(0.0, horizon, n_times)
        d = _distance_to_polyline(traj(ts), orbit)
        if d[-1] > conv_bound:
            stray += 1
            rates.append(None)
            converged.append(False)
            continue
        converged.append(True)
        lo, hi = 1e-3 * scale, 5e-2 * scale
        mask = (d > lo) & (d < hi)
        # restrict to the decaying tail: drop everything before the last peak
        if mask.sum() >= 8:
            idx = np.where(mask)[0]
            t_fit, d_fit = ts[idx], d[idx]
            slope = np.polyfit(t_fit, np.log(d_fit), 1)[0]
            rates.append(float(slope))
        else:
            rates.append(None)
    return TrackingResult(rates=rates, converged=converged, stray=stray)
