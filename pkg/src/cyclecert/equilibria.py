"""Singular-point location and instability classification.

Roots of f = -Ax + F(x) come from damped-Newton multistart over a lattice of
the domain; instability is decided by the Jacobian spectrum, cross-checked for
n = 3 by the Routh-Hurwitz sign conditions.
"""

import math
from dataclasses import dataclass

import numpy as np

from .linalg import det


@dataclass(frozen=True)
class EquilibriumInfo:
    x_s: np.ndarray
    residual: float
    jac: np.ndarray
    spectrum: np.ndarray  # complex, sorted by descending real part
    det: float
    unstable: bool
    rh: tuple | None  # (a1, a2, a3) when n == 3
    unique_in_domain: bool
    basin_evidence: int  # number of Newton starts that converged to this root

    def to_dict(self):
        return {
            "x_s": self.x_s.tolist(),
            "residual": self.residual,
            "spectrum": [[v.real, v.imag] for v in self.spectrum],
            "det": self.det,
            "unstable": self.unstable,
            "rh": list(self.rh) if self.rh is not None else None,
            "unique_in_domain": self.unique_in_domain,
            "basin_evidence": self.basin_evidence,
        }


def _newton(sys, x0, dom, max_iter=100):
    x = np.asarray(x0, dtype=float)
    scale = 1.0 + np.linalg.norm(x)
    for _ in range(max_iter):
        r = sys.f(x)
        nr = np.linalg.norm(r)
        if nr <= 1e-12 * (1.0 + np.linalg.norm(x)):
            return x
        try:
            step = np.linalg.solve(sys.jac_f(x), -r)
        except np.linalg.LinAlgError:
            return None
        # line search by halving until the residual actually drops
        t = 1.0
        for _ in range(40):
            x_new = x + t * step
            if np.linalg.norm(sys.f(x_new)) < nr:
                break
            t *= 0.5
        else:
            return None
        x = x_new
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > 1e8 * scale:
            return None
    r = sys.f(x)
    if np.linalg.norm(r) <= 1e-10 * (1.0 + np.linalg.norm(x)):
        return x
    return None


def routh_hurwitz_3(jac):
    """Characteristic coefficients lambda^3 + a1 l^2 + a2 l + a3 of -jac.

    With this sign convention the matrix is Hurwitz-stable iff all a_i > 0 and
    a1 a2 > a3; it is unstable if a1 < 0 or a1 a2 - a3 < 0 or a3 < 0.
    """
    J = np.asarray(jac, dtype=float)
    if J.shape != (3, 3):
        raise ValueError("routh_hurwitz_3 needs a 3x3 matrix")
    a1 = -float(np.trace(J))
    a2 = float(
        J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
        + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1]
    )
    a3 = -det(J)
    unstable = (a1 < 0.0) or (a1 * a2 - a3 < 0.0) or (a3 < 0.0)
    return a1, a2, a3, bool(unstable)


def instability_spectrum(jac):
    """Eigenvalues of a (generally non-symmetric) Jacobian and the verdict.

    Returns (spectrum sorted by descending real part, unstable,
    count of eigenvalues with positive real part).
    """
    vals = np.linalg.eigvals(np.asarray(jac, dtype=float))
    order = np.argsort(-vals.real)
    vals = vals[order]
    n_pos = int(np.sum(vals.real > 0.0))
    return vals, bool(vals[0].real > 0.0), n_pos


def satellite_instability(mu1, mu2, mu3, g_prime_at_nu=-1.0):
    """Instability test -g'(nu) + l1 l2 l3 > (sum l)(sum pairwise products).

    Returns (unstable, lhs, rhs) with l the sorted parameters.
    """
    if not (mu1 > 0 and mu2 > 0 and mu3 > 0):
        raise ValueError("parameters must be positive")
    if not (-1.0 <= g_prime_at_nu < 0.0):
        raise ValueError("g'(nu) must lie in [-1, 0)")
    lam = sorted([mu1, mu2, mu3])
    lhs = -g_prime_at_nu + lam[0] * lam[1] * lam[2]
    rhs = (lam[0] + lam[1] + lam[2]) * (
        lam[0] * lam[1] + lam[0] * lam[2] + lam[1] * lam[2])
    return lhs > rhs, lhs, rhs


def find_equilibria(sys, dom, starts=28):
    """Damped-Newton multistart root finding over the closed box.

    Starts on an interior lattice (>= 3 per axis) plus the domain center;
    converged roots inside the closed box are deduplicated at distance
    1e-6 * diam. unique_in_domain is true when exactly one root is found.
    """
    if starts < 27:
        raise ValueError("need at least 27 starts")
    per_axis = max(3, math.ceil((starts - 1) ** (1.0 / dom.n)))
    points = [dom.center] + list(dom.interior_lattice(per_axis))
    roots = []  # list of [x, hits]
    dedup = 1e-6 * dom.diameter
    for x0 in points:
        x = _newton(sys, x0, dom)
        if x is None or not dom.contains(x, tol=dedup):
            continue
        for rec in roots:
            if np.linalg.norm(rec[0] - x) < dedup:
                rec[1] += 1
                break
        else:
            roots.append([x, 1])
    unique = len(roots) == 1
    out = []
    for x, hits in roots:
        J = sys.jac_f(x)
        spec, unstable, _ = instability_spectrum(J)
        rh = None
        if sys.n == 3:
            a1, a2, a3, rh_unstable = routh_hurwitz_3(J)
            rh = (a1, a2, a3)
            margin = min(abs(a1), abs(a1 * a2 - a3), abs(a3))
            if rh_unstable != unstable and margin > 1e-8:
                raise RuntimeError(
                    "Routh-Hurwitz and spectral instability verdicts disagree")
        out.append(EquilibriumInfo(
            x_s=x, residual=float(np.linalg.norm(sys.f(x))), jac=J,
            spectrum=spec, det=det(J), unstable=unstable, rh=rh,
            unique_in_domain=unique, basin_evidence=hits,
        ))
    out.sort(key=lambda e: -e.basin_evidence)
    return out
