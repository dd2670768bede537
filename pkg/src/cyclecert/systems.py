"""ODE systems split as xdot = -A x + F(x), with the built-in models.

An OdeSystem carries the symmetric linear part A, the nonlinearity F and its
Jacobian. The split is what the whole certification pipeline keys on: the
eigenvalue gap of A against the Lipschitz constant of F decides whether the
final dynamics live on a two-dimensional invariant surface.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import check_symmetric, norm_2


class ModelError(ValueError):
    """Raised when model parameters or supplied functions are inadmissible."""


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned open box, the candidate strictly positive invariant set."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower/upper must be vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if not np.all(lo < hi):
            raise ValueError("box must have nonempty interior (lower < upper)")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n(self):
        return self.lower.size

    @property
    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def strictly_contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > self.lower) and np.all(x < self.upper))

    def grid(self, counts):
        """Closed lattice including the boundary, counts points per axis."""
        counts = np.broadcast_to(np.asarray(counts, dtype=int), (self.n,))
        axes = [np.linspace(self.lower[i], self.upper[i], counts[i]) for i in range(self.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def interior_lattice(self, per_axis):
        """Lattice strictly inside the box, per_axis points per axis."""
        fr = (np.arange(per_axis) + 1.0) / (per_axis + 1.0)
        axes = [self.lower[i] + fr * (self.upper[i] - self.lower[i]) for i in range(self.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def sample(self, rng, size):
        return rng.uniform(self.lower, self.upper, size=(size, self.n))


@dataclass(frozen=True)
class LinearChange:
    """Invertible linear change of variables p_new = C_inv p."""

    C: np.ndarray
    C_inv: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        Ci = np.asarray(self.C_inv, dtype=float)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "C_inv", Ci)
        if norm_2(C @ Ci - np.eye(C.shape[0])) > 1e-10:
            raise ValueError("C_inv is not an inverse of C to 1e-10")

    @classmethod
    def from_matrix(cls, C):
        C = np.asarray(C, dtype=float)
        return cls(C=C, C_inv=np.linalg.inv(C))

    def forward(self, p):
        """Original coordinates -> new coordinates."""
        return self.C_inv @ np.asarray(p, dtype=float)

    def back(self, p_new):
        """New coordinates -> original coordinates."""
        return self.C @ np.asarray(p_new, dtype=float)

    def inverse(self):
        return LinearChange(C=self.C_inv, C_inv=self.C)


def fd_jacobian(F, x, rel_step=1e-6):
    """Central finite-difference Jacobian of F at x, step 1e-6*(1+||x||)."""
    x = np.asarray(x, dtype=float)
    h = rel_step * (1.0 + np.linalg.norm(x))
    n = x.size
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        cols.append((np.asarray(F(x + e)) - np.asarray(F(x - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class OdeSystem:
    """Vector field f(x) = -A x + F(x) with a symmetric linear part."""

    n: int
    A: np.ndarray
    F: callable
    jac_F: callable
    analytic: bool = False
    label: str = ""
    # Preferred change of variables under which the spectral gap should be
    # checked (the cell model ships one); None means identity.
    gap_change: LinearChange | None = field(default=None, compare=False)

    def __post_init__(self):
        A = check_symmetric(self.A)
        if A.shape != (self.n, self.n):
            raise ValueError("A has wrong shape")
        object.__setattr__(self, "A", A)

    def f(self, x):
        x = np.asarray(x, dtype=float)
        return -self.A @ x + np.asarray(self.F(x), dtype=float)

    def jac_f(self, x):
        return -self.A + np.asarray(self.jac_F(np.asarray(x, dtype=float)), dtype=float)

    def rhs(self, t, x):
        """solve_ivp-style right-hand side."""
        return self.f(x)

    def check_jacobian(self, points, rtol=1e-5):
        """Verify jac_F against central differences of F at the given points."""
        worst = 0.0
        for x in points:
            J = np.asarray(self.jac_F(x), dtype=float)
            Jfd = fd_jacobian(self.F, x)
            err = np.abs(J - Jfd).max() / (1.0 + np.abs(J).max())
            worst = max(worst, err)
        return worst <= rtol, worst


# --- satellite model -------------------------------------------------------

def default_arccot_g(nu):
    """g(x3) = arccot(x3 - nu) on the branch with range (0, pi)."""

    def g(x3):
        return math.pi / 2.0 - math.atan(x3 - nu)

    def g_prime(x3):
        return -1.0 / (1.0 + (x3 - nu) ** 2)

    return g, g_prime


def _check_admissible(g, g_prime, M, lo, hi, samples=2001):
    xs = np.linspace(lo, hi, samples)
    for x3 in xs:
        gv = g(x3)
        gp = g_prime(x3)
        if not (0.0 < gv < M):
            raise ModelError(
                f"g not admissible: g({x3:.6g}) = {gv:.6g} violates 0 < g < M = {M:.6g}"
            )
        if not (-1.0 <= gp < 0.0):
            raise ModelError(
                f"g not admissible: g'({x3:.6g}) = {gp:.6g} violates -1 <= g' < 0"
            )


def satellite_system(mu1, mu2, mu3, g=None, g_prime=None, M=math.pi):
    """Satellite attitude model: A = diag(mu), F(x) = (g(x3), x1, x2).

    The default g is arccot(x3 - nu) with nu = pi/(2 mu1 mu2 mu3), which
    satisfies the admissibility bounds with g'(nu) = -1 and M = pi.
    """
    if not (mu1 > 0 and mu2 > 0 and mu3 > 0):
        raise ModelError("satellite parameters must be positive")
    nu = math.pi / (2.0 * mu1 * mu2 * mu3)
    if g is None:
        g, g_prime = default_arccot_g(nu)
    elif g_prime is None:
        raise ModelError("a custom g requires its derivative g_prime")
    # sample admissibility over the lemma interval for x3, padded generously
    hi = max(2.0 * M / (mu1 * mu2 * mu3), nu + 10.0)
    _check_admissible(g, g_prime, M, -hi, hi)

    A = np.diag([mu1, mu2, mu3]).astype(float)

    def F(x):
        return np.array([g(x[2]), x[0], x[1]])

    def jac_F(x):
        return np.array([[0.0, 0.0, g_prime(x[2])], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

    return OdeSystem(
        n=3, A=A, F=F, jac_F=jac_F, analytic=True,
        label=f"satellite(mu={mu1:g},{mu2:g},{mu3:g})",
    )


def satellite_domain(mu1, mu2, mu3, M=math.pi):
    """Invariant box (0, M/mu1) x (0, M/(mu1 mu2)) x (0, M/(mu1 mu2 mu3))."""
    if not (mu1 > 0 and mu2 > 0 and mu3 > 0 and M > 0):
        raise ModelError("satellite domain needs positive parameters")
    return BoxDomain(
        lower=np.zeros(3),
        upper=np.array([M / mu1, M / (mu1 * mu2), M / (mu1 * mu2 * mu3)]),
    )


def satellite_equilibrium(mu1, mu2, mu3, g_at_nu=math.pi / 2.0):
    """Closed-form singular point (g(nu)/mu1, g(nu)/(mu1 mu2), g(nu)/(mu1 mu2 mu3))."""
    return np.array([
        g_at_nu / mu1,
        g_at_nu / (mu1 * mu2),
        g_at_nu / (mu1 * mu2 * mu3),
    ])


# --- cell process model ----------------------------------------------------

CELL_CHANGE = LinearChange(
    C=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, -1.0], [0.0, 0.0, 1.0]]),
    C_inv=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]),
)


def cell_reaction_terms(T=10.0, L=1e6):
    """The R, G pair of the cell model with their partial derivatives."""

    def R(z):
        return 1.0 / (1.0 + z ** 4)

    def R_z(z):
        return -4.0 * z ** 3 / (1.0 + z ** 4) ** 2

    def G(y, z):
        w = (1.0 + z) ** 2
        return T * y * (1.0 + y) * w / (L + (1.0 + y) ** 2 * w)

    def G_y(y, z):
        w = (1.0 + z) ** 2
        den = L + (1.0 + y) ** 2 * w
        return 2.0 * T * L * y * w / den ** 2 + T * w / den

    def G_z(y, z):
        den = L + (1.0 + y) ** 2 * (1.0 + z) ** 2
        return 2.0 * T * L * y * (1.0 + y) * (1.0 + z) / den ** 2

    return R, R_z, G, G_y, G_z


def cell_system(k, q, T=10.0, L=1e6):
    """Cell process model: A = diag(k, 0, q), F = (R(z), x - G(y,z), G(y,z))."""
    if not (k > q > 0):
        raise ModelError("cell model requires k > q > 0 (simple case)")
    if not k * T > 1.0:
        raise ModelError("cell model requires k*T > 1 (simple case)")
    R, R_z, G, G_y, G_z = cell_reaction_terms(T, L)
    A = np.diag([k, 0.0, q]).astype(float)

    def F(p):
        x, y, z = p
        g = G(y, z)
        return np.array([R(z), x - g, g])

    def jac_F(p):
        _, y, z = p
        gy = G_y(y, z)
        gz = G_z(y, z)
        return np.array([[0.0, 0.0, R_z(z)], [1.0, -gy, -gz], [0.0, gy, gz]])

    return OdeSystem(
        n=3, A=A, F=F, jac_F=jac_F, analytic=True,
        label=f"cell(k={k:g},q={q:g})", gap_change=CELL_CHANGE,
    )


def cell_domain(k, q, T=10.0, L=1e6):
    """Invariant box (0, 1/k) x (0, y0) x (0, T/q) with G(y0, 0) = 1/k."""
    if not k * T > 1.0:
        raise ModelError("cell domain requires k*T > 1")
    _, _, G, G_y, _ = cell_reaction_terms(T, L)
    target = 1.0 / k

    # bracket the root of G(y,0) = 1/k, then bisect and polish with Newton
    lo, hi = 0.0, 1.0
    while G(hi, 0.0) < target:
        hi *= 2.0
        if hi > 1e12:
            raise ModelError("failed to bracket y0 for the cell domain")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if G(mid, 0.0) < target:
            lo = mid
        else:
            hi = mid
    y0 = 0.5 * (lo + hi)
    for _ in range(50):
        r = G(y0, 0.0) - target
        if abs(r) <= 1e-14 * target:
            break
        y0 -= r / G_y(y0, 0.0)
    if abs(G(y0, 0.0) - target) > 1e-10:
        raise ModelError("y0 root polish did not reach the residual bound")
    return BoxDomain(lower=np.zeros(3), upper=np.array([1.0 / k, y0, T / q]))


# --- analytic test oracle --------------------------------------------------

def hopf_oracle(omega=1.0, lambda_z=1.0):
    """Normal-form oscillator with a known cycle: unit circle in the z=0 plane.

    Period 2*pi/|omega|; Floquet multipliers {1, exp(-2T), exp(-lambda_z*T)}.
    """
    if omega == 0.0:
        raise ModelError("omega must be nonzero")
    if lambda_z <= 0.0:
        raise ModelError("lambda_z must be positive")
    A = np.diag([0.0, 0.0, lambda_z])

    def F(x):
        r2 = x[0] ** 2 + x[1] ** 2
        return np.array([
            x[0] - omega * x[1] - x[0] * r2,
            omega * x[0] + x[1] - x[1] * r2,
            0.0,
        ])

    def jac_F(x):
        r2 = x[0] ** 2 + x[1] ** 2
        return np.array([
            [1.0 - r2 - 2.0 * x[0] ** 2, -omega - 2.0 * x[0] * x[1], 0.0],
            [omega - 2.0 * x[0] * x[1], 1.0 - r2 - 2.0 * x[1] ** 2, 0.0],
            [0.0, 0.0, 0.0],
        ])

    return OdeSystem(
        n=3, A=A, F=F, jac_F=jac_F, analytic=True,
        label=f"hopf(omega={omega:g},lambda_z={lambda_z:g})",
    )


def hopf_domain(radius=2.0, height=1.0):
    return BoxDomain(
        lower=np.array([-radius, -radius, -height]),
        upper=np.array([radius, radius, height]),
    )


# --- change of variables ---------------------------------------------------

def apply_change(sys, change):
    """Rewrite the system in coordinates p_new = C_inv p, keeping the same A.

    The new field is fnew(p) = C_inv f(C p); the linear part stays -A and the
    remainder is absorbed into the nonlinearity, so the eigenvalue gap data of
    A carry over unchanged.
    """
    C, Ci = change.C, change.C_inv
    A = sys.A

    def F(p):
        p = np.asarray(p, dtype=float)
        return Ci @ sys.f(C @ p) + A @ p

    def jac_F(p):
        p = np.asarray(p, dtype=float)
        return Ci @ sys.jac_f(C @ p) @ C + A

    return OdeSystem(
        n=sys.n, A=A, F=F, jac_F=jac_F, analytic=sys.analytic,
        label=sys.label + "|changed",
    )
