"""Target geometry for maps into the unit sphere (mu = +1) or the
hyperboloid model of the hyperbolic plane (mu = -1).

Both targets sit inside R^3 equipped with the quadratic form
<v, w>_mu = v0*w0 + v1*w1 + mu*v2*w2, and both satisfy the constraint
<y, y>_mu = mu (with y2 >= 1 on the hyperboloid). The signed cross
product is eta_mu (v x w) with eta_mu = diag(1, 1, mu).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolation, DegeneratePoint
from .spectral import GridSpec, gradient

Q_DEFAULT = np.array([0.0, 0.0, 1.0])  # lies on both targets


@dataclass(frozen=True)
class TargetManifold:
    mu: int

    def __post_init__(self):
        if self.mu not in (+1, -1):
            raise ValueError("mu must be +1 (sphere) or -1 (hyperbolic)")

    @property
    def eta(self):
        return np.array([1.0, 1.0, float(self.mu)])

    @property
    def name(self):
        return "sphere" if self.mu == 1 else "hyperbolic"


SPHERE = TargetManifold(+1)
HYPERBOLIC = TargetManifold(-1)


def dot_mu(v, w, target):
    """<v, w>_mu = v0*w0 + v1*w1 + mu*v2*w2, over the last axis."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return v[..., 0] * w[..., 0] + v[..., 1] * w[..., 1] \
        + target.mu * v[..., 2] * w[..., 2]


def cross_mu(v, w, target):
    """eta_mu applied to the Euclidean cross product; mu-orthogonal to both."""
    c = np.cross(np.asarray(v, dtype=float), np.asarray(w, dtype=float))
    c[..., 2] *= target.mu
    return c


def norm_mu(v, target):
    """sqrt(<v,v>_mu); real for tangent vectors on either target.

    Clipped at zero so roundoff-negative squares of near-zero vectors do
    not produce NaN."""
    return np.sqrt(np.maximum(dot_mu(v, v, target), 0.0))


def project_to_target(y, target):
    """Radial retraction y / sqrt(|<y,y>_mu|) onto the target.

    Raises DegeneratePoint when y has no projection (zero vector on the
    sphere; spacelike or wrong-sheet vectors on the hyperboloid), which
    signals an integrator step that left the chart.
    """
    y = np.asarray(y, dtype=float)
    q = dot_mu(y, y, target)
    if target.mu == 1:
        if np.any(q <= 0.0):
            raise DegeneratePoint("cannot project the zero vector to the sphere")
    else:
        if np.any(q >= 0.0) or np.any(y[..., 2] <= 0.0):
            raise DegeneratePoint(
                "point left the hyperboloid chart (needs <y,y>_mu < 0, y2 > 0)")
    return y / np.sqrt(np.abs(q))[..., None]


def tangent_project(p, v, target):
    """Remove the normal component: v - (<v,p>_mu / mu) p."""
    coef = dot_mu(v, p, target) * target.mu  # 1/mu == mu
    return np.asarray(v, dtype=float) - coef[..., None] * np.asarray(p, dtype=float)


def exp_map(p, v, target):
    """Geodesic exponential on the constant-curvature target.

    Sphere: cos(|v|) p + sin(|v|) v/|v|; hyperboloid: cosh/sinh with the
    mu-norm. v must be tangent at p; v = 0 returns p.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    r = norm_mu(v, target)
    small = r < 1e-300
    rs = np.where(small, 1.0, r)
    if target.mu == 1:
        a, b = np.cos(r), np.sin(r) / rs
    else:
        a, b = np.cosh(r), np.sinh(r) / rs
    b = np.where(small, 1.0, b)
    return a[..., None] * p + b[..., None] * v


def constraint_deviation(values, target):
    """max_x |<y,y>_mu - mu| over the grid."""
    return float(np.max(np.abs(dot_mu(values, values, target) - target.mu)))


@dataclass
class MapField:
    """One time/heat-time slice of a map into the target: values (N, N, 3)."""

    grid: GridSpec
    target: TargetManifold
    values: np.ndarray
    constraint_tol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.N, self.grid.N, 3):
            raise ValueError("values must be (N, N, 3)")

    def check(self, tol=None):
        dev = constraint_deviation(self.values, self.target)
        tol = self.constraint_tol if tol is None else tol
        if dev > tol:
            raise ConstraintViolation(
                f"map off target by {dev:.3e} (tol {tol:.1e})")
        return dev

    def copy(self):
        return MapField(self.grid, self.target, self.values.copy(),
                        self.constraint_tol)


def constant_map(grid, target, point=None):
    point = Q_DEFAULT if point is None else np.asarray(point, dtype=float)
    vals = np.broadcast_to(point, (grid.N, grid.N, 3)).copy()
    return MapField(grid, target, vals)


def energy(phi):
    """E = (1/2) sum_x (<d1 phi, d1 phi>_mu + <d2 phi, d2 phi>_mu) h^2,
    with spectral derivatives. Nonnegative on valid maps for both targets."""
    d1, d2 = gradient(phi.values, phi.grid)
    dens = dot_mu(d1, d1, phi.target) + dot_mu(d2, d2, phi.target)
    return 0.5 * float(np.sum(dens)) * phi.grid.cell_area


def energy_density(phi):
    d1, d2 = gradient(phi.values, phi.grid)
    return 0.5 * (dot_mu(d1, d1, phi.target) + dot_mu(d2, d2, phi.target))


def mass(phi, Q=None):
    """sum_x |phi - Q|^2 h^2 with the Euclidean R^3 norm."""
    Q = Q_DEFAULT if Q is None else np.asarray(Q, dtype=float)
    diff = phi.values - Q
    return float(np.sum(diff * diff)) * phi.grid.cell_area
