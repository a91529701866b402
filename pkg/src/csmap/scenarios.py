"""Deterministic initial-data generators.

All scenarios keep their support well inside the torus (wrapped tails
below ~1e-12) so spectral derivatives see smooth periodic fields; the
Gaussian scenario validates the required seam clearance explicitly.
"""

import math

import numpy as np

from .errors import ConfigError, ScenarioTargetMismatch
from .manifold import (MapField, Q_DEFAULT, TargetManifold, constant_map,
                       energy, exp_map)
from .norms import random_band_spectrum
from .spectral import GridSpec

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
SEAM_CLEARANCE_SIGMAS = 6.5


def _smoothstep(r):
    r = np.clip(r, 0.0, 1.0)
    return r * r * (3.0 - 2.0 * r)


def _radius(grid):
    X1, X2 = grid.coords()
    c = grid.L / 2.0
    return X1 - c, X2 - c, np.hypot(X1 - c, X2 - c)


def make_constant(grid, target):
    return constant_map(grid, target)


def make_gaussian_bump(grid, target, amplitude, width):
    """Two offset Gaussian tangent bumps (different directions, widths)
    pushed onto the target with the exponential map. Two genuinely
    independent components keep the pulled-back curvature away from the
    degenerate single-geodesic configuration."""
    off1, off2 = 0.064 * grid.L, -0.048 * grid.L
    widths = (width, 0.78 * width)
    reaches = (SEAM_CLEARANCE_SIGMAS * widths[0],
               math.hypot(off1, off2) + SEAM_CLEARANCE_SIGMAS * widths[1])
    if max(reaches) > grid.L / 2.0:
        raise ConfigError(
            f"gaussian_bump width {width:g} leaves less than "
            f"{SEAM_CLEARANCE_SIGMAS:.1f} sigma of seam clearance on "
            f"L = {grid.L:g}; shrink width or enlarge the domain")
    d1, d2, _ = _radius(grid)
    b1 = amplitude * np.exp(-(d1 ** 2 + d2 ** 2) / (2.0 * widths[0] ** 2))
    b2 = 0.8 * amplitude * np.exp(
        -((d1 - off1) ** 2 + (d2 - off2) ** 2) / (2.0 * widths[1] ** 2))
    v = b1[..., None] * E1 + b2[..., None] * E2
    return MapField(grid, target, exp_map(Q_DEFAULT, v, target))


def make_equivariant(grid, target, amplitude, support_radius, m):
    """m-equivariant profile with compactly supported angle u(r):
    (sin u cos m theta, sin u sin m theta, cos u) on the sphere, the
    sinh/cosh analogue on the hyperboloid. u ~ r^m at the origin keeps
    the map smooth; u vanishes identically for r >= support_radius."""
    if m < 1:
        raise ConfigError("equivariant_m must be >= 1")
    if support_radius >= grid.L / 2.0:
        raise ConfigError("equivariant support must fit inside the torus")
    d1, d2, r = _radius(grid)
    rho = np.minimum(r / support_radius, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        bump = np.where(rho < 1.0,
                        np.exp(1.0 - 1.0 / np.maximum(1.0 - rho ** 2, 1e-300)),
                        0.0)
    u = amplitude * rho ** m * bump
    theta_m = m * np.arctan2(d2, d1)
    if target.mu == 1:
        vals = np.stack([np.sin(u) * np.cos(theta_m),
                         np.sin(u) * np.sin(theta_m), np.cos(u)], axis=-1)
    else:
        vals = np.stack([np.sinh(u) * np.cos(theta_m),
                         np.sinh(u) * np.sin(theta_m), np.cosh(u)], axis=-1)
    return MapField(grid, target, vals)


BUBBLE_GLUE_INNER = 0.28   # calibrated so the torus energy sits within
BUBBLE_GLUE_OUTER = 0.46   # ~0.5% of the plane value 4*pi for lam <= L/64


def make_bubble(grid, target, scale):
    """Degree-one inverse-stereographic profile u = 2 arctan(scale/r),
    antipode at the center, glued to the base point near the boundary by
    a smoothstep window so the field is exactly periodic. Carries the
    ground-state energy 4*pi up to the documented gluing deviation."""
    if target.mu != 1:
        raise ScenarioTargetMismatch(
            "the ground-state bubble exists on the sphere target only")
    d1, d2, r = _radius(grid)
    u = 2.0 * np.arctan2(scale, r)
    window = 1.0 - _smoothstep((r - BUBBLE_GLUE_INNER * grid.L)
                               / ((BUBBLE_GLUE_OUTER - BUBBLE_GLUE_INNER)
                                  * grid.L))
    u = u * window
    theta_p = np.arctan2(d2, d1)
    vals = np.stack([np.sin(u) * np.cos(theta_p),
                     np.sin(u) * np.sin(theta_p), np.cos(u)], axis=-1)
    return MapField(grid, target, vals)


def make_random_band(grid, target, band_k, seed, target_energy,
                     rel_tol=1e-3, max_bisect=80):
    """Band-limited random tangent field scaled by bisection until the
    map energy matches target_energy within rel_tol."""
    z1 = random_band_spectrum(grid, band_k, seed)
    z2 = random_band_spectrum(grid, band_k, seed + 1000003)
    f1, f2 = np.real(z1), np.real(z2)
    ref = max(float(np.max(np.abs(f1))), float(np.max(np.abs(f2))), 1e-300)
    v_unit = (f1[..., None] * E1 + f2[..., None] * E2) / ref

    def energy_at(a):
        return energy(MapField(grid, target,
                               exp_map(Q_DEFAULT, a * v_unit, target)))

    hi = 0.1
    for _ in range(60):
        if energy_at(hi) >= target_energy:
            break
        hi *= 2.0
    else:
        raise ConfigError("cannot reach the requested energy by scaling")
    lo = 0.0
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        e = energy_at(mid)
        if abs(e - target_energy) <= rel_tol * target_energy:
            return MapField(grid, target,
                            exp_map(Q_DEFAULT, mid * v_unit, target))
        if e < target_energy:
            lo = mid
        else:
            hi = mid
    raise ConfigError("energy bisection did not converge")


def generate_initial_data(cfg):
    """Scenario dispatch; deterministic in the config (and its seed)."""
    grid = GridSpec(cfg.N, cfg.L)
    target = TargetManifold(cfg.mu)
    if cfg.scenario == "constant":
        return make_constant(grid, target)
    if cfg.scenario == "gaussian_bump":
        return make_gaussian_bump(grid, target, cfg.amplitude, cfg.width)
    if cfg.scenario == "equivariant":
        return make_equivariant(grid, target, cfg.amplitude, cfg.width,
                                cfg.equivariant_m)
    if cfg.scenario == "bubble":
        return make_bubble(grid, target, cfg.resolved_bubble_scale())
    if cfg.scenario == "random_band":
        return make_random_band(grid, target, cfg.band_k, cfg.seed,
                                cfg.target_energy)
    raise ConfigError(f"unknown scenario {cfg.scenario!r}")
