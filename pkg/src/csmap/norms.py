"""Mixed space-time norms, lateral/boosted families, per-band solution-
and source-space norms, the l2-summed per-band L^4 continuation
quantity, frequency envelopes with their summation rules, bilinear decay
ratios, and power-law decay fits.

Continuum suprema are replaced by finite samples throughout: angles from
a 2M-point half-turn lattice, boosts from a small per-band lambda sample
quantized to the torus-compatible lattice, and band sums truncated to
the grid's dyadic range. Every report produced from these surrogates
carries flags saying so.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExponentTooSmall, TooFewSamples
from .spectral import (SpaceTimeField, galilean_transform, l2_norm,
                       lp_project_axis0, quantize_boost, rotate_resample)

INF = math.inf


def angle_set(M=4):
    """theta_m = pi m / M for 0 <= m < 2M."""
    return [math.pi * m / M for m in range(2 * M)]


def default_lambda_samples(k):
    """Boost magnitudes standing in for the per-band lattice: {0, +-2^{k-2},
    +-2^{k-1}}."""
    return [0.0, 2.0 ** (k - 2), -2.0 ** (k - 2),
            2.0 ** (k - 1), -2.0 ** (k - 1)]


def _t_weights(t):
    t = np.asarray(t, dtype=float)
    if len(t) == 1:
        return np.array([1.0])
    w = np.zeros(len(t))
    w[:-1] += 0.5 * np.diff(t)
    w[1:] += 0.5 * np.diff(t)
    return w


def _reduce(a, weights, p, axis):
    """(sum w |a|^p)^(1/p) along axis, or max for p = inf."""
    mag = np.abs(a)
    if p == INF:
        return mag.max(axis=axis)
    shape = [1] * mag.ndim
    shape[axis] = len(weights)
    return (np.sum(weights.reshape(shape) * mag ** p, axis=axis)) ** (1.0 / p)


def mixed_norm(traj, p, q, order="tx"):
    """Discrete L^p-of-L^q space-time norm of a trajectory.

    order "tx": outer L^p in t of inner L^q in x; order "xt": outer L^p
    in x of inner L^q in t. Trapezoidal weights in t, cell sums in x.
    """
    h2 = traj.grid.cell_area
    wt = _t_weights(traj.t)
    v = traj.values
    if order == "tx":
        inner = _reduce(v.reshape(len(wt), -1), np.full(v[0].size, h2), q, 1)
        return float(_reduce(inner, wt, p, 0))
    if order == "xt":
        inner = _reduce(v, wt, q, 0)           # (N, N)
        return float(_reduce(inner.ravel(), np.full(inner.size, h2), p, 0))
    raise ValueError("order must be 'tx' or 'xt'")


def lateral_norm(traj, theta, p, q):
    """Outer L^p along the theta direction of inner L^q over the
    transverse coordinate and time (rotate so theta becomes axis 0)."""
    grid = traj.grid
    h = grid.h
    wt = _t_weights(traj.t)
    rot = np.stack([rotate_resample(traj.values[i], grid, theta)
                    for i in range(len(traj.t))])
    # inner over (t, x2): collapse to per-x1 values
    mag = np.moveaxis(rot, 1, 0)               # (N_x1, nt, N_x2)
    if q == INF:
        inner = np.abs(mag).max(axis=(1, 2))
    else:
        w = wt[:, None] * np.full((1, grid.N), h)
        inner = (np.sum(w * np.abs(mag) ** q, axis=(1, 2))) ** (1.0 / q)
    if p == INF:
        return float(inner.max())
    return float((np.sum(h * inner ** p)) ** (1.0 / p))


def lateral_galilean_norm(traj, theta, lam, p, q):
    """Lateral norm after the Galilean boost by lam * (cos theta, sin
    theta); the boost must lie on the compatible lattice."""
    w = np.array([lam * math.cos(theta), lam * math.sin(theta)])
    return lateral_norm(galilean_transform(traj, w), theta, p, q)


def _boosted(traj, theta, lam):
    w = quantize_boost(np.array([lam * math.cos(theta),
                                 lam * math.sin(theta)]), traj.grid)
    return galilean_transform(traj, w), w


def directional_project(traj, theta, j):
    """P_{j,theta}: rotate so theta is axis 0, then the 1-D dyadic band
    filter in that variable. Returns the rotated-and-filtered trajectory
    (axis 0 aligned with theta)."""
    grid = traj.grid
    vals = np.stack([
        lp_project_axis0(rotate_resample(traj.values[i], grid, theta),
                         grid, j)
        for i in range(len(traj.t))])
    return SpaceTimeField(grid, traj.t.copy(), vals)


@dataclass
class NormReport:
    """Named scalar diagnostics plus the surrogate provenance flags."""

    entries: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def add(self, name, value):
        self.entries[name] = float(value)

    def as_dict(self):
        return {"entries": dict(sorted(self.entries.items())),
                "flags": self.flags}


def surrogate_flags(bands, M, lambda_note="per-band {0, +-2^(k-2), +-2^(k-1)} quantized to (4 pi/L) Z"):
    return {
        "theta_samples": 2 * M,
        "lambda_sample": lambda_note,
        "band_range": [bands.k_min, bands.k_max],
        "yk_is_upper_bound": True,
        "sums_over_Z_truncated_to_band_range": True,
    }


def xk0_norm(traj, k, M=4, lambdas=None):
    """Per-band solution-space core norm of a band-k-limited trajectory:

        ||f||_{Linf_t L2_x} + ||f||_{L4_{t,x}} + 2^{-k/2} ||f||_{L4_x Linf_t}
        + 2^{-k/2} sup_theta ||f||_{L^{2,inf}_{theta,W}}

    with the boost-lattice norm replaced by the min over the finite
    lambda sample (a one-piece decomposition upper bound) and sup_theta
    by the angle sample. Returns (value, parts dict).
    """
    if lambdas is None:
        lambdas = default_lambda_samples(k)
    parts = {
        "linf_l2": mixed_norm(traj, INF, 2, "tx"),
        "l4": mixed_norm(traj, 4, 4, "tx"),
        "l4x_linf_t": 2.0 ** (-k / 2.0) * mixed_norm(traj, 4, INF, "xt"),
    }
    best_by_theta = []
    for theta in angle_set(M):
        vals = []
        for lam in lambdas:
            boosted, _ = _boosted(traj, theta, lam)
            vals.append(lateral_norm(boosted, theta, 2, INF))
        best_by_theta.append(min(vals))
    parts["l2inf_boosted"] = 2.0 ** (-k / 2.0) * max(best_by_theta)
    return sum(parts.values()), parts


def xk_norm(traj, k, bands, M=4, lambdas=None, j_halo=20):
    """Full per-band solution-space norm: the core plus the L^{3,6} /
    L^{6,3} lateral families and the local-smoothing term.

    The |j-k| <= j_halo directional sweep is truncated to the grid's band
    range; the inner boost sup (|lambda| < 2^{k-40}) collapses to
    lambda = 0 at any resolvable k. Returns (value, parts dict).
    """
    value, parts = xk0_norm(traj, k, M=M, lambdas=lambdas)
    js = [j for j in bands.ks if abs(j - k) <= j_halo]
    lat36 = []
    lat63 = []
    smooth = []
    for theta in angle_set(M):
        lat36.append(lateral_norm(traj, theta, 3, 6))
        for j in js:
            pj = directional_project(traj, theta, j)
            # already rotated: evaluate the theta-aligned norms at angle 0
            lat63.append(lateral_norm(pj, 0.0, 6, 3))
            smooth.append(lateral_norm(pj, 0.0, INF, 2))
    parts["lat_3_6"] = 2.0 ** (-k / 6.0) * max(lat36)
    parts["lat_6_3"] = 2.0 ** (k / 6.0) * max(lat63)
    parts["local_smoothing"] = 2.0 ** (k / 2.0) * max(smooth)
    return value + parts["lat_3_6"] + parts["lat_6_3"] \
        + parts["local_smoothing"], parts


def yk_upper(traj, k=None):
    """Upper bound for the per-band source-space norm from the one-piece
    decomposition: the L^{4/3}_{t,x} norm of the whole input."""
    return mixed_norm(traj, 4.0 / 3.0, 4.0 / 3.0, "tx")


# ---------------------------------------------------------------------------
# The l2-of-per-band-L^4 continuation quantity
# ---------------------------------------------------------------------------

def _component_list(traj):
    return traj if isinstance(traj, (list, tuple)) else [traj]


def _band_magnitude(comps, bands, k):
    """Pointwise Euclidean magnitude over components of P_k applied
    componentwise; returns a real (nt, N, N) stack."""
    acc = None
    for comp in comps:
        pk = np.stack([bands.project(comp.values[i], k)
                       for i in range(len(comp.t))])
        m = np.abs(pk) ** 2
        acc = m if acc is None else acc + m
    return np.sqrt(acc)


def l2l4_norm(traj, bands):
    """Root sum of squares over bands of the space-time L^4 norms of the
    band projections. Input may be one trajectory or a list of component
    trajectories (projected componentwise, combined pointwise).

    Returns (total, {k: band value}). The zero mode sits in a separate
    mean channel and is not part of any band.
    """
    comps = _component_list(traj)
    grid, t = comps[0].grid, comps[0].t
    series = {}
    for k in bands.ks:
        mag = _band_magnitude(comps, bands, k)
        series[k] = mixed_norm(SpaceTimeField(grid, t, mag), 4, 4, "tx")
    total = math.sqrt(sum(v * v for v in series.values()))
    return total, series


def l4_of_magnitude(traj):
    comps = _component_list(traj)
    acc = None
    for comp in comps:
        m = np.abs(comp.values) ** 2
        acc = m if acc is None else acc + m
    return mixed_norm(SpaceTimeField(comps[0].grid, comps[0].t,
                                     np.sqrt(acc)), 4, 4, "tx")


# ---------------------------------------------------------------------------
# Frequency envelopes
# ---------------------------------------------------------------------------

@dataclass
class FrequencyEnvelope:
    """Slowly varying positive sequence dominating per-band values:
    a_k <= a_j 2^{delta |k-j|} holds exactly by construction."""

    ks: list
    values: np.ndarray
    delta: float
    sigma: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def value(self, k):
        return float(self.values[self.ks.index(k)])

    def slow_variation_defect(self):
        """max over (k, j) of a_k / (a_j 2^{delta |k-j|}) - 1 (<= 0 up to
        roundoff)."""
        worst = -math.inf
        for i, k in enumerate(self.ks):
            for jx, j in enumerate(self.ks):
                bound = self.values[jx] * 2.0 ** (self.delta * abs(k - j))
                worst = max(worst, self.values[i] / bound - 1.0)
        return worst

    def sum_sq(self):
        return float(np.sum(self.values ** 2))


def envelope_from_values(values, ks, delta, sigma=0):
    """a_k = sup_j 2^{sigma j} 2^{-delta |k-j|} c_j over the available
    bands; dominates the inputs (a_k >= 2^{sigma k} c_k) and is slowly
    varying by construction."""
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    values = np.asarray(values, dtype=float)
    if np.any(values < 0.0):
        raise ValueError("per-band values must be nonnegative")
    out = []
    for k in ks:
        out.append(max(2.0 ** (sigma * j) * 2.0 ** (-delta * abs(k - j)) * c
                       for j, c in zip(ks, values)))
    return FrequencyEnvelope(ks=list(ks), values=np.array(out), delta=delta,
                             sigma=sigma)


def envelope_summation_check(env, p):
    """Verify both summation rules with the closed-form constant
    1/(1 - 2^{-(p-delta)}): low-frequency sums 2^{pk'} a_{k'} over k'<=k
    and the mirrored high-frequency rule. Returns the report dict; the
    bound is an exact consequence of slow variation, so max_ratio <=
    bound always (asserted by callers, not here)."""
    if p <= env.delta:
        raise ExponentTooSmall(f"need p > delta = {env.delta}, got {p}")
    if np.any(env.values <= 0.0):
        raise ValueError("summation rules need a strictly positive envelope"
                         " (zero data has no envelope)")
    bound = 1.0 / (1.0 - 2.0 ** (-(p - env.delta)))
    lo, hi = 0.0, 0.0
    for i, k in enumerate(env.ks):
        low_sum = sum(2.0 ** (p * kp) * env.values[ix]
                      for ix, kp in enumerate(env.ks) if kp <= k)
        hi_sum = sum(2.0 ** (-p * kp) * env.values[ix]
                     for ix, kp in enumerate(env.ks) if kp >= k)
        lo = max(lo, low_sum / (2.0 ** (p * k) * env.values[i]))
        hi = max(hi, hi_sum / (2.0 ** (-p * k) * env.values[i]))
    return {"p": p, "delta": env.delta, "bound": bound,
            "max_ratio_low": lo, "max_ratio_high": hi,
            "passed": bool(lo <= bound * (1 + 1e-12)
                           and hi <= bound * (1 + 1e-12))}


def envelope_l2_comparability_constant(delta, ks):
    """sum_m 2^{-2 delta |m|} truncated to the band offsets present."""
    span = len(ks) - 1
    return sum(2.0 ** (-2.0 * delta * abs(m)) for m in range(-span, span + 1))


# ---------------------------------------------------------------------------
# Bilinear decay ratio and decay fits
# ---------------------------------------------------------------------------

def bilinear_ratio(psix_j, psix_k, s, stilde, j, k, upsilon):
    """|| |P_j psi_x(s)| * |P_k psi_x(stilde)| ||_{L^2_{t,x}} divided by
    2^{-|j-k|/2} v_j v_k (1 + s 4^j)^{-4} (1 + stilde 4^k)^{-4}.

    psix_j / psix_k are the band-projected magnitude trajectories (real
    SpaceTimeField). Diagnostic only: the sharp constant is unknown.
    """
    prod = SpaceTimeField(psix_j.grid, psix_j.t,
                          np.abs(psix_j.values) * np.abs(psix_k.values))
    num = mixed_norm(prod, 2, 2, "tx")
    vj, vk = upsilon.value(j), upsilon.value(k)
    rhs = (2.0 ** (-abs(j - k) / 2.0) * vj * vk
           * (1.0 + s * 4.0 ** j) ** (-4) * (1.0 + stilde * 4.0 ** k) ** (-4))
    if rhs == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / rhs


def decay_fit(s_values, values, k, window=(1.0, 100.0), floor=1e-14):
    """Least-squares decay exponent of values(s) against (1 + s 4^k) on
    the window s * 4^k in [window], in log-log coordinates.

    Returns (exponent, quality) with quality the R^2 of the fit (1.0 for
    a constant series, whose exponent is 0). Raises TooFewSamples when
    fewer than 5 usable samples fall in the window.
    """
    s_values = np.asarray(s_values, dtype=float)
    values = np.asarray(values, dtype=float)
    ref = float(values.max(initial=0.0))
    x = s_values * 4.0 ** k
    keep = (x >= window[0]) & (x <= window[1]) & (values > floor * ref)
    if keep.sum() < 5:
        raise TooFewSamples(
            f"need >= 5 samples with s*4^k in [{window[0]}, {window[1]}]"
            f" above the noise floor; have {int(keep.sum())}")
    lx = np.log(1.0 + x[keep])
    ly = np.log(values[keep])
    if np.allclose(ly, ly[0], rtol=0.0, atol=1e-13):
        return 0.0, 1.0
    slope, intercept = np.polyfit(lx, ly, 1)
    fit = slope * lx + intercept
    ss_res = float(np.sum((ly - fit) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    quality = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), quality


def grad_phi_vs_psi_ratio(grad_traj, psi_traj, bands, degenerate_floor=1e-14):
    """Ratio of the per-band-L^4 quantities of the map gradient and of
    the gauge field psi_x; ~1 in the small-amplitude regime. Returns
    (ratio, degenerate) where degenerate flags the 0/0 convention
    (ratio 1)."""
    g_val, _ = l2l4_norm(grad_traj, bands)
    p_val, _ = l2l4_norm(psi_traj, bands)
    if g_val <= degenerate_floor and p_val <= degenerate_floor:
        return 1.0, True
    return g_val / max(p_val, 1e-300), False


def sobolev_seminorm(phi, sigma):
    """|xi|^sigma-weighted L^2 seminorm of the map gradient, i.e. the
    homogeneous H^{sigma+1} seminorm of the R^3 components."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    grid = phi.grid
    K1, K2 = grid.wavenumbers()
    w = (K1 ** 2 + K2 ** 2) ** ((sigma + 1.0) / 2.0)
    F = np.fft.fft2(phi.values, axes=(0, 1))
    total = float(np.sum((w[..., None] * np.abs(F)) ** 2))
    return math.sqrt(total / grid.N ** 4 * grid.L ** 2)


# ---------------------------------------------------------------------------
# Deterministic band-limited seeds (grid-independent)
# ---------------------------------------------------------------------------

def random_band_spectrum(grid, k, seed):
    """Complex field with unit-variance coefficients on the integer modes
    of dyadic band k. Coefficients depend only on (seed, mode), so the
    same field is produced on any grid that resolves the band."""
    lo, hi = 2.0 ** (k - 1), 2.0 ** (k + 1)
    unit = 2.0 * math.pi / grid.L
    mmax = min(int(math.floor(hi / unit)), grid.N // 2 - 1)
    F = np.zeros((grid.N, grid.N), dtype=complex)
    for m1 in range(-mmax, mmax + 1):
        for m2 in range(-mmax, mmax + 1):
            xi = unit * math.hypot(m1, m2)
            if not (lo <= xi <= hi):
                continue
            rng = np.random.default_rng((seed, m1 + 65536, m2 + 65536))
            c = rng.normal() + 1j * rng.normal()
            F[m1 % grid.N, m2 % grid.N] = c
    return np.fft.ifft2(F) * grid.N ** 2


def free_strichartz_ratio(grid, k, seed, T=1.0, nt=33):
    """||exp(i t Lap) f||_{L^4_{t,x}} / ||f||_{L^2} for one seeded band-k
    field over [0, T]."""
    from .spectral import schrodinger_propagator
    f = random_band_spectrum(grid, k, seed)
    ts = np.linspace(0.0, T, nt)
    vals = np.stack([schrodinger_propagator(f, grid, t) for t in ts])
    traj = SpaceTimeField(grid, ts, vals)
    return mixed_norm(traj, 4, 4, "tx") / l2_norm(f, grid)
