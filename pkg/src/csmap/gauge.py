"""Heat-flow (caloric) gauge construction and identity audits.

The frame is fixed at the heat-flow limit point, pulled back from large
s by parallel transport (so the s-component of the connection vanishes
identically), and the map derivatives are expressed in it:

    psi_a = <d_a phi, e1>_mu + i <d_a phi, e2>_mu,   A_a = <d_a e1, e2>_mu

for a in {1, 2, t, s}, with e2 = phi x_mu e1 realizing the complex
structure. Every structural identity the differentiated flow satisfies
(curvature relations, compatibility, the freeze identities, the two
evolution equations and their semilinear forms) is computed here as a
normalized residual.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FrameDrift, MissingSlices, TailTooLarge
from .heat_flow import heat_rhs
from .manifold import (cross_mu, dot_mu, norm_mu, project_to_target,
                       tangent_project)
from .spectral import gradient, l2_norm, laplacian


@dataclass
class Frame:
    """Orthonormal tangent frame over the grid; e2 = phi x_mu e1."""

    e1: np.ndarray
    e2: np.ndarray


def frame_at_infinity(Q, target):
    """Deterministic orthonormal basis of T_Q M: mu-normalize the first
    canonical axis with a nondegenerate tangent projection (smallest
    index first), then complete with e2 = Q x_mu e1."""
    Q = np.asarray(Q, dtype=float)
    for axis in np.eye(3):
        v = tangent_project(Q, axis, target)
        nsq = dot_mu(v, v, target)
        if nsq > 1e-12:
            e1 = v / math.sqrt(nsq)
            return e1, cross_mu(Q, e1, target)
    raise ValueError("no canonical axis projects to a usable tangent vector")


def frame_from_e1(phi_values, e1_raw, target):
    """Tangent-project and mu-normalize e1, then set e2 = phi x_mu e1."""
    w = tangent_project(phi_values, e1_raw, target)
    e1 = w / norm_mu(w, target)[..., None]
    return Frame(e1=e1, e2=cross_mu(phi_values, e1, target))


def frame_deviation(frame, phi_values, target):
    """Max violations of the frame invariants (orthonormality, tangency)."""
    return max(
        float(np.max(np.abs(dot_mu(frame.e1, frame.e1, target) - 1.0))),
        float(np.max(np.abs(dot_mu(frame.e2, frame.e2, target) - 1.0))),
        float(np.max(np.abs(dot_mu(frame.e1, frame.e2, target)))),
        float(np.max(np.abs(dot_mu(frame.e1, phi_values, target)))),
        float(np.max(np.abs(dot_mu(frame.e2, phi_values, target)))),
    )


def _transport_generator(e, vel, phi, target):
    # parallel transport: d_s e = -mu <e, d_s phi>_mu phi
    return -target.mu * dot_mu(e, vel, target)[..., None] * phi


def transport_e1_backward(phis, vels, mid_phis, mid_vels, s_grid, e1_end,
                          target, drift_tol=1e-3):
    """Integrate the transport equation for e1 from the last s sample back
    to the first with classical 4-stage steps, re-orthonormalizing at
    every sample.

    phis/vels are sequences over the s-grid; mid_phis/mid_vels are the
    interval midpoints (one fewer entry). Returns (e1 per sample, max
    re-orthonormalization correction). Raises FrameDrift when a
    correction exceeds drift_tol.
    """
    n = len(s_grid)
    e1s = [None] * n
    e1s[-1] = e1_end
    max_drift = 0.0
    for i in range(n - 2, -1, -1):
        h = s_grid[i] - s_grid[i + 1]  # negative
        e = e1s[i + 1]
        k1 = _transport_generator(e, vels[i + 1], phis[i + 1], target)
        k2 = _transport_generator(e + 0.5 * h * k1, mid_vels[i], mid_phis[i],
                                  target)
        k3 = _transport_generator(e + 0.5 * h * k2, mid_vels[i], mid_phis[i],
                                  target)
        k4 = _transport_generator(e + h * k3, vels[i], phis[i], target)
        raw = e + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        w = tangent_project(phis[i], raw, target)
        e1 = w / norm_mu(w, target)[..., None]
        drift = float(np.max(np.abs(e1 - raw)))
        if drift > drift_tol:
            raise FrameDrift(
                f"re-orthonormalization correction {drift:.3e} at "
                f"s={s_grid[i]:.3e} exceeds {drift_tol:g}; refine the s-grid")
        max_drift = max(max_drift, drift)
        e1s[i] = e1
    return e1s, max_drift


def transport_frame(heat, drift_tol=1e-3):
    """Frames per s-slice of a heat trajectory, transported back from the
    trivialized end. Requires heat.limit_point; d_s phi is evaluated from
    the flow's right-hand side, never by differencing slices."""
    if heat.limit_point is None:
        raise ValueError(
            "heat trajectory did not trivialize; increase s_max before "
            "constructing the gauge")
    target, grid = heat.target, heat.grid
    phis = [p.values for p in heat.slices]
    vels = [heat_rhs(v, grid, target) for v in phis]
    mid_phis, mid_vels = [], []
    for i in range(len(phis) - 1):
        m = project_to_target(0.5 * (phis[i] + phis[i + 1]), target)
        mid_phis.append(m)
        mid_vels.append(heat_rhs(m, grid, target))
    E1, _ = frame_at_infinity(heat.limit_point, target)
    end = frame_from_e1(phis[-1], np.broadcast_to(E1, phis[-1].shape), target)
    e1s, max_drift = transport_e1_backward(
        phis, vels, mid_phis, mid_vels, heat.s, end.e1, target, drift_tol)
    frames = [Frame(e1=e1, e2=cross_mu(phi, e1, target))
              for e1, phi in zip(e1s, phis)]
    return frames, max_drift


# ---------------------------------------------------------------------------
# Gauge data
# ---------------------------------------------------------------------------

@dataclass
class GaugeData:
    """Gauge fields over the s-grid at one t-slice (with t-neighbors).

    Center-slice arrays are stacked over s: psi1/psi2 (spatial), psis
    (from the heat flow right-hand side), psit (centered t-differences of
    the heat extensions), conn1/conn2 (frame-derived spatial connection),
    connt (centered t-differences of the frames), conns (evaluated from
    the transport generator; identically ~0, the defining gauge
    property). Neighbor psi/conn fields are kept at s = 0 for the
    t-derivatives of the flow-level identities.
    """

    grid: object
    target: object
    s: np.ndarray
    t_center: float
    dt: float
    psi1: np.ndarray
    psi2: np.ndarray
    psis: np.ndarray
    psit: np.ndarray
    conn1: np.ndarray
    conn2: np.ndarray
    connt: np.ndarray
    conns: np.ndarray
    phi0: np.ndarray                      # center map values at s = 0
    neighbors0: dict = field(default_factory=dict)
    n_ramp: int = 0

    @property
    def n_s(self):
        return len(self.s)

    def psi_pair(self, i):
        return self.psi1[i], self.psi2[i]

    def conn_pair(self, i):
        return self.conn1[i], self.conn2[i]


def _psi_spatial(phi_values, frame, grid, target):
    d1, d2 = gradient(phi_values, grid)
    p1 = dot_mu(d1, frame.e1, target) + 1j * dot_mu(d1, frame.e2, target)
    p2 = dot_mu(d2, frame.e1, target) + 1j * dot_mu(d2, frame.e2, target)
    return p1, p2


def _psi_of_vector(vec, frame, target):
    return dot_mu(vec, frame.e1, target) + 1j * dot_mu(vec, frame.e2, target)


def _conn_spatial(frame, grid, target):
    d1e1_1, d2e1_1 = gradient(frame.e1, grid)
    a1 = dot_mu(d1e1_1, frame.e2, target)
    a2 = dot_mu(d2e1_1, frame.e2, target)
    return a1, a2


def extract_gauge(heats, frames, dt, t_center=0.0):
    """Assemble GaugeData from heat flows (and frames) at t-dt, t, t+dt.

    heats/frames are 3-tuples ordered (t-dt, t, t+dt) on a common s-grid.
    Spatial derivatives are spectral; d_t is the centered difference of
    the heat extensions and frames; d_s phi comes from the flow's
    right-hand side.
    """
    if len(heats) != 3 or any(h is None for h in heats):
        raise MissingSlices("need heat flows at t-dt, t, t+dt")
    hm, hc, hp = heats
    fm, fc, fp = frames
    if not (len(hm) == len(hc) == len(hp)):
        raise MissingSlices("neighbor heat flows must share the s-grid")
    grid, target = hc.grid, hc.target
    n_s = len(hc)
    ds0 = hc.s[1] - hc.s[0]
    n_ramp = 1
    while n_ramp < n_s - 1 and hc.s[n_ramp + 1] - hc.s[n_ramp] < 1.5 * ds0:
        n_ramp += 1
    shape = (n_s, grid.N, grid.N)
    out = GaugeData(
        grid=grid, target=target, s=hc.s.copy(), t_center=t_center, dt=dt,
        psi1=np.empty(shape, complex), psi2=np.empty(shape, complex),
        psis=np.empty(shape, complex), psit=np.empty(shape, complex),
        conn1=np.empty(shape), conn2=np.empty(shape),
        connt=np.empty(shape), conns=np.empty(shape),
        phi0=hc.slices[0].values.copy(), n_ramp=n_ramp)
    for i in range(n_s):
        phi = hc.slices[i].values
        fr = fc[i]
        out.psi1[i], out.psi2[i] = _psi_spatial(phi, fr, grid, target)
        vel = heat_rhs(phi, grid, target)
        out.psis[i] = _psi_of_vector(vel, fr, target)
        dphi_dt = (hp.slices[i].values - hm.slices[i].values) / (2.0 * dt)
        out.psit[i] = _psi_of_vector(dphi_dt, fr, target)
        out.conn1[i], out.conn2[i] = _conn_spatial(fr, grid, target)
        de1_dt = (fp[i].e1 - fm[i].e1) / (2.0 * dt)
        out.connt[i] = dot_mu(de1_dt, fr.e2, target)
        de1_ds = _transport_generator(fr.e1, vel, phi, target)
        out.conns[i] = dot_mu(de1_ds, fr.e2, target)
    for tag, h, f in (("m", hm, fm), ("p", hp, fp)):
        p1, p2 = _psi_spatial(h.slices[0].values, f[0], grid, target)
        a1, a2 = _conn_spatial(f[0], grid, target)
        out.neighbors0[tag] = {"psi1": p1, "psi2": p2,
                               "conn1": a1, "conn2": a2}
    return out


def max_conn_s(gauge):
    """max |A_s| over all slices: the defining caloric-gauge audit."""
    return float(np.max(np.abs(gauge.conns)))


def gauge_energy_identity(gauge, map_energy):
    """(||psi_x(0)||_{L^2}^2, 2 E(phi)); equal by frame isometry."""
    lhs = l2_norm(gauge.psi1[0], gauge.grid) ** 2 \
        + l2_norm(gauge.psi2[0], gauge.grid) ** 2
    return lhs, 2.0 * map_energy


def weighted_decay_diagnostics(gauge):
    """Report-only suprema over the s-grid of the weighted heat-decay
    quantities: sqrt(s) ||psi_x||_inf, s ||d_x psi_x||_inf and
    sqrt(s) ||A_x||_inf. The continuum bounds carry unknown constants, so
    these are recorded, not asserted."""
    sup_psi = sup_dpsi = sup_conn = 0.0
    for i in range(1, gauge.n_s):
        s = float(gauge.s[i])
        mag = np.sqrt(np.abs(gauge.psi1[i]) ** 2 + np.abs(gauge.psi2[i]) ** 2)
        sup_psi = max(sup_psi, math.sqrt(s) * float(mag.max()))
        d11, d12 = gradient(gauge.psi1[i], gauge.grid)
        d21, d22 = gradient(gauge.psi2[i], gauge.grid)
        dmag = np.sqrt(np.abs(d11) ** 2 + np.abs(d12) ** 2
                       + np.abs(d21) ** 2 + np.abs(d22) ** 2)
        sup_dpsi = max(sup_dpsi, s * float(dmag.max()))
        amag = np.hypot(gauge.conn1[i], gauge.conn2[i])
        sup_conn = max(sup_conn, math.sqrt(s) * float(amag.max()))
    return {"sup_sqrt_s_psi_x_inf": sup_psi,
            "sup_s_grad_psi_x_inf": sup_dpsi,
            "sup_sqrt_s_conn_x_inf": sup_conn}


# ---------------------------------------------------------------------------
# Connection from the s-integral
# ---------------------------------------------------------------------------

def _integrand(gauge, alpha, i):
    mu = gauge.target.mu
    psi_a = {"1": gauge.psi1, "2": gauge.psi2,
             "t": gauge.psit, "s": gauge.psis}[str(alpha)][i]
    return mu * np.imag(np.conj(psi_a) * gauge.psis[i])


def a_from_integral(gauge, alpha, s_index=0, include_mu=True,
                    tail_fraction=0.1):
    """Connection coefficient by integrating back from the far end of the
    s-grid: A_alpha(s) = -int_s^{smax} mu Im(conj(psi_alpha) psi_s) ds'.

    psi_s stands in for the covariant divergence of psi_x (the heat-flow
    freeze identity). Returns (field, tail_bound) where tail_bound is the
    estimated truncation beyond s_max from the measured exponential decay
    of the integrand; raises TailTooLarge when it exceeds tail_fraction
    of the field norm. include_mu=False drops the curvature sign factor
    (the literal transport-equation variant without it; reports carry
    both).
    """
    n = gauge.n_s
    if not (0 <= s_index < n - 1):
        raise MissingSlices("s_index must leave a nonempty integration range")
    sign = 1.0 if include_mu else float(gauge.target.mu)
    vals = [sign * _integrand(gauge, alpha, i) for i in range(s_index, n)]
    s = gauge.s[s_index:]
    acc = np.zeros_like(vals[0])
    for i in range(len(vals) - 1):
        acc += 0.5 * (s[i + 1] - s[i]) * (vals[i] + vals[i + 1])
    field_val = -acc
    # exponential extension of the integrand norm beyond s_max
    norms = np.array([l2_norm(v, gauge.grid) for v in vals[-5:]])
    tail = 0.0
    if norms[-1] > 0.0:
        with np.errstate(divide="ignore"):
            lg = np.log(np.maximum(norms, 1e-300))
        rate = -(lg[-1] - lg[0]) / (s[-1] - s[-5])
        tail = norms[-1] / rate if rate > 0 else norms[-1] * gauge.s[-1]
    ref = l2_norm(field_val, gauge.grid)
    if tail > tail_fraction * ref and tail > 0.0:
        raise TailTooLarge(
            f"s-integral tail bound {tail:.3e} exceeds {tail_fraction:.0%} "
            f"of ||A_{alpha}|| = {ref:.3e}; increase s_max")
    return field_val, tail


# ---------------------------------------------------------------------------
# Derivatives on the s-grid and curvature
# ---------------------------------------------------------------------------

def s_derivative(stack, s, i):
    """3-point derivative at interior sample i of a non-uniform grid."""
    if not (1 <= i <= len(s) - 2):
        raise MissingSlices("s-derivative needs both s-neighbors")
    hm = s[i] - s[i - 1]
    hp = s[i + 1] - s[i]
    return (hm / hp * (stack[i + 1] - stack[i])
            + hp / hm * (stack[i] - stack[i - 1])) / (hm + hp)


def _conn_field(gauge, alpha):
    return {"1": gauge.conn1, "2": gauge.conn2,
            "t": gauge.connt, "s": gauge.conns}[str(alpha)]


def curvature(gauge, alpha, beta, s_index=0):
    """F_{alpha beta} = d_alpha A_beta - d_beta A_alpha at one s-slice.

    Spatial derivatives are spectral; d_s is the 3-point formula on the
    s-grid; d_t uses the stored t-neighbors (s = 0 only).
    """
    alpha, beta = str(alpha), str(beta)
    if alpha == beta:
        return np.zeros((gauge.grid.N, gauge.grid.N))

    def d(which, conn_name):
        conn = _conn_field(gauge, conn_name)
        if which in ("1", "2"):
            axis = int(which) - 1
            return gradient(conn[s_index], gauge.grid)[axis]
        if which == "s":
            return s_derivative(conn, gauge.s, s_index)
        if which == "t":
            if s_index != 0:
                raise MissingSlices("t-derivatives are available at s=0 only")
            if conn_name not in ("1", "2"):
                raise MissingSlices(
                    "d_t of the t/s connection components is not stored")
            m = gauge.neighbors0["m"]["conn" + conn_name]
            p = gauge.neighbors0["p"]["conn" + conn_name]
            return (p - m) / (2.0 * gauge.dt)
        raise ValueError(f"unknown direction {which!r}")

    return d(alpha, beta) - d(beta, alpha)


# ---------------------------------------------------------------------------
# Identity residuals
# ---------------------------------------------------------------------------

def _cov_div(psi1, psi2, a1, a2, grid):
    """D_j psi_j = d_1 psi_1 + d_2 psi_2 + i (A_1 psi_1 + A_2 psi_2)."""
    d1p1 = gradient(psi1, grid)[0]
    d2p2 = gradient(psi2, grid)[1]
    return d1p1 + d2p2 + 1j * (a1 * psi1 + a2 * psi2)


def _cov_d(psi, a, grid, axis):
    return gradient(psi, grid)[axis] + 1j * a * psi


def _normalized(defect_terms, grid, scale=None):
    """||lhs - rhs...||_{L2} / max term norm, for lists of term fields.

    defect_terms is a list of (sign, field) making up the defect; the
    normalization is the largest single-term norm (floored to avoid 0/0
    on trivial data, where the defect itself is 0 anyway). A scale may be
    passed in instead: the semilinear-form rows reuse the scale of the
    covariant evolution rows, because the free/nonlinear split is not
    gauge covariant and would otherwise make the normalized value drift
    under gauge rotations even though the defect itself is invariant.
    """
    defect = sum(sgn * f for sgn, f in defect_terms)
    if scale is None:
        scale = max(l2_norm(f, grid) for _, f in defect_terms)
    return l2_norm(defect, grid) / max(scale, 1e-300), scale


@dataclass
class ResidualReport:
    """Normalized identity defects: values[name] is the max over the
    evaluated slices, detail[name] the per-slice series."""

    values: dict = field(default_factory=dict)
    detail: dict = field(default_factory=dict)
    scales: dict = field(default_factory=dict)
    s_indices: list = field(default_factory=list)

    def record(self, name, value, scale):
        self.detail.setdefault(name, []).append(value)
        self.scales[name] = max(self.scales.get(name, 0.0), scale)
        self.values[name] = max(self.values.get(name, 0.0), value)

    def as_dict(self):
        return dict(sorted(self.values.items()))


def default_residual_window(gauge, scale_floor=1e-8):
    """Interior s-slices inside the uniform ramp where the fields still
    carry a usable fraction of their initial size."""
    base = l2_norm(gauge.psi1[0], gauge.grid) + l2_norm(gauge.psi2[0],
                                                        gauge.grid)
    out = []
    last = gauge.n_ramp if gauge.n_ramp else gauge.n_s - 1
    for i in range(1, min(last, gauge.n_s - 1)):
        size = l2_norm(gauge.psi1[i], gauge.grid) + l2_norm(gauge.psi2[i],
                                                            gauge.grid)
        if size >= scale_floor * base:
            out.append(i)
    return out or [1]


def _sm_side_residuals(gauge, rep):
    """Identities that hold where the map solves the Schrodinger flow
    (s = 0): the evolution equation, both F_{0k} relations, and the
    psi_t freeze identity, plus the semilinear form of the evolution."""
    grid, mu = gauge.grid, gauge.target.mu
    p1, p2 = gauge.psi_pair(0)
    a1, a2 = gauge.conn_pair(0)
    at = gauge.connt[0]
    div = _cov_div(p1, p2, a1, a2, grid)

    # psi_t = i D_j psi_j
    rep.record("sm_freeze", *_normalized(
        [(1.0, gauge.psit[0]), (-1.0, 1j * div)], grid))

    # F_{0k} = mu Re(conj(psi_k) D_j psi_j)
    f01 = curvature(gauge, "t", "1", 0)
    f02 = curvature(gauge, "t", "2", 0)
    rep.record("curv_t1", *_normalized(
        [(1.0, f01), (-1.0, mu * np.real(np.conj(p1) * div))], grid))
    rep.record("curv_t2", *_normalized(
        [(1.0, f02), (-1.0, mu * np.real(np.conj(p2) * div))], grid))

    # D_t psi_k = i D_j D_j psi_k + F_{jk} psi_j
    nb_m, nb_p = gauge.neighbors0["m"], gauge.neighbors0["p"]
    f12 = curvature(gauge, "1", "2", 0)
    for k, psik, psik_m, psik_p, fjk_psij in (
            ("1", p1, nb_m["psi1"], nb_p["psi1"], -f12 * p2),
            ("2", p2, nb_m["psi2"], nb_p["psi2"], f12 * p1)):
        dt_psi = (psik_p - psik_m) / (2.0 * gauge.dt)
        cov_t = dt_psi + 1j * at * psik
        v1 = _cov_d(psik, a1, grid, 0)
        v2 = _cov_d(psik, a2, grid, 1)
        lap_cov = _cov_d(v1, a1, grid, 0) + _cov_d(v2, a2, grid, 1)
        value, cov_scale = _normalized(
            [(1.0, cov_t), (-1.0, 1j * lap_cov), (-1.0, fjk_psij)], grid)
        rep.record("sm_evolution", value, cov_scale)

        # (i d_t + Lap) psi_k = N_k
        n_k = (-2j * (a1 * gradient(psik, grid)[0]
                      + a2 * gradient(psik, grid)[1])
               - 1j * (gradient(a1, grid)[0] + gradient(a2, grid)[1]) * psik
               + (at + a1 ** 2 + a2 ** 2) * psik
               - 1j * mu * (p1 * np.imag(np.conj(p1) * psik)
                            + p2 * np.imag(np.conj(p2) * psik)))
        rep.record("nlsh_schrodinger", *_normalized(
            [(1.0, 1j * dt_psi), (1.0, laplacian(psik, grid)),
             (-1.0, n_k)], grid, scale=cov_scale))


def _heat_side_residuals(gauge, rep, i):
    """Identities that hold along the heat flow at every s: the freeze
    identity, curvature relations (including the transport equations for
    the connection), compatibility, and the heat evolution equation."""
    grid, mu = gauge.grid, gauge.target.mu
    p1, p2 = gauge.psi_pair(i)
    a1, a2 = gauge.conn_pair(i)
    ps = gauge.psis[i]
    div = _cov_div(p1, p2, a1, a2, grid)

    rep.record("hf_freeze", *_normalized([(1.0, ps), (-1.0, div)], grid))

    f12 = curvature(gauge, "1", "2", i)
    rep.record("curv_12", *_normalized(
        [(1.0, f12), (-1.0, mu * np.imag(np.conj(p2) * p1))], grid))

    rep.record("compat", *_normalized(
        [(1.0, _cov_d(p2, a1, grid, 0)), (-1.0, _cov_d(p1, a2, grid, 1))],
        grid))

    if 1 <= i <= gauge.n_s - 2:
        # F_{s k} = d_s A_k = mu Im(conj(psi_k) D_j psi_j)
        rep.record("curv_s1", *_normalized(
            [(1.0, s_derivative(gauge.conn1, gauge.s, i)),
             (-1.0, mu * np.imag(np.conj(p1) * div))], grid))
        rep.record("curv_s2", *_normalized(
            [(1.0, s_derivative(gauge.conn2, gauge.s, i)),
             (-1.0, mu * np.imag(np.conj(p2) * div))], grid))
        rep.record("curv_st", *_normalized(
            [(1.0, s_derivative(gauge.connt, gauge.s, i)),
             (-1.0, mu * np.imag(np.conj(gauge.psit[i]) * ps))], grid))

        # D_s psi_k = D_j D_j psi_k - i F_{jk} psi_j (A_s = 0), and its
        # semilinear form (d_s - Lap) psi_k = U_k
        for k, psik_stack, psik, fjk_psij in (
                ("1", gauge.psi1, p1, -f12 * p2),
                ("2", gauge.psi2, p2, f12 * p1)):
            ds_psi = s_derivative(psik_stack, gauge.s, i)
            v1 = _cov_d(psik, a1, grid, 0)
            v2 = _cov_d(psik, a2, grid, 1)
            lap_cov = _cov_d(v1, a1, grid, 0) + _cov_d(v2, a2, grid, 1)
            value, cov_scale = _normalized(
                [(1.0, ds_psi), (-1.0, lap_cov), (1.0, 1j * fjk_psij)], grid)
            rep.record("heat_evolution", value, cov_scale)
            u_k = (2j * (a1 * gradient(psik, grid)[0]
                         + a2 * gradient(psik, grid)[1])
                   + 1j * (gradient(a1, grid)[0]
                           + gradient(a2, grid)[1]) * psik
                   - (a1 ** 2 + a2 ** 2) * psik
                   + 1j * mu * (p1 * np.imag(np.conj(p1) * psik)
                                + p2 * np.imag(np.conj(p2) * psik)))
            rep.record("nlsh_heat", *_normalized(
                [(1.0, ds_psi), (-1.0, laplacian(psik, grid)),
                 (-1.0, u_k)], grid, scale=cov_scale))


def gauge_residuals(gauge, s_indices=None):
    """Normalized L^2 defects of the full identity suite.

    Flow-level identities (everything involving d_t) are evaluated at
    s = 0; the heat-flow identities at the interior ramp slices (default)
    or at the requested s_indices. Each defect is normalized by the norm
    of its largest constituent term.
    """
    rep = ResidualReport()
    if s_indices is None:
        s_indices = default_residual_window(gauge)
    rep.s_indices = list(s_indices)
    _sm_side_residuals(gauge, rep)
    _heat_side_residuals(gauge, rep, 0)   # s-local identities hold at 0 too
    for i in s_indices:
        _heat_side_residuals(gauge, rep, i)
    rep.values["conn_s_max"] = max_conn_s(gauge)
    return rep


def nlsh_residual(gauge, s_indices=None):
    """(Schrodinger defect, heat defect) of the semilinear forms, each
    normalized by its largest term; max over the evaluated slices."""
    rep = gauge_residuals(gauge, s_indices=s_indices)
    return rep.values["nlsh_schrodinger"], rep.values["nlsh_heat"]


def apply_gauge_rotation(gauge, theta):
    """Act by a time-independent rotation theta(x): psi -> exp(-i theta) psi,
    A -> A + d theta. Returns a transformed copy; all residuals and every
    |psi_alpha| are invariant."""
    grid = gauge.grid
    theta = np.asarray(theta, dtype=float)
    phase = np.exp(-1j * theta)
    d1th, d2th = gradient(theta, grid)
    out = GaugeData(
        grid=grid, target=gauge.target, s=gauge.s.copy(),
        t_center=gauge.t_center, dt=gauge.dt,
        psi1=gauge.psi1 * phase, psi2=gauge.psi2 * phase,
        psis=gauge.psis * phase, psit=gauge.psit * phase,
        conn1=gauge.conn1 + d1th, conn2=gauge.conn2 + d2th,
        connt=gauge.connt.copy(), conns=gauge.conns.copy(),
        phi0=gauge.phi0.copy(), n_ramp=gauge.n_ramp)
    for tag, nb in gauge.neighbors0.items():
        out.neighbors0[tag] = {
            "psi1": nb["psi1"] * phase, "psi2": nb["psi2"] * phase,
            "conn1": nb["conn1"] + d1th, "conn2": nb["conn2"] + d2th}
    return out
