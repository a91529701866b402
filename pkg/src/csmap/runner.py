"""Experiment orchestration: flow -> per-slice heat flow -> gauge ->
residual suite and norm battery, with deterministic report/CSV/snapshot
emission.

Workers: the per-slice heat/transport pipelines are independent; set
CSM_WORKERS to run them in a thread pool (results are assembled by index,
so outputs are byte-identical for any worker count).
"""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TailTooLarge
from .gauge import (a_from_integral, extract_gauge, gauge_energy_identity,
                    gauge_residuals, max_conn_s, transport_frame,
                    weighted_decay_diagnostics)
from .heat_flow import run_heat
from .manifold import energy as map_energy
from .map_flow import run_sm
from .norms import (bilinear_ratio, decay_fit, envelope_from_values,
                    envelope_l2_comparability_constant,
                    envelope_summation_check, free_strichartz_ratio,
                    grad_phi_vs_psi_ratio, l2l4_norm, sobolev_seminorm,
                    surrogate_flags, xk_norm)
from .scenarios import generate_initial_data
from .snapshot import write_snapshot
from .spectral import LPBandSet, SpaceTimeField, gradient, l2_norm
from .config import config_to_text

RESIDUAL_SUITE = ("sm_evolution", "curv_t1", "curv_t2", "curv_12", "compat",
                  "curv_s1", "curv_s2", "sm_freeze", "hf_freeze",
                  "nlsh_schrodinger", "nlsh_heat")


def _workers():
    try:
        return max(1, int(os.environ.get("CSM_WORKERS", "1")))
    except ValueError:
        return 1


def _map_parallel(fn, items):
    n = _workers()
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _subsample(indices, cap=12):
    if len(indices) <= cap:
        return list(indices)
    pick = np.linspace(0, len(indices) - 1, cap).round().astype(int)
    return [indices[i] for i in sorted(set(pick.tolist()))]


@dataclass
class ExperimentResult:
    report: dict
    csv_text: str
    passed: bool
    failures: list = field(default_factory=list)


def _band_l4_sums(comps, bands, grid):
    """Per (band, slice) spatial sums of |P_k psi|^4 (cell-weighted), for
    cumulative interval L^4 norms."""
    out = {}
    nt = len(comps[0].t)
    for k in bands.ks:
        rows = []
        for i in range(nt):
            acc = 0.0
            mag2 = None
            for comp in comps:
                pk = bands.project(comp.values[i], k)
                m = np.abs(pk) ** 2
                mag2 = m if mag2 is None else mag2 + m
            acc = float(np.sum(mag2 ** 2)) * grid.cell_area
            rows.append(acc)
        out[k] = rows
    return out


def _cumulative_l2l4(t, band_sums):
    """l2-over-bands of interval-L^4 norms on the prefixes [t0, ti]:
    each band contributes (int |P_k f|^4)^{1/2} = (L^4 norm)^2."""
    out = []
    for i in range(len(t)):
        total_sq = 0.0
        for rows in band_sums.values():
            integral = rows[0] if i == 0 else float(
                np.trapezoid(rows[:i + 1], t[:i + 1]))
            total_sq += integral ** 0.5
        out.append(math.sqrt(total_sq))
    return out


def _gauge_pipeline(traj, cfg, retained, bands):
    """Heat flows, frames, and gauge data for the retained slices."""
    needed = sorted({j for i in retained for j in (i - 1, i, i + 1)})
    s_max = cfg.resolved_s_max()

    def one_heat(j):
        heat = run_heat(traj.slices[j], s_max, n_slices=cfg.n_s_slices)
        frames, drift = transport_frame(heat)
        return heat, frames, drift

    results = dict(zip(needed, _map_parallel(one_heat, needed)))
    gauges = {}
    for i in retained:
        heats = tuple(results[j][0] for j in (i - 1, i, i + 1))
        frames = tuple(results[j][1] for j in (i - 1, i, i + 1))
        gauges[i] = extract_gauge(heats, frames, cfg.dt, t_center=traj.t[i])
    heat_center = {i: results[i][0] for i in retained}
    max_drift = max(results[j][2] for j in needed)
    return gauges, heat_center, max_drift


def _a_integral_checks(gauge, grid):
    out = {}
    for alpha, frame_field in (("1", gauge.conn1[0]), ("2", gauge.conn2[0]),
                               ("t", gauge.connt[0])):
        ref = max(l2_norm(frame_field, grid), 1e-300)
        row = {}
        for tag, mu_flag in (("adopted", True), ("literal", False)):
            try:
                a_int, tail = a_from_integral(gauge, alpha, 0,
                                              include_mu=mu_flag)
                row[tag] = l2_norm(a_int - frame_field, grid) / ref
                row[tag + "_tail"] = tail
            except TailTooLarge as exc:
                row[tag] = math.inf
                row[tag + "_error"] = str(exc)
        out[alpha] = row
    return out


def run_experiment(cfg, output_dir=None, write_outputs=True):
    """Full pipeline per the configuration; returns ExperimentResult and
    (optionally) writes report.json, series.csv, config.used.toml, and
    snapshot triplets under the output directory."""
    phi0 = generate_initial_data(cfg)
    grid, target = phi0.grid, phi0.target
    bands = LPBandSet.for_grid(grid)
    phi0.check()

    traj = run_sm(phi0, cfg.T, cfg.dt)
    n = len(traj)
    step = cfg.resolved_retain_every()
    retained = [i for i in range(step, n - 1, step)] or [max(1, n // 2)]
    retained = [i for i in retained if 1 <= i <= n - 2]

    gauges, heat_center, max_drift = _gauge_pipeline(traj, cfg, retained,
                                                     bands)

    # --- per-slice audits
    constraint_max = max(p.check() for p in traj.slices)
    energy_series = traj.energy_series
    drift_energy = float(np.max(np.abs(energy_series - energy_series[0]))
                         / max(abs(energy_series[0]), 1e-300))
    drift_mass = float(np.max(np.abs(traj.mass_series - traj.mass_series[0]))
                       / max(abs(traj.mass_series[0]), 1e-300))
    heat_increase = max(
        float(np.max(np.diff(h.energy_series), initial=-math.inf))
        for h in heat_center.values())

    residual_max = {}
    residual_by_slice = {}
    energy_identity_rel = 0.0
    conn_s = 0.0
    a_checks = {}
    for i in retained:
        g = gauges[i]
        window = _subsample(list(range(1, max(g.n_ramp, 2))))
        rep = gauge_residuals(g, s_indices=window)
        residual_by_slice[str(i)] = rep.as_dict()
        for k, v in rep.values.items():
            residual_max[k] = max(residual_max.get(k, 0.0), v)
        lhs, rhs = gauge_energy_identity(g, map_energy(traj.slices[i]))
        energy_identity_rel = max(energy_identity_rel,
                                  abs(lhs - rhs) / max(rhs, 1e-300))
        conn_s = max(conn_s, max_conn_s(g))
        a_checks[str(i)] = _a_integral_checks(g, grid)
    weighted = weighted_decay_diagnostics(gauges[retained[0]])

    # --- norm battery on the s = 0 gauge fields across retained slices
    t_ret = np.array([traj.t[i] for i in retained])
    psi_comps = [SpaceTimeField(grid, t_ret,
                                np.stack([gauges[i].psi1[0] for i in retained])),
                 SpaceTimeField(grid, t_ret,
                                np.stack([gauges[i].psi2[0] for i in retained]))]
    grad_stacks = [[], []]
    for i in retained:
        d1, d2 = gradient(traj.slices[i].values, grid)
        grad_stacks[0].append(d1)
        grad_stacks[1].append(d2)
    grad_comps = []
    for stack in grad_stacks:
        arr = np.stack(stack)  # (nt, N, N, 3)
        for c in range(3):
            grad_comps.append(SpaceTimeField(grid, t_ret,
                                             arr[..., c].astype(complex)))

    l2l4_psi, psi_band_series = l2l4_norm(psi_comps, bands)
    l2l4_grad, grad_band_series = l2l4_norm(grad_comps, bands)
    ratio, degenerate = grad_phi_vs_psi_ratio(grad_comps, psi_comps, bands)

    # per-band solution-space norms and envelopes
    xk_values = {}
    for k in bands.ks:
        acc = 0.0
        for comp in psi_comps:
            band_traj = SpaceTimeField(
                grid, t_ret,
                np.stack([bands.project(comp.values[i], k)
                          for i in range(len(t_ret))]))
            v, _ = xk_norm(band_traj, k, bands, M=cfg.angle_count)
            acc += v * v
        xk_values[k] = math.sqrt(acc)
    beta_values = {}
    for k in bands.ks:
        acc = 0.0
        for comp in psi_comps:
            acc += l2_norm(bands.project(comp.values[0], k), grid) ** 2
        beta_values[k] = math.sqrt(acc)

    envelopes = {}
    env_checks = {}
    upsilon0 = None
    zero_data = sum(xk_values[k] for k in bands.ks) == 0.0
    if zero_data:
        env_checks["degenerate_zero_data"] = True
    for sigma in range(0, -1 if zero_data else cfg.sigma_max + 1):
        b = envelope_from_values([xk_values[k] for k in bands.ks], bands.ks,
                                 cfg.delta, sigma)
        alpha = envelope_from_values([psi_band_series[k] for k in bands.ks],
                                     bands.ks, cfg.delta, sigma)
        beta = envelope_from_values([beta_values[k] for k in bands.ks],
                                    bands.ks, cfg.delta, sigma)
        ups = envelope_from_values(
            [alpha.values[ix] + beta.values[ix] for ix in range(len(bands.ks))],
            bands.ks, cfg.delta, 0)  # already sigma-weighted inputs
        envelopes[str(sigma)] = {
            "xk": list(b.values), "l4": list(alpha.values),
            "l2_initial": list(beta.values),
            "combined": [alpha.values[ix] + beta.values[ix]
                         for ix in range(len(bands.ks))]}
        p_exp = max(0.5, 2 * cfg.delta)
        env_checks[str(sigma)] = {
            "xk": envelope_summation_check(b, p_exp),
            "l4": envelope_summation_check(alpha, p_exp)}
        if sigma == 0:
            upsilon0 = envelope_from_values(
                [psi_band_series[k] + beta_values[k] for k in bands.ks],
                bands.ks, cfg.delta, 0)
            sum_b2 = b.sum_sq()
            sum_c2 = sum(xk_values[k] ** 2 for k in bands.ks)
            env_checks["comparability"] = {
                "sum_b2_over_sum_c2": sum_b2 / max(sum_c2, 1e-300),
                "upper": envelope_l2_comparability_constant(cfg.delta,
                                                            bands.ks),
                "lower": 1.0,
            }

    # --- decay of per-band L^4 norms along the heat time
    some_gauge = gauges[retained[0]]
    s_grid = some_gauge.s
    decay = {}
    band_l4_by_s = {k: [] for k in bands.ks}
    for i_s in range(len(s_grid)):
        comps_s = [SpaceTimeField(grid, t_ret,
                                  np.stack([gauges[i].psi1[i_s]
                                            for i in retained])),
                   SpaceTimeField(grid, t_ret,
                                  np.stack([gauges[i].psi2[i_s]
                                            for i in retained]))]
        _, series = l2l4_norm(comps_s, bands)
        for k in bands.ks:
            band_l4_by_s[k].append(series[k])
    for k in bands.ks:
        vals = np.array(band_l4_by_s[k])
        try:
            expo, quality = decay_fit(s_grid, vals, k)
            decay[str(k)] = {"exponent": expo, "quality": quality}
        except Exception as exc:  # TooFewSamples on under-resolved bands
            decay[str(k)] = {"error": str(exc)}
    # --- bilinear decay ratios
    bilinear = []
    if upsilon0 is not None and max(upsilon0.values) > 0:
        for j in bands.ks:
            for k in bands.ks:
                if k < j:
                    continue
                for s_v, st_v in ((0.0, 0.0), (4.0 ** (-j), 0.0),
                                  (4.0 ** (-j), 4.0 ** (-k))):
                    i_s = int(np.argmin(np.abs(s_grid - s_v)))
                    i_st = int(np.argmin(np.abs(s_grid - st_v)))
                    pj = SpaceTimeField(grid, t_ret, np.sqrt(np.abs(np.stack(
                        [bands.project(gauges[i].psi1[i_s], j)
                         for i in retained])) ** 2 + np.abs(np.stack(
                             [bands.project(gauges[i].psi2[i_s], j)
                              for i in retained])) ** 2))
                    pk = SpaceTimeField(grid, t_ret, np.sqrt(np.abs(np.stack(
                        [bands.project(gauges[i].psi1[i_st], k)
                         for i in retained])) ** 2 + np.abs(np.stack(
                             [bands.project(gauges[i].psi2[i_st], k)
                              for i in retained])) ** 2))
                    r = bilinear_ratio(pj, pk, float(s_grid[i_s]),
                                       float(s_grid[i_st]), j, k, upsilon0)
                    bilinear.append({"j": j, "k": k, "s": float(s_grid[i_s]),
                                     "stilde": float(s_grid[i_st]),
                                     "ratio": r})

    # --- free-propagator sanity ratios
    mid_band = bands.ks[len(bands.ks) // 2]
    stri = [free_strichartz_ratio(grid, mid_band, seed) for seed in range(16)]

    # --- CSV series
    band_sums_psi = _band_l4_sums(psi_comps, bands, grid)
    band_sums_grad = _band_l4_sums(grad_comps, bands, grid)
    cum_psi = _cumulative_l2l4(t_ret, band_sums_psi)
    cum_grad = _cumulative_l2l4(t_ret, band_sums_grad)
    rows = ["t,energy,mass,hdot1,hdot3,l2l4_grad_phi,l2l4_psi_x"]
    for ix, i in enumerate(retained):
        p = traj.slices[i]
        rows.append(",".join(repr(float(x)) for x in (
            traj.t[i], traj.energy_series[i], traj.mass_series[i],
            sobolev_seminorm(p, 0.0), sobolev_seminorm(p, 2.0),
            cum_grad[ix], cum_psi[ix])))
    csv_text = "\n".join(rows) + "\n"

    # --- checks
    checks = {
        "constraint_max": (constraint_max, 1e-12),
        "energy_identity_rel": (energy_identity_rel, 1e-8),
        "conn_s_max": (conn_s, 1e-10),
        "heat_energy_max_increase": (heat_increase, 1e-10),
        "sm_energy_drift": (drift_energy, 1e-6),
        "sm_mass_drift": (drift_mass, 1e-6),
    }
    for name in RESIDUAL_SUITE:
        checks["residual_" + name] = (residual_max.get(name, 0.0),
                                      cfg.residual_tol)
    failures = [name for name, (val, tol) in checks.items() if val > tol]
    for sigma_key, row in env_checks.items():
        if sigma_key == "degenerate_zero_data":
            continue   # zero fields construct no envelope
        if sigma_key == "comparability":
            comp = row
            ok = (1.0 - 1e-12 <= comp["sum_b2_over_sum_c2"]
                  <= comp["upper"] * (1 + 1e-12))
            if not ok:
                failures.append("envelope_comparability")
        else:
            for nm, chk in row.items():
                if not chk["passed"]:
                    failures.append(f"envelope_summation_{sigma_key}_{nm}")
    passed = not failures

    cfg_dict = {k: v for k, v in vars(cfg).items() if k != "output_dir"}
    report = {
        "config": cfg_dict,
        "flags": surrogate_flags(bands, cfg.angle_count),
        "gauge": {
            "max_frame_drift": max_drift,
            "conn_s_max": conn_s,
            "energy_identity_rel": energy_identity_rel,
            "a_integral": a_checks,
            "weighted_decay": weighted,
        },
        "residual_max": dict(sorted(residual_max.items())),
        "residuals_by_slice": residual_by_slice,
        "series": {
            "retained_t": [float(traj.t[i]) for i in retained],
            "energy_first_last": [float(energy_series[0]),
                                  float(energy_series[-1])],
            "sm_energy_drift": drift_energy,
            "sm_mass_drift": drift_mass,
            "heat_energy_max_increase": heat_increase,
            "constraint_max": constraint_max,
        },
        "norms": {
            "l2l4_psi_x": l2l4_psi,
            "l2l4_grad_phi": l2l4_grad,
            "grad_vs_psi_ratio": ratio,
            "grad_vs_psi_degenerate": degenerate,
            "l2l4_psi_band_series": {str(k): v
                                     for k, v in psi_band_series.items()},
            "l2l4_grad_band_series": {str(k): v
                                      for k, v in grad_band_series.items()},
            "xk_band_values": {str(k): v for k, v in xk_values.items()},
            "strichartz_ratio_max": max(stri),
        },
        "envelopes": envelopes,
        "envelope_checks": env_checks,
        "decay_fits": decay,
        "decay_series": {str(k): band_l4_by_s[k] for k in bands.ks},
        "s_grid": [float(s) for s in s_grid],
        "bilinear": bilinear,
        "checks": {k: {"value": v, "tol": tol, "ok": v <= tol}
                   for k, (v, tol) in checks.items()},
        "failures": failures,
        "pass": passed,
    }

    if write_outputs:
        out = Path(output_dir if output_dir is not None else cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True, default=float)
            + "\n")
        (out / "series.csv").write_text(csv_text)
        (out / "config.used.toml").write_text(config_to_text(cfg))
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for i in retained:
            for tag, j in (("m", i - 1), ("c", i), ("p", i + 1)):
                write_snapshot(traj.slices[j],
                               snap_dir / f"slice_{i:05d}_{tag}.csm",
                               t=traj.t[j], s=0.0)

    return ExperimentResult(report=report, csv_text=csv_text, passed=passed,
                            failures=failures)
