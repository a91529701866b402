"""Command-line entry points.

Subcommands: run <config>, check-gauge <snapshot-dir>,
check-norms <snapshot-dir>, gen-data <config> <out>, info <snapshot>.

Exit codes: 0 pass, 1 assertion-class failure, 2 configuration error,
3 numerical failure (non-convergent step / degenerate projection).
"""

import argparse
import json
import math
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import (CSMError, ConfigError, DegeneratePoint,
                     EnergyAboveThreshold, NoConvergence)
from .gauge import extract_gauge, gauge_residuals, max_conn_s, transport_frame
from .heat_flow import run_heat
from .manifold import energy, mass
from .norms import (NormReport, envelope_from_values,
                    envelope_summation_check, free_strichartz_ratio,
                    l2l4_norm, sobolev_seminorm, surrogate_flags)
from .runner import RESIDUAL_SUITE, run_experiment
from .scenarios import generate_initial_data
from .snapshot import read_snapshot, write_snapshot
from .spectral import LPBandSet, SpaceTimeField, gradient

EXIT_PASS = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load(path):
    if not Path(path).exists():
        raise ConfigError(f"config file {path!r} not found")
    return load_config(path)


def cmd_run(args):
    cfg = _load(args.config)
    if args.output is not None:
        cfg.output_dir = args.output
    result = run_experiment(cfg)
    out = Path(cfg.output_dir)
    print(f"report: {out / 'report.json'}")
    print(f"series: {out / 'series.csv'}")
    for name, chk in sorted(result.report["checks"].items()):
        state = "ok " if chk["ok"] else "FAIL"
        print(f"  [{state}] {name}: {chk['value']:.3e} (tol {chk['tol']:g})")
    print("PASS" if result.passed else
          f"FAIL: {', '.join(result.failures)}")
    return EXIT_PASS if result.passed else EXIT_ASSERTION


def _snapshot_triplets(snap_dir):
    """Group snapshot files slice_#####_{m,c,p}.csm by slice index."""
    groups = defaultdict(dict)
    for path in sorted(Path(snap_dir).glob("*.csm")):
        stem = path.stem
        parts = stem.split("_")
        if len(parts) >= 3 and parts[-1] in ("m", "c", "p"):
            groups["_".join(parts[:-1])][parts[-1]] = path
        else:
            groups[stem]["c"] = path
    return groups


def _dir_config(snap_dir):
    used = Path(snap_dir).parent / "config.used.toml"
    if used.exists():
        return load_config(str(used))
    used = Path(snap_dir) / "config.used.toml"
    if used.exists():
        return load_config(str(used))
    return RunConfig()


def cmd_check_gauge(args):
    snap_dir = Path(args.snapshot_dir)
    cfg = _dir_config(snap_dir)
    groups = _snapshot_triplets(snap_dir)
    triplets = {k: g for k, g in groups.items() if set(g) == {"m", "c", "p"}}
    if not triplets:
        print("no snapshot triplets (slice_*_{m,c,p}.csm) found", file=sys.stderr)
        return EXIT_CONFIG
    worst = {}
    for key, g in sorted(triplets.items()):
        snaps = {tag: read_snapshot(g[tag]) for tag in ("m", "c", "p")}
        dt = (snaps["p"].t - snaps["m"].t) / 2.0
        if dt <= 0:
            raise ConfigError(f"triplet {key}: non-increasing times")
        fields = {tag: s.to_map_field() for tag, s in snaps.items()}
        heats, frames = [], []
        for tag in ("m", "c", "p"):
            h = run_heat(fields[tag], cfg.resolved_s_max(),
                         n_slices=cfg.n_s_slices)
            heats.append(h)
            frames.append(transport_frame(h)[0])
        gauge = extract_gauge(tuple(heats), tuple(frames), dt,
                              t_center=snaps["c"].t)
        rep = gauge_residuals(gauge)
        print(f"{key}: t = {snaps['c'].t:g}")
        for name in sorted(rep.values):
            print(f"    {name:18s} {rep.values[name]:.3e}")
        for name, v in rep.values.items():
            worst[name] = max(worst.get(name, 0.0), v)
    bad = [n for n in RESIDUAL_SUITE if worst.get(n, 0.0) > cfg.residual_tol]
    bad += ["conn_s_max"] if worst.get("conn_s_max", 0.0) > 1e-10 else []
    print("PASS" if not bad else f"FAIL: {', '.join(bad)}")
    return EXIT_PASS if not bad else EXIT_ASSERTION


def cmd_check_norms(args):
    snap_dir = Path(args.snapshot_dir)
    cfg = _dir_config(snap_dir)
    groups = _snapshot_triplets(snap_dir)
    centers = [g["c"] for g in groups.values() if "c" in g]
    if not centers:
        print("no snapshots found", file=sys.stderr)
        return EXIT_CONFIG
    snaps = sorted((read_snapshot(p) for p in centers), key=lambda s: s.t)
    fields = [s.to_map_field() for s in snaps]
    grid = fields[0].grid
    bands = LPBandSet.for_grid(grid)
    t = np.array([s.t for s in snaps])
    comps = []
    for c in range(3):
        for axis in range(2):
            comps.append(SpaceTimeField(grid, t, np.stack(
                [gradient(f.values, grid)[axis][..., c].astype(complex)
                 for f in fields])))
    total, series = l2l4_norm(comps, bands)
    rep = NormReport(flags=surrogate_flags(bands, cfg.angle_count))
    rep.add("l2l4_grad_phi", total)
    for k in bands.ks:
        rep.add(f"l2l4_grad_phi_band_{k}", series[k])
    env = envelope_from_values([series[k] for k in bands.ks], bands.ks,
                               cfg.delta, 0)
    chk = envelope_summation_check(env, max(0.5, 2 * cfg.delta))
    rep.add("envelope_summation_max_ratio", chk["max_ratio_low"])
    rep.add("envelope_summation_bound", chk["bound"])
    for i, f in enumerate(fields):
        rep.add(f"energy_t{i}", energy(f))
        rep.add(f"mass_t{i}", mass(f))
        rep.add(f"hdot1_t{i}", sobolev_seminorm(f, 0.0))
        rep.add(f"hdot3_t{i}", sobolev_seminorm(f, 2.0))
    mid = bands.ks[len(bands.ks) // 2]
    rep.add(f"strichartz_ratio_band_{mid}",
            max(free_strichartz_ratio(grid, mid, seed) for seed in range(16)))
    print(f"slices: {len(fields)}, t in [{t[0]:g}, {t[-1]:g}]")
    print(json.dumps(rep.as_dict(), indent=2, sort_keys=True))
    print("envelope summation:", "ok" if chk["passed"] else "FAIL")
    return EXIT_PASS if chk["passed"] else EXIT_ASSERTION


def cmd_gen_data(args):
    cfg = _load(args.config)
    phi = generate_initial_data(cfg)
    write_snapshot(phi, args.out, t=0.0, s=0.0)
    print(f"{args.out}: scenario={cfg.scenario} target={cfg.target} "
          f"N={cfg.N} L={cfg.L:g} E={energy(phi):.6f} mass={mass(phi):.6f}")
    return EXIT_PASS


def cmd_info(args):
    snap = read_snapshot(args.snapshot)
    f = snap.to_map_field()
    dev = f.check(tol=math.inf)
    print(f"magic CSM1 v1, mu={snap.mu} ({'sphere' if snap.mu == 1 else 'hyperbolic'})")
    print(f"N={snap.N} L={snap.L:g} t={snap.t:g} s={snap.s:g}")
    print(f"energy={energy(f):.6f} mass={mass(f):.6f} "
          f"constraint_dev={dev:.3e}")
    return EXIT_PASS


def build_parser():
    ap = argparse.ArgumentParser(
        prog="csmap",
        description="Schrodinger-map flow simulator and gauge/norm verifier")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full experiment pipeline")
    p.add_argument("config")
    p.add_argument("-o", "--output", default=None,
                   help="override output_dir from the config")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("check-gauge",
                       help="recompute gauge residuals from snapshots")
    p.add_argument("snapshot_dir")
    p.set_defaults(fn=cmd_check_gauge)

    p = sub.add_parser("check-norms",
                       help="norm battery over center snapshots")
    p.add_argument("snapshot_dir")
    p.set_defaults(fn=cmd_check_norms)

    p = sub.add_parser("gen-data", help="generate initial data snapshot")
    p.add_argument("config")
    p.add_argument("out")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("info", help="print snapshot header and invariants")
    p.add_argument("snapshot")
    p.set_defaults(fn=cmd_info)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoConvergence, DegeneratePoint, EnergyAboveThreshold) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CSMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSERTION


if __name__ == "__main__":
    sys.exit(main())
