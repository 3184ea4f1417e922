"""Command-line driver: solve, classify, sweep, find-ac, figure1, verify."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .classify import ClassifyBudget, chamber_membership, classify_trajectory
from .config import RunConfig, load_config
from .errors import BracketError, ConfigError, G2FlowError
from .flow import Budget, StopEvent, Trajectory, integrate, vec_to_state
from .invariants import FullState, eval_F, eval_lambda, hamiltonian, mean_curvature, u1_from_full
from .params import ModelParams
from .seeds import SeedSpec
from .shooter import _forward_side, _to_aparam, extend_ac_backward, find_beta_ac, find_c_ac, GammaCurve

CSV_HEADER = (
    "param,t,s,a,b,da,db,F,H,mean_curvature,alc_chamber,alc_strict,death_quadrant,ac_backward"
)


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.17g}"


def spec_from_config(cfg: RunConfig) -> SeedSpec:
    fam = (cfg.family or "").lower()
    swp = cfg.t_switch if cfg.t_switch is not None else cfg.t0
    if fam in ("cone",):
        return SeedSpec(family="cone", switch_parameter=swp or 1.0)
    if fam in ("b7", "delta_su2"):
        if cfg.alpha3 is None:
            raise ConfigError("b7 needs --alpha3")
        a3 = cfg.alpha3
        a1 = cfg.alpha1
        a2 = cfg.alpha2
        if a1 is None:  # solve 64 r0 (2 a1 + a3) = 1
            a1 = (1.0 / (64.0 * cfg.r0) - a3) / 2.0
        if a2 is None:
            a2 = a1
        return SeedSpec(family="delta_su2", r0=cfg.r0, alphas=(a1, a2, a3), switch_parameter=swp)
    if fam in ("d7", "su2_factor"):
        if cfg.alpha3 is None:
            raise ConfigError("d7 needs --alpha3")
        a3 = cfg.alpha3
        a1 = cfg.alpha1 if cfg.alpha1 is not None else 1.0 / math.sqrt(a3)
        a2 = cfg.alpha2 if cfg.alpha2 is not None else a1
        return SeedSpec(family="su2_factor", r0=cfg.r0, alphas=(a1, a2, a3), switch_parameter=swp)
    if fam in ("kmn", "k11", "c7"):
        if cfg.beta is None:
            raise ConfigError("kmn needs --beta")
        return SeedSpec(
            family="kmn", m=cfg.m, n=cfg.n, r0=cfg.r0, beta=cfg.beta, alpha=cfg.alpha,
            switch_parameter=swp,
        )
    if fam in ("cs", "cs_end"):
        return SeedSpec(family="cs_end", c=cfg.c, switch_parameter=swp)
    if fam in ("ac", "ac_end"):
        p = cfg.p if cfg.p is not None else -(cfg.m**2) * cfg.r0**3
        q = cfg.q if cfg.q is not None else (cfg.n**2) * cfg.r0**3
        return SeedSpec(family="ac_end", p=p, q=q, c=cfg.c, switch_parameter=swp)
    raise ConfigError(f"unknown family {cfg.family!r}")


def _csv_rows(traj: Trajectory) -> list[str]:
    params = traj.params
    rows = []
    for i in range(len(traj)):
        pv = traj.ts[i]
        st = traj.state(i)
        if isinstance(st, FullState):
            try:
                st_u1 = u1_from_full(st)
            except G2FlowError:
                st_u1 = None
        else:
            st_u1 = st
        if st_u1 is not None:
            a, b, da, db = st_u1.a, st_u1.b, st_u1.da, st_u1.db
            f = eval_F(a, b, params)[0]
        else:
            y, x = st.y, st.x
            a, b = y[0], y[2]
            da = db = float("nan")
            f = -eval_lambda(y, params)
        tval = pv if traj.system in ("full", "u1_arc") else float("nan")
        sval = a if traj.system in ("full", "u1_arc") else pv
        try:
            h = hamiltonian(st if st_u1 is None else st_u1, params)
        except G2FlowError:
            h = float("nan")
        try:
            mc = mean_curvature(st if st_u1 is None else st_u1, params)
        except G2FlowError:
            mc = float("nan")
        flags = [-1, -1, -1, -1]
        if st_u1 is not None and st_u1.da > 0 and st_u1.db > 0 and f > 0:
            mem = chamber_membership(st_u1, params)
            flags = [
                int("alc_chamber" in mem),
                int("alc_strict" in mem),
                int("death_quadrant" in mem),
                int("ac_backward" in mem),
            ]
        rows.append(
            ",".join(
                [_fmt(pv), _fmt(tval), _fmt(sval), _fmt(a), _fmt(b), _fmt(da), _fmt(db), _fmt(f), _fmt(h), _fmt(mc)]
                + [str(fl) for fl in flags]
            )
        )
    return rows


def write_trajectory_csv(path: str, traj: Trajectory):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in _csv_rows(traj):
            fh.write(row + "\n")


def _manifest(cfg: RunConfig, events: list, wall: float | None) -> dict:
    out = {
        "config": cfg.echo(),
        "config_hash": cfg.hash(),
        "events": [{"kind": k, "param": float(tp)} for k, tp, _ in events],
    }
    if wall is not None:
        out["wall_time_s"] = wall
    return out


def cmd_solve(cfg: RunConfig) -> dict:
    started = time.perf_counter()
    spec = spec_from_config(cfg)
    params, state, _ = spec.build()
    if isinstance(state, FullState):
        try:
            state = u1_from_full(state)  # the reduced system is the default form
        except G2FlowError:
            pass  # genuinely non-U(1): run the full system
    t0 = spec.switch_parameter if spec.switch_parameter is not None else spec.default_switch()
    if cfg.family == "cone" and cfg.t0 is not None:
        t0 = cfg.t0
    t1 = cfg.t1 if cfg.t1 is not None else t0 + cfg.t_factor * params.scale3 ** (1.0 / 3.0)

    # chamber entries are recorded and the run continues; only genuine
    # degenerations terminate it
    recording = [
        StopEvent.make("enters_alc_chamber", strict=True),
        StopEvent.make("enters_death_chamber"),
        StopEvent.make("reaches_a_equals_b"),
    ]
    terminal = [StopEvent.make("F_vanishes"), StopEvent.make("blow_up")]
    legs = []
    events = []
    cur_state, cur_t = state, t0
    active = list(recording)
    for _ in range(len(recording) + 1):
        traj = integrate(
            cur_state, cur_t, params, active + terminal,
            Budget(span=t1 - cur_t, max_steps=cfg.max_steps), rtol=cfg.rtol,
        )
        legs.append(traj)
        kind, tp, zv = traj.terminal_event
        events.append(traj.terminal_event)
        if kind in ("F_vanishes", "blow_up", "budget_exhausted") or tp >= t1:
            break
        active = [ev for ev in active if ev.kind != kind]
        cur_state = vec_to_state(traj.system, tp, zv)
        cur_t = tp

    merged = _merge_legs(legs, params)
    os.makedirs(cfg.out_dir, exist_ok=True)
    csv_path = os.path.join(cfg.out_dir, "trajectory.csv")
    write_trajectory_csv(csv_path, merged)
    manifest = _manifest(cfg, events, time.perf_counter() - started)
    manifest["csv"] = csv_path
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def _merge_legs(legs: list[Trajectory], params: ModelParams) -> Trajectory:
    ts = np.concatenate([legs[0].ts] + [leg.ts[1:] for leg in legs[1:]])
    zs = np.concatenate([legs[0].zs] + [leg.zs[1:] for leg in legs[1:]])
    events = [ev for leg in legs for ev in leg.events]
    segments = [seg for leg in legs for seg in leg.segments]
    return Trajectory(
        system=legs[0].system, params=params, ts=ts, zs=zs, events=events, segments=segments,
        anchor=legs[0].anchor,
    )


def cmd_classify(cfg: RunConfig) -> dict:
    spec = spec_from_config(cfg)
    verdict = classify_trajectory(
        spec, ClassifyBudget(t_factor=cfg.t_factor, max_steps=cfg.max_steps),
        confirm_blowup=cfg.confirm_blowup, rtol=cfg.rtol,
    )
    payload = json.loads(verdict.to_json())
    payload["config_hash"] = cfg.hash()
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "verdict.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return payload


def cmd_sweep(cfg: RunConfig) -> dict:
    if not cfg.param or not cfg.values:
        raise ConfigError("sweep needs --param and --values")
    try:
        values = [float(v) for v in cfg.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values list: {exc}") from exc
    out = []
    for v in values:
        sub = replace(cfg, **{cfg.param: v})
        spec = spec_from_config(sub)
        verdict = classify_trajectory(
            spec, ClassifyBudget(t_factor=cfg.t_factor, max_steps=cfg.max_steps),
            confirm_blowup=cfg.confirm_blowup, rtol=cfg.rtol,
        )
        out.append({"value": v, "verdict": json.loads(verdict.to_json())})
    report = {"param": cfg.param, "results": out, "config_hash": cfg.hash()}
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return report


def cmd_find_ac(cfg: RunConfig) -> dict:
    fwd = find_beta_ac(cfg.m, cfg.n, cfg.r0, tol=max(cfg.tol, 1e-8), rtol=cfg.rtol)
    back = find_c_ac(cfg.m, cfg.n, cfg.r0, tol=max(cfg.tol, 1e-8), k=cfg.k, rtol=cfg.rtol)
    beta_back = (back.closure or {}).get("beta")
    residual = None
    if beta_back is not None:
        residual = abs(fwd.critical_value - beta_back) / fwd.critical_value
    report = {
        "m": cfg.m,
        "n": cfg.n,
        "r0": cfg.r0,
        "beta_ac_forward": json.loads(fwd.to_json()),
        "c_ac_backward": json.loads(back.to_json()),
        "cross_validation_residual": residual,
        "config_hash": cfg.hash(),
    }
    os.makedirs(cfg.out_dir, exist_ok=True)
    params = ModelParams.kmn(cfg.m, cfg.n, cfg.r0)
    from .seeds import seed_ac_end

    _, st = seed_ac_end(params, back.critical_value, back.meta.get("T_switch", 10.0))
    traj, _hit = extend_ac_backward(
        (params, st), GammaCurve(m=cfg.m, n=cfg.n, r0=cfg.r0, k=cfg.k), rtol=cfg.rtol
    )
    write_trajectory_csv(os.path.join(cfg.out_dir, "critical_trajectory.csv"), traj)
    with open(os.path.join(cfg.out_dir, "find_ac.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return report


def cmd_figure1(cfg: RunConfig) -> dict:
    m, n, r0 = cfg.m, cfg.n, cfg.r0
    fwd = find_beta_ac(m, n, r0, tol=min(cfg.tol, 1e-4), rtol=cfg.rtol)
    beta_ac = fwd.critical_value
    params = ModelParams.kmn(m, n, r0)
    ladder = [0.35, 0.6, 0.85, 1.0, 1.6, 3.0]
    os.makedirs(cfg.out_dir, exist_ok=True)
    curves = []
    t_switch = 0.05 * r0
    from .seeds import seed_kmn

    for i, frac in enumerate(ladder):
        beta = frac * beta_ac
        if frac == 1.0:
            tag = "AC"
        else:
            side = _forward_side(m, n, r0, beta, t_switch, cfg.rtol, 50.0 * r0**3 * m * n)
            tag = {"alc": "ALC", "incomplete": "Incomplete"}.get(side, "Indeterminate")
        _, st = seed_kmn(m, n, r0, beta, t_switch=t_switch)
        seed = _to_aparam(u1_from_full(st))
        stops = [StopEvent.make("F_vanishes"), StopEvent.make("blow_up")]
        span = 12.0 * r0**3 * m * n
        traj = integrate(seed, seed.a, params, stops, Budget(span=span), rtol=cfg.rtol)
        fname = f"curve_{i:02d}_{tag.lower()}.csv"
        write_trajectory_csv(os.path.join(cfg.out_dir, fname), traj)
        curves.append({"file": fname, "beta": beta, "verdict": tag})

    script = [
        "set xlabel 'a'",
        "set ylabel 'b'",
        "set key off",
        "plot \\",
    ]
    color = {"ALC": "blue", "AC": "black", "Incomplete": "red", "Indeterminate": "gray"}
    for i, curve in enumerate(curves):
        sep = "," if i + 1 < len(curves) else ""
        script.append(
            f"  '{curve['file']}' using 4:5 with lines lc rgb '{color[curve['verdict']]}'{sep} \\"
        )
    with open(os.path.join(cfg.out_dir, "figure1.gp"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(script) + "\n")
    report = {
        "beta_ac": beta_ac,
        "bracket": list(fwd.bracket),
        "curves": curves,
        "config_hash": cfg.hash(),
    }
    with open(os.path.join(cfg.out_dir, "figure1.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return report


def cmd_verify(cfg: RunConfig) -> int:
    from .verification import run_verification

    results = run_verification(quick=cfg.quick, seed=cfg.seed)
    width = max(len(r.name) for r in results)
    print(f"{'check':<{width}}  status  runtime  measured vs expected")
    all_pass = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        all_pass &= r.passed
        print(f"{r.name:<{width}}  {status:6}  {r.runtime:6.2f}s  {r.measured} | {r.expected}")
    print("verdict:", "ALL PASS" if all_pass else "FAILURES PRESENT")
    return 0 if all_pass else 1


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="g2flow", description=__doc__)
    ap.add_argument("--config", help="JSON config file (or set G2FLOW_CONFIG)")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name):
        sp = sub.add_parser(name)
        sp.add_argument("--family")
        sp.add_argument("--m", type=int)
        sp.add_argument("--n", type=int)
        sp.add_argument("--r0", type=float)
        for fl in ("alpha1", "alpha2", "alpha3"):
            sp.add_argument(f"--{fl}", type=_float_or_auto)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--c", type=float)
        sp.add_argument("--p", type=float)
        sp.add_argument("--q", type=float)
        sp.add_argument("--t0", type=float)
        sp.add_argument("--t1", type=float)
        sp.add_argument("--t-switch", dest="t_switch", type=float)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--k", type=float)
        sp.add_argument("--rtol", type=float)
        sp.add_argument("--t-factor", dest="t_factor", type=float)
        sp.add_argument("--max-steps", dest="max_steps", type=int)
        sp.add_argument("--confirm-blowup", dest="confirm_blowup", action="store_const", const=True)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--quick", action="store_const", const=True)
        sp.add_argument("--param")
        sp.add_argument("--values")
        sp.add_argument("--out-dir", dest="out_dir")
        return sp

    for name in ("solve", "classify", "sweep", "find-ac", "figure1", "verify"):
        add(name)
    return ap


def _float_or_auto(text: str):
    if text == "auto":
        return None
    return float(text)


def main(argv=None) -> int:
    ap = _build_parser()
    ns = ap.parse_args(argv)
    overrides = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    try:
        cfg = load_config(ns.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if ns.command == "solve":
            cmd_solve(cfg)
            return 0
        if ns.command == "classify":
            payload = cmd_classify(cfg)
            print(json.dumps(payload, indent=2, sort_keys=True))
            return 0
        if ns.command == "sweep":
            cmd_sweep(cfg)
            return 0
        if ns.command == "find-ac":
            report = cmd_find_ac(cfg)
            print(json.dumps({"beta_ac": report["beta_ac_forward"]["critical_value"],
                              "c_ac": report["c_ac_backward"]["critical_value"],
                              "cross_validation_residual": report["cross_validation_residual"]},
                             indent=2, sort_keys=True))
            return 0
        if ns.command == "figure1":
            cmd_figure1(cfg)
            return 0
        if ns.command == "verify":
            return cmd_verify(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BracketError as exc:
        print(f"bracket error: {exc}", file=sys.stderr)
        for row in exc.scan_table:
            print(f"  scanned {row}", file=sys.stderr)
        return 4
    except G2FlowError as exc:
        print(f"integration error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
