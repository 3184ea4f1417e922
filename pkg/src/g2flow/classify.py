"""Global fate of a trajectory via the chamber criteria.

Forward completeness is governed by the sign of the mean curvature; once a
solution enters the (cushioned, strict) ALC chamber it stays there and has an
ALC end whose circle length is extracted by two independent estimators; entry
into the death quadrant forces forward incompleteness.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, G2FlowError, SeedError, StiffnessError
from .flow import Budget, StopEvent, Trajectory, integrate, state_to_vec, vec_to_state
from .invariants import FullState, U1State, eval_F, u1_from_full
from .params import ModelParams
from .seeds import NUINF, SeedSpec

CHAMBER_CUSHION = 1e-9
ELL_CROSS_TOL = 0.02
AC_RATIO_TOL = 1e-4
AC_EXPONENT_WINDOW = 0.5
AC_EXACT_FLOOR = 1e-12


@dataclass
class RatioMonitors:
    """The comparison ratios steering the ALC-growth argument."""

    alpha: float
    P: float
    Q: float
    R: float
    S: float


@dataclass
class Verdict:
    kind: str  # ALC | AC | Incomplete | Indeterminate
    ell: float | None = None
    ell_alt: float | None = None
    rate: float | None = None
    reason: str | None = None
    event: tuple | None = None
    budget_used: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "ell": self.ell,
            "ell_alt": self.ell_alt,
            "rate": self.rate,
            "reason": self.reason,
            "event": None
            if self.event is None
            else {"kind": self.event[0], "param": float(self.event[1])},
            "budget_used": self.budget_used,
            "diagnostics": _jsonable(self.diagnostics),
        }
        return json.dumps(payload, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def monitor_ratios(state: U1State, alpha: float, params: ModelParams) -> RatioMonitors:
    """P, Q, R, S at the state for the given exponent alpha."""
    if state.da <= 0 or state.db <= 0:
        raise DomainError("monitor_ratios requires da, db > 0")
    a, b = state.a, state.b
    lam = state.da / state.db
    f, fa, fb = eval_F(a, b, params)
    return RatioMonitors(
        alpha=alpha,
        P=b ** (1 + alpha) / a,
        Q=b**alpha / lam,
        R=(1 + alpha) * a - b * lam,
        S=alpha * (2 * f + a * fa) - (2 * b * fb - a * fa),
    )


def alc_strict_supported(params: ModelParams) -> bool:
    """Hypotheses under which the strict ALC chamber forces ALC asymptotics."""
    return params.q >= params.p or (params.q == -params.p and params.q <= 0)


def chamber_membership(
    state: U1State, params: ModelParams, cushion: float = CHAMBER_CUSHION
) -> set[str]:
    """Cushioned strict membership in the dynamically invariant regions.

    The ALC and death chambers carry a relative cushion against boundary
    chatter; the backward-AC region is tested with raw strict inequalities
    since its defining mode is legitimately tiny far out on an AC end.
    """
    f, _, _ = eval_F(state.a, state.b, params)
    if state.da <= 0 or state.db <= 0 or f <= 0:
        raise DomainError("state off the principal-orbit locus (need da, db, F > 0)")
    a, b, da, db = state.a, state.b, state.da, state.db
    bfl = params.b_floor
    out: set[str] = set()

    def strict(x, y):
        return x - y > cushion * (abs(x) + abs(y))

    alc = strict(da, db) and strict(a, b) and strict(b, bfl)
    if alc:
        out.add("alc_chamber")
        if alc_strict_supported(params) and strict(da * b, a * db):
            out.add("alc_strict")
    if strict(a * db, da * b) and strict(b, a) and strict(b, bfl) and a > 0:
        out.add("death_quadrant")
    if b > a > 0 and da > db > 0 and b > max(params.p, -params.q):
        out.add("ac_backward")
    return out


@dataclass
class ClassifyBudget:
    t_factor: float = 3e3  # absolute t ceiling, in units of the model scale
    max_doublings: int = 22
    max_steps: int = 400_000


def classify_trajectory(
    seed: SeedSpec | tuple,
    budget: ClassifyBudget | None = None,
    confirm_blowup: bool = False,
    rtol: float = 1e-11,
) -> Verdict:
    """Integrate a seed forward and decide ALC / AC / Incomplete / Indeterminate."""
    budget = budget or ClassifyBudget()
    if isinstance(seed, SeedSpec):
        params, state0, _series = seed.build()
        t0 = seed.switch_parameter if seed.switch_parameter is not None else seed.default_switch()
    else:
        params, state0, t0 = seed

    if isinstance(state0, FullState):
        try:
            state0 = u1_from_full(state0)
        except DomainError:
            return _classify_full(state0, t0, params, budget, rtol)

    scale = max(params.scale3 ** (1.0 / 3.0), t0)
    t_max = max(200.0 * t0, budget.t_factor * scale)
    diag: dict = {"legs": 0}

    try:
        membership = chamber_membership(state0, params)
    except DomainError as exc:
        return Verdict(kind="Indeterminate", reason=f"inadmissible seed: {exc}")

    state, t_cur = state0, t0
    traj: Trajectory | None = None

    # a seed on the SU(2)^3-symmetric locus stays there; long integrations
    # would only amplify roundoff along the unstable separatrix mode
    if (
        abs(state0.a / state0.b - 1.0) <= AC_EXACT_FLOOR
        and abs(state0.da / state0.db - 1.0) <= AC_EXACT_FLOOR
    ):
        return _verify_conical(state0, t0, params, budget, rtol, diag)

    if "death_quadrant" in membership:
        return _incomplete_death(state, t_cur, params, confirm_blowup, rtol, diag)

    if "alc_strict" not in membership:
        stops = [
            StopEvent.make("enters_alc_chamber", strict=True),
            StopEvent.make("enters_death_chamber"),
            StopEvent.make("reaches_a_equals_b"),
            StopEvent.make("F_vanishes"),
            StopEvent.make("blow_up"),
        ]
        try:
            traj = integrate(
                state, t_cur, params, stops, Budget(span=t_max - t_cur, max_steps=budget.max_steps),
                rtol=rtol,
            )
        except (SeedError, StiffnessError) as exc:
            return Verdict(kind="Indeterminate", reason=str(exc))
        diag["legs"] += 1
        kind, t_ev, z_ev = traj.terminal_event
        state = vec_to_state(traj.system, t_ev, z_ev)
        t_cur = t_ev
        if kind == "enters_death_chamber":
            return _incomplete_death(state, t_cur, params, confirm_blowup, rtol, diag)
        if kind == "F_vanishes":
            diag["monitor_trace"] = monitor_trace(traj)
            return Verdict(
                kind="Incomplete", reason="F_vanishes", event=(kind, t_cur), diagnostics=diag
            )
        if kind == "blow_up":
            diag["monitor_trace"] = monitor_trace(traj)
            return Verdict(kind="Incomplete", reason="blow_up", event=(kind, t_cur), diagnostics=diag)
        if kind == "budget_exhausted":
            return _ac_or_indeterminate(traj, params, t_cur, diag)
        if kind == "reaches_a_equals_b":
            if not state.da > state.db:
                return Verdict(
                    kind="Indeterminate",
                    reason="crossed a = b without da > db",
                    event=(kind, t_cur),
                    diagnostics=diag,
                )
            # immediately past the crossing the strict ALC chamber opens up;
            # advance a hair so the strict inequalities hold with a margin
            diag["a_equals_b_at"] = t_cur
            nudge = integrate(
                state, t_cur, params, [], Budget(span=1e-3 * t_cur), rtol=rtol
            )
            state = vec_to_state(nudge.system, nudge.ts[-1], nudge.zs[-1])
            t_cur = nudge.ts[-1]
            if "alc_strict" not in chamber_membership(state, params):
                return Verdict(
                    kind="Indeterminate",
                    reason="strict chamber did not open after the a = b crossing",
                    diagnostics=diag,
                )

    # dwell: strict membership must persist over a span equal to the entry time
    dwell_end = 2.0 * t_cur
    try:
        leg = integrate(
            state,
            t_cur,
            params,
            [StopEvent.make("F_vanishes"), StopEvent.make("blow_up")],
            Budget(span=dwell_end - t_cur, max_steps=budget.max_steps),
            rtol=rtol,
        )
    except StiffnessError as exc:
        return Verdict(kind="Indeterminate", reason=str(exc), diagnostics=diag)
    diag["legs"] += 1
    if leg.terminal_event[0] != "budget_exhausted":
        k, tp, _ = leg.terminal_event
        return Verdict(kind="Incomplete", reason=k, event=(k, tp), diagnostics=diag)
    ok, bad_t = _strict_persists(leg, params)
    if not ok:
        return Verdict(
            kind="Indeterminate",
            reason=f"alc_strict membership lost at t = {bad_t} during dwell",
            diagnostics=diag,
        )
    state = vec_to_state(leg.system, leg.ts[-1], leg.zs[-1])
    t_cur = leg.ts[-1]
    diag["alc_dwell_end"] = t_cur

    # tail: double the horizon until both circle-length estimators agree
    prev_ell = None
    prev_slope = None
    last_leg = leg
    for _ in range(budget.max_doublings):
        span = t_cur  # doubles the current horizon
        if t_cur + span > 50 * t_max:
            break
        try:
            last_leg = integrate(
                state,
                t_cur,
                params,
                [StopEvent.make("F_vanishes"), StopEvent.make("blow_up")],
                Budget(span=span, max_steps=budget.max_steps),
                rtol=rtol,
            )
        except StiffnessError as exc:
            return Verdict(kind="Indeterminate", reason=str(exc), diagnostics=diag)
        diag["legs"] += 1
        if last_leg.terminal_event[0] != "budget_exhausted":
            k, tp, _ = last_leg.terminal_event
            return Verdict(kind="Incomplete", reason=k, event=(k, tp), diagnostics=diag)
        state = vec_to_state(last_leg.system, last_leg.ts[-1], last_leg.zs[-1])
        t_cur = last_leg.ts[-1]
        try:
            ell, ell_alt, ell_deriv = extract_alc_ell(last_leg)
        except ConvergenceError:
            prev_ell = None
            continue
        _a, _b, _, _ = last_leg.ab_arrays()
        slope = float(np.polyfit(np.log(last_leg.ts), np.log(_b), 1)[0])
        cross = abs(ell - ell_alt) / abs(ell) if ell else math.inf
        stable = prev_ell is not None and abs(ell - prev_ell) / abs(ell) < 0.01
        if cross <= ELL_CROSS_TOL and stable:
            ok, bad_t = _strict_persists(last_leg, params)
            if not ok:
                return Verdict(
                    kind="Indeterminate",
                    reason=f"alc_strict membership lost at t = {bad_t} in the tail",
                    diagnostics=diag,
                )
            diag["ell_deriv"] = ell_deriv
            diag["t_final"] = t_cur
            diag["min_mean_curvature"] = _min_mean_curvature(last_leg)
            # Richardson in 1/t kills the leading drift of the growth-exponent fit
            diag["b_fit_exponent"] = (
                2 * slope - prev_slope if prev_slope is not None else slope
            )
            diag["monitor_trace"] = monitor_trace(last_leg)
            return Verdict(
                kind="ALC",
                ell=ell,
                ell_alt=ell_alt,
                budget_used=t_cur,
                diagnostics=diag,
            )
        prev_ell = ell
        prev_slope = slope
    return Verdict(
        kind="Indeterminate",
        reason="ell estimators did not settle within budget",
        budget_used=t_cur,
        diagnostics=diag,
    )


def _verify_conical(state0, t0, params, budget, rtol, diag) -> Verdict:
    """Validate the AC criterion on a symmetric seed: |b/a - 1| pinned while t doubles."""
    span = 7.0 * t0  # lets t double three times, well before roundoff amplifies
    traj = integrate(
        state0,
        t0,
        params,
        [StopEvent.make("F_vanishes"), StopEvent.make("blow_up")],
        Budget(span=span, max_steps=budget.max_steps),
        rtol=rtol,
    )
    diag["legs"] = diag.get("legs", 0) + 1
    if traj.terminal_event[0] != "budget_exhausted":
        k, tp, _ = traj.terminal_event
        return Verdict(kind="Incomplete", reason=k, event=(k, tp), diagnostics=diag)
    a, b, _, _ = traj.ab_arrays()
    rel = float(np.max(np.abs(b / a - 1.0)))
    diag["ac_mode"] = "symmetric seed"
    diag["max_ratio_dev"] = rel
    diag["monitor_trace"] = monitor_trace(traj)
    nominal_rate = -NUINF if (params.p == 0 and params.q == 0) else -3.0
    if rel <= AC_RATIO_TOL:
        return Verdict(kind="AC", rate=nominal_rate, budget_used=float(traj.ts[-1]), diagnostics=diag)
    return Verdict(
        kind="Indeterminate",
        reason=f"symmetric seed lost the conical ratio: |b/a - 1| reached {rel:.2e}",
        diagnostics=diag,
    )


def _incomplete_death(state, t_cur, params, confirm_blowup, rtol, diag) -> Verdict:
    single = Trajectory(
        system=state_to_vec(state)[0], params=params, ts=np.array([t_cur]),
        zs=np.array([state_to_vec(state)[1]]),
    )
    diag["monitor_trace"] = monitor_trace(single)
    verdict = Verdict(
        kind="Incomplete",
        reason="death_quadrant",
        event=("enters_death_chamber", t_cur),
        diagnostics=diag,
    )
    if confirm_blowup:
        try:
            leg = integrate(
                state,
                t_cur,
                params,
                [StopEvent.make("F_vanishes"), StopEvent.make("blow_up")],
                Budget(span=1e6 * max(t_cur, 1.0)),
                rtol=rtol,
            )
            verdict.diagnostics["confirmed"] = leg.terminal_event[0]
            verdict.diagnostics["confirm_param"] = float(leg.terminal_event[1])
        except StiffnessError as exc:
            verdict.diagnostics["confirmed"] = f"stiffness: {exc}"
    return verdict


def _strict_persists(traj: Trajectory, params: ModelParams) -> tuple[bool, float | None]:
    for i in range(len(traj)):
        st = traj.state(i)
        if isinstance(st, FullState):
            st = u1_from_full(st)
        try:
            if "alc_strict" not in chamber_membership(st, params, cushion=0.0):
                return False, float(traj.ts[i])
        except DomainError:
            return False, float(traj.ts[i])
    return True, None


def _min_mean_curvature(traj: Trajectory) -> float:
    from .invariants import mean_curvature

    vals = []
    for i in range(len(traj)):
        st = traj.state(i)
        vals.append(mean_curvature(st, traj.params))
    return float(np.min(vals))


def monitor_trace(traj: Trajectory, alpha: float = 0.5, n: int = 8) -> list[dict]:
    """Sampled comparison-ratio and conservation monitors along a trajectory."""
    from .invariants import hamiltonian, mean_curvature

    out = []
    idx = np.unique(np.linspace(0, len(traj) - 1, n).astype(int))
    for i in idx:
        st = traj.state(i)
        if isinstance(st, FullState):
            try:
                st = u1_from_full(st)
            except DomainError:
                continue
        row = {"param": float(traj.ts[i])}
        try:
            mon = monitor_ratios(st, alpha, traj.params)
            row.update({"P": mon.P, "Q": mon.Q, "R": mon.R, "S": mon.S, "alpha": alpha})
            row["H"] = hamiltonian(st, traj.params)
            row["mean_curvature"] = mean_curvature(st, traj.params)
        except (DomainError, G2FlowError):
            continue
        out.append(row)
    return out


def extract_alc_ell(traj: Trajectory) -> tuple[float, float, float]:
    """Two independent ALC circle-length estimators (plus a derivative-based one).

    ell       from 6 b / t^2, Richardson-extrapolated in 1/t;
    ell_alt   from a^2/b^3 -> 2/(3 ell^3);
    ell_deriv from 3 db/dt / t (diagnostic only).
    """
    if traj.system == "u1_a":
        raise DomainError("ell extraction needs an arc-length trajectory")
    T = traj.ts[-1]
    Th = T / 2
    if Th < traj.ts[0]:
        raise ConvergenceError("trajectory too short for Richardson extrapolation")

    def at(tv):
        z = traj.interpolate(tv)
        st = vec_to_state(traj.system, tv, z)
        if isinstance(st, FullState):
            st = u1_from_full(st)
        return st

    s1, s2 = at(Th), at(T)
    e1, e2 = 6 * s1.b / Th**2, 6 * s2.b / T**2
    ell = 2 * e2 - e1
    r1, r2 = s1.a**2 / s1.b**3, s2.a**2 / s2.b**3
    r = 2 * r2 - r1
    if r <= 0:
        raise ConvergenceError("a^2/b^3 extrapolated to a non-positive value")
    ell_alt = (2.0 / (3.0 * r)) ** (1.0 / 3.0)
    d1, d2 = 3 * s1.db / Th, 3 * s2.db / T
    ell_deriv = 2 * d2 - d1
    return float(ell), float(ell_alt), float(ell_deriv)


def _ac_or_indeterminate(traj: Trajectory, params: ModelParams, t_cur, diag) -> Verdict:
    a, b, _, _ = traj.ab_arrays()
    t = traj.ts
    tail = t >= t[-1] / 2
    if np.count_nonzero(tail) < 4:
        return Verdict(kind="Indeterminate", reason="budget exhausted", diagnostics=diag)
    rel = np.abs(b[tail] / a[tail] - 1.0)
    nominal_rate = -NUINF if (params.p == 0 and params.q == 0) else -3.0
    if np.max(rel) <= AC_EXACT_FLOOR:
        diag["ac_mode"] = "exactly conical"
        return Verdict(kind="AC", rate=nominal_rate, budget_used=t_cur, diagnostics=diag)
    if np.max(rel) <= AC_RATIO_TOL:
        tt = t[tail]
        mask = rel > 0
        if np.count_nonzero(mask) >= 4:
            slope = np.polyfit(np.log(tt[mask]), np.log(rel[mask]), 1)[0]
            diag["ac_fit_exponent"] = float(slope)
            # b - a carries only the decaying nu_infinity modes, so the ratio
            # falls off like t^-nu_inf for every AC end
            if abs(slope + NUINF) <= AC_EXPONENT_WINDOW or abs(slope + 3.0) <= AC_EXPONENT_WINDOW:
                return Verdict(kind="AC", rate=nominal_rate, budget_used=t_cur, diagnostics=diag)
    return Verdict(
        kind="Indeterminate",
        reason="budget exhausted without a committed chamber",
        budget_used=t_cur,
        diagnostics=diag,
    )


def _classify_full(state0: FullState, t0: float, params, budget, rtol) -> Verdict:
    """Trajectories without the U(1) symmetry are integrated but not classified."""
    scale = max(params.scale3 ** (1.0 / 3.0), t0)
    t_max = budget.t_factor * scale
    try:
        traj = integrate(
            state0,
            t0,
            params,
            [StopEvent.make("F_vanishes"), StopEvent.make("blow_up")],
            Budget(span=t_max - t0, max_steps=budget.max_steps),
            rtol=rtol,
        )
        kind, tp, _ = traj.terminal_event
        reason = f"no U(1) symmetry: classification out of scope (run ended with {kind})"
        return Verdict(kind="Indeterminate", reason=reason, budget_used=float(tp))
    except G2FlowError as exc:
        return Verdict(kind="Indeterminate", reason=f"no U(1) symmetry ({exc})")
