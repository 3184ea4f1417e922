"""Right-hand sides and adaptive integration for the torsion-free flow.

Three equivalent formulations are supported:

* ``full``   -- the Hamiltonian system for (x1, x2, x3, y1, y2, y3),
* ``u1_arc`` -- its U(1) reduction (x1, x2, y1, y2) = (da*db, da^2, a, b)
                in the arc-length parameter t,
* ``u1_a``   -- the second-order equation for b(s) with s = a, as the
                first-order pair (b, mu = db/da).

Integration is an explicit embedded Runge-Kutta pair of order 8(5,3) with
dense output; stop events are located by root bracketing on the dense
output.  The second-order form is exposed only as a residual oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from .errors import DomainError, SeedError, StiffnessError
from .invariants import (
    FullState,
    Param,
    U1State,
    _grad_terms,
    eval_F,
    eval_lambda,
    hamiltonian,
)
from .params import ModelParams

EVENT_PARAM_TOL = 1e-10
F_VANISH_EPS = 1e-10
CHAMBER_CUSHION = 1e-9
BLOWUP_FACTOR = 1e12
_FLOOR = 1e-300


# -- right-hand sides ---------------------------------------------------------


def rhs_full(state: FullState, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian vector field: dx_i = dH/dy_i, dy_i = -dH/dx_i."""
    if not state.on_principal_locus(params):
        raise DomainError("state off the principal-orbit locus")
    z = np.concatenate([state.x, state.y])
    dz = _vf_full(params)(0.0, z)
    return dz[:3], dz[3:]


def rhs_u1(state: U1State, params: ModelParams) -> np.ndarray:
    """Reduced field for (x1, x2, y1, y2) = (da*db, da^2, a, b)."""
    x1, x2 = state.da * state.db, state.da * state.da
    f, _, _ = eval_F(state.a, state.b, params)
    if f <= 0 or x1 * x1 * x2 <= 0:
        raise DomainError("F <= 0 or x1^2 x2 <= 0")
    z = np.array([x1, x2, state.a, state.b])
    return _vf_u1_arc(params)(0.0, z)


def brandhuber_residual(a, b, da, db, dda, ddb, params: ModelParams) -> float:
    """Parametrization-free residual of the second-order U(1) equation."""
    f, fa, fb = eval_F(a, b, params)
    return 2 * f * (da * ddb - db * dda) - da * db * (da * fa - 2 * db * fb)


def _vf_full(params: ModelParams) -> Callable:
    p, q = params.p, params.q

    def fun(_t, z):
        x, y = z[:3], z[3:]
        lam = eval_lambda(y, params)
        root = math.sqrt(max(-lam, _FLOOR))
        dx = 2 * _grad_terms(y, p, q) / root
        xprod = max(x[0] * x[1] * x[2], _FLOOR)
        rootx = math.sqrt(xprod)
        dy = np.array([rootx / max(x[0], _FLOOR), rootx / max(x[1], _FLOOR), rootx / max(x[2], _FLOOR)])
        return np.concatenate([dx, dy])

    return fun


def _vf_u1_arc(params: ModelParams) -> Callable:
    def fun(_t, z):
        x1, x2, a, b = z
        f, fa, fb = eval_F(a, b, params)
        rootf = math.sqrt(max(f, _FLOOR))
        rootx = math.sqrt(max(x2, _FLOOR))
        return np.array([fa / (4 * rootf), fb / (2 * rootf), rootx, x1 / rootx])

    return fun


def _vf_u1_a(params: ModelParams) -> Callable:
    def fun(s, z):
        b, mu = z
        f, fa, fb = eval_F(s, b, params)
        f = f if f > 0 else _FLOOR
        return np.array([mu, mu * (fa - 2 * mu * fb) / (2 * f)])

    return fun


_VECTOR_FIELDS = {"full": _vf_full, "u1_arc": _vf_u1_arc, "u1_a": _vf_u1_a}


# -- state <-> vector conversions --------------------------------------------


def state_to_vec(state: FullState | U1State) -> tuple[str, np.ndarray]:
    if isinstance(state, FullState):
        return "full", np.concatenate([state.x, state.y])
    if state.param is Param.ARC_LENGTH_T:
        return "u1_arc", np.array([state.da * state.db, state.da**2, state.a, state.b])
    return "u1_a", np.array([state.b, state.db / state.da])


def vec_to_state(system: str, param_value: float, z: np.ndarray) -> FullState | U1State:
    if system == "full":
        return FullState(x=z[:3], y=z[3:])
    if system == "u1_arc":
        x1, x2, a, b = z
        da = math.sqrt(max(x2, 0.0))
        return U1State(a=a, b=b, da=da, db=x1 / da if da > 0 else math.inf)
    b, mu = z
    return U1State(a=param_value, b=b, da=1.0, db=mu, param=Param.A_EQUALS_S)


def _ab_view(system: str, t: float, z: np.ndarray) -> tuple[float, float, float, float]:
    """(a, b, da, db) in whatever derivative normalization the system carries."""
    if system == "full":
        x, y = z[:3], z[3:]
        prod = max(x[0] * x[1] * x[2], _FLOOR)
        root = math.sqrt(prod)
        return y[0], y[2], root / max(x[0], _FLOOR), root / max(x[2], _FLOOR)
    if system == "u1_arc":
        x1, x2, a, b = z
        da = math.sqrt(max(x2, _FLOOR))
        return a, b, da, x1 / da
    b, mu = z
    return t, b, 1.0, mu


# -- stop events ---------------------------------------------------------------


@dataclass(frozen=True)
class StopEvent:
    """Declarative stop condition; realized as a sign change of a margin function.

    kind: one of F_vanishes | enters_alc_chamber | enters_death_chamber |
          hits_gamma1 | hits_gamma2 | hits_corner | blow_up |
          budget_exhausted | reaches_a_equals_b
    data: kind-specific thresholds (eps, cushion, strict, gamma, ...).
    """

    kind: str
    data: tuple = ()

    def datadict(self) -> dict:
        return dict(self.data)

    @classmethod
    def make(cls, kind: str, **data) -> StopEvent:
        return cls(kind=kind, data=tuple(sorted(data.items())))


def _margin_fn(event: StopEvent, system: str, params: ModelParams, z0, t0) -> tuple[Callable, int]:
    """Return (g(t, z), direction): event fires when g crosses 0 in direction."""
    d = event.datadict()
    bfloor = params.b_floor
    cush = d.get("cushion", CHAMBER_CUSHION)

    if event.kind == "F_vanishes":
        eps = d.get("eps", F_VANISH_EPS)
        if system == "full":

            def g(_t, z):
                return -eval_lambda(z[3:], params) - eps * (float(np.dot(z[3:], z[3:])) + abs(params.p * params.q)) ** 2

        else:

            def g(t, z):
                a, b, _, _ = _ab_view(system, t, z)
                return eval_F(a, b, params)[0] - eps * (b * b + abs(params.p * params.q)) ** 2

        return g, -1

    if event.kind == "enters_alc_chamber":
        strict = d.get("strict", False)

        def g(t, z):
            a, b, da, db = _ab_view(system, t, z)
            m = min(
                da - db - cush * (abs(da) + abs(db)),
                a - b - cush * (abs(a) + abs(b)),
                b - bfloor - cush * (abs(b) + abs(bfloor)),
            )
            if strict:
                m = min(m, da * b - a * db - cush * (abs(da * b) + abs(a * db)))
            return m

        return g, +1

    if event.kind == "enters_death_chamber":

        def g(t, z):
            a, b, da, db = _ab_view(system, t, z)
            return min(
                a * db - da * b - cush * (abs(a * db) + abs(da * b)),
                b - a - cush * (abs(a) + abs(b)),
                b - bfloor - cush * (abs(b) + abs(bfloor)),
            )

        return g, +1

    if event.kind == "reaches_a_equals_b":

        def g(t, z):
            a, b, _, _ = _ab_view(system, t, z)
            return b - a

        return g, -1

    if event.kind == "hits_gamma1":
        level = d["level"]

        def g(t, z):
            _, b, _, _ = _ab_view(system, t, z)
            return b - level

        return g, -1

    if event.kind == "hits_gamma2":
        k = d["k"]
        m2, n2 = d["m2r03"], d["n2r03"]

        def g(t, z):
            a, b, _, _ = _ab_view(system, t, z)
            return k * a - (b * b - m2 * n2) / math.sqrt((b + m2) * (b + n2))

        return g, -1

    if event.kind == "hits_corner":
        eps = d["eps"]

        def g(t, z):
            a, _, _, _ = _ab_view(system, t, z)
            return a - eps

        return g, -1

    if event.kind == "blow_up":
        scale0 = max(np.max(np.abs(z0)), params.scale3, 1.0)
        limit = d.get("factor", BLOWUP_FACTOR) * scale0

        def g(t, z):
            a, b, da, db = _ab_view(system, t, z)
            return limit - max(abs(a), abs(b), abs(da), abs(db))

        return g, -1

    raise ValueError(f"unknown or non-margin event kind {event.kind!r}")


# -- trajectories --------------------------------------------------------------


@dataclass
class Budget:
    span: float
    max_steps: int = 200_000


@dataclass
class Trajectory:
    system: str
    params: ModelParams
    ts: np.ndarray
    zs: np.ndarray
    events: list = field(default_factory=list)  # (kind, param value, state vector)
    segments: list = field(default_factory=list)  # per-step dense interpolants
    anchor: dict = field(default_factory=dict)

    @property
    def param(self) -> Param:
        return Param.A_EQUALS_S if self.system == "u1_a" else Param.ARC_LENGTH_T

    def __len__(self):
        return len(self.ts)

    def state(self, i: int) -> FullState | U1State:
        return vec_to_state(self.system, self.ts[i], self.zs[i])

    def states(self):
        return [self.state(i) for i in range(len(self.ts))]

    def interpolate(self, t: float) -> np.ndarray:
        lo, hi = (self.ts[0], self.ts[-1]) if self.ts[0] <= self.ts[-1] else (self.ts[-1], self.ts[0])
        if not (lo - 1e-12 * (1 + abs(lo)) <= t <= hi + 1e-12 * (1 + abs(hi))):
            raise ValueError(f"parameter {t} outside trajectory range [{lo}, {hi}]")
        for seg in self.segments:
            a, b = (seg.t_min, seg.t_max)
            if a <= t <= b:
                return seg(t)
        return self.zs[-1] if abs(t - self.ts[-1]) <= abs(t - self.ts[0]) else self.zs[0]

    def ab_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        out = np.array([_ab_view(self.system, t, z) for t, z in zip(self.ts, self.zs)])
        return out[:, 0], out[:, 1], out[:, 2], out[:, 3]

    def hamiltonian_drift(self) -> tuple[float, float]:
        """(max |H| over samples, max orbital volume) for arc-length runs."""
        if self.system == "u1_a":
            raise DomainError("Hamiltonian drift is tracked on arc-length runs only")
        hmax = 0.0
        vmax = 0.0
        for i in range(len(self.ts)):
            st = self.state(i)
            hmax = max(hmax, abs(hamiltonian(st, self.params)))
            if isinstance(st, U1State):
                vmax = max(vmax, 2 * st.da**2 * st.db)
            else:
                da = st.da
                vmax = max(vmax, 2 * da[0] * da[1] * da[2])
        return hmax, vmax

    @property
    def terminal_event(self):
        return self.events[-1] if self.events else None


def integrate(
    seed: FullState | U1State,
    t_start: float,
    params: ModelParams,
    stops: list[StopEvent] | None = None,
    budget: Budget | None = None,
    direction: int = +1,
    rtol: float = 1e-11,
    atol_scale: float = 1e-13,
    first_step: float | None = None,
) -> Trajectory:
    """Integrate from the seed until the first stop event or budget exhaustion."""
    system, z0 = state_to_vec(seed)
    try:
        admissible = seed.on_principal_locus(params) if system != "u1_a" else (
            seed.db > 0 and eval_F(seed.a, seed.b, params)[0] > 0
        )
    except DomainError:
        admissible = False
    if not admissible:
        raise SeedError(f"seed {seed} is off the admissible locus")
    stops = stops or []
    budget = budget or Budget(span=100.0 * max(1.0, abs(t_start)))

    fun = _VECTOR_FIELDS[system](params)
    t_end = t_start + direction * budget.span
    margins = [_margin_fn(ev, system, params, z0, t_start) for ev in stops]

    atol = atol_scale * max(1.0, float(np.max(np.abs(z0))))
    solver = DOP853(fun, t_start, z0, t_end, rtol=rtol, atol=atol, first_step=first_step)
    ts = [t_start]
    zs = [z0.copy()]
    segments: list = []
    events: list = []
    g_prev = [g(t_start, z0) for g, _ in margins]
    steps = 0

    # trial steps may transiently probe past a coordinate singularity;
    # rejected-step overflow is expected there and handled by step control
    with np.errstate(over="ignore", invalid="ignore"):
        while solver.status == "running":
            if steps >= budget.max_steps:
                events.append(("budget_exhausted", ts[-1], zs[-1].copy()))
                break
            solver.step()
            if solver.status == "failed":
                # with a blow_up stop registered, step underflow is the
                # numerical signature of the finite-time degeneration
                blow = next((ev for ev in stops if ev.kind == "blow_up"), None)
                if blow is not None:
                    events.append(("blow_up", ts[-1], zs[-1].copy()))
                    break
                raise StiffnessError(
                    f"step size underflow at parameter {solver.t}",
                    last_param=ts[-1],
                    last_state=zs[-1],
                )
            steps += 1
            sol = solver.dense_output()
            segments.append(sol)
            t_new, z_new = solver.t, solver.y.copy()

            hit = None
            for i, ((g, want_dir), ev) in enumerate(zip(margins, stops)):
                g_new = g(t_new, z_new)
                crossed = (g_prev[i] > 0 >= g_new) if want_dir < 0 else (g_prev[i] < 0 <= g_new)
                if crossed and g_prev[i] != g_new:
                    lo, hi = sorted((ts[-1], t_new))
                    if g(lo, sol(lo)) * g(hi, sol(hi)) <= 0:
                        troot = brentq(
                            lambda tt: g(tt, sol(tt)),
                            lo,
                            hi,
                            xtol=EVENT_PARAM_TOL * max(1.0, abs(hi)),
                            rtol=4 * np.finfo(float).eps,
                        )
                    else:
                        troot = t_new
                    if hit is None or abs(troot - ts[-1]) < abs(hit[0] - ts[-1]):
                        hit = (troot, ev)
                g_prev[i] = g_new

            if hit is not None:
                troot, ev = hit
                z_ev = sol(troot)
                ts.append(troot)
                zs.append(z_ev)
                events.append((ev.kind, troot, z_ev.copy()))
                break

            ts.append(t_new)
            zs.append(z_new)
            if solver.status == "finished":
                events.append(("budget_exhausted", t_new, z_new.copy()))

    return Trajectory(
        system=system,
        params=params,
        ts=np.array(ts),
        zs=np.array(zs),
        events=events,
        segments=segments,
        anchor={"t_start": t_start},
    )


# -- reparametrization ---------------------------------------------------------


def reparametrize(traj: Trajectory, target: Param, rtol: float = 1e-12) -> Trajectory:
    """Resample a U(1) trajectory under a change of independent variable.

    States convert pointwise (the arc-length normalization 2 da^2 db = sqrt(F)
    is imposed exactly); the parameter map is obtained by integrating the
    chain-rule ODE along the stored dense representation.
    """
    if traj.system == "full":
        raise DomainError("reparametrize acts on U(1) trajectories")
    if target is Param.A_EQUALS_S:
        if traj.system == "u1_a":
            return traj
        a, b, da, db = traj.ab_arrays()
        if np.any(da <= 0):
            raise DomainError("need da > 0 to use a as the parameter")
        zs = np.column_stack([b, db / da])
        events = [(k, float(zv[2]), np.array([zv[3], _mu_of(zv)])) for k, _tp, zv in traj.events]
        return Trajectory(
            system="u1_a",
            params=traj.params,
            ts=a,
            zs=zs,
            events=events,
            segments=[],
            anchor={"t_start": a[0], "arc_of_start": traj.ts[0]},
        )

    # a_equals_s -> arc length; the parameter map solves dt/ds = (2 mu / sqrt(F))^(1/3)
    if traj.system == "u1_arc":
        return traj
    from scipy.integrate import solve_ivp

    params = traj.params
    svals = traj.ts
    t0 = traj.anchor.get("arc_of_start", 0.0)

    def fun(s, z):
        b, mu, _t = z
        f, fa, fb = eval_F(s, b, params)
        if f <= 0 or mu <= 0:
            raise DomainError("F <= 0 en route: arc-length normalization unachievable")
        return [mu, mu * (fa - 2 * mu * fb) / (2 * f), (2 * mu / math.sqrt(f)) ** (1.0 / 3.0)]

    z0 = [traj.zs[0][0], traj.zs[0][1], t0]
    res = solve_ivp(
        fun,
        (svals[0], svals[-1]),
        z0,
        t_eval=svals,
        rtol=rtol,
        atol=1e-14 * max(1.0, float(np.max(np.abs(z0)))),
        method="DOP853",
    )
    if not res.success:
        raise DomainError(f"reparametrization integration failed: {res.message}")
    bvals, muvals, tvals = res.y
    zs = []
    for s, b, mu in zip(svals, bvals, muvals):
        f = eval_F(s, b, params)[0]
        if f <= 0 or mu <= 0:
            raise DomainError("F <= 0 en route: arc-length normalization unachievable")
        da = (math.sqrt(f) / (2 * mu)) ** (1.0 / 3.0)
        zs.append([mu * da * da, da * da, s, b])
    return Trajectory(
        system="u1_arc",
        params=params,
        ts=tvals,
        zs=np.array(zs),
        events=[],
        segments=[],
        anchor={"t_start": tvals[0]},
    )


def _mu_of(z_arc: np.ndarray) -> float:
    x1, x2 = z_arc[0], z_arc[1]
    return x1 / x2 if x2 > 0 else math.inf
