"""Locating the critical asymptotically conical solutions.

Two independent schemes bracket the same solution:

* backward shooting: extend AC ends backwards (a-parametrized, da = 1) until
  they hit the gamma curve; bisect the end parameter c between gamma1 hits
  (below) and gamma2 hits (above) to find c_ac, then read off the closure
  data beta at the corner;
* forward shooting: integrate singular-orbit seeds and bisect beta between
  incomplete (below) and ALC (above) outcomes.

The monotone separation behind both bisections is the no-cross comparison of
a-parametrized solutions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BracketError,
    ClosureError,
    RegionExitError,
    SeedError,
    StiffnessError,
)
from .flow import Budget, StopEvent, Trajectory, integrate
from .invariants import Param, U1State, u1_from_full
from .params import ModelParams
from .seeds import NUINF, SeedSpec, seed_ac_end, seed_kmn

DEFAULT_K = 1.5
CORNER_EPS = 1e-5


@dataclass(frozen=True)
class GammaCurve:
    """The stopping curve for backward AC runs: gamma1 u gamma2 with corner (0, mn r0^3)."""

    m: int
    n: int
    r0: float
    k: float = DEFAULT_K

    def __post_init__(self):
        if not (1.0 < self.k < 2.0):
            raise ValueError("gamma curve needs k in (1, 2)")
        if self.m <= 0 or self.n <= 0 or math.gcd(self.m, self.n) != 1 or self.r0 <= 0:
            raise ValueError("gamma curve needs coprime positive (m, n) and r0 > 0")

    @property
    def corner_b(self) -> float:
        return self.m * self.n * self.r0**3

    def gamma2_margin(self, a: float, b: float) -> float:
        m2 = self.m**2 * self.r0**3
        n2 = self.n**2 * self.r0**3
        return self.k * a - (b * b - m2 * n2) / math.sqrt((b + m2) * (b + n2))


def gamma_hit_test(state: U1State, gamma: GammaCurve, corner_eps: float = CORNER_EPS):
    """Signed distances to gamma1 and gamma2 plus the corner flag."""
    d1 = state.b - gamma.corner_b
    d2 = gamma.gamma2_margin(state.a, state.b)
    scale = gamma.r0**3
    corner = abs(d1) <= corner_eps * scale and abs(state.a) <= corner_eps * scale
    return d1, d2, corner


@dataclass
class ShootResult:
    critical_value: float
    bracket: tuple[float, float]
    iterations: int
    closure: dict | None = None
    history: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "critical_value": self.critical_value,
                "bracket": list(self.bracket),
                "iterations": self.iterations,
                "closure": self.closure,
                "history": [[float(v), tag] for v, tag in self.history],
                "meta": self.meta,
            },
            sort_keys=True,
        )


def _to_aparam(state: U1State) -> U1State:
    return U1State(
        a=state.a, b=state.b, da=1.0, db=state.db / state.da, param=Param.A_EQUALS_S
    )


def extend_ac_backward(
    seed: SeedSpec | tuple,
    gamma: GammaCurve,
    budget: Budget | None = None,
    corner_eps: float = CORNER_EPS,
    rtol: float = 1e-11,
) -> tuple[Trajectory, str]:
    """Integrate an AC end backwards until it hits gamma1, gamma2 or the corner."""
    if isinstance(seed, SeedSpec):
        params, state, _ = seed.build()
    else:
        params, state = seed
    if isinstance(state, U1State) and state.param is Param.ARC_LENGTH_T:
        state = _to_aparam(state)
    from .invariants import eval_F

    f0 = eval_F(state.a, state.b, params)[0]
    mu0 = state.db / state.da
    inside = (
        state.b > state.a > 0
        and 0 < mu0 < 1
        and f0 > 0
        and state.b > max(params.p, -params.q)
    )
    if not inside:
        raise SeedError("backward extension needs a state in the backward-AC region (c > 0)")

    scale = gamma.r0**3
    stops = [
        StopEvent.make("hits_gamma1", level=gamma.corner_b),
        StopEvent.make(
            "hits_gamma2", k=gamma.k, m2r03=gamma.m**2 * gamma.r0**3, n2r03=gamma.n**2 * gamma.r0**3
        ),
        StopEvent.make("hits_corner", eps=corner_eps * scale),
        StopEvent.make("blow_up"),
    ]
    budget = budget or Budget(span=state.a, max_steps=400_000)
    try:
        traj = integrate(state, state.a, params, stops, budget, direction=-1, rtol=rtol)
    except StiffnessError as exc:
        raise RegionExitError(f"backward run stalled: {exc}") from exc

    _assert_backward_region(traj, params)
    kind, _tp, z = traj.terminal_event
    if kind == "hits_gamma1":
        return traj, "gamma1"
    if kind == "hits_gamma2":
        return traj, "gamma2"
    if kind == "hits_corner":
        b_end = z[0]
        if abs(b_end - gamma.corner_b) <= 10 * corner_eps * scale:
            return traj, "corner"
        return traj, "gamma1" if b_end < gamma.corner_b else "gamma2"
    raise RegionExitError(f"backward run ended with {kind} before reaching the gamma curve")


def _assert_backward_region(traj: Trajectory, params: ModelParams):
    """Monitor persistence of the backward-AC inequalities along the run."""
    a, b, _, db = traj.ab_arrays()
    mu = db  # da = 1 in the a-parametrization
    inside = (b > a) & (mu > 0) & (mu < 1)
    # the very last sample may sit on the stopping curve itself
    if not bool(np.all(inside[:-1])):
        i = int(np.argmin(inside[:-1]))
        raise RegionExitError(
            f"backward-AC region left at a = {a[i]}: (b - a, mu) = ({b[i] - a[i]}, {mu[i]})"
        )


def _hit_of(c: float, m: int, n: int, r0: float, gamma: GammaCurve, T_switch: float, rtol: float):
    params = ModelParams.kmn(m, n, r0)
    _, state = seed_ac_end(params, c, T_switch)
    traj, hit = extend_ac_backward((params, state), gamma, rtol=rtol)
    return traj, hit


def find_c_ac(
    m: int,
    n: int,
    r0: float,
    tol: float = 1e-6,
    k: float = DEFAULT_K,
    T_switch: float = 10.0,
    rtol: float = 1e-11,
) -> ShootResult:
    """Bisect the AC-end parameter c between gamma1 hits (below) and gamma2 (above)."""
    gamma = GammaCurve(m=m, n=n, r0=r0, k=k)
    # the corner sits at arc-length t ~ (54 mn r0^3 / sqrt3)^(1/3); the decaying
    # mode becomes order-one there when c ~ t_corner^nu_inf
    cscale = (54.0 / math.sqrt(3.0) * m * n * r0**3) ** (NUINF / 3.0)
    history: list = []

    def hit_of(c: float):
        traj, hit = _hit_of(c, m, n, r0, gamma, T_switch, rtol)
        history.append((c, hit))
        return traj, hit

    lo = hi = None  # lo: gamma1 side, hi: gamma2/corner side
    for j in range(-10, 15):
        c = cscale * 2.0**j
        _, hit = hit_of(c)
        if hit == "gamma1":
            lo = c
        else:
            hi = c
            break
    if lo is None and hi is not None:
        # gamma2 at the smallest scanned c: extend the scan downwards
        c = cscale * 2.0**-10
        while c > cscale * 2.0**-44:
            c /= 2
            _, hit = hit_of(c)
            if hit == "gamma1":
                lo = c
                break
        hi = 2 * lo if lo is not None else None
    if lo is None or hi is None:
        raise BracketError("no gamma1/gamma2 split over the scan grid", scan_table=history)

    iterations = 0
    while (hi - lo) > tol * hi and iterations < 200:
        mid = 0.5 * (lo + hi)
        _, hit = hit_of(mid)
        if hit == "gamma1":
            lo = mid
        else:
            hi = mid
        iterations += 1

    c_ac = 0.5 * (lo + hi)
    traj_final, hit_final = _hit_of(c_ac, m, n, r0, gamma, T_switch, rtol)
    closure = None
    try:
        beta, residuals = closure_extract_beta(traj_final, m, n, r0)
        closure = {"beta": beta, **residuals}
    except ClosureError as exc:
        closure = {"error": str(exc), **exc.residuals}
    return ShootResult(
        critical_value=c_ac,
        bracket=(lo, hi),
        iterations=iterations,
        closure=closure,
        history=history,
        meta={
            "m": m,
            "n": n,
            "r0": r0,
            "k": k,
            "scheme": "backward",
            "tol": tol,
            "T_switch": T_switch,
            "final_hit": hit_final,
        },
    )


def closure_extract_beta(
    traj: Trajectory, m: int, n: int, r0: float, fit_window: float = 0.35
) -> tuple[float, dict]:
    """Extract beta from the corner limits da^2 -> r0^4 beta^2 and the b-slope.

    The trajectory must be a-parametrized and terminate near the corner
    (a -> 0, b -> mn r0^3, F -> 0).  Residuals report the mismatch against
    the smooth-closure boundary template.
    """
    if traj.system != "u1_a":
        raise ClosureError("closure extraction needs an a-parametrized trajectory")
    corner_b = m * n * r0**3
    s = traj.ts
    b = traj.zs[:, 0]
    mu = traj.zs[:, 1]
    s_end = s[-1]
    scale = corner_b
    resid: dict = {"b_end_mismatch": abs(b[-1] - corner_b) / scale, "a_end": abs(s_end) / scale}
    if resid["b_end_mismatch"] > 1e-3 or resid["a_end"] > 1e-3:
        raise ClosureError("trajectory does not terminate at the corner", residuals=resid)

    window = np.abs(s) <= max(abs(s_end) / fit_window, 20 * abs(s_end))
    window &= np.abs(s) > 0
    if np.count_nonzero(window) < 6:
        window = np.zeros_like(s, dtype=bool)
        window[-8:] = True
    sw, bw, muw = s[window], b[window], mu[window]
    from .invariants import eval_F

    params = ModelParams.kmn(m, n, r0)
    da2 = np.empty_like(sw)
    for i, (si, bi, mi) in enumerate(zip(sw, bw, muw)):
        f = eval_F(si, bi, params)[0]
        if f <= 0 or mi <= 0:
            raise ClosureError("F or mu non-positive in the fit window", residuals=resid)
        da2[i] = (math.sqrt(f) / (2 * mi)) ** (2.0 / 3.0)

    # even expansions in s: da^2 = r0^4 beta^2 + O(s^2), b = corner + D s^2 + O(s^4)
    basis = np.column_stack([np.ones_like(sw), sw**2])
    coef_da2, *_ = np.linalg.lstsq(basis, da2, rcond=None)
    coef_b, *_ = np.linalg.lstsq(basis, bw - corner_b, rcond=None)
    A0 = coef_da2[0]
    if A0 <= 0:
        raise ClosureError("da^2 extrapolated to a non-positive corner value", residuals=resid)
    beta = math.sqrt(A0) / r0**2
    D = coef_b[1]
    if D <= 0:
        raise ClosureError("b-slope coefficient non-positive at the corner", residuals=resid)
    beta_alt = (math.sqrt(m * n) * (m + n) / (2 * D * r0**3)) ** (1.0 / 3.0)
    resid["b_intercept"] = abs(coef_b[0]) / scale
    resid["beta_cross_mismatch"] = abs(beta - beta_alt) / beta
    if resid["beta_cross_mismatch"] > 0.05:
        raise ClosureError("the two beta estimates disagree at the corner", residuals=resid)
    return beta, resid


# -- forward shooting -----------------------------------------------------------


def _forward_side(
    m: int, n: int, r0: float, beta: float, t_switch: float, rtol: float, span0: float
) -> str:
    """ALC side (crosses a = b with da > db) vs incomplete side (death quadrant)."""
    params = ModelParams.kmn(m, n, r0)
    state = None
    for shrink in (1.0, 0.5, 0.25, 0.1):
        try:
            _, state = seed_kmn(m, n, r0, beta, t_switch=shrink * t_switch)
            break
        except SeedError:
            continue
    if state is None:
        return "seed_error"
    u1 = u1_from_full(state)
    seed = _to_aparam(u1)
    span = span0
    for _ in range(6):
        stops = [
            StopEvent.make("reaches_a_equals_b"),
            StopEvent.make("enters_death_chamber"),
            StopEvent.make("F_vanishes"),
            StopEvent.make("blow_up"),
        ]
        traj = integrate(seed, seed.a, params, stops, Budget(span=span), rtol=rtol)
        kind, _tp, z = traj.terminal_event
        if kind == "reaches_a_equals_b":
            if z[1] < 1.0:  # mu = db/da < 1 at the crossing
                return "alc"
            return "indeterminate"
        if kind in ("enters_death_chamber", "F_vanishes", "blow_up"):
            return "incomplete"
        span *= 8.0
    return "indeterminate"


def find_beta_ac(
    m: int,
    n: int,
    r0: float,
    tol: float = 1e-6,
    t_switch: float | None = None,
    rtol: float = 1e-11,
) -> ShootResult:
    """Forward bisection on the seed parameter beta between ALC and incomplete."""
    t_switch = t_switch if t_switch is not None else 0.05 * abs(r0)
    span0 = 50.0 * r0**3 * max(m * n, 1)
    history: list = []

    def side(beta: float) -> str:
        tag = _forward_side(m, n, r0, beta, t_switch, rtol, span0)
        history.append((beta, tag))
        return tag

    lo = hi = None  # lo: incomplete (beta below), hi: alc (beta above)
    for j in range(0, 11):
        for candidate in ([2.0**j] if j == 0 else [2.0**j, 2.0**-j]):
            tag = side(candidate)
            if tag == "incomplete" and (lo is None or candidate > lo):
                lo = candidate
            elif tag == "alc" and (hi is None or candidate < hi):
                hi = candidate
        if lo is not None and hi is not None and lo < hi:
            break
    if lo is None or hi is None or lo >= hi:
        raise BracketError("no incomplete/ALC split over the beta scan grid", scan_table=history)

    iterations = 0
    while (hi - lo) > tol * hi:
        mid = 0.5 * (lo + hi)
        tag = side(mid)
        if tag == "incomplete":
            lo = mid
        elif tag == "alc":
            hi = mid
        else:
            raise BracketError(
                f"indeterminate classification at beta = {mid}", scan_table=history
            )
        iterations += 1
        if iterations > 200:
            break
    return ShootResult(
        critical_value=0.5 * (lo + hi),
        bracket=(lo, hi),
        iterations=iterations,
        closure=None,
        history=history,
        meta={"m": m, "n": n, "r0": r0, "scheme": "forward", "tol": tol},
    )
