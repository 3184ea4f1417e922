"""Admissible initial states just off the singular loci.

A reusable generalized-power-series engine (`solve_singular_ivp`) solves
singular initial value problems t*dy/dt = Phi(y, t) whose solutions are
convergent series on an exponent lattice.  Each seed family supplies Phi in
blown-up variables in which the right-hand side is analytic:

* delta_su2   -- singular S^3 with diagonal stabiliser (the B7 setup),
* su2_factor  -- singular S^3 with factor stabiliser (the D7 setup),
* k11 / kmn   -- singular S^2 x S^3 (the C7(m,n) setup),
* cs_end      -- conically singular end at t -> 0,
* ac_end      -- asymptotically conical end at t -> infinity (series in 1/t,
                 with a repaired resonance at the sixth-order coefficient).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError, NonAnalyticError, ResonanceError, SeedError
from .invariants import FullState, U1State, hamiltonian
from .params import ModelParams
from .series import ExponentLattice, Series

SQRT3 = math.sqrt(3.0)
NU0 = (math.sqrt(145.0) - 7.0) / 2.0
NUINF = (math.sqrt(145.0) + 7.0) / 2.0
CONE_COEFF = SQRT3 / 54.0

_PROBE = 1.0 / math.pi  # probe exponent for linearization extraction
_FIXED_POINT_TOL = 1e-9
_SHIFT_TOL = 1e-8

DEFAULT_ORDERS = {
    "delta_su2": 10.0,
    "su2_factor": 10.0,
    "k11": 10.0,
    "kmn": 10.0,
    # six nu0-harmonics keep the tail below 1e-10 at the default switch point
    "cs_end": 6 * NU0 + 1e-9,
    "ac_end": 15.0,
}

# escalation ladders: the order is raised until the tail bound at the switch
# parameter and the Hamiltonian budget of the emitted state are met
_ORDER_LADDER = {
    "delta_su2": (10.0, 14.0, 18.0, 24.0, 30.0),
    "su2_factor": (10.0, 14.0, 18.0, 24.0, 30.0),
    "k11": (10.0, 14.0, 18.0, 24.0),
    "kmn": (10.0, 14.0, 18.0, 24.0, 30.0),
    "cs_end": (6 * NU0 + 1e-9, 9 * NU0 + 1e-9, 12 * NU0 + 1e-9),
}


# -- series solutions ----------------------------------------------------------


@dataclass
class SeriesSolution:
    """Truncated generalized power series solution of a singular IVP."""

    base: np.ndarray
    lattice: ExponentLattice
    coefficients: dict
    truncation_order: float
    direction: str = "from_zero_forward"
    repaired: list = field(default_factory=list)
    linearization: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def first_omitted_exponent(self) -> float:
        """Smallest exponent the truncation residual can carry.

        The residual is built from products of the retained terms, so it lives
        on the sub-lattice actually excited by the solution: generator slots
        that never appear stay silent, and an all-even single-generator series
        skips the odd slots.
        """
        probe = self.truncation_order + 3 * max(self.lattice.generators)
        support = self.coefficients or {}
        active = [any(h[j] > 0 for h in support) for j in range(self.lattice.dim)]
        even_only = self.lattice.dim == 1 and support and all(h[0] % 2 == 0 for h in support)
        candidates = sorted(
            (self.lattice.exponent(h), h) for h in self.lattice.indices_upto(probe)
        )
        for e, h in candidates:
            if e <= self.truncation_order + 1e-9:
                continue
            if support and any(h[j] > 0 and not active[j] for j in range(len(h))):
                continue
            if even_only and h[0] % 2 == 1:
                continue
            return e
        return self.truncation_order + self.lattice.min_generator()

    def evaluate(self, t: float) -> np.ndarray:
        out = np.array(self.base, dtype=float)
        for h, c in self.coefficients.items():
            out = out + np.asarray(c) * t ** self.lattice.exponent(h)
        return out

    def evaluate_tderivative(self, t: float) -> np.ndarray:
        """t * dy/dt evaluated from the series."""
        out = np.zeros_like(np.asarray(self.base, dtype=float))
        for h, c in self.coefficients.items():
            e = self.lattice.exponent(h)
            out = out + np.asarray(c) * e * t**e
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "base": list(map(float, self.base)),
                "generators": list(self.lattice.generators),
                "coefficients": {
                    ",".join(map(str, h)): list(map(float, c)) for h, c in self.coefficients.items()
                },
                "truncation_order": self.truncation_order,
                "direction": self.direction,
                "repaired": [list(h) for h in self.repaired],
                "meta": self.meta,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> SeriesSolution:
        obj = json.loads(text)
        lattice = ExponentLattice(tuple(obj["generators"]))
        coeffs = {
            tuple(int(x) for x in k.split(",")): np.array(v, dtype=float)
            for k, v in obj["coefficients"].items()
        }
        return cls(
            base=np.array(obj["base"], dtype=float),
            lattice=lattice,
            coefficients=coeffs,
            truncation_order=obj["truncation_order"],
            direction=obj["direction"],
            repaired=[tuple(h) for h in obj["repaired"]],
            meta=obj.get("meta", {}),
        )


@dataclass
class RepairContext:
    """Everything a resonance-repair rule needs to produce the coefficient."""

    index: tuple
    exponent: float
    matrix: np.ndarray  # (h.g) Id - dPhi, singular
    rhs: np.ndarray  # Q_h
    kernel: np.ndarray
    solution: SeriesSolutionBuilder = None  # type: ignore[assignment]

    def build_with(self, candidate: np.ndarray) -> list[Series]:
        return self.solution.partial_series(extra={self.index: candidate})


class SeriesSolutionBuilder:
    def __init__(self, lattice: ExponentLattice, order: float, shift_pad: float, y0: np.ndarray):
        self.lattice = lattice
        self.order = order
        self.shift_pad = shift_pad
        self.y0 = np.asarray(y0, dtype=float)
        self.coeffs: dict[tuple, np.ndarray] = {}

    def partial_series(self, upto: float | None = None, extra: dict | None = None) -> list[Series]:
        order = (upto if upto is not None else self.order) + self.shift_pad
        k = len(self.y0)
        out = [Series.constant(self.lattice, order, self.y0[i]) for i in range(k)]
        items = dict(self.coeffs)
        if extra:
            items.update(extra)
        for h, vec in items.items():
            for i in range(k):
                if vec[i] != 0.0:
                    out[i] = out[i] + Series.monomial(self.lattice, order, h, vec[i])
        return out


def _linearize(rhs, y0: np.ndarray, lattice: ExponentLattice, shift_pad: float) -> np.ndarray:
    """d_y Phi(., 0) via a probe generator appended to the lattice."""
    k = len(y0)
    probe_lat = ExponentLattice(lattice.generators + (_PROBE,))
    order = _PROBE + shift_pad + 0.05
    unit = (0,) * lattice.dim + (1,)
    A = np.empty((k, k))
    for j in range(k):
        ys = [Series.constant(probe_lat, order, y0[i]) for i in range(k)]
        ys[j] = ys[j] + Series.monomial(probe_lat, order, unit, 1.0)
        F = rhs(ys)
        for i in range(k):
            A[i, j] = F[i].coeff(unit)
    return A


def solve_singular_ivp(
    ode,
    y0,
    generators: tuple[float, ...],
    order: float,
    free_modes: dict[int, tuple[float, np.ndarray]] | None = None,
    linearization: np.ndarray | None = None,
    repairs: dict | None = None,
    shift_pad: float = 0.0,
    direction: str = "from_zero_forward",
    resonance_tol: float = 1e-8,
    meta: dict | None = None,
) -> SeriesSolution:
    """Compute the generalized power series solution of t dy/dt = Phi(y, t).

    ``ode`` maps a list of Series (the unknowns, with the base point as
    constant terms) to the list of Series for Phi; all composition happens
    through truncated-series arithmetic so Taylor coefficients of the
    right-hand side are extracted automatically.  ``free_modes`` attaches a
    free coefficient u (along the given eigenvector) to a generator slot.
    ``repairs`` maps resonant multi-indices to rules producing their
    coefficient.
    """
    y0 = np.asarray(y0, dtype=float)
    lattice = ExponentLattice(tuple(generators))
    free_modes = free_modes or {}
    repairs = repairs or {}

    A = _linearize(ode, y0, lattice, shift_pad)
    if linearization is not None and not np.allclose(A, linearization, rtol=1e-8, atol=1e-8):
        raise NonAnalyticError("declared linearization disagrees with the computed one")
    eigs = np.linalg.eigvals(A)

    builder = SeriesSolutionBuilder(lattice, order, shift_pad, y0)

    # fixed-point check: Phi(y0, 0) = 0
    F0 = ode(builder.partial_series(upto=0.0))
    c0 = np.array([f.const for f in F0])
    scale0 = 1.0 + max(f.magnitude() for f in F0)
    if np.max(np.abs(c0)) > _FIXED_POINT_TOL * scale0:
        raise ConstraintError(f"base point is not a fixed point: Phi(y0, 0) = {c0}")

    indices = [h for h in lattice.indices_upto(order) if any(h)]
    exps = [lattice.exponent(h) for h in indices]
    for i in range(1, len(exps)):
        if abs(exps[i] - exps[i - 1]) < 1e-9:
            raise ValueError(f"lattice exponents collide: {indices[i - 1]} vs {indices[i]}")

    eye = np.eye(len(y0))
    repaired: list[tuple] = []
    for h, e in zip(indices, exps):
        ys = builder.partial_series(upto=e)
        F = ode(ys)
        Q = np.array([f.coeff(h) for f in F])
        M = e * eye - A
        slot = _free_slot(h, free_modes)
        if slot is not None:
            u, v = free_modes[slot]
            v = np.asarray(v, dtype=float)
            yp, *_ = np.linalg.lstsq(M, Q, rcond=None)
            resid = np.linalg.norm(M @ yp - Q)
            if resid > 1e-9 * (1.0 + np.linalg.norm(Q)):
                raise ResonanceError(
                    f"free-mode index {h}: forcing term not solvable", index=h, obstruction=resid
                )
            coeff = u * v + yp
        elif h in repairs:
            _, _, vt = np.linalg.svd(M)
            kernel = vt[-1]
            ctx = RepairContext(index=h, exponent=e, matrix=M, rhs=Q, kernel=kernel)
            ctx.solution = builder
            coeff = repairs[h](ctx)
            repaired.append(h)
        else:
            gap = float(np.min(np.abs(e - eigs)))
            if gap <= resonance_tol:
                yp, *_ = np.linalg.lstsq(M, Q, rcond=None)
                obstruction = float(np.linalg.norm(M @ yp - Q))
                raise ResonanceError(
                    f"resonant multi-index {h} at exponent {e:.6g} (gap {gap:.2e}) "
                    "with no registered repair rule",
                    index=h,
                    obstruction=obstruction,
                )
            coeff = np.linalg.solve(M, Q)
        if np.max(np.abs(coeff)) > 0:
            builder.coeffs[h] = coeff

    return SeriesSolution(
        base=y0,
        lattice=lattice,
        coefficients=dict(builder.coeffs),
        truncation_order=order,
        direction=direction,
        repaired=repaired,
        linearization=A,
        meta=meta or {},
    )


def _free_slot(h: tuple, free_modes: dict) -> int | None:
    if sum(h) != 1:
        return None
    slot = h.index(1)
    return slot if slot in free_modes else None


def _newton_fixed_point(rhs, guess: np.ndarray, generators, shift_pad: float) -> np.ndarray:
    """Solve Phi(y0, 0) = 0 by Newton iteration using the probe linearization."""
    lattice = ExponentLattice(tuple(generators))
    y = np.array(guess, dtype=float)
    for _ in range(80):
        ys = [Series.constant(ExponentLattice(tuple(generators)), shift_pad + 0.05, yi) for yi in y]
        F = rhs(ys)
        c = np.array([f.const for f in F])
        scale = 1.0 + max(f.magnitude() for f in F)
        if np.max(np.abs(c)) < 1e-14 * scale:
            return y
        A = _linearize(rhs, y, lattice, shift_pad)
        y = y - np.linalg.solve(A, c)
    raise ConstraintError("fixed-point iteration for the seed base values did not converge")


# -- family right-hand sides ---------------------------------------------------


def _mono(lat: ExponentLattice, order: float, power: int) -> Series:
    h = (power,) + (0,) * (lat.dim - 1)
    return Series.monomial(lat, order, h, 1.0)



def _down(series: Series, power: int, tol: float) -> Series:
    """shift_down by t^power with the shift index padded to the lattice dimension."""
    h = (power,) + (0,) * (series.lattice.dim - 1)
    return series.shift_down(h, tol)

def _phi_delta_su2(r0: float):
    """Blow-up x_i = r0^2 t^2/4 + t^4 X_i, y_i = r0^3 + r0 t^2/4 + t^4 Y_i."""

    def rhs(ys: list[Series]) -> list[Series]:
        lat, order = ys[0].lattice, ys[0].order
        X, Y = ys[:3], ys[3:]
        t2 = _mono(lat, order, 2)
        t4 = _mono(lat, order, 4)
        tol = _SHIFT_TOL * max(1.0, r0**5)
        V = 4 * r0**3 + 0.75 * r0 * t2 + t4 * (Y[0] + Y[1] + Y[2])
        W = [r0 / 4.0 - t2 * (Y[i] - Y[(i + 1) % 3] - Y[(i + 2) % 3]) for i in range(3)]
        R = (V * W[0] * W[1] * W[2]).sqrt()
        out_x = []
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            num = t2 * (W[0] * W[1] * W[2]) + V * (W[i] * W[j] + W[i] * W[k] - W[j] * W[k])
            Ai = 0.5 * num / R
            Ai = Ai - Ai.const  # constant r0^2/2 cancels the t^2 pole exactly
            out_x.append(_down(Ai, 2, tol * max(1.0, Ai.magnitude())) - 4 * X[i])
        u = [1.0 + (4.0 / r0**2) * t2 * X[i] for i in range(3)]
        RU = (u[0] * u[1] * u[2]).sqrt()
        out_y = []
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            Ei = u[j] * u[k] / RU
            Ei = Ei - Ei.const
            out_y.append((r0 / 2.0) * _down(Ei, 2, tol * max(1.0, Ei.magnitude())) - 4 * Y[i])
        return out_x + out_y

    return rhs


def _phi_su2_factor(r0: float):
    """Blow-up x_i = t^2 X_i, y_i = t^2 Y_i with p = -r0^3, q = 0."""

    def rhs(ys: list[Series]) -> list[Series]:
        lat, order = ys[0].lattice, ys[0].order
        X, Y = ys[:3], ys[3:]
        t2 = _mono(lat, order, 2)
        quart = (Y[0] - Y[1] - Y[2]) * (Y[0] + Y[1] + Y[2]) * (Y[0] - Y[1] + Y[2]) * (Y[0] + Y[1] - Y[2])
        GL = 4 * r0**3 * (Y[0] * Y[1] * Y[2]) - t2 * quart
        RL = GL.sqrt()
        out_x = []
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            Gt = r0**3 * (Y[j] * Y[k]) + t2 * Y[i] * (Y[j] * Y[j] + Y[k] * Y[k] - Y[i] * Y[i])
            out_x.append(2 * Gt / RL - 2 * X[i])
        RX = (X[0] * X[1] * X[2]).sqrt()
        out_y = []
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            out_y.append(X[j] * X[k] / RX - 2 * Y[i])
        return out_x + out_y

    return rhs


def _phi_kmn(m: int, n: int, r0: float, beta: float):
    """U(1) blow-up x1 = t X1, x2 = r0^4 b^2 + t^2 X3, a = t Y1, b = mn r0^3 + t^2 Y3."""
    p = -(m * m) * r0**3
    q = (n * n) * r0**3
    mn3 = m * n * r0**3

    def rhs(ys: list[Series]) -> list[Series]:
        lat, order = ys[0].lattice, ys[0].order
        X1, X3, Y1, Y3 = ys
        t2 = _mono(lat, order, 2)
        b = mn3 + t2 * Y3
        bp = b - p
        bq = b + q
        core = 2 * mn3 * Y3 + t2 * (Y3 * Y3)
        GF = 4 * (Y1 * Y1) * bp * bq - t2 * (core * core)
        RF = GF.sqrt()
        S = r0**4 * beta**2 + t2 * X3
        RS = S.sqrt()
        return [
            2 * Y1 * bp * bq / RF - X1,
            (4 * (Y1 * Y1) * (2 * b + q - p) - 4 * b * core) / (2 * RF) - 2 * X3,
            RS - Y1,
            X1 / RS - 2 * Y3,
        ]

    return rhs


def _phi_k11(r0: float, alpha: float, beta: float):
    """Full 6D blow-up for the K_{1,1} family with a1(0) != a2(0) allowed."""
    p, q = -(r0**3), r0**3
    mag = max(1.0, abs(r0) ** 9) * max(1.0, abs(r0) ** 3)

    def rhs(ys: list[Series]) -> list[Series]:
        lat, order = ys[0].lattice, ys[0].order
        X1, X2, X3, Y1, Y2, Y3 = ys
        t1 = _mono(lat, order, 1)
        t2 = _mono(lat, order, 2)
        ay = [r0**3 * alpha + t1 * Y1, -(r0**3) * alpha + t1 * Y2, r0**3 + t2 * Y3]
        quart = (ay[0] - ay[1] - ay[2]) * (ay[0] + ay[1] + ay[2]) * (ay[0] - ay[1] + ay[2]) * (
            ay[0] + ay[1] - ay[2]
        )
        lam = quart + 4 * (p - q) * (ay[0] * ay[1] * ay[2]) + 2 * p * q * (
            ay[0] * ay[0] + ay[1] * ay[1] + ay[2] * ay[2]
        ) + (p * q) ** 2
        neglam = -lam
        tol = _SHIFT_TOL * max(1.0, neglam.magnitude(), mag)
        W = _down(neglam, 2, tol)
        RW = W.sqrt()
        G = []
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            G.append(
                ay[i] * (ay[j] * ay[j] + ay[k] * ay[k] - ay[i] * ay[i] - p * q)
                - (p - q) * (ay[j] * ay[k])
            )
        gtol = lambda g: _SHIFT_TOL * max(1.0, g.magnitude())
        S3 = r0**4 * beta**2 + t2 * X3
        P = X1 * X2 * S3
        RP = P.sqrt()
        return [
            2 * _down(G[0], 1, gtol(G[0])) / RW - X1,
            2 * _down(G[1], 1, gtol(G[1])) / RW - X2,
            2 * _down(G[2], 2, gtol(G[2])) / RW - 2 * X3,
            X2 * S3 / RP - Y1,
            X1 * S3 / RP - Y2,
            X1 * X2 / RP - 2 * Y3,
        ]

    return rhs


def _phi_cs():
    """CS blow-up a = C t^3 (1+Y1), b = C t^3 (1+Y2), da*db, da^2 scaled by t^4/108."""

    def rhs(ys: list[Series]) -> list[Series]:
        X1, X2, Y1, Y2 = ys
        oY1, oY2 = 1 + Y1, 1 + Y2
        D = 4 * (oY1 * oY1) * (oY2 * oY2) - oY2 * oY2 * oY2 * oY2
        RD = D.sqrt()
        oX1, oX2 = 1 + X1, 1 + X2
        RX = (oX1 * oX1 * oX2).sqrt()
        return [
            -4 * X1 - 4 + 4 * SQRT3 * oY1 * (oY2 * oY2) / RD,
            -4 * X2 - 4 + 4 * SQRT3 * oY2 * (2 * (oY1 * oY1) - oY2 * oY2) / RD,
            -3 * Y1 - 3 + 3 * oX1 * oX2 / RX,
            -3 * Y2 - 3 + 3 * (oX1 * oX1) / RX,
        ]

    return rhs


def _ac_G(ys: list[Series], phat: float, qhat: float) -> Series:
    """Scaled F: F = C^4 s^-12 G with G analytic in (Y, sigma = s^3)."""
    _, _, Y1, Y2 = ys
    lat, order = ys[0].lattice, ys[0].order
    sigma = _mono(lat, order, 1)
    oY1, oY2 = 1 + Y1, 1 + Y2
    return 4 * (oY1 * oY1) * (oY2 - phat * sigma) * (oY2 + qhat * sigma) - (
        oY2 * oY2 + phat * qhat * sigma * sigma
    ) ** 2


def _phi_ac(p: float, q: float):
    phat, qhat = 18 * SQRT3 * p, 18 * SQRT3 * q

    def rhs(ys: list[Series]) -> list[Series]:
        X1, X2, Y1, Y2 = ys
        lat, order = ys[0].lattice, ys[0].order
        sigma = _mono(lat, order, 1)
        oY1, oY2 = 1 + Y1, 1 + Y2
        G = _ac_G(ys, phat, qhat)
        RG = G.sqrt()
        oX1, oX2 = 1 + X1, 1 + X2
        RX = (oX1 * oX1 * oX2).sqrt()
        B = (oY1 * oY1) * (2 * oY2 + (qhat - phat) * sigma) - oY2 * (
            oY2 * oY2 + phat * qhat * sigma * sigma
        )
        return [
            4 * oX1 - 4 * SQRT3 * oY1 * (oY2 - phat * sigma) * (oY2 + qhat * sigma) / RG,
            4 * oX2 - 4 * SQRT3 * B / RG,
            3 * oY1 - 3 * oX1 * oX2 / RX,
            3 * oY2 - 3 * (oX1 * oX1) / RX,
        ]

    return rhs


def _ac_hhat(ys: list[Series], p: float, q: float) -> Series:
    """s^6 H as a series: vanishes identically on true AC solutions."""
    phat, qhat = 18 * SQRT3 * p, 18 * SQRT3 * q
    X1, X2 = ys[0], ys[1]
    G = _ac_G(ys, phat, qhat)
    oX1, oX2 = 1 + X1, 1 + X2
    return (1.0 / 972.0) * G.sqrt() - (SQRT3 / 972.0) * (oX1 * oX1 * oX2).sqrt()


# -- eigen data ---------------------------------------------------------------


def cs_linearization_eigen() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The constant CS linearization with its exact eigen-decomposition.

    Returns (L, eigenvalues, eigenvectors) with eigenvectors[:, i] belonging
    to eigenvalues[i] = (-1, -6, -nu_inf, nu_0).
    """
    L = _linearize(_phi_cs(), np.zeros(4), ExponentLattice((NU0,)), 0.0)
    eigenvalues = np.array([-1.0, -6.0, -NUINF, NU0])
    eigenvectors = np.column_stack(
        [
            [4.0, 4.0, 3.0, 3.0],
            [2.0, 2.0, -1.0, -1.0],
            [4.0 + NU0, -8.0 - 2 * NU0, 3.0, -6.0],
            [3.0 + NU0, -6.0 - 2 * NU0, -3.0, 6.0],
        ]
    )
    return L, eigenvalues, eigenvectors


# -- seed constructors ---------------------------------------------------------


def _check_seed_state(state, params: ModelParams, tol_scale: float = 1e-10):
    vol = 0.0
    if isinstance(state, U1State):
        vol = 2 * state.da**2 * state.db
    else:
        da = state.da
        vol = 2 * da[0] * da[1] * da[2]
    h = hamiltonian(state, params)
    if abs(h) > tol_scale * (1.0 + vol):
        raise SeedError(f"seed violates the Hamiltonian constraint: |H| = {abs(h)}")
    return state


def seed_delta_su2(r0, alpha1, alpha2, alpha3, t_switch, order=None):
    """Series and state for the family closing on the diagonal singular S^3."""
    if r0 <= 0:
        raise ConstraintError("delta_su2 requires r0 > 0")
    if abs(64 * r0 * (alpha1 + alpha2 + alpha3) - 1.0) > 1e-12:
        raise ConstraintError("delta_su2 requires 64 r0 (alpha1 + alpha2 + alpha3) = 1")
    params = ModelParams.delta_su2(r0)
    al = (alpha1, alpha2, alpha3)
    y0 = np.array([2 * r0 * (al[1] + al[2]), 2 * r0 * (al[2] + al[0]), 2 * r0 * (al[0] + al[1]), *al])
    t = t_switch
    last_exc = None
    for trial in (order,) if order is not None else _ORDER_LADDER["delta_su2"]:
        sol = solve_singular_ivp(
            _phi_delta_su2(r0),
            y0,
            (1.0,),
            trial,
            shift_pad=2.0,
            meta={"family": "delta_su2", "r0": r0, "alphas": list(al), "t_switch": t_switch},
        )
        XY = sol.evaluate(t)
        x = r0**2 * t**2 / 4 + t**4 * XY[:3]
        y = r0**3 + r0 * t**2 / 4 + t**4 * XY[3:]
        try:
            _check_series_tail(sol, t)
            return sol, _check_seed_state(FullState(x=x, y=y), params)
        except SeedError as exc:
            last_exc = exc
    raise last_exc


def seed_su2_factor(r0, alpha1, alpha2, alpha3, t_switch, order=None):
    """Series and state for the family closing on the factor singular S^3."""
    if r0 <= 0:
        raise ConstraintError("su2_factor requires r0 > 0")
    if min(alpha1, alpha2, alpha3) <= 0:
        raise ConstraintError("su2_factor requires alpha_i > 0")
    if abs(alpha1 * alpha2 * alpha3 - 1.0) > 1e-12:
        raise ConstraintError("su2_factor requires alpha1 alpha2 alpha3 = 1")
    params = ModelParams.su2_factor(r0)
    al = (alpha1, alpha2, alpha3)
    y0 = np.array(
        [
            r0**2 * al[1] * al[2] / 4,
            r0**2 * al[2] * al[0] / 4,
            r0**2 * al[0] * al[1] / 4,
            r0 * al[0] / 4,
            r0 * al[1] / 4,
            r0 * al[2] / 4,
        ]
    )
    t = t_switch
    last_exc = None
    for trial in (order,) if order is not None else _ORDER_LADDER["su2_factor"]:
        sol = solve_singular_ivp(
            _phi_su2_factor(r0),
            y0,
            (1.0,),
            trial,
            meta={"family": "su2_factor", "r0": r0, "alphas": list(al), "t_switch": t_switch},
        )
        XY = sol.evaluate(t)
        try:
            _check_series_tail(sol, t)
            return sol, _check_seed_state(FullState(x=t**2 * XY[:3], y=t**2 * XY[3:]), params)
        except SeedError as exc:
            last_exc = exc
    raise last_exc


def seed_kmn(m, n, r0, beta, alpha=None, t_switch=0.1, order=None):
    """Series and state for the family closing on the S^2 x S^3 singular orbit."""
    m, n = int(m), int(n)
    if m <= 0 or n <= 0 or math.gcd(m, n) != 1:
        raise ConstraintError("kmn requires coprime positive (m, n)")
    if beta is None or beta <= 0:
        raise ConstraintError("kmn requires beta > 0")
    if alpha is not None and alpha != 0.0:
        if not (m == 1 and n == 1):
            raise ConstraintError("a1 != a2 (alpha != 0) is only allowed for m = n = 1")
        if abs(alpha) >= 1:
            raise ConstraintError("k11 requires |alpha| < 1")
        return _seed_k11(r0, float(alpha), beta, t_switch, order)
    params = ModelParams.kmn(m, n, r0)
    mn3 = m * n * r0**3
    y0 = np.array(
        [
            math.sqrt(m * n) * (m + n) * r0**3,
            r0**2 * (beta * (m + n) / (2 * math.sqrt(m * n)) - m * m * n * n / (2 * beta**2)),
            r0**2 * beta,
            math.sqrt(m * n) * (m + n) * r0 / (2 * beta),
        ]
    )
    t = t_switch
    orders = (order,) if order is not None else _ORDER_LADDER["kmn"]
    last_exc = None
    for trial in orders:
        sol = solve_singular_ivp(
            _phi_kmn(m, n, r0, beta),
            y0,
            (1.0,),
            trial,
            meta={"family": "kmn", "m": m, "n": n, "r0": r0, "beta": beta, "t_switch": t_switch},
        )
        X1, X3, Y1, Y3 = sol.evaluate(t)
        a = t * Y1
        b = mn3 + t**2 * Y3
        state = FullState(
            x=np.array([t * X1, t * X1, r0**4 * beta**2 + t**2 * X3]), y=np.array([a, a, b])
        )
        try:
            _check_series_tail(sol, t)
            return sol, _check_seed_state(state, params)
        except SeedError as exc:
            last_exc = exc
    raise last_exc


def _seed_k11(r0, alpha, beta, t_switch, order=None):
    params = ModelParams.kmn(1, 1, r0)
    guess = np.array(
        [
            2 * r0**3 * math.sqrt(1 - alpha**2),
            2 * r0**3 * math.sqrt(1 - alpha**2),
            0.0,
            r0**2 * beta,
            r0**2 * beta,
            r0 * math.sqrt(1 - alpha**2) / beta,
        ]
    )
    rhs = _phi_k11(r0, alpha, beta)
    y0 = _newton_fixed_point(rhs, guess, (1.0,), shift_pad=2.0)
    t = t_switch
    last_exc = None
    for trial in (order,) if order is not None else _ORDER_LADDER["k11"]:
        sol = solve_singular_ivp(
            rhs,
            y0,
            (1.0,),
            trial,
            shift_pad=2.0,
            meta={"family": "k11", "r0": r0, "alpha": alpha, "beta": beta, "t_switch": t_switch},
        )
        X1, X2, X3, Y1, Y2, Y3 = sol.evaluate(t)
        x = np.array([t * X1, t * X2, r0**4 * beta**2 + t**2 * X3])
        y = np.array([r0**3 * alpha + t * Y1, -(r0**3) * alpha + t * Y2, r0**3 + t**2 * Y3])
        try:
            _check_series_tail(sol, t)
            return sol, _check_seed_state(FullState(x=x, y=y), params)
        except SeedError as exc:
            last_exc = exc
    raise last_exc


def seed_cs_end(c, t_switch, order=None):
    """Conically singular end: series in powers of t^nu0 around the cone."""
    if t_switch <= 0:
        raise ConstraintError("cs_end requires t_switch > 0")
    v = np.array([-(3.0 + NU0) / 6.0, (3.0 + NU0) / 3.0, 0.5, -1.0])
    last_exc = None
    for trial in (order,) if order is not None else _ORDER_LADDER["cs_end"]:
        sol = solve_singular_ivp(
            _phi_cs(),
            np.zeros(4),
            (NU0,),
            trial,
            free_modes={0: (c, v)},
            meta={"family": "cs_end", "c": c, "t_switch": t_switch},
        )
        state = _cs_state(sol, t_switch)
        try:
            _check_series_tail(sol, t_switch)
            return sol, _check_seed_state(state, ModelParams.cone())
        except SeedError as exc:
            last_exc = exc
    raise last_exc


def _cs_state(sol: SeriesSolution, t: float) -> U1State:
    X1, X2, Y1, Y2 = sol.evaluate(t)
    a = CONE_COEFF * t**3 * (1 + Y1)
    b = CONE_COEFF * t**3 * (1 + Y2)
    da = t**2 * math.sqrt((1 + X2) / 108.0)
    db = t**2 * (1 + X1) / math.sqrt(108.0 * (1 + X2))
    return U1State(a=a, b=b, da=da, db=db)


def _ac_series_unit(p: float, q: float, order: float) -> SeriesSolution:
    """AC series at unit free coefficient; coefficients scale as c^h1 afterwards."""
    key = (p, q, order)
    cached = _AC_CACHE.get(key)
    if cached is not None:
        return cached
    v = np.array([-(4.0 + NU0) / 9.0, (8.0 + 2 * NU0) / 9.0, -1.0 / 3.0, 2.0 / 3.0])

    def repair(ctx: RepairContext) -> np.ndarray:
        yp, *_ = np.linalg.lstsq(ctx.matrix, ctx.rhs, rcond=None)
        obstruction = float(np.linalg.norm(ctx.matrix @ yp - ctx.rhs))
        if obstruction > 1e-10 * (1.0 + np.linalg.norm(ctx.rhs)):
            raise ResonanceError(
                "AC sixth-order obstruction did not vanish", index=ctx.index, obstruction=obstruction
            )
        h0 = _hhat6(ctx.build_with(yp), p, q, ctx.index)
        h1 = _hhat6(ctx.build_with(yp + ctx.kernel), p, q, ctx.index)
        if abs(h1 - h0) < 1e-14:
            raise ResonanceError("Hamiltonian does not fix the kernel component", index=ctx.index)
        kappa = -h0 / (h1 - h0)
        return yp + kappa * ctx.kernel

    sol = solve_singular_ivp(
        _phi_ac(p, q),
        np.zeros(4),
        (3.0, NUINF),
        order,
        free_modes={1: (1.0, v)},
        repairs={(2, 0): repair},
        direction="from_infinity_backward",
        meta={"family": "ac_end", "p": p, "q": q, "c": 1.0},
    )
    _AC_CACHE[key] = sol
    return sol


_AC_CACHE: dict = {}


def seed_ac_end(params: ModelParams, c, T_switch, order=None):
    """Asymptotically conical end: series in 1/t with the repaired resonance.

    Normalization: unit asymptotic cone (coefficient sqrt(3)/54) and no
    translation mode; c is the coefficient of the decaying t^-nu_inf mode in
    (54/sqrt3) t^-3 (b - a).
    """
    if T_switch <= 0:
        raise ConstraintError("ac_end requires T_switch > 0")
    p, q = params.p, params.q
    s = 1.0 / T_switch
    if order is None:
        # geometric convergence ratio of the forced 1/t^3 ladder
        rho = max(abs(18 * SQRT3 * p), abs(18 * SQRT3 * q)) * s**3
        if rho >= 0.7:
            raise SeedError(f"T_switch = {T_switch} too small: series ratio {rho:.2f} >= 0.7")
        h0max = 5 if rho == 0 else min(60, max(5, int(math.ceil(math.log(1e-12) / math.log(rho)))))
        order = max(DEFAULT_ORDERS["ac_end"], 3.0 * h0max + 0.5)
    unit = _ac_series_unit(p, q, order)
    coeffs = {h: np.asarray(vec) * c ** h[1] for h, vec in unit.coefficients.items()}
    coeffs = {h: vec for h, vec in coeffs.items() if np.max(np.abs(vec)) > 0}
    sol = SeriesSolution(
        base=unit.base.copy(),
        lattice=unit.lattice,
        coefficients=coeffs,
        truncation_order=unit.truncation_order,
        direction="from_infinity_backward",
        repaired=list(unit.repaired),
        linearization=unit.linearization,
        meta={"family": "ac_end", "p": p, "q": q, "c": c, "T_switch": T_switch},
    )
    _check_series_tail(sol, s)
    state = _ac_state(sol, T_switch)
    return sol, _check_seed_state(state, params)


def _hhat6(ys: list[Series], p: float, q: float, index: tuple) -> float:
    return _ac_hhat(ys, p, q).coeff(index)


def _ac_state(sol: SeriesSolution, T: float) -> U1State:
    s = 1.0 / T
    X1, X2, Y1, Y2 = sol.evaluate(s)
    a = CONE_COEFF * (1 + Y1) / s**3
    b = CONE_COEFF * (1 + Y2) / s**3
    da = math.sqrt((1 + X2) / 108.0) / s**2
    db = (1 + X1) / math.sqrt(108.0 * (1 + X2)) / s**2
    return U1State(a=a, b=b, da=da, db=db)


def _check_series_tail(sol: SeriesSolution, t: float, tol: float = 1e-10):
    """Last-coefficient bound: the highest retained term must be negligible at t."""
    worst = 0.0
    for h, cvec in sol.coefficients.items():
        e = sol.lattice.exponent(h)
        if e > sol.truncation_order - sol.lattice.min_generator():
            worst = max(worst, float(np.max(np.abs(cvec))) * t**e)
    if worst > tol:
        raise SeedError(
            f"switch parameter {t} too large for the truncation order: tail estimate {worst:.2e}"
        )


def cone_state(t: float) -> U1State:
    """Exact cone solution a = b = (sqrt3/54) t^3."""
    return U1State(a=CONE_COEFF * t**3, b=CONE_COEFF * t**3, da=SQRT3 / 18 * t**2, db=SQRT3 / 18 * t**2)


# -- seed specifications -------------------------------------------------------


@dataclass(frozen=True)
class SeedSpec:
    """Declarative description of a seed; `build` produces (params, state, series)."""

    family: str
    switch_parameter: float | None = None
    r0: float = 1.0
    alphas: tuple[float, float, float] | None = None
    alpha: float = 0.0
    beta: float | None = None
    m: int = 1
    n: int = 1
    c: float = 0.0
    p: float | None = None
    q: float | None = None
    order: float | None = None

    def default_switch(self) -> float:
        if self.family == "ac_end":
            return 50.0
        if self.family == "cone":
            return 1.0
        scale = abs(self.r0) if self.r0 else 1.0
        return 0.1 * (scale if scale > 0 else 1.0)

    def build(self):
        t = self.switch_parameter if self.switch_parameter is not None else self.default_switch()
        if self.family == "delta_su2":
            a1, a2, a3 = self.alphas
            params = ModelParams.delta_su2(self.r0)
            sol, state = seed_delta_su2(self.r0, a1, a2, a3, t, self.order)
            return params, state, sol
        if self.family == "su2_factor":
            a1, a2, a3 = self.alphas
            params = ModelParams.su2_factor(self.r0)
            sol, state = seed_su2_factor(self.r0, a1, a2, a3, t, self.order)
            return params, state, sol
        if self.family in ("kmn", "k11"):
            params = ModelParams.kmn(self.m, self.n, self.r0)
            sol, state = seed_kmn(self.m, self.n, self.r0, self.beta, self.alpha, t, self.order)
            return params, state, sol
        if self.family == "cs_end":
            params = ModelParams.cone()
            sol, state = seed_cs_end(self.c, t, self.order)
            return params, state, sol
        if self.family == "ac_end":
            params = ModelParams.plain(self.p or 0.0, self.q or 0.0)
            sol, state = seed_ac_end(params, self.c, t, self.order)
            return params, state, sol
        if self.family == "cone":
            return ModelParams.cone(), cone_state(t), None
        raise ConstraintError(f"unknown seed family {self.family!r}")
