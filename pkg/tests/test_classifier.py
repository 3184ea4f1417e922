import math

import numpy as np
import pytest

from g2flow.classify import (
    ClassifyBudget,
    chamber_membership,
    classify_trajectory,
    extract_alc_ell,
    monitor_ratios,
)
from g2flow.errors import DomainError
from g2flow.flow import Budget, StopEvent, Trajectory, integrate
from g2flow.invariants import U1State, eval_F
from g2flow.params import ModelParams
from g2flow.seeds import SeedSpec, seed_ac_end, seed_cs_end, seed_delta_su2

RNG = np.random.default_rng(5)


def on_shell(a, b, lam, params):
    """Arc-length state with da/db = lam on the H = 0 shell."""
    f, _, _ = eval_F(a, b, params)
    assert f > 0
    db = (math.sqrt(f) / (2 * lam * lam)) ** (1 / 3)
    return U1State(a=a, b=b, da=lam * db, db=db)


class TestChamberMembership:
    def test_b7_seed_in_alc_strict(self):
        params = ModelParams.delta_su2(1.0)
        _, st = seed_delta_su2(1.0, 1 / 160, 1 / 160, 1 / 320, 0.1)
        from g2flow.invariants import u1_from_full

        mem = chamber_membership(u1_from_full(st), params)
        assert {"alc_chamber", "alc_strict"} <= mem

    def test_cs_negative_c_in_death(self):
        _, st = seed_cs_end(-1.0, 0.1)
        assert "death_quadrant" in chamber_membership(st, ModelParams.cone())

    def test_ac_end_in_backward_region(self):
        params = ModelParams.kmn(1, 2, 1.0)
        _, st = seed_ac_end(params, 1.0, 10.0)
        assert "ac_backward" in chamber_membership(st, params)

    def test_domain_error_off_locus(self):
        with pytest.raises(DomainError):
            chamber_membership(U1State(a=1.0, b=5.0, da=1.0, db=1.0), ModelParams.cone())

    def test_alc_strict_refused_outside_hypotheses(self):
        # q < p and q != -p: the convergence proposition does not apply
        params = ModelParams.plain(1.0, -2.0)
        st = on_shell(7.0, 5.0, 2.0, params)
        mem = chamber_membership(st, params)
        assert "alc_chamber" in mem and "alc_strict" not in mem


class TestMonitorRatios:
    def test_alpha_zero_identities(self):
        params = ModelParams.kmn(1, 2, 1.0)
        st = on_shell(5.0, 3.0, 1.5, params)
        mon = monitor_ratios(st, 0.0, params)
        lam = st.da / st.db
        assert mon.R == pytest.approx(st.a - st.b * lam)
        assert (mon.R < 0) == (st.a * st.db - st.da * st.b < 0)
        # S_0 = -(2b F_b - a F_a) = -8(a-b)(a+b)(b^2+pq)
        p, q = params.p, params.q
        expect = -8 * (st.a - st.b) * (st.a + st.b) * (st.b**2 + p * q)
        assert mon.S == pytest.approx(expect, rel=1e-12)
        assert mon.S < 0  # on the ALC chamber

    def test_alpha_half_late_tail_sign(self):
        """S_1/2 ~ 7b^4 + 8(q-p) a^2 b > 0 for q >= p on a late ALC tail."""
        params = ModelParams.kmn(1, 2, 1.0)
        st = on_shell(4000.0, 120.0, 30.0, params)
        mon = monitor_ratios(st, 0.5, params)
        approx = 7 * st.b**4 + 8 * (params.q - params.p) * st.a**2 * st.b
        assert mon.S > 0
        assert mon.S == pytest.approx(approx, rel=0.15)

    def test_positive_on_alc_chamber(self):
        params = ModelParams.cone()
        st = on_shell(3.0, 2.0, 1.5, params)
        mon = monitor_ratios(st, 0.3, params)
        assert mon.P > 0 and mon.Q > 0


class TestExtractEll:
    def test_synthetic_alc_model(self):
        """a = t^3/18, b = ell t^2/6 reproduces ell to 1e-6 by both estimators."""
        ell = 2.0
        ts = np.linspace(800.0, 1600.0, 200)
        zs = []
        for t in ts:
            a = t**3 / 18
            b = ell * t**2 / 6
            da = t**2 / 6
            db = ell * t / 3
            zs.append([da * db, da * da, a, b])
        traj = Trajectory(
            system="u1_arc", params=ModelParams.cone(), ts=ts, zs=np.array(zs), segments=[]
        )
        e1, e2, e3 = extract_alc_ell(traj)
        assert e1 == pytest.approx(ell, abs=1e-6)
        assert e2 == pytest.approx(ell, abs=1e-6)
        assert e3 == pytest.approx(ell, abs=1e-6)


class TestClassify:
    def test_b7_ladder_with_ell_monotone(self):
        ells = []
        for ratio in (0.2, 0.4, 0.6):
            a1 = 1.0 / (64 * (2 + ratio))
            v = classify_trajectory(
                SeedSpec(family="delta_su2", r0=1.0, alphas=(a1, a1, ratio * a1), switch_parameter=0.1)
            )
            assert v.kind == "ALC"
            assert abs(v.ell - v.ell_alt) / v.ell <= 0.02
            ells.append(v.ell)
        # fixed singular-orbit scale: smaller alpha3/alpha1 collapses the circle
        assert ells[0] < ells[1] < ells[2]

    def test_d7_trichotomy(self):
        for a3, want in ((0.8, "ALC"), (1.0, "AC"), (1.25, "Incomplete")):
            a1 = 1 / math.sqrt(a3)
            v = classify_trajectory(
                SeedSpec(family="su2_factor", r0=1.0, alphas=(a1, a1, a3), switch_parameter=0.1)
            )
            assert v.kind == want, (a3, v.kind, v.reason)

    def test_cs_trichotomy(self):
        for c, want in ((0.5, "ALC"), (0.0, "AC"), (-0.5, "Incomplete")):
            v = classify_trajectory(SeedSpec(family="cs_end", c=c, switch_parameter=0.1))
            assert v.kind == want, (c, v.kind, v.reason)

    def test_incomplete_carries_event(self):
        v = classify_trajectory(SeedSpec(family="cs_end", c=-1.0, switch_parameter=0.1))
        assert v.kind == "Incomplete"
        assert v.event is not None

    def test_confirm_blowup(self):
        v = classify_trajectory(
            SeedSpec(family="cs_end", c=-1.0, switch_parameter=0.1), confirm_blowup=True
        )
        assert v.diagnostics.get("confirmed") in ("F_vanishes", "blow_up")

    def test_k11_asymmetric_is_indeterminate_by_design(self):
        v = classify_trajectory(
            SeedSpec(family="kmn", m=1, n=1, beta=1.0, alpha=0.3, switch_parameter=0.05),
            ClassifyBudget(t_factor=20.0),
        )
        assert v.kind == "Indeterminate"
        assert "U(1)" in v.reason

    def test_verdict_json(self):
        v = classify_trajectory(SeedSpec(family="cs_end", c=1.0, switch_parameter=0.1))
        import json

        payload = json.loads(v.to_json())
        assert payload["kind"] == "ALC"
        assert payload["ell"] > 0


class TestPersistence:
    def test_death_persists_under_flow(self):
        """Once in the death quadrant, samples stay there while da, db, F > 0."""
        params = ModelParams.kmn(1, 2, 1.0)
        checked = 0
        while checked < 40:
            b = 2.0 * (1 + RNG.uniform(0.2, 1.5))
            a = b * RNG.uniform(0.2, 0.9)
            f, _, _ = eval_F(a, b, params)
            if f <= 0:
                continue
            lam = (a / b) * RNG.uniform(0.2, 0.9)
            st = on_shell(a, b, lam, params)
            if "death_quadrant" not in chamber_membership(st, params):
                continue
            checked += 1
            traj = integrate(
                st, 0.0, params, [StopEvent.make("F_vanishes"), StopEvent.make("blow_up")],
                Budget(span=2.0), rtol=1e-10,
            )
            upto = len(traj) - (1 if traj.terminal_event[0] != "budget_exhausted" else 0)
            for i in range(upto):
                s = traj.state(i)
                assert "death_quadrant" in chamber_membership(s, params, cushion=0.0)

    def test_mu_increases_on_backward_region(self):
        """mu = db/da is strictly increasing in forward time on the backward-AC region."""
        params = ModelParams.kmn(1, 2, 1.0)
        _, st = seed_ac_end(params, 1.0, 10.0)
        # integrate forward: mu must increase toward 1
        traj = integrate(st, 10.0, params, [], Budget(span=30.0), rtol=1e-11)
        x1, x2 = traj.zs[:, 0], traj.zs[:, 1]
        mu = x1 / x2  # (da db)/da^2
        assert np.all(np.diff(mu) > 0)

    def test_alc_trajectory_positive_mean_curvature(self):
        v = classify_trajectory(SeedSpec(family="cs_end", c=1.0, switch_parameter=0.1))
        assert v.kind == "ALC"
        assert v.diagnostics["min_mean_curvature"] > 0
