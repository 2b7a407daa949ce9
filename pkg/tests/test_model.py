import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import C_REF, GAMMA_L_REF, direct_blocks, state_space
from ptcircuit.dynamics import IntegratorConfig, exact_propagate
from ptcircuit.errors import DomainError, FormatError
from ptcircuit.model import (DimensionlessParams, PhysicalCircuit, build_state_space, kirchhoff_residual,
                             node_currents, nondimensionalize, params_from_targets, second_order_coeffs)
from ptcircuit.trace import Trace

L_REF, C_CAP, C0_CAP = 773e-6, 4.78e-9, 1.6e-9

positive = st.floats(1e-3, 1e3)
cs = st.floats(0.0, 3.0)
gammas = st.floats(0.0, 3.0)
gamma_ls = st.floats(0.0, 0.5)


class TestNondimensionalize:
    def test_measured_components(self):
        p = nondimensionalize(PhysicalCircuit(L=L_REF, C=C_CAP, C0=C0_CAP, R=1000.0))
        assert p.c == pytest.approx(0.33473, abs=1e-5)
        assert p.z0 == pytest.approx(402.14, abs=0.01)
        assert p.omega0 == pytest.approx(5.2023e5, rel=1e-4)

    def test_resistance_for_measured_gamma(self):
        p = nondimensionalize(PhysicalCircuit(L=L_REF, C=C_CAP, C0=C0_CAP, R=1382.1))
        assert p.gamma == pytest.approx(0.29097, abs=1e-4)

    def test_unit_values(self):
        p = nondimensionalize(PhysicalCircuit(L=1, C=1, C0=1, R=1))
        assert (p.c, p.gamma, p.gamma_l, p.k) == (1.0, 1.0, 0.0, 0.0)

    @pytest.mark.parametrize("field", ["L", "C", "C0", "R"])
    @pytest.mark.parametrize("bad", [0.0, -1.0, math.nan])
    def test_nonpositive_component_names_field(self, field, bad):
        values = dict(L=1.0, C=1.0, C0=1.0, R=1.0)
        values[field] = bad
        with pytest.raises(DomainError, match=rf"^{field} "):
            PhysicalCircuit(**values)

    def test_negative_inductor_loss_rejected(self):
        with pytest.raises(DomainError, match="R_L"):
            PhysicalCircuit(L=1, C=1, C0=1, R=1, R_L=-0.1)

    @given(positive, positive, positive, positive, st.floats(0.0, 1e3))
    def test_k_identity(self, L, C, C0, R, RL):
        p = nondimensionalize(PhysicalCircuit(L=L, C=C, C0=C0, R=R, R_L=RL))
        assert p.k == pytest.approx(p.gamma * p.gamma_l, rel=1e-14, abs=1e-300)


class TestParamsFromTargets:
    @pytest.mark.parametrize("gamma, gamma_l, k", [(0.0815, 0.0738, 0.006015), (0.3133, 0.0738, 0.023122)])
    def test_products(self, gamma, gamma_l, k):
        p = params_from_targets(C_REF, gamma, gamma_l)
        assert p.k == pytest.approx(k, abs=1e-6)
        assert p.omega0 == p.z0 == 1.0

    def test_lossless(self):
        assert params_from_targets(1, 1, 0).k == 0.0

    @pytest.mark.parametrize("args", [(-1, 0.1, 0.0), (0.3, -0.1, 0.0), (0.3, 0.1, -1e-3), (0.3, math.inf, 0.0)])
    def test_out_of_range(self, args):
        with pytest.raises(DomainError):
            params_from_targets(*args)

    def test_inconsistent_k_rejected(self):
        with pytest.raises(DomainError, match="k="):
            DimensionlessParams(c=0.3, gamma=0.2, gamma_l=0.1, k=0.5)


class TestStateSpace:
    def test_decoupled_limit(self):
        ss = state_space(0.0, 0.0, 0.0)
        np.testing.assert_array_equal(ss.Ma, -np.eye(2))
        np.testing.assert_array_equal(ss.Mb, np.zeros((2, 2)))
        np.testing.assert_array_equal(ss.A[:2], np.hstack([np.zeros((2, 2)), np.eye(2)]))

    def test_reference_values(self):
        ss = state_space(C_REF, 0.29097, 0.0)
        d = 1.66946
        # the tabulated Mb diagonal 0.38839 is 1.33473 * 0.29097 = 0.388366 rounded loosely
        np.testing.assert_allclose(d * ss.Ma, [[-1.33473, -0.33473], [-0.33473, -1.33473]], atol=1e-5)
        np.testing.assert_allclose(d * ss.Mb, [[0.38839, -0.09740], [0.09740, -0.38839]], atol=3e-5)

    @given(cs, gammas, gamma_ls)
    def test_matches_closed_form(self, c, gamma, gamma_l):
        ss = state_space(c, gamma, gamma_l)
        Ma, Mb = direct_blocks(c, gamma, gamma_l, gamma * gamma_l)
        np.testing.assert_allclose(ss.Ma, Ma, atol=1e-15)
        np.testing.assert_allclose(ss.Mb, Mb, atol=1e-15)

    @given(cs, gammas, gamma_ls)
    def test_trace_of_mb(self, c, gamma, gamma_l):
        assert abs(np.trace(state_space(c, gamma, gamma_l).Mb) + 2 * gamma_l) < 1e-14

    @given(cs, gammas)
    def test_pt_structure(self, c, gamma):
        # node exchange together with gamma -> -gamma; Mb is linear in gamma when gamma_l = 0
        ss = state_space(c, gamma, 0.0)
        P = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert abs(np.trace(ss.Mb)) < 1e-15
        np.testing.assert_allclose(P @ ss.Ma @ P, ss.Ma, atol=1e-15)
        np.testing.assert_allclose(P @ ss.Mb @ P, -ss.Mb, atol=1e-15)

    def test_blocks_are_read_only(self):
        ss = state_space(C_REF, 0.1, 0.05)
        with pytest.raises(ValueError):
            ss.A[0, 0] = 1.0


class TestSecondOrder:
    def test_decoupled_cross_terms_vanish(self):
        co = second_order_coeffs(params_from_targets(0.0, 0.4, 0.1))
        assert co.cross_acceleration == (0.0, 0.0)
        assert co.cross_velocity == (0.0, 0.0)

    def test_own_velocity_coefficient(self):
        co = second_order_coeffs(params_from_targets(1.0, 1.0, 0.1))
        assert co.own_velocity[0] == pytest.approx(0.4, abs=1e-15)

    def test_reference_row_one(self):
        p = params_from_targets(C_REF, 0.29097, 0.0)
        Ma, Mb = second_order_coeffs(p).eliminate()
        ss = build_state_space(p)
        np.testing.assert_allclose(Ma[0], ss.Ma[0], atol=1e-14)
        np.testing.assert_allclose(Mb[0], ss.Mb[0], atol=1e-14)

    @given(cs, gammas, gamma_ls)
    def test_elimination_reproduces_blocks(self, c, gamma, gamma_l):
        p = params_from_targets(c, gamma, gamma_l)
        Ma, Mb = second_order_coeffs(p).eliminate()
        ss = build_state_space(p)
        np.testing.assert_allclose(Ma, ss.Ma, rtol=0, atol=1e-13)
        np.testing.assert_allclose(Mb, ss.Mb, rtol=0, atol=1e-13)


def _exact_trace(dt, gamma=0.0815, t_end=50.0):
    ss = state_space(C_REF, gamma, GAMMA_L_REF)
    return exact_propagate(ss, IntegratorConfig(dt=dt, t_end=t_end))


class TestKirchhoff:
    p = params_from_targets(C_REF, 0.0815, GAMMA_L_REF)

    def test_zero_trace(self):
        res = kirchhoff_residual(self.p, Trace(dt=0.01, samples=np.zeros((50, 4))))
        assert res.shape == (48, 2)
        assert np.all(res == 0.0)

    def test_exact_trajectory(self):
        assert np.max(np.abs(kirchhoff_residual(self.p, _exact_trace(0.001)))) < 1e-5

    def test_second_order_convergence(self):
        fine = np.max(np.abs(kirchhoff_residual(self.p, _exact_trace(0.001))))
        coarse = np.max(np.abs(kirchhoff_residual(self.p, _exact_trace(0.002))))
        assert coarse / fine == pytest.approx(4.0, rel=0.1)

    def test_physical_circuit_accepted(self):
        pc = PhysicalCircuit(L=1.0, C=1.0, C0=C_REF, R=1 / 0.0815, R_L=GAMMA_L_REF)
        res = kirchhoff_residual(pc, _exact_trace(0.001))
        assert np.max(np.abs(res)) < 1e-5

    def test_wrong_parameters_leave_residual(self):
        wrong = params_from_targets(C_REF, 0.2, GAMMA_L_REF)
        assert np.max(np.abs(kirchhoff_residual(wrong, _exact_trace(0.001)))) > 1e-3

    def test_currents_balance_at_start(self):
        cur = node_currents(self.p, _exact_trace(0.001, t_end=1.0))
        assert np.all(np.abs(cur.balance()[0]) < 1e-14)

    def test_too_short(self):
        with pytest.raises(DomainError, match="at least 5"):
            kirchhoff_residual(self.p, Trace(dt=0.1, samples=np.zeros((4, 4))))

    def test_single_node_rejected(self):
        with pytest.raises(DomainError):
            kirchhoff_residual(self.p, Trace(dt=0.1, samples=np.zeros((10, 1))))

    def test_non_uniform_sampling(self):
        tau = np.array([0.0, 0.1, 0.2, 0.35, 0.4, 0.5])
        with pytest.raises(FormatError, match="uniformly"):
            Trace.from_columns(tau, np.zeros((6, 4)))
