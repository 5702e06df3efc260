import math
import warnings

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from twostate.experiments import T1, T2, T3, T_F, box_projector, box_vs_rest, disappearing_system
from twostate.hilbert import HERMITIAN, Operator, StateVector, identity, projector, basis_state, state, subspace_sigma_x
from twostate.tsvf import (
    Intermediate,
    NearOrthogonalWarning,
    TwoStateVector,
    abl_probabilities,
    backward_state,
    forward_state,
    pointer_shift,
    postselection_probability,
    strong_weak_correspondence,
    weak_value,
)

S3 = 1 / math.sqrt(3)
X12 = subspace_sigma_x(3, 0, 1, name="X12")
P12 = projector([basis_state(3, 0), basis_state(3, 1)], name="P12")


def _symbolic_weak_values():
    """Closed-form weak values of the disappearing particle, derived with sympy."""
    t = sp.symbols("t", real=True)
    c, s = sp.cos(t), sp.sin(t)
    U = lambda tau: sp.Matrix([[sp.cos(tau), -sp.I * sp.sin(tau), 0], [-sp.I * sp.sin(tau), sp.cos(tau), 0], [0, 0, 1]])
    psi = U(t) * sp.Matrix([1, sp.I, 1]) / sp.sqrt(3)
    phi = U(t - sp.pi) * sp.Matrix([-1, sp.I, 1]) / sp.sqrt(3)
    denom = (phi.H * psi)[0]
    out = {}
    for k in range(3):
        P = sp.zeros(3)
        P[k, k] = 1
        out[f"P{k + 1}"] = sp.simplify(sp.expand_trig((phi.H * P * psi)[0] / denom))
    X = sp.Matrix([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
    out["X12"] = sp.simplify((phi.H * X * psi)[0] / denom)
    return t, out


SYM_T, SYM_WV = _symbolic_weak_values()


def test_symbolic_closed_forms():
    assert sp.simplify(SYM_WV["P1"] - sp.cos(2 * SYM_T)) == 0
    assert sp.simplify(SYM_WV["P2"] + sp.cos(2 * SYM_T)) == 0
    assert sp.simplify(SYM_WV["P3"] - 1) == 0
    assert sp.simplify(SYM_WV["X12"] - 2 * sp.I) == 0


class TestTwoStateVector:
    def test_orthogonal_boundaries_rejected(self):
        with pytest.raises(ValueError, match="orthogonal"):
            TwoStateVector(basis_state(2, 0), basis_state(2, 1))

    def test_time_order(self):
        with pytest.raises(ValueError):
            TwoStateVector(basis_state(2, 0), basis_state(2, 0), None, 1.0, 1.0)

    def test_near_orthogonal_warns(self):
        with pytest.warns(NearOrthogonalWarning):
            tsv = TwoStateVector(basis_state(2, 0), state([1e-8, 1]))
        assert tsv.near_orthogonal


class TestBoundaryStates:
    def test_forward_at_t0_is_pre(self, disappearing):
        assert forward_state(disappearing, 0.0) is disappearing.pre

    def test_forward_at_pi(self, disappearing):
        np.testing.assert_allclose(forward_state(disappearing, T_F).amplitudes, np.array([-1, -1j, 1]) * S3, atol=1e-15)

    def test_forward_three_boxes_static(self, three_boxes):
        for t in (0.0, 0.3, 1.0):
            np.testing.assert_allclose(forward_state(three_boxes, t).amplitudes, [S3, S3, S3], atol=1e-15)

    def test_backward_at_tf_is_post(self, disappearing):
        assert backward_state(disappearing, T_F) is disappearing.post

    def test_backward_at_zero(self, disappearing):
        np.testing.assert_allclose(backward_state(disappearing, 0.0).amplitudes, np.array([1, -1j, 1]) * S3, atol=1e-15)

    def test_backward_three_boxes_static(self, three_boxes):
        np.testing.assert_allclose(backward_state(three_boxes, 0.4).amplitudes, [S3, S3, -S3], atol=1e-15)

    @pytest.mark.parametrize("t", [-0.1, 4.0])
    def test_outside_interval(self, disappearing, t):
        with pytest.raises(ValueError):
            forward_state(disappearing, t)
        with pytest.raises(ValueError):
            backward_state(disappearing, t)


class TestWeakValue:
    def test_anomalous_box_three(self, three_boxes):
        assert weak_value(three_boxes, box_projector(3), 0.5).value == pytest.approx(-1, abs=1e-12)

    def test_identity(self, three_boxes, disappearing):
        assert weak_value(three_boxes, identity(3), 0.5).value == pytest.approx(1, abs=1e-12)
        assert weak_value(disappearing, identity(3), 1.1).value == pytest.approx(1, abs=1e-12)

    def test_disappearing_box_one_vanishes_at_quarter(self, disappearing):
        assert abs(weak_value(disappearing, box_projector(1), T2).value) < 1e-12

    @pytest.mark.parametrize("t", [0.0, T2, 1.0, T3, 3.0])
    def test_exchange_operator(self, disappearing, t):
        assert weak_value(disappearing, X12, t).value == pytest.approx(2j, abs=1e-12)

    def test_dimension_mismatch(self, three_boxes):
        with pytest.raises(ValueError):
            weak_value(three_boxes, identity(2), 0.5)

    def test_result_metadata(self, three_boxes):
        r = weak_value(three_boxes, box_projector(2), 0.25)
        assert r.operator_name == "P2" and r.time == 0.25

    def test_minus_one_times(self, disappearing):
        # computed -1 values sit at t1 for box 2 and at t3 for box 1
        assert weak_value(disappearing, box_projector(2), T1).value == pytest.approx(-1, abs=1e-12)
        assert weak_value(disappearing, box_projector(1), T3).value == pytest.approx(-1, abs=1e-12)
        assert abs(weak_value(disappearing, box_projector(2), T2).value) < 1e-12


class TestAbl:
    def test_three_boxes_certainty(self, three_boxes):
        for t in (0.0, 0.5, 1.0):
            assert abl_probabilities(three_boxes, box_vs_rest(1), t).probabilities == pytest.approx((1, 0), abs=1e-12)
            assert abl_probabilities(three_boxes, box_vs_rest(2), t).probabilities == pytest.approx((1, 0), abs=1e-12)

    def test_three_outcome_measurement(self, three_boxes):
        dist = abl_probabilities(three_boxes, [box_projector(k) for k in (1, 2, 3)], 0.5)
        assert dist.probabilities == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-12)
        assert dist.outcome_labels == ("P1", "P2", "P3")

    def test_disappearing_box_two_empty(self, disappearing):
        assert abl_probabilities(disappearing, box_vs_rest(2), T2).probabilities == pytest.approx((0, 1), abs=1e-12)

    def test_incomplete_partition(self, three_boxes):
        with pytest.raises(ValueError, match="incomplete"):
            abl_probabilities(three_boxes, [box_projector(1), box_projector(2)], 0.5)

    def test_overlapping_partition(self, three_boxes):
        with pytest.raises(ValueError, match="overlap"):
            abl_probabilities(three_boxes, [box_projector(1), P12, box_projector(3)], 0.5)

    def test_against_brute_force_amplitudes(self):
        # direct sum over histories: amplitude for outcome j is sum over paths through P_j
        rng = np.random.default_rng(7)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        H = Operator((a + a.conj().T) / 2, {HERMITIAN})
        pre = state(rng.normal(size=4) + 1j * rng.normal(size=4))
        post = state(rng.normal(size=4) + 1j * rng.normal(size=4))
        tsv = TwoStateVector(pre, post, H, 0.0, 2.0)
        parts = [projector([basis_state(4, 0), basis_state(4, 2)]), projector([basis_state(4, 1), basis_state(4, 3)])]
        from scipy.linalg import expm

        U1, U2 = expm(-1j * 0.7 * H.matrix), expm(-1j * 1.3 * H.matrix)
        amps = [post.amplitudes.conj() @ U2 @ P.matrix @ U1 @ pre.amplitudes for P in parts]
        w = np.abs(amps) ** 2
        np.testing.assert_allclose(abl_probabilities(tsv, parts, 0.7).probabilities, w / w.sum(), atol=1e-12)


class TestPostselection:
    def test_unconditioned_disappearing(self, disappearing):
        assert postselection_probability(disappearing) == pytest.approx(1 / 9, abs=1e-12)

    def test_conditioned_on_box_one(self, disappearing):
        p = postselection_probability(disappearing, Intermediate(box_vs_rest(1), 0, T1))
        assert p == pytest.approx(1 / 3, abs=1e-12)

    @pytest.mark.parametrize("box,t", [(3, T1), (3, T2), (2, T3), (3, T3)])
    def test_conditioned_on_other_certainties(self, disappearing, box, t):
        p = postselection_probability(disappearing, (box_vs_rest(box), 0, t))
        assert p == pytest.approx(1 / 3, abs=1e-12)

    def test_three_boxes(self, three_boxes):
        assert postselection_probability(three_boxes) == pytest.approx(1 / 9, abs=1e-12)

    def test_zero_born_probability(self):
        tsv = TwoStateVector(basis_state(2, 0), state([1, 1]))
        P0 = projector([basis_state(2, 0)])
        with pytest.raises(ValueError, match="zero Born"):
            postselection_probability(tsv, ([P0, P0.complement()], 1, 0.5))


class TestStrongWeak:
    def test_box_one(self, three_boxes):
        assert strong_weak_correspondence(three_boxes, box_projector(1), 0.5)

    def test_box_three_anomalous(self, three_boxes):
        assert not strong_weak_correspondence(three_boxes, box_projector(3), 0.5)

    @pytest.mark.parametrize("t", [T1, T2, T3, 0.4, 2.9])
    def test_disappearing_box_three(self, disappearing, t):
        assert strong_weak_correspondence(disappearing, box_projector(3), t)

    def test_zero_weak_value(self, disappearing):
        assert strong_weak_correspondence(disappearing, box_projector(1), T2)

    def test_requires_projector(self, three_boxes):
        with pytest.raises(ValueError):
            strong_weak_correspondence(three_boxes, X12, 0.5)


def _random_tsv(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    H = Operator((a + a.conj().T) / 2, {HERMITIAN})
    pre = state(rng.normal(size=dim) + 1j * rng.normal(size=dim))
    post = state(rng.normal(size=dim) + 1j * rng.normal(size=dim))
    return TwoStateVector(pre, post, H, 0.0, float(rng.uniform(0.5, 3)))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 6), frac=st.floats(0, 1))
def test_sum_rule(seed, dim, frac):
    rng = np.random.default_rng(seed)
    tsv = _random_tsv(rng, dim)
    if abs(tsv.transition_amplitude()) < 1e-3:
        return
    t = frac * tsv.t_f
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    total = sum(weak_value(tsv, projector([StateVector(q[:, i])]), t).value for i in range(dim))
    assert abs(total - 1) < 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_boundary_overlap_time_independent(seed):
    tsv = _random_tsv(np.random.default_rng(seed), 4)
    overlaps = [
        np.vdot(backward_state(tsv, t).amplitudes, forward_state(tsv, t).amplitudes)
        for t in np.linspace(tsv.t0, tsv.t_f, 25)
    ]
    assert np.max(np.abs(np.array(overlaps) - overlaps[0])) < 1e-10


@pytest.mark.parametrize("seed", range(10))
def test_eigenvalue_weak_value_forces_certainty(seed):
    # choose the post-selection orthogonal to (I-P)U|psi> so that <P>_w = 1 exactly
    rng = np.random.default_rng(seed)
    dim = 4
    tsv0 = _random_tsv(rng, dim)
    P = projector([basis_state(dim, 0), basis_state(dim, 1)])
    t = 0.5 * tsv0.t_f
    psi_t = forward_state(tsv0, t).amplitudes
    from scipy.linalg import expm

    U_rest = expm(-1j * (tsv0.t_f - t) * tsv0.hamiltonian.matrix)
    phi = U_rest @ (P.matrix @ psi_t)
    tsv = TwoStateVector(tsv0.pre, StateVector(phi), tsv0.hamiltonian, 0.0, tsv0.t_f)
    assert weak_value(tsv, P, t).value == pytest.approx(1, abs=1e-10)
    assert abl_probabilities(tsv, [P, P.complement()], t).probabilities == pytest.approx((1, 0), abs=1e-10)
    assert strong_weak_correspondence(tsv, P, t)


def test_disappearing_closed_forms_over_interval(disappearing):
    f = {k: sp.lambdify(SYM_T, v, "numpy") for k, v in SYM_WV.items()}
    for t in np.linspace(0, math.pi, 41):
        for k in (1, 2, 3):
            numeric = weak_value(disappearing, box_projector(k), t).value
            assert abs(numeric - complex(f[f"P{k}"](t))) < 1e-10
        assert abs(weak_value(disappearing, X12, t).value - 2j) < 1e-10


def test_self_cancellation(disappearing):
    w1 = weak_value(disappearing, box_projector(1), T2).value
    w2 = weak_value(disappearing, box_projector(2), T2).value
    assert abs(w1 + w2) < 1e-10
    assert abs(weak_value(disappearing, P12, T2).value) < 1e-10
    # the vanishing sum is made of +1 and -1 earlier on
    assert weak_value(disappearing, box_projector(1), T1).value == pytest.approx(1, abs=1e-10)
    assert weak_value(disappearing, box_projector(2), T1).value == pytest.approx(-1, abs=1e-10)


class TestPointer:
    def test_anomalous_reading(self, three_boxes):
        g = 0.01
        shift = pointer_shift(three_boxes, box_projector(3), 0.5, g, 1.0, 2048)
        assert shift.position_shift / g == pytest.approx(-1, rel=0.02)

    @pytest.mark.parametrize("g", [0.01, 0.5, 4.0])
    def test_identity_translates_rigidly(self, three_boxes, g):
        shift = pointer_shift(three_boxes, identity(3), 0.5, g, 1.0, 64)
        assert shift.position_shift == pytest.approx(g, abs=1e-10)
        assert abs(shift.momentum_shift) < 1e-12

    def test_exchange_probe_momentum(self, disappearing):
        g, sigma = 0.002, 0.5
        shift = pointer_shift(disappearing, X12, T2, g, sigma, 2048)
        assert abs(shift.position_shift) < 1e-12
        assert shift.momentum_shift == pytest.approx(g * 2 / (2 * sigma**2), rel=1e-4)

    def test_certain_outcome_translates_rigidly(self, three_boxes):
        # <phi|(I-P1)|psi> = 0, so only the P1 = 1 branch reaches the pointer at any coupling
        shift = pointer_shift(three_boxes, box_projector(1), 0.5, 1.0, 0.25, 4096)
        assert shift.position_shift == pytest.approx(1.0, abs=1e-9)

    def test_grid_too_small(self, three_boxes):
        with pytest.raises(ValueError, match="resolve"):
            pointer_shift(three_boxes, box_projector(3), 0.5, 0.01, 1.0, 32)

    def test_bad_parameters(self, three_boxes):
        with pytest.raises(ValueError):
            pointer_shift(three_boxes, box_projector(3), 0.5, -1.0, 1.0)
        with pytest.raises(ValueError):
            pointer_shift(three_boxes, box_projector(3), 0.5, 10.0, 1.0)
