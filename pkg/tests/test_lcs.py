import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcp_atlas.analysis import all_principal_minors, is_P
from lcp_atlas.core import CONTINUUM, solve_enumerate
from lcp_atlas.equivalence import ppt
from lcp_atlas.errors import DimensionMismatch, InvalidParameter, NotPMatrix, SingularA
from lcp_atlas.lcs import (
    BifurcationDiagram,
    CircuitParams,
    EquilibriumSet,
    LcsModel,
    Trajectory,
    circuit_Mhat,
    circuit_Mhat_entries,
    circuit_model,
    circuit_qhat,
    equilibria,
    fD_inverse,
    gamma,
    lcp_data,
    piecewise_constant,
    simulate,
    solve_p_lcp,
    sweep_1d,
    sweep_2d_circuit,
    thread_count,
    transistor_det,
    vector_field,
)

from oracles import random_p_matrix

BASE = CircuitParams(R2=100.0)


def sign_model(C=1.0):
    # scalar state with the sign-map port
    return LcsModel(A=[[-1.0]], B=[[1.0, -1.0]], C=[[C], [-C]], D=[[1.0, 1.0], [1.0, 1.0]],
                    E1=[[1.0]], E2=[[-1.0], [-1.0]])


def test_model_shape_validation():
    with pytest.raises(DimensionMismatch):
        LcsModel(A=np.eye(2), B=np.eye(2), C=np.eye(3), D=np.eye(2), E1=np.ones((2, 1)), E2=np.ones((2, 1)))


def test_lcp_data_singular_a():
    m = LcsModel(A=[[0.0]], B=[[1.0]], C=[[1.0]], D=[[1.0]], E1=[[1.0]], E2=[[1.0]])
    with pytest.raises(SingularA):
        lcp_data(m, [0.0], [0.0])


def test_lcp_data_formula():
    m = sign_model()
    M, q = lcp_data(m, [2.0], [1.0])
    # A = -1: C A^-1 B = -C B
    np.testing.assert_allclose(M, m.D + m.C @ m.B)
    np.testing.assert_allclose(q, m.E2[:, 0] + m.C[:, 0] * 2.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_p_lcp_solver_matches_enumeration(m, seed):
    rng = np.random.default_rng(seed)
    D = random_p_matrix(rng, m)
    v = rng.standard_normal(m) * 3
    z = solve_p_lcp(D, v)
    np.testing.assert_allclose(z, solve_enumerate(D, v).isolated[0].z, atol=1e-8)


def test_p_lcp_diagonal_closed_form():
    z = solve_p_lcp(np.diag([2.0, 4.0]), np.array([-2.0, 1.0]))
    np.testing.assert_allclose(z, [1.0, 0.0])


def test_fd_inverse_needs_p():
    with pytest.raises(NotPMatrix):
        fD_inverse(np.array([[1.0, 2.0], [2.0, 1.0]]), [0.0, 0.0])
    x = fD_inverse(np.diag([2.0, 1.0]), [-2.0, 3.0])
    np.testing.assert_allclose(x, [-1.0, 3.0])


def test_params_validation_and_roundtrip():
    with pytest.raises(InvalidParameter):
        CircuitParams(R2=0.0)
    with pytest.raises(InvalidParameter):
        CircuitParams(alphaF=1.0)
    with pytest.raises(InvalidParameter):
        CircuitParams.from_dict({"R9": 1.0})
    p = CircuitParams(R2=321.0)
    assert CircuitParams.from_dict(json.loads(json.dumps(p.to_dict()))) == p


def test_mhat_is_full_pivot_of_n():
    model = circuit_model(BASE)
    N = -model.C @ np.linalg.solve(model.A, model.B)
    np.testing.assert_allclose(circuit_Mhat(BASE), ppt(N, (0, 1, 2, 3)), rtol=1e-10, atol=1e-12)


def test_mhat_independent_of_capacitors():
    a = circuit_Mhat(BASE)
    b = circuit_Mhat(BASE.with_(C1a=1e-3, C2b=3e-5))
    np.testing.assert_allclose(a, b, rtol=1e-12)


@pytest.mark.parametrize("R2", [1.0, 100.0, 500.0, 881.0, 1000.0])
def test_explicit_entries_are_det_t_multiple(R2):
    p = BASE.with_(R2=R2)
    np.testing.assert_allclose(circuit_Mhat_entries(p), transistor_det(p) * circuit_Mhat(p), rtol=1e-12, atol=1e-15)


def test_transistor_det_value():
    assert transistor_det(CircuitParams()) == pytest.approx(1 / (0.99 * 0.5) - 1)


@pytest.mark.parametrize("R2", [1.0, 50.0, 200.0, 500.0, 800.0, 870.0, 900.0, 1000.0])
def test_gamma_decides_13_minor(R2):
    p = BASE.with_(R2=R2)
    Mh = circuit_Mhat(p)
    minors = dict(all_principal_minors(Mh))
    assert np.sign(minors[(0, 2)]) == np.sign(gamma(p))
    for alpha, val in minors.items():
        if alpha != (0, 2):
            assert val > 0


def test_gamma_root_location():
    lo, hi = 800.0, 1000.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if gamma(BASE.with_(R2=mid)) < 0:
            lo = mid
        else:
            hi = mid
    assert lo == pytest.approx(881.108, abs=1e-3)


def test_positive_gamma_means_p_matrix():
    assert is_P(circuit_Mhat(BASE.with_(R2=1000.0)))
    assert not is_P(circuit_Mhat(BASE))


def test_three_and_one_equilibria():
    model = circuit_model(BASE)
    assert equilibria(model, [1.55], [BASE.s]).count == 3
    assert equilibria(model, [0.0], [BASE.s]).count == 1
    assert solve_enumerate(circuit_Mhat(BASE), circuit_qhat(BASE, 1.55)).count == 3
    assert solve_enumerate(circuit_Mhat(BASE), circuit_qhat(BASE, 0.0)).count == 1


def test_equilibria_are_zeros_of_the_vector_field():
    model = circuit_model(BASE)
    eq = equilibria(model, [1.55], [BASE.s])
    scale = np.abs(model.A).max()
    for e in eq.isolated:
        assert np.linalg.norm(vector_field(model, e.xi, [1.55], [BASE.s])) <= 1e-9 * scale
    back = EquilibriumSet.from_dict(json.loads(json.dumps(eq.to_dict())))
    assert back.to_dict() == eq.to_dict()


def test_simulation_converges_to_stable_equilibria():
    model = circuit_model(BASE)
    eq = equilibria(model, [1.55], [BASE.s]).isolated
    lo = min(eq, key=lambda e: e.xi[0]).xi
    hi = max(eq, key=lambda e: e.xi[0]).xi
    a = simulate(model, np.zeros(4), [(0.0, 1.55)], [BASE.s], T=0.5, record_every=100)
    b = simulate(model, 0.7 * np.ones(4), [(0.0, 1.55)], [BASE.s], T=0.5, record_every=100)
    assert np.linalg.norm(a.xi[-1] - lo) < 1e-5
    assert np.linalg.norm(b.xi[-1] - hi) < 1e-5


def test_trajectory_roundtrip_and_recording():
    model = circuit_model(BASE)
    tr = simulate(model, np.zeros(4), [(0.0, 0.5), (0.001, 1.0)], [BASE.s], dt=1e-4, T=0.002, record_every=5)
    assert len(tr.t) == 5
    assert tr.r[0, 0] == 0.5 and tr.r[-1, 0] == 1.0
    back = Trajectory.from_dict(json.loads(json.dumps(tr.to_dict())))
    np.testing.assert_array_equal(back.xi, tr.xi)


def test_piecewise_constant_schedule():
    r = piecewise_constant([(0.0, 1.0), (0.5, 2.0)])
    assert r(0.0)[0] == 1.0 and r(0.4999)[0] == 1.0 and r(0.5)[0] == 2.0
    with pytest.raises(InvalidParameter):
        piecewise_constant([(0.0, 1.0), (0.0, 2.0)])


def test_sweep_profile_for_ones_matrix():
    diag = sweep_1d(np.ones((2, 2)), [-1.0, -1.0], [1.0, -1.0], np.linspace(-1, 1, 5))
    assert diag.counts == [1, 1, CONTINUUM, 1, 1]
    back = BifurcationDiagram.from_dict(json.loads(json.dumps(diag.to_dict())))
    assert back.counts == diag.counts


def test_sweep_p_matrix_constant_count():
    diag = sweep_1d(np.array([[2.0, 1.0], [0.0, 1.0]]), [0.0, 0.0], [1.0, 2.0], np.linspace(-3, 3, 31))
    assert set(diag.counts) == {1}
    assert len(diag.segments) == 1 and len(diag.segments[0]) == 31


def test_sweep_rejects_zero_direction():
    with pytest.raises(InvalidParameter):
        sweep_1d(np.eye(2), [0.0, 0.0], [0.0, 0.0], [0.0, 1.0])


def test_small_circuit_sweep_and_threads(monkeypatch):
    R2 = np.array([100.0, 200.0])
    r = np.array([0.0, 1.55, 1.75])
    serial = sweep_2d_circuit(CircuitParams(), R2, r)
    monkeypatch.setenv("LCP_ATLAS_THREADS", "3")
    assert thread_count() == 3
    par = sweep_2d_circuit(CircuitParams(), R2, r)
    assert serial.counts_hat.tolist() == par.counts_hat.tolist()
    assert serial.counts_hat.tolist() == [[1, 3, 1], [1, 1, 3]]
    assert serial.counts_orig.tolist() == serial.counts_hat.tolist()
