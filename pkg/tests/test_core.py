import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lcp_atlas.core import (
    CONTINUUM,
    LcpInstance,
    SolutionSet,
    check_solution,
    complementary_matrix,
    f_eval,
    fmt_alpha,
    orthant_of,
    solve_enumerate,
    solve_lemke,
    x_from_z,
    z_from_x,
)
from lcp_atlas.errors import DimensionExceeded, DimensionMismatch

from oracles import lcp_by_support, random_p_matrix

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def lcp_instances(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    M = draw(arrays(float, (n, n), elements=finite))
    q = draw(arrays(float, (n,), elements=finite))
    return M, q


def sign_map_q(c):
    return np.array([c - 1.0, -c - 1.0])


SIGN_M = np.array([[1.0, 1.0], [1.0, 1.0]])


def test_identity_nonnegative_q_has_zero_solution():
    sols = solve_enumerate(np.eye(3), [1.0, 0.5, 2.0])
    assert sols.count == 1
    np.testing.assert_array_equal(sols.isolated[0].z, np.zeros(3))


def test_sign_map_negative_branch():
    sols = solve_enumerate(SIGN_M, sign_map_q(-2.0))
    assert sols.count == 1
    np.testing.assert_allclose(sols.isolated[0].z, [3.0, 0.0], atol=1e-10)


def test_sign_map_positive_branch():
    sols = solve_enumerate(SIGN_M, sign_map_q(3.0))
    assert sols.count == 1
    np.testing.assert_allclose(sols.isolated[0].z, [0.0, 4.0], atol=1e-10)


def test_sign_map_continuum_at_zero():
    sols = solve_enumerate(SIGN_M, sign_map_q(0.0))
    assert sols.count == CONTINUUM
    fam = sols.degenerate[0]
    zs = sorted((z_from_x(e) for e in fam.endpoints), key=lambda z: z[0])
    np.testing.assert_allclose(zs[0], [0.0, 1.0], atol=1e-10)
    np.testing.assert_allclose(zs[1], [1.0, 0.0], atol=1e-10)
    for th in np.linspace(-1, 0, 11):
        z = np.array([1 + th, -th])
        x = x_from_z(SIGN_M, sign_map_q(0.0), z)
        assert fam.contains(x)


def test_complementary_matrix_columns():
    M = np.arange(9.0).reshape(3, 3)
    C = complementary_matrix(M, (1,))
    np.testing.assert_array_equal(C[:, 0], [1, 0, 0])
    np.testing.assert_array_equal(C[:, 1], -M[:, 1])


def test_fmt_alpha_is_one_based():
    assert fmt_alpha(()) == "{}"
    assert fmt_alpha((0, 2)) == "{1,3}"


def test_f_eval_on_orthants():
    M = np.array([[2.0, 1.0], [0.0, 3.0]])
    np.testing.assert_allclose(f_eval(M, [1.0, 2.0]), [1.0, 2.0])
    np.testing.assert_allclose(f_eval(M, [-1.0, 2.0]), [-2.0, 2.0])
    np.testing.assert_allclose(f_eval(M, [-1.0, -1.0]), [-3.0, -3.0])


def test_lemke_ray_on_infeasible_problem():
    res = solve_lemke(-np.eye(2), [-1.0, -1.0])
    assert not res.ok
    assert res.z is None


def test_lemke_trivial_start():
    res = solve_lemke(np.eye(2), [1.0, 2.0])
    assert res.ok and res.pivots == 0


def test_lemke_small_p_matrix():
    M = np.array([[2.0, 1.0], [1.0, 2.0]])
    q = np.array([-1.0, -1.0])
    res = solve_lemke(M, q)
    np.testing.assert_allclose(res.z, [1 / 3, 1 / 3], atol=1e-12)


def test_dimension_errors():
    with pytest.raises(DimensionMismatch):
        LcpInstance(np.eye(2), [1.0, 2.0, 3.0])
    with pytest.raises(DimensionExceeded):
        solve_enumerate(np.eye(17), np.ones(17))


def test_solution_set_json_roundtrip():
    sols = solve_enumerate(SIGN_M, sign_map_q(0.0))
    back = SolutionSet.from_dict(json.loads(json.dumps(sols.to_dict())))
    assert back.to_dict() == sols.to_dict()
    sols = solve_enumerate(np.array([[-1.0, 2.0], [2.0, -1.0]]), [1.0, 1.0])
    back = SolutionSet.from_dict(json.loads(json.dumps(sols.to_dict())))
    assert back.to_dict() == sols.to_dict()


@settings(max_examples=300, deadline=None)
@given(lcp_instances())
def test_enumerated_solutions_are_solutions(inst):
    M, q = inst
    sols = solve_enumerate(M, q)
    for s in sols.isolated:
        assert check_solution(M, q, s.z, tol=1e-6 * (1 + np.abs(M).max()) * (1 + np.abs(q).max()))
        np.testing.assert_allclose(f_eval(M, s.x), q, atol=1e-6 * (1 + np.abs(M).sum()))


@settings(max_examples=300, deadline=None)
@given(lcp_instances(max_n=4))
def test_x_z_roundtrip(inst):
    M, q = inst
    for s in solve_enumerate(M, q).isolated:
        np.testing.assert_allclose(z_from_x(s.x), s.z, atol=1e-9)
        np.testing.assert_allclose(x_from_z(M, q, s.z), s.x, atol=1e-6 * (1 + np.abs(M).sum()))
        assert orthant_of(s.x) == tuple(i for i in s.alpha if s.x[i] < 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_enumeration_matches_support_oracle_on_p_matrices(n, seed):
    rng = np.random.default_rng(seed)
    M = random_p_matrix(rng, n)
    q = rng.standard_normal(n) * 3
    sols = solve_enumerate(M, q)
    ref = lcp_by_support(M, q)
    assert sols.count == len(ref) == 1
    np.testing.assert_allclose(sols.isolated[0].z, ref[0], atol=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_enumeration_count_matches_support_oracle(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    q = rng.standard_normal(n)
    sols = solve_enumerate(M, q)
    ref = lcp_by_support(M, q)
    assert sols.count == len(ref)
    for s in sols.isolated:
        assert any(np.allclose(s.z, z, atol=1e-7) for z in ref)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_lemke_matches_enumeration_on_p_matrices(n, seed):
    rng = np.random.default_rng(seed)
    M = random_p_matrix(rng, n)
    q = rng.standard_normal(n) * 2
    res = solve_lemke(M, q)
    assert res.ok
    z = solve_enumerate(M, q).isolated[0].z
    np.testing.assert_allclose(res.z, z, atol=1e-8)


@settings(max_examples=200, deadline=None)
@given(lcp_instances(max_n=5))
def test_lemke_solution_is_valid_when_found(inst):
    M, q = inst
    res = solve_lemke(M, q)
    if res.ok:
        assert check_solution(M, q, res.z, tol=1e-6 * (1 + np.abs(M).sum()) * (1 + np.abs(q).max()))
