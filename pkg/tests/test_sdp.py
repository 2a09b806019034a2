import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from planted_csp.sdp import (SdpSolution, TwoXorProblem, certified_unique, dual_slack_min_eig, extract_rank1,
                             solve_basic_sdp, uniqueness_ratio, violated_constraints)

from oracles import brute_xor_argmax, sdp_value_cvxpy


def planted_problem(rng, n, p, eta):
    x = rng.choice([-1, 1], size=n)
    rows, corrupted = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                b = x[i] * x[j]
                if rng.random() < eta:
                    b = -b
                    corrupted.append(len(rows))
                rows.append((i, j, b))
    return TwoXorProblem(n, np.array(rows, dtype=np.int64).reshape(-1, 3)), x, corrupted


def test_single_edge():
    sol = solve_basic_sdp(TwoXorProblem(2, [(0, 1, 1)]))
    assert sol.status == "optimal" and sol.objective == pytest.approx(1.0)
    assert np.allclose(sol.X, np.ones((2, 2)), atol=1e-6)


def test_triangle_all_plus():
    sol = solve_basic_sdp(TwoXorProblem(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]))
    assert sol.objective == pytest.approx(3.0)
    assert np.allclose(sol.X, np.ones((3, 3)), atol=1e-6)


def test_frustrated_triangle_gap():
    prob = TwoXorProblem(3, [(0, 1, 1), (1, 2, 1), (0, 2, -1)])
    sol = solve_basic_sdp(prob)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.5, abs=1e-6)
    assert sol.dual_min_eig >= -1e-7
    best, _ = brute_xor_argmax(3, [(0, 1), (1, 2), (0, 2)], [1, 1, -1])
    assert best == 1
    assert extract_rank1(sol) is None


def test_feasibility_report():
    rng = np.random.default_rng(0)
    prob, _, _ = planted_problem(rng, 12, 0.5, 0.2)
    sol = solve_basic_sdp(prob)
    X = sol.X
    assert np.allclose(X, X.T)
    assert np.abs(np.diag(X) - 1).max() <= 1e-7
    assert np.linalg.eigvalsh(X).min() >= -1e-7
    assert sol.objective <= prob.m + 1e-9


def test_extract_rank1_exact_and_mixture():
    x = np.array([1, -1, -1, 1, 1, -1])
    sol = SdpSolution.from_factor(x[:, None].astype(float))
    assert list(extract_rank1(sol)) == list(x)
    sol = SdpSolution.from_factor(-x[:, None].astype(float))
    assert list(extract_rank1(sol)) == list(x)
    a = np.array([1, 1, 1, 1, -1, -1, -1, -1], dtype=float)
    b = np.array([1, 1, -1, -1, 1, 1, -1, -1], dtype=float)
    V = np.column_stack([a, b]) / np.sqrt(2)
    assert extract_rank1(SdpSolution.from_factor(V)) is None


def test_violated_constraints():
    prob = TwoXorProblem(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])
    assert len(violated_constraints(prob, np.ones(3))) == 0
    prob = TwoXorProblem(3, [(0, 1, 1), (1, 2, -1), (0, 2, 1)])
    assert list(violated_constraints(prob, np.ones(3))) == [1]


def test_certified_unique_examples():
    prob = TwoXorProblem(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (0, 3, 1), (0, 2, 1)])
    assert certified_unique(prob, [])
    assert not certified_unique(prob, range(prob.m))


def test_k8_dual_path_consistency():
    # verdict agrees with the generalized-eigenvalue oracle and with SDP recovery
    from oracles import pencil_max
    agree = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        prob, x, corrupted = planted_problem(rng, 8, 1.0, 0.2)
        ratio = uniqueness_ratio(prob, corrupted)
        assert ratio == pytest.approx(pencil_max(8, prob.constraints[:, :2].tolist(),
                                                 prob.constraints[corrupted, :2].tolist()), abs=1e-8)
        if certified_unique(prob, corrupted):
            got = extract_rank1(solve_basic_sdp(prob))
            assert got is not None and np.array_equal(got, x * x[0])
            agree += 1
    assert agree > 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_sdp_value_matches_interior_point_oracle(seed):
    rng = np.random.default_rng(seed)
    prob, _, _ = planted_problem(rng, int(rng.integers(3, 9)), 0.7, 0.35)
    if prob.m == 0:
        return
    sol = solve_basic_sdp(prob)
    ref, _ = sdp_value_cvxpy(prob.n, prob.constraints.tolist())
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(ref, abs=1e-5 * max(1, prob.m))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_sdp_at_least_best_integral(seed):
    rng = np.random.default_rng(seed)
    prob, _, _ = planted_problem(rng, int(rng.integers(3, 12)), 0.6, 0.3)
    if prob.m == 0:
        return
    best, _ = brute_xor_argmax(prob.n, prob.constraints[:, :2].tolist(), prob.constraints[:, 2].tolist())
    assert solve_basic_sdp(prob).objective >= best - 1e-6 * prob.m


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_relabeling_invariance(seed):
    rng = np.random.default_rng(seed)
    prob, _, _ = planted_problem(rng, 10, 0.8, 0.1)
    perm = rng.permutation(prob.n)
    c = prob.constraints.copy()
    c[:, 0], c[:, 1] = perm[c[:, 0]], perm[c[:, 1]]
    other = TwoXorProblem(prob.n, c)
    a, b = solve_basic_sdp(prob), solve_basic_sdp(other)
    assert a.objective == pytest.approx(b.objective, abs=1e-6 * prob.m)
    xa, xb = extract_rank1(a), extract_rank1(b)
    assert (xa is None) == (xb is None)
    if xa is not None:
        assert abs(int(np.dot(xa, xb[perm]))) == prob.n


def test_dual_slack_certificate_at_planted_point():
    rng = np.random.default_rng(1)
    prob, x, _ = planted_problem(rng, 15, 1.0, 0.0)
    lam = dual_slack_min_eig(prob.objective_matrix(), x[:, None].astype(float))
    assert lam >= -1e-9
