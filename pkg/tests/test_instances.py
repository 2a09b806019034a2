import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from planted_csp.instances import (CspInstance, PlantedGroundTruth, PlantingDistribution,
                                   XorInstance, csp_to_json, csp_value, dump_json, gen_hypergraph,
                                   instance_from_json, ksat, load_instance, nae3, random_signs,
                                   sample_noisy_xor, sample_planted_csp, sign_index, sign_vector, truth_path,
                                   truth_to_json, xor_to_json, xor_value)


def test_sign_index_convention():
    assert sign_index((1, 1, 1)) == 0
    assert sign_index((-1, 1, 1)) == 1
    assert sign_index((1, -1, -1)) == 6
    for i in range(16):
        assert sign_index(sign_vector(i, 4)) == i


def test_predicates():
    assert len(nae3().satisfying()) == 6
    assert len(ksat(3).satisfying()) == 7
    assert ksat(3)((-1, -1, -1)) == 0
    assert nae3()((1, 1, 1)) == 0 and nae3()((1, -1, 1)) == 1


def test_planting_distribution_validation():
    with pytest.raises(ValueError):
        PlantingDistribution(2, (0.5, 0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        PlantingDistribution.point_mass((1, 1, 1)).check_supported(nae3())
    Q = PlantingDistribution.uniform_over(nae3())
    assert sum(Q.probs) == 1 and all(isinstance(p, (Fraction, int)) for p in Q.probs)


def test_point_mass_literals_equal_planted():
    n = 12
    H = gen_hypergraph("uniform", n, 3, 50, 0)
    x = random_signs(n, 1)
    inst = sample_planted_csp(n, H.array(), x, ksat(3), PlantingDistribution.point_mass((1, 1, 1)), 3)
    assert np.array_equal(inst.literals, x[inst.scopes])
    assert csp_value(inst, x) == 1.0


def test_nae_literal_pattern_frequencies():
    # 10^4 scopes, Q uniform on the 6 NAE patterns: each within 3 sigma of 1/6
    n, m = 30, 10_000
    scopes = np.random.default_rng(0).integers(0, n, size=(m, 3))
    scopes = scopes[(scopes[:, 0] != scopes[:, 1]) & (scopes[:, 1] != scopes[:, 2]) & (scopes[:, 0] != scopes[:, 2])]
    m = len(scopes)
    x = random_signs(n, 2)
    inst = sample_planted_csp(n, scopes, x, nae3(), PlantingDistribution.uniform_over(nae3()), 5)
    y = inst.literals * x[inst.scopes]
    idx = ((y == -1) << np.arange(3)).sum(axis=1)
    counts = np.bincount(idx, minlength=8)
    assert counts[0] == counts[7] == 0
    sigma = np.sqrt(m * (1 / 6) * (5 / 6))
    assert np.all(np.abs(counts[1:7] - m / 6) < 3 * sigma)


def test_samplers_are_deterministic():
    H = gen_hypergraph("uniform", 20, 3, 100, 4)
    a, ta = sample_noisy_xor(H, random_signs(20, 4), 0.2, 9)
    b, tb = sample_noisy_xor(H, random_signs(20, 4), 0.2, 9)
    assert json.dumps(xor_to_json(a)) == json.dumps(xor_to_json(b))
    assert ta.corrupted == tb.corrupted
    Q = PlantingDistribution.uniform_over(nae3())
    c1 = sample_planted_csp(20, H.array(), random_signs(20, 4), nae3(), Q, 1)
    c2 = sample_planted_csp(20, H.array(), random_signs(20, 4), nae3(), Q, 1)
    assert json.dumps(csp_to_json(c1)) == json.dumps(csp_to_json(c2))


def test_noisy_xor_zero_noise_and_rejection():
    H = gen_hypergraph("uniform", 15, 3, 60, 0)
    psi, truth = sample_noisy_xor(H, np.ones(15, dtype=np.int8), 0.0, 0)
    assert truth.corrupted == frozenset() and np.all(psi.rhs == 1)
    with pytest.raises(ValueError):
        sample_noisy_xor(H, np.ones(15, dtype=np.int8), 0.5, 0)


def test_noise_count_concentration():
    n, m, eta = 60, 10_000, 0.25
    H = gen_hypergraph("uniform", n, 3, m, 1)
    _, truth = sample_noisy_xor(H, random_signs(n, 1), eta, 1)
    assert abs(len(truth.corrupted) - m * eta) < 3 * np.sqrt(m * eta * (1 - eta))


def test_csp_value_examples():
    clause = CspInstance(3, ksat(3), np.array([[0, 1, 2]]), np.array([[1, 1, 1]]))
    assert csp_value(clause, np.array([-1, -1, -1])) == 0.0
    # a uniformly random assignment satisfies 7/8 of random 3-SAT clauses
    n, m = 100, 10_000
    H = gen_hypergraph("uniform", n, 3, m, 0)
    lits = np.random.default_rng(1).choice([-1, 1], size=(m, 3))
    inst = CspInstance(n, ksat(3), H.array(), lits)
    assert abs(csp_value(inst, random_signs(n, 3)) - 7 / 8) < 0.02
    with pytest.raises(ValueError):
        csp_value(inst, np.ones(n - 1))


def test_xor_value_examples():
    psi = XorInstance(3, 2, np.array([[0, 1], [0, 2]]), np.array([1, -1]))
    assert xor_value(psi, np.array([1, 1, 1])) == 0.5


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_even_arity_value_is_flip_symmetric(seed):
    H = gen_hypergraph("uniform", 10, 2, 20, seed)
    psi, _ = sample_noisy_xor(H, random_signs(10, seed), 0.3, seed)
    x = random_signs(10, seed + 1)
    assert xor_value(psi, x) == xor_value(psi, -x)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.floats(0, 0.49))
def test_noisy_xor_ground_truth_is_exact(seed, k, eta):
    n = 9
    H = gen_hypergraph("uniform", n, k, min(30, math.comb(n, k)), seed)
    x = random_signs(n, seed)
    psi, truth = sample_noisy_xor(H, x, eta, seed)
    clean = np.prod(x[psi.edges], axis=1)
    assert set(np.flatnonzero(psi.rhs != clean).tolist()) == set(truth.corrupted)
    # value is affine in the number of violated clauses
    assert xor_value(psi, x) == pytest.approx(1 - len(truth.corrupted) / psi.m)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["nae3", "3sat"]))
def test_planted_assignment_satisfies_every_clause(seed, name):
    pred = nae3() if name == "nae3" else ksat(3)
    H = gen_hypergraph("uniform", 12, 3, 80, seed)
    x = random_signs(12, seed)
    inst = sample_planted_csp(12, H.array(), x, pred, PlantingDistribution.uniform_over(pred), seed)
    assert csp_value(inst, x) == 1.0


def test_gen_hypergraph_kinds():
    K10 = gen_hypergraph("uniform", 10, 2, 45, 0)
    assert len(set(K10.edges)) == 45
    split = gen_hypergraph("split", 20, 3, 60, 0, m1=20)
    for e in split.edges:
        assert all(v < 10 for v in e) or all(v >= 10 for v in e)
    assert gen_hypergraph("uniform", 30, 3, 100, 5).edges == gen_hypergraph("uniform", 30, 3, 100, 5).edges
    reg = gen_hypergraph("regular", 200, 2, 2000, 0)
    deg = np.bincount(reg.array().ravel(), minlength=200)
    assert np.all(deg == 20)
    with pytest.raises(ValueError):
        gen_hypergraph("uniform", 5, 3, 11, 0)


def test_scope_validation():
    with pytest.raises(ValueError):
        CspInstance(4, nae3(), np.array([[0, 0, 1]]), np.array([[1, 1, 1]]))
    with pytest.raises(ValueError):
        CspInstance(4, nae3(), np.array([[0, 1, 4]]), np.array([[1, 1, 1]]))
    with pytest.raises(ValueError):
        PlantedGroundTruth(np.ones(3), frozenset(), 0.5)


def test_json_round_trip(tmp_path):
    H = gen_hypergraph("uniform", 20, 3, 40, 0)
    psi, truth = sample_noisy_xor(H, random_signs(20, 0), 0.1, 0)
    path = tmp_path / "inst.json"
    dump_json(xor_to_json(psi), path)
    dump_json(truth_to_json(truth), truth_path(path))
    assert truth_path(path).name == "inst.truth.json"
    back, tback = load_instance(path)
    assert np.array_equal(back.edges, psi.edges) and np.array_equal(back.rhs, psi.rhs)
    assert tback.corrupted == truth.corrupted
    Q = PlantingDistribution.uniform_over(nae3())
    inst = sample_planted_csp(20, H.array(), random_signs(20, 0), nae3(), Q, 0)
    again = instance_from_json(json.loads(json.dumps(csp_to_json(inst))))
    assert np.array_equal(again.literals, inst.literals) and np.array_equal(again.scopes, inst.scopes)
