import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import planted_csp.csp_solver as cs
from planted_csp.config import RunConfig
from planted_csp.csp_solver import (build_xor_subinstance, enumerate_label_functions, fourier_coefficients,
                                    solve_semirandom_csp, subinstance_noise, subsets, true_label_function)
from planted_csp.instances import (PlantingDistribution, gen_hypergraph, ksat, nae3, random_signs,
                                   sample_planted_csp, sign_vector)

from oracles import fourier_by_sum


def as_weights(Q):
    return {tuple(sign_vector(i, Q.k)): Fraction(p) for i, p in enumerate(Q.probs)}


def test_uniform_over_cube_has_no_bias():
    table = fourier_coefficients(PlantingDistribution(3, tuple(Fraction(1, 8) for _ in range(8))))
    assert table[()] == Fraction(1, 8)
    assert all(table[S] == 0 for S in subsets(3))


def test_nae_coefficients():
    table = fourier_coefficients(PlantingDistribution.uniform_over(nae3()))
    assert table[()] == Fraction(1, 8)
    for S in subsets(3):
        assert table[S] == (Fraction(-1, 24) if len(S) == 2 else 0)
    assert subinstance_noise(table, (0, 1), -1) == Fraction(1, 3)
    assert subinstance_noise(table, (0, 1), 1) == Fraction(2, 3)


def test_3sat_coefficients():
    table = fourier_coefficients(PlantingDistribution.uniform_over(ksat(3)))
    for S in subsets(3):
        assert table[S] == Fraction((-1) ** (len(S) + 1), 56)


def test_point_mass_gives_noiseless_subinstances():
    y = (1, -1, 1)
    table = fourier_coefficients(PlantingDistribution.point_mass(y))
    for S in subsets(3):
        sign = math.prod(y[i] for i in S)
        assert subinstance_noise(table, S, sign) == 0


dists = st.integers(1, 4).flatmap(lambda k: st.tuples(
    st.just(k), st.lists(st.integers(0, 20), min_size=1 << k, max_size=1 << k).filter(lambda w: sum(w) > 0)))


@settings(max_examples=150, deadline=None)
@given(dists)
def test_fourier_matches_direct_sum(data):
    k, w = data
    Q = PlantingDistribution(k, tuple(Fraction(v, sum(w)) for v in w))
    table = fourier_coefficients(Q)
    ref = fourier_by_sum(k, as_weights(Q))
    assert table.coeffs == ref
    assert table.round_trip_error(Q) == 0
    assert sum(table[S] ** 2 for S in table.coeffs) == sum(p * p for p in Q.probs) / 2**k


def test_monte_carlo_noise_rate_nae():
    # empirical corruption of the ({1,2}, -) projection against the exact rate 1/3
    n, m = 200, 10_000
    H = gen_hypergraph("uniform", n, 3, m, 0)
    xstar = random_signs(n, 0)
    inst = sample_planted_csp(n, H.array(), xstar, nae3(), PlantingDistribution.uniform_over(nae3()), 0)
    psi = build_xor_subinstance(inst, (0, 1), -1)
    wrong = np.mean(psi.rhs != np.prod(xstar[psi.edges], axis=1))
    sigma = math.sqrt((1 / 3) * (2 / 3) / m)
    assert abs(wrong - 1 / 3) <= 3 * sigma


def test_build_subinstance_rejects_bad_input():
    inst = sample_planted_csp(5, [(0, 1, 2)], np.ones(5), nae3(), PlantingDistribution.uniform_over(nae3()), 0)
    with pytest.raises(ValueError):
        build_xor_subinstance(inst, (), 1)
    with pytest.raises(ValueError):
        build_xor_subinstance(inst, (0,), 0)


def test_enumeration_counts():
    assert len(list(enumerate_label_functions(1))) == 3
    assert len(list(enumerate_label_functions(2))) == 27
    assert len(list(enumerate_label_functions(3))) == 2187
    assert len(list(enumerate_label_functions(3, 2))) == 729
    assert len({f.encode() for f in enumerate_label_functions(3)}) == 2187


def test_enumeration_refuses_large_arity():
    with pytest.raises(ValueError, match="max_label_arity"):
        next(enumerate_label_functions(6))
    assert len(list(enumerate_label_functions(6, 1))) == 3**6


def test_label_encoding():
    f = true_label_function(PlantingDistribution.uniform_over(nae3()), 0.1)
    assert f.encode() == "{12}-,{13}-,{23}-"
    assert next(enumerate_label_functions(3)).encode() == "0"


def planted(pred, Q, n, m, seed):
    H = gen_hypergraph("uniform", n, pred.k, m, seed)
    xstar = random_signs(n, seed)
    return sample_planted_csp(n, H.array(), xstar, pred, Q, seed), xstar


def test_point_mass_solver_reaches_full_value():
    inst, _ = planted(ksat(3), PlantingDistribution.point_mass((1, 1, -1)), 20, 400, 1)
    rep = solve_semirandom_csp(inst, 0.1, RunConfig(max_label_arity=1))
    assert rep.best.value == 1.0
    assert set(rep.to_json()) == {"best_f", "value", "per_f", "equations_used", "discarded_fraction"}


def test_argmax_dominates_every_candidate():
    inst, _ = planted(nae3(), PlantingDistribution.uniform_over(nae3()), 20, 400, 2)
    rep = solve_semirandom_csp(inst, 0.1, RunConfig(max_label_arity=1))
    values = [c.value for c in rep.candidates if c.status == "ok"]
    assert rep.best.value == max(values)
    assert len(rep.candidates) == 27
    assert rep.candidates[0].f.encode() == "0" and rep.candidates[0].status == "ok"


def test_arity_cap_never_builds_3xor(monkeypatch):
    seen = []
    real = cs.build_xor_subinstance

    def spy(inst, S, sign):
        seen.append(len(S))
        return real(inst, S, sign)

    monkeypatch.setattr(cs, "build_xor_subinstance", spy)
    inst, _ = planted(nae3(), PlantingDistribution.uniform_over(nae3()), 16, 200, 3)
    solve_semirandom_csp(inst, 0.1, RunConfig(max_label_arity=2))
    assert seen and max(seen) <= 2


def test_true_label_is_among_candidates_with_consistent_accounting():
    inst, _ = planted(nae3(), PlantingDistribution.uniform_over(nae3()), 30, 600, 4)
    rep = solve_semirandom_csp(inst, 0.1, RunConfig(max_label_arity=2))
    target = true_label_function(PlantingDistribution.uniform_over(nae3()), 0.1).encode()
    match = [c for c in rep.candidates if c.f.encode() == target]
    assert len(match) == 1
    c = match[0]
    assert 0 <= c.discarded <= 1
    if c.status == "ok":
        assert c.equations == round((1 - c.discarded) * inst.m) * 3


def test_threads_do_not_change_result():
    inst, _ = planted(nae3(), PlantingDistribution.uniform_over(nae3()), 16, 200, 5)
    a = solve_semirandom_csp(inst, 0.1, RunConfig(max_label_arity=1))
    b = solve_semirandom_csp(inst, 0.1, RunConfig(max_label_arity=1, threads=4))
    assert a.to_json() == b.to_json()
