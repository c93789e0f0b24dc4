import math
import warnings

import numpy as np
import pytest

from conftest import random_coverage, random_cut, subsets
from subopt.constraints import MatroidIntersection, PartitionMatroid, Unconstrained, UniformMatroid
from subopt.objectives import ConstantObjective, CutObjective, ModularObjective
from subopt.oracle import RunLedger, SubmodularOracle
from subopt.sampling import (
    MonotonicityError,
    SamplingParams,
    binary_search_eta,
    first_below,
    prefix_feasible_max,
    preset_p_extendible,
    preset_p_system,
    rand_sampling,
    rand_sequence,
    rep_sampling,
    substream,
    threshold_candidates,
    unif_sampling,
)


# -- presets -------------------------------------------------------------------

def test_preset_p_system_figure_values():
    s = preset_p_system(1, 0.1)
    assert (s.m, s.phi1, s.phi2) == (2, 1.0, 0.5)
    assert s.lam == pytest.approx(0.1)


@pytest.mark.parametrize("p, m", [(1, 2), (2, 3), (3, 3), (7, 3), (8, 4), (17, 4), (31, 5)])
def test_preset_p_system_m(p, m):
    assert preset_p_system(p, 0.2).m == m
    assert m == 1 + math.ceil(math.sqrt((p + 1) / 2))


def test_preset_p_extendible():
    s = preset_p_extendible(1, 0.01)
    assert (s.m, s.phi1, s.phi2) == (1, 0.5, 1.0)
    assert preset_p_extendible(3, 0.1).phi1 == 0.25
    assert preset_p_extendible(1, 0.5).lam == 1.0


@pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(epsilon=1.0), dict(m=0), dict(m=1.5),
                                dict(phi1=1.2), dict(phi2=-0.1), dict(lam=0.0)])
def test_params_validation(kw):
    base = dict(epsilon=0.1, m=1, phi1=1.0, phi2=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        SamplingParams(**base).validate()


def test_preset_domain_errors():
    with pytest.raises(ValueError):
        preset_p_system(0, 0.1)
    with pytest.raises(ValueError):
        preset_p_extendible(1, 1.5)
    with pytest.raises(ValueError):
        SamplingParams(0.1, 1, 1, 1).bind(0)


# -- independence-only subroutines ---------------------------------------------

def test_rand_sequence_empty():
    L = RunLedger()
    assert rand_sequence([], [], UniformMatroid(5, 2), np.random.default_rng(0), L) == []
    assert L == RunLedger()


def test_rand_sequence_uniform_always_k():
    for seed in range(50):
        L = RunLedger()
        A = rand_sequence(range(10), [], UniformMatroid(10, 3), np.random.default_rng(seed), L)
        assert len(A) == 3 and len(set(A)) == 3
        assert L.value_queries == 0 and L.value_rounds == 0


def test_rand_sequence_partition_maximal():
    P = PartitionMatroid(4, [[0, 1], [2, 3]], [1, 1])
    maximal = {S for S in subsets(4) if P(S) and not any(P(S | {e}) for e in range(4) if e not in S)}
    seen = set()
    for seed in range(60):
        A = frozenset(rand_sequence(range(4), [], P, np.random.default_rng(seed), RunLedger()))
        assert A in maximal
        seen.add(A)
    assert seen == maximal


def test_rand_sequence_respects_base():
    U = UniformMatroid(10, 4)
    A = rand_sequence(range(3, 10), {0, 1}, U, np.random.default_rng(1), RunLedger())
    assert len(A) == 2 and not {0, 1} & set(A)


def test_prefix_feasible_max_examples():
    L = RunLedger()
    assert prefix_feasible_max([0, 1, 2], [], Unconstrained(3), L) == 3
    assert prefix_feasible_max([1, 2], [0], UniformMatroid(3, 1), L) == 0
    assert prefix_feasible_max([0, 1, 2, 3, 4], [9], UniformMatroid(10, 2), L) == 1
    assert L.value_queries == 0


def test_unif_sampling_extremes():
    A = list(range(20))
    rng = np.random.default_rng(0)
    assert unif_sampling(A, 1.0, rng) == A
    assert unif_sampling(A, 0.0, rng) == []
    with pytest.raises(ValueError):
        unif_sampling(A, 1.5, rng)


def test_unif_sampling_half_concentration():
    inside = sum(abs(len(unif_sampling(range(1000), 0.5, np.random.default_rng(s))) - 500) <= 50
                 for s in range(1000))
    assert inside >= 990


# -- value-oracle subroutines --------------------------------------------------

def test_threshold_candidates_examples():
    f = ModularObjective([5, 1])
    L = RunLedger()
    assert threshold_candidates(f, UniformMatroid(2, 2), [], 2, [0, 1], L) == {0}
    assert (L.value_rounds, L.indep_rounds) == (1, 1)
    assert threshold_candidates(f, UniformMatroid(2, 2), [], 6, [0, 1], RunLedger()) == frozenset()
    with pytest.raises(ValueError):
        threshold_candidates(f, UniformMatroid(2, 2), [], 0, [0, 1], RunLedger())


def test_threshold_candidates_cut_triangle():
    tri = CutObjective(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])
    got = threshold_candidates(tri, Unconstrained(3), {0}, 1.5, range(3), RunLedger())
    expected = {e for e in range(3) if e != 0 and tri({0, e}) - tri({0}) >= 1.5}
    assert got == expected


def test_first_below_matches_linear_scan():
    rng = np.random.default_rng(3)
    for _ in range(300):
        t = int(rng.integers(0, 40))
        sizes = np.sort(rng.integers(0, 50, t))[::-1]
        thr = float(rng.uniform(0, 50))
        linear = next((j for j in range(1, t + 1) if sizes[j - 1] < thr), t + 1)
        probed = []
        got = first_below(lambda j: (probed.append(j), int(sizes[j - 1]))[1], t, thr)
        assert got == linear
        assert t + 1 not in probed
        assert len(probed) <= max(1, math.ceil(math.log2(t + 1)) + 1)


def test_binary_search_eta_first_index():
    f = ModularObjective([5, 5, 1, 1, 1])
    # X holds three elements below the threshold: X_1 already shrinks
    L = RunLedger()
    eta = binary_search_eta(f, UniformMatroid(5, 5), [], [0, 1], [0, 1, 2, 3, 4], 2.0, 0.1, L)
    assert eta == 1
    assert L.value_rounds >= 1 and L.value_rounds == L.indep_rounds


def test_binary_search_eta_sentinel():
    f = ModularObjective(np.full(10, 3.0))
    eta = binary_search_eta(f, UniformMatroid(10, 10), [], [0, 1], range(10), 1.0, 0.3, RunLedger())
    assert eta == 3


def test_binary_search_eta_requires_candidates():
    with pytest.raises(ValueError):
        binary_search_eta(ModularObjective([1]), UniformMatroid(1, 1), [], [0], [], 1.0, 0.1, RunLedger())


class Square(SubmodularOracle):
    """|S|^2: supermodular, so thresholded candidate sets grow along prefixes."""

    def evaluate(self, S):
        return float(len(S) ** 2)


def test_monotonicity_violation_is_an_error():
    with pytest.raises(MonotonicityError):
        binary_search_eta(Square(6), UniformMatroid(6, 10), [], [0, 1], range(6), 2.5, 0.1, RunLedger())


def test_rand_sampling_empty_pool():
    f = ModularObjective([1, 2])
    assert rand_sampling(f, [], UniformMatroid(2, 1), 0.1, 0.1, 1.0, np.random.default_rng(0), RunLedger()) \
        == frozenset()


def test_rand_sampling_single_element():
    f = ModularObjective([0, 0, 4])
    S = rand_sampling(f, [2], UniformMatroid(3, 2), 0.1, 0.1, 1.0, np.random.default_rng(0), RunLedger())
    assert S == {2}


def test_rand_sampling_no_positive_singleton():
    f = ConstantObjective(4, 1.0)
    S = rand_sampling(f, range(4), Unconstrained(4), 0.1, 0.1, 1.0, np.random.default_rng(0), RunLedger())
    assert S == frozenset()


def test_rand_sampling_argument_checks():
    f = ModularObjective([1])
    with pytest.raises(ValueError):
        rand_sampling(f, [0], Unconstrained(1), 0.0, 0.1, 1.0, np.random.default_rng(0), RunLedger())
    with pytest.raises(ValueError):
        rand_sampling(f, [0], Unconstrained(1), 0.1, 1.0, 1.0, np.random.default_rng(0), RunLedger())


def _replay(f, k, seed, eps=0.1):
    """Run modular + uniform rand_sampling and check every admission against its level's threshold."""
    events = []
    system = UniformMatroid(f.n, k)
    S = rand_sampling(f, range(f.n), system, eps * 2, eps, 1.0, np.random.default_rng(seed), RunLedger(),
                      trace=events.append)
    cur = frozenset()
    for ev in events:
        if ev["event"] != "inner":
            continue
        for e in ev["added"]:
            assert e in ev["x"]
            assert f(cur | {e}) - f(cur) >= ev["delta"] - 1e-12
        cur = cur | set(ev["added"])
    assert cur == S
    return S


def test_rand_sampling_modular_threshold_replay():
    rng = np.random.default_rng(5)
    for seed in range(20):
        f = ModularObjective(rng.uniform(0, 1, 15))
        S = _replay(f, 4, seed)
        assert len(S) <= 4


def test_rep_sampling_m1_equals_single_pass():
    rng = np.random.default_rng(1)
    f = random_cut(10, rng)
    system = UniformMatroid(10, 4)
    params = SamplingParams(0.2, 1, 1.0, 1.0, seed=7)
    res = rep_sampling(f, system, params)
    single = rand_sampling(f, range(10), system, params.bind(1).lam, 0.2, 1.0, substream(7, 0, 0), RunLedger())
    assert res.solution == single
    assert res.lambdas[0] == res.omegas[0]


def test_rep_sampling_zero_objective():
    res = rep_sampling(ConstantObjective(6, 0.0), UniformMatroid(6, 2), preset_p_system(1, 0.1))
    assert res.value == 0 and res.solution == frozenset()


def test_rep_sampling_result_invariants():
    rng = np.random.default_rng(2)
    f = random_coverage(20, rng)
    system = MatroidIntersection([UniformMatroid(20, 6), PartitionMatroid(20, [list(range(10)), list(range(10, 20))],
                                                                            [4, 4])])
    for seed in range(10):
        params = preset_p_system(system.p, 0.2, seed)
        L = RunLedger()
        res = rep_sampling(f, system, params, L, debug=True)
        assert system(res.solution)
        assert res.value == pytest.approx(f(res.solution))
        assert len(res.omegas) == params.m
        for i in range(params.m):
            assert res.lambdas[i] <= res.omegas[i]
            for j in range(i):
                assert not res.omegas[i] & res.omegas[j]
        vals = [v for pair in res.per_iteration for v in pair]
        assert res.value == pytest.approx(max(vals))
        assert L.value_queries >= L.value_rounds


def test_rep_sampling_final_query_counted():
    f = ModularObjective([1, 2, 3, 4])
    params = SamplingParams(0.3, 1, 1.0, 1.0, seed=0)
    L = RunLedger()
    events = []
    rep_sampling(f, UniformMatroid(4, 2), params, L, trace=events.append)
    last = [e for e in events if e["event"] in ("inner", "level")][-1]["ledger"]
    assert L.value_rounds >= last["value_rounds"] + 1
    assert L.value_queries >= last["value_queries"] + 1


def test_rep_sampling_deterministic():
    rng = np.random.default_rng(3)
    f = random_cut(14, rng)
    system = UniformMatroid(14, 5)
    a = rep_sampling(f, system, preset_p_system(1, 0.1, 99))
    b = rep_sampling(f, system, preset_p_system(1, 0.1, 99))
    assert a.solution == b.solution and a.value == b.value and a.ledger == b.ledger


def test_rep_sampling_warns_when_lambda_large():
    with pytest.warns(RuntimeWarning):
        rep_sampling(ModularObjective([1, 2]), UniformMatroid(2, 1), preset_p_extendible(1, 0.5))


def test_rep_sampling_p_override_changes_lambda():
    f = ModularObjective([1, 2, 3])
    res = rep_sampling(f, UniformMatroid(3, 2), SamplingParams(0.1, 2, 1.0, 0.5), p=3)
    assert res.params.lam == pytest.approx(0.1 * 4 / 2)


def test_rep_sampling_iteration_substreams_stable_under_m():
    rng = np.random.default_rng(8)
    f = random_cut(12, rng)
    system = UniformMatroid(12, 4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = rep_sampling(f, system, SamplingParams(0.2, 2, 1.0, 0.5, seed=4, lam=0.2))
        b = rep_sampling(f, system, SamplingParams(0.2, 3, 1.0, 0.5, seed=4, lam=0.2))
    assert a.omegas == b.omegas[:2]
