import pytest
from hypothesis import given, settings, strategies as st

from bn2o import gen
from bn2o.engine import (
    Component,
    CostCounters,
    WeightTable,
    absorb_negatives,
    choose_finding,
    evaluate,
    partition,
    posterior_single,
    posteriors,
    savings_metric,
)
from bn2o.errors import ZeroEvidence
from bn2o.model import CaseEvidence, make_case, make_network
from bn2o.oracle import enumerate_posteriors

from suites import desk_instance


@pytest.fixture
def leaky_single():
    return make_network([("d", 0.5)], [("f", [("d", 0.8)], 0.1)])


@pytest.fixture
def pair():
    return make_network([("d1", 0.5), ("d2", 0.5)], [("f1", [("d1", 0.8), ("d2", 0.6)])])


@pytest.fixture
def chain3():
    # F1:{D1,D2}, F2:{D2,D3}, F3:{D3,D4}
    return gen.chain_network(3, p=0.3, c=0.7)


# -- absorb_negatives


def test_absorb_single_negative():
    net = make_network([("d", 0.5)], [("f", [("d", 0.8)])])
    cost = CostCounters()
    w = absorb_negatives(net, make_case(net, [], ["f"]), WeightTable.from_priors(net), cost)
    assert w.wt[0] == pytest.approx(0.1, abs=1e-15)
    assert w.wf[0] == 0.5
    assert cost.multiplications == 1


def test_absorb_nothing_is_identity(pair):
    cost = CostCounters()
    w0 = WeightTable.from_priors(pair)
    w = absorb_negatives(pair, CaseEvidence(), w0, cost)
    assert w == w0 and cost.multiplications == 0


def test_absorb_counts_links_and_leaks():
    net = make_network(
        [("a", 0.2), ("b", 0.3), ("c", 0.4)],
        [("f", [("a", 0.5), ("b", 0.5)], 0.1), ("g", [("a", 0.5), ("b", 0.2), ("c", 0.9)])],
    )
    cost = CostCounters()
    w = absorb_negatives(net, make_case(net, [], ["f", "g"]), WeightTable.from_priors(net), cost)
    assert cost.multiplications == 2 + 3 + 1
    assert w.scalar == pytest.approx(0.9)
    assert w.wt[0] == pytest.approx(0.2 * 0.5 * 0.5)


def test_negative_pair_posterior(pair):
    # oracle: 0.25 * (0.2*0.4 + 0.2) / (0.25 * (0.08 + 0.2 + 0.4 + 1))
    res = posteriors(pair, make_case(pair, [], ["f1"]))
    assert res.marginals[0] == pytest.approx(1 / 6, abs=1e-12)
    assert res.p_evidence == pytest.approx(0.42, abs=1e-12)


# -- partition and choose_finding


def test_partition_chain3_outer_findings_split(chain3):
    comps, free = partition({0, 2}, chain3)
    assert comps == [Component((0,), (0, 1)), Component((2,), (2, 3))]
    assert free == ()


def test_partition_chain3_all_connected(chain3):
    comps, free = partition({0, 1, 2}, chain3)
    assert comps == [Component((0, 1, 2), (0, 1, 2, 3))]


def test_partition_empty(chain3):
    comps, free = partition(set(), chain3)
    assert comps == [] and free == (0, 1, 2, 3)


def test_partition_respects_scope(chain3):
    # without D3 in scope, F2 and F3 no longer touch
    comps, free = partition({0, 1, 2}, chain3, scope={0, 1, 3})
    assert [c.findings for c in comps] == [(0, 1), (2,)]
    assert free == ()


def _star(counts):
    """Finding k gets counts[k] parents, all drawn from one shared pool."""
    n = max(counts)
    return make_network(
        [(f"d{i}", 0.1) for i in range(n)],
        [(f"F{k + 1}", [(f"d{i}", 0.5) for i in range(c)]) for k, c in enumerate(counts)],
    )


def test_choose_most_parents():
    net = _star([3, 5, 5])
    comp = partition(range(3), net)[0][0]
    assert choose_finding(comp, net) == 1
    assert choose_finding(comp, net, "max-index") == 1


def test_choose_single_finding():
    net = _star([2])
    comp = partition([0], net)[0][0]
    assert choose_finding(comp, net) == 0


def test_choose_equal_counts_smallest_index():
    net = _star([4, 4, 4])
    comp = partition(range(3), net)[0][0]
    assert choose_finding(comp, net) == 0
    assert choose_finding(comp, net, "max-index") == 0
    assert choose_finding(comp, net, "min") == 0


def test_choose_breaks_ties_by_finest_split(chain3):
    # the worked example distributes over the middle finding
    comp = partition(range(3), chain3)[0][0]
    assert choose_finding(comp, chain3) == 1
    assert choose_finding(comp, chain3, "max-index") == 0


def test_choose_min_parents():
    net = _star([3, 5, 2])
    comp = partition(range(3), net)[0][0]
    assert choose_finding(comp, net, "min") == 2


# -- evaluate


def test_evaluate_single_disease_leak(leaky_single):
    res = evaluate([0], WeightTable.from_priors(leaky_single), [0], leaky_single)
    assert res.z == pytest.approx(0.46, abs=1e-15)
    assert res.z_t[0] == pytest.approx(0.41, abs=1e-15)


def test_evaluate_pair(pair):
    res = evaluate([0], WeightTable.from_priors(pair), [0, 1], pair)
    assert res.z == pytest.approx(0.58, abs=1e-15)
    assert res.z_t == pytest.approx({0: 0.43, 1: 0.38}, abs=1e-15)


def test_evaluate_no_findings_gives_priors(pair):
    res = evaluate([], WeightTable.from_priors(pair), [0, 1], pair)
    assert res.z == pytest.approx(1.0, abs=1e-15)
    assert res.z_t == pytest.approx({0: 0.5, 1: 0.5}, abs=1e-15)


def test_evaluate_base_case_with_zero_block():
    net = make_network([("a", 0.5), ("b", 0.5)], [("f", [("a", 1.0)])])
    w = WeightTable([0.0, 0.5], [0.0, 0.5])
    res = evaluate([], w, [0, 1], net)
    assert res.z == 0.0 and res.z_t == {0: 0.0, 1: 0.0}


@pytest.mark.parametrize("seed", range(15))
def test_evaluate_matches_oracle_clamped_weights(seed):
    net, case = desk_instance(seed)
    w = absorb_negatives(net, case, WeightTable.from_priors(net))
    res = evaluate(case.positives, w, range(net.n_diseases), net)
    z, marginals = enumerate_posteriors(net, case)
    assert res.z == pytest.approx(z, rel=1e-9)
    for i, m in enumerate(marginals):
        assert res.z_t[i] / res.z == pytest.approx(m, abs=1e-9)
        assert 0.0 <= res.z_t[i] <= res.z * (1 + 1e-12)


# -- posteriors and posterior_single


def test_posteriors_leaky_single(leaky_single):
    res = posteriors(leaky_single, make_case(leaky_single, ["f"]))
    assert res.marginals[0] == pytest.approx(0.891304347826, abs=1e-12)
    assert res.p_evidence == pytest.approx(0.46, abs=1e-15)


def test_posteriors_pair(pair):
    res = posteriors(pair, make_case(pair, ["f1"]))
    assert res.marginals == pytest.approx([0.741379310345, 0.655172413793], abs=1e-12)


def test_posteriors_empty_case(pair):
    res = posteriors(pair, CaseEvidence())
    assert res.marginals == [0.5, 0.5]
    assert res.p_evidence == pytest.approx(1.0, abs=1e-15)


def test_posterior_single_pair(pair):
    res = posterior_single(pair, make_case(pair, ["f1"]), 0)
    assert res.probability == pytest.approx(0.741379310345, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_single_matches_all_bit_for_bit(seed):
    net, case = desk_instance(seed)
    full = posteriors(net, case)
    for target in range(net.n_diseases):
        one = posterior_single(net, case, target)
        assert one.probability == full.marginals[target]
        assert one.p_evidence == full.p_evidence
        assert one.cost.multiplications <= full.cost.multiplications


def test_zero_evidence():
    net = make_network([("a", 0.5)], [("f", [("a", 1.0)]), ("g", [("a", 0.5)])])
    with pytest.raises(ZeroEvidence):
        posteriors(net, make_case(net, ["g"], ["f"]))
    with pytest.raises(ZeroEvidence):
        posterior_single(net, make_case(net, ["g"], ["f"]), 0)


def test_unreferenced_diseases_keep_negative_only_posterior():
    net = make_network(
        [("a", 0.3), ("b", 0.4)],
        [("f", [("a", 0.7)]), ("g", [("b", 0.6)])],
    )
    res = posteriors(net, make_case(net, ["f"], ["g"]))
    assert res.marginals[1] == pytest.approx(0.4 * 0.4 / (0.4 * 0.4 + 0.6), abs=1e-15)


# -- invariants


@pytest.mark.parametrize("seed", range(30))
def test_partition_once_per_distribution(seed):
    net, case = desk_instance(seed)
    for reuse in (True, False):
        cost = posteriors(net, case, reuse=reuse).cost
        expected = cost.distributions + (1 if case.positives else 0)
        assert cost.partition_calls == expected


@pytest.mark.parametrize("seed", range(30))
def test_order_and_reuse_do_not_change_values(seed):
    net, case = desk_instance(seed)
    ref = posteriors(net, case)
    for kw in ({"choose": "min"}, {"choose": "max-index"}, {"reuse": False}):
        other = posteriors(net, case, **kw)
        assert other.p_evidence == pytest.approx(ref.p_evidence, rel=1e-12)
        assert other.marginals == pytest.approx(ref.marginals, abs=1e-12)


def test_without_reuse_distributions_double_per_level():
    # a fully connected net never splits, so the plain recursion visits 2^k - 1 nodes
    net = gen.random_network(4, 5, 4, 4, seed=1)
    case = CaseEvidence(tuple(range(5)))
    assert posteriors(net, case, reuse=False).cost.distributions == 2**5 - 1


def test_trace_savings_agree(chain3):
    res = posteriors(chain3, CaseEvidence((0, 1, 2)))
    assert savings_metric(res.trace) == res.cost.savings
    assert res.trace[:2] == [(3, (3,)), (2, (1, 1))]


# -- savings_metric


def test_savings_reference_trace():
    trace = [(17, [17]), (16, [16]), (15, [15]), (14, [14]), (13, [1, 12]), (11, [11]), (10, [5, 4, 1])]
    assert savings_metric(trace) == 6


@pytest.mark.parametrize("trace, expected", [([(5, [5])], 0), ([(4, [1, 1, 1, 1])], 3), ([], 0)])
def test_savings_small(trace, expected):
    assert savings_metric(trace) == expected


def test_savings_rejects_malformed():
    with pytest.raises(ValueError):
        savings_metric([(5, [2, 2])])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_property_matches_oracle(seed):
    net, case = desk_instance(seed)
    res = posteriors(net, case)
    z, marginals = enumerate_posteriors(net, case)
    assert res.p_evidence == pytest.approx(z, rel=1e-9)
    assert max(abs(a - b) for a, b in zip(res.marginals, marginals)) <= 1e-9
    assert 0.0 <= res.p_evidence <= 1.0
