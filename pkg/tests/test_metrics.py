import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evcoref.corpus import Chain, ChainSet
from evcoref.metrics import (
    MetricReport, PRF, avg_f, b_cubed, blanc, brute_force_ceaf, ceaf_e,
    evaluate_pairs, machine_lines, muc, type_f1,
)


def test_muc_perfect():
    gold = [{"a", "b"}, {"c"}]
    assert muc(gold, gold) == PRF(1.0, 1.0, 1.0)


def test_muc_worked_example():
    gold = [{"a", "b", "c", "d"}]
    sys = [{"a", "b"}, {"c", "d"}]
    got = muc(gold, sys)
    assert got.r == pytest.approx(2 / 3)
    assert got.p == pytest.approx(1.0)
    assert got.f1 == pytest.approx(0.8)


def test_muc_all_singletons_zero_by_convention():
    gold = [{"a"}, {"b"}]
    sys = [{"a"}, {"b"}]
    assert muc(gold, sys) == PRF(0.0, 0.0, 0.0)


def test_b_cubed_perfect():
    gold = [{"a", "b", "c"}]
    assert b_cubed(gold, gold) == PRF(1.0, 1.0, 1.0)


def test_b_cubed_worked_example():
    gold = [{"a", "b", "c"}, {"d"}]
    sys = [{"a", "b"}, {"c", "d"}]
    got = b_cubed(gold, sys)
    assert got.p == pytest.approx(0.75)
    assert got.r == pytest.approx(2 / 3)
    assert got.f1 == pytest.approx(12 / 17)


def test_b_cubed_twinless_gold_mention():
    gold = [{"a", "b"}]
    sys = [{"a"}]
    got = b_cubed(gold, sys)
    assert got.p == pytest.approx(1.0)
    assert got.r == pytest.approx(0.25)
    assert got.f1 == pytest.approx(0.4)


def test_ceaf_e_perfect():
    gold = [{"a", "b"}, {"c"}]
    assert ceaf_e(gold, gold) == PRF(1.0, 1.0, 1.0)


def test_ceaf_e_worked_example():
    gold = [{"a", "b", "c"}, {"d"}]
    sys = [{"a", "b", "c", "d"}]
    got = ceaf_e(gold, sys)
    assert got.p == pytest.approx(6 / 7)
    assert got.r == pytest.approx(3 / 7)
    assert got.f1 == pytest.approx(4 / 7)


def test_ceaf_e_disjoint_is_zero():
    assert ceaf_e([{"a"}], [{"b"}]) == PRF(0.0, 0.0, 0.0)


def test_brute_force_guard():
    chains = [{i} for i in range(9)]
    with pytest.raises(ValueError):
        brute_force_ceaf(chains, chains)


def test_brute_force_empty_side():
    assert brute_force_ceaf([], [{"a"}]) == PRF(0.0, 0.0, 0.0)


def _random_partition(rng, items, max_chains):
    labels = rng.integers(0, max_chains, size=len(items))
    chains = {}
    for item, label in zip(items, labels):
        chains.setdefault(int(label), set()).add(item)
    return list(chains.values())


def test_ceaf_matches_brute_force_randomized():
    rng = np.random.default_rng(123)
    for _ in range(300):
        universe = [f"m{i}" for i in range(int(rng.integers(1, 12)))]
        gold = _random_partition(rng, universe, 5)
        keep = max(1, int(rng.integers(1, len(universe) + 1)))
        sys = _random_partition(rng, universe[:keep], 5)
        assert ceaf_e(gold, sys) == brute_force_ceaf(gold, sys)


def test_blanc_perfect_two_chains():
    gold = [{"a", "b"}, {"c"}]
    assert blanc(gold, gold) == PRF(1.0, 1.0, 1.0)


def test_blanc_worked_example():
    gold = [{"a", "b"}, {"c"}]
    sys = [{"a", "b", "c"}]
    got = blanc(gold, sys)
    # coref: gold {ab}, sys {ab, ac, bc} -> P=1/3, R=1, F=0.5
    # non-coref: gold {ac, bc}, sys {} -> all zero
    assert got.f1 == pytest.approx(0.25)
    assert got.p == pytest.approx((1 / 3) / 2)
    assert got.r == pytest.approx(0.5)


def test_blanc_single_mention_trivially_perfect():
    gold = [{"a"}]
    assert blanc(gold, gold) == PRF(1.0, 1.0, 1.0)


def test_blanc_drops_empty_component():
    # one chain, no non-coref links on either side: only the coref
    # component contributes
    gold = [{"a", "b"}]
    assert blanc(gold, gold) == PRF(1.0, 1.0, 1.0)


def test_type_f1_exact_match():
    gold = [(1, 0), (5, 2)]
    assert type_f1(gold, gold) == PRF(1.0, 1.0, 1.0)


def test_type_f1_partial():
    got = type_f1([(1, 0), (5, 2)], [(1, 0)])
    assert got.p == pytest.approx(1.0)
    assert got.r == pytest.approx(0.5)
    assert got.f1 == pytest.approx(2 / 3)


def test_type_f1_wrong_type_is_both_fp_and_fn():
    got = type_f1([(1, 0)], [(1, 1)])
    assert got == PRF(0.0, 0.0, 0.0)


def _report(f_values):
    prfs = [PRF(0, 0, f) for f in f_values]
    return MetricReport(muc=prfs[0], b_cubed=prfs[1], ceaf_e=prfs[2],
                        blanc=prfs[3], avg_f=0.0, types=PRF(0, 0, 0))


def test_avg_f_mean_of_four():
    assert avg_f(_report([0.4, 0.5, 0.6, 0.7])) == pytest.approx(0.55)
    assert avg_f(_report([1.0, 1.0, 1.0, 1.0])) == pytest.approx(1.0)
    assert avg_f(_report([0.0, 0.0, 0.0, 0.0])) == pytest.approx(0.0)


def _chainset(*chains):
    built = tuple(Chain(t, tuple(sorted(tokens))) for t, tokens in chains)
    return ChainSet(tuple(sorted(built, key=lambda c: c.tokens[0])))


def test_evaluate_pairs_perfect_corpus():
    pairs = [
        (_chainset((0, (1, 4)), (1, (7,))), _chainset((0, (1, 4)), (1, (7,)))),
        (_chainset((2, (0, 2, 5))), _chainset((2, (0, 2, 5)))),
    ]
    report = evaluate_pairs(pairs)
    assert report.muc.f1 == 1.0
    assert report.b_cubed.f1 == 1.0
    assert report.ceaf_e.f1 == 1.0
    assert report.blanc.f1 == 1.0
    assert report.types.f1 == 1.0
    assert report.avg_f == 1.0


def test_evaluate_pairs_micro_aggregation():
    # two documents whose MUC counts must be summed before the ratio
    gold1, sys1 = [{"a", "b", "c", "d"}], [{"a", "b"}, {"c", "d"}]
    gold2, sys2 = [{"x", "y"}], [{"x", "y"}]
    pairs = [
        (_chainset((0, (0, 1, 2, 3))), _chainset((0, (0, 1)), (0, (2, 3)))),
        (_chainset((0, (0, 1))), _chainset((0, (0, 1)))),
    ]
    report = evaluate_pairs(pairs)
    # recall = (2 + 1) / (3 + 1), precision = (1 + 1 + 1) / (1 + 1 + 1)
    assert report.muc.r == pytest.approx(3 / 4)
    assert report.muc.p == pytest.approx(1.0)


def test_metrics_invariant_under_reordering():
    gold = [{"a", "b", "c"}, {"d", "e"}]
    sys = [{"a", "b"}, {"c", "d"}, {"e"}]
    reordered_gold = [set(c) for c in reversed(gold)]
    reordered_sys = [set(c) for c in reversed(sys)]
    for metric in (muc, b_cubed, ceaf_e, blanc):
        assert metric(gold, sys) == metric(reordered_gold, reordered_sys)


@st.composite
def partition_pairs(draw):
    n = draw(st.integers(min_value=1, max_value=10))
    universe = list(range(n))
    gold_labels = draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
    sys_labels = draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))

    def build(labels):
        chains = {}
        for item, label in zip(universe, labels):
            chains.setdefault(label, set()).add(item)
        return list(chains.values())

    return build(gold_labels), build(sys_labels)


@settings(max_examples=80, deadline=None)
@given(partition_pairs())
def test_swap_symmetry(pair):
    gold, sys = pair
    for metric in (muc, b_cubed, ceaf_e):
        forward = metric(gold, sys)
        backward = metric(sys, gold)
        assert forward.p == pytest.approx(backward.r, abs=1e-12)
        assert forward.r == pytest.approx(backward.p, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(partition_pairs())
def test_scores_within_unit_interval(pair):
    gold, sys = pair
    for metric in (muc, b_cubed, ceaf_e, blanc):
        got = metric(gold, sys)
        assert 0.0 <= got.p <= 1.0
        assert 0.0 <= got.r <= 1.0
        assert 0.0 <= got.f1 <= 1.0


def test_machine_lines_cover_all_metrics():
    report = evaluate_pairs([(_chainset((0, (1, 2))), _chainset((0, (1, 2))))])
    lines = machine_lines(report)
    keys = {line.split("=")[0] for line in lines}
    assert {"muc_f", "b_cubed_f", "ceaf_e_f", "blanc_f", "type_f1_f",
            "avg_f"} <= keys
