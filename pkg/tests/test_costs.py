from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from cxmine.backends import Usage
from cxmine.costs import (
    CostParams,
    CoverageWarning,
    DevSet,
    PromptMetrics,
    comparison_table,
    cost_curve,
    cost_per_tp,
    curve_csv,
    devset_metrics,
    expected_human_workload,
    human_only_metrics,
    money_str,
    required_corpus_size,
    select_prompt,
)
from cxmine.errors import ContractError, YieldError
from cxmine.gateway import LabeledResult


def metrics(prompt_id, tp, fp, *, positives=133, size=504, tin=0, tout=0):
    return PromptMetrics(
        prompt_id=prompt_id,
        tp=tp,
        fp=fp,
        fn=positives - tp,
        tn=size - tp - fp - (positives - tp),
        input_tokens=tin,
        output_tokens=tout,
        devset_size=size,
        devset_positives=positives,
    )


def params(c_hr="0.2", c_in="0", c_out="0"):
    return CostParams(c_hr=Decimal(c_hr), c_api_in=Decimal(c_in), c_api_out=Decimal(c_out))


# --- devset metrics ---------------------------------------------------------------

def gold_and_predictions(tp, fp, positives=133, size=504):
    labels = {}
    predicted = []
    for i in range(size):
        cid = f"c{i:03d}"
        truth = i < positives
        labels[cid] = truth
        pred = (i < tp) if truth else (positives <= i < positives + fp)
        predicted.append(LabeledResult(candidate_id=cid, label=pred))
    return DevSet(labels=labels), predicted


def test_devset_metrics_prompt12_row():
    gold, predicted = gold_and_predictions(tp=67, fp=13)
    m = devset_metrics(gold, predicted, Usage(), prompt_id=12)
    assert (m.tp, m.fp) == (67, 13)
    assert m.precision == Fraction(67, 80)
    assert abs(float(m.precision) - 0.8375) < 1e-4
    assert abs(float(m.recall) - 0.5037) < 1e-4


def test_devset_metrics_prompt5_row():
    gold, predicted = gold_and_predictions(tp=95, fp=73)
    m = devset_metrics(gold, predicted, Usage(), prompt_id=5)
    assert abs(float(m.precision) - 0.5654) < 1e-4
    assert abs(float(m.recall) - 0.7143) < 1e-4


def test_devset_metrics_perfect():
    gold, predicted = gold_and_predictions(tp=133, fp=0)
    m = devset_metrics(gold, predicted, Usage())
    assert m.precision == 1 and m.recall == 1 and m.f1 == 1


def test_devset_metrics_uncovered_counts_negative():
    gold, predicted = gold_and_predictions(tp=10, fp=0, positives=20, size=30)
    with pytest.warns(CoverageWarning):
        m = devset_metrics(gold, predicted[:15], Usage())
    assert m.tp + m.fp + m.fn + m.tn == 30


def test_devset_metrics_foreign_id_rejected():
    gold, _ = gold_and_predictions(tp=1, fp=0, positives=2, size=3)
    with pytest.raises(ContractError):
        devset_metrics(gold, [LabeledResult(candidate_id="alien", label=True)], Usage())


def test_zero_denominator_precision_flagged():
    m = metrics(1, tp=0, fp=0)
    assert not m.precision_defined
    assert m.precision == 0


# --- cost per tp ----------------------------------------------------------------

def test_cost_per_tp_human_only_term():
    m = metrics(1, tp=10, fp=10)
    assert cost_per_tp(m, params(c_hr="1")) == Fraction(2)


def test_cost_per_tp_hand_arithmetic():
    m = metrics(1, tp=100, fp=20, tin=100000, tout=0)
    c = params(c_hr="0.2", c_in="0.000002", c_out="0.000002")
    assert cost_per_tp(m, c) == Fraction(242, 1000)
    assert money_str(cost_per_tp(m, c), 3) == "0.242"


def test_cost_per_tp_zero_tp():
    m = metrics(1, tp=0, fp=5)
    with pytest.raises(YieldError):
        cost_per_tp(m, params())


def test_money_rejects_float():
    with pytest.raises(ContractError):
        CostParams(c_hr=0.2, c_api_in=Decimal(0), c_api_out=Decimal(0))


# --- selection ------------------------------------------------------------------

def test_select_dominant_prompt():
    worse = metrics(1, tp=50, fp=50, tin=1000)
    better = metrics(2, tp=100, fp=10, tin=500)
    assert select_prompt([worse, better], params(c_in="0.001", c_out="0.001")) == 2


def test_select_scale_invariance():
    ms = [metrics(1, tp=50, fp=50, tin=1000), metrics(2, tp=100, fp=10, tin=99000)]
    c = params(c_hr="0.37", c_in="0.0001", c_out="0.0002")
    assert select_prompt(ms, c) == select_prompt(ms, c.scaled(10))


def test_select_all_zero_tp():
    with pytest.raises(YieldError):
        select_prompt([metrics(1, tp=0, fp=0)], params())


def test_select_tie_breaks_to_lowest_id():
    a = metrics(3, tp=50, fp=50)
    b = metrics(7, tp=50, fp=50)
    assert select_prompt([b, a], params()) == 3


# Table 5 rows for the four finalist prompts, equal-token assumption:
# same per-run token budget everywhere; the pricier GPT-4 calls carried in
# price-normalized token units (10x), best-of-3 triple that.
FINALISTS = [
    metrics(5, tp=95, fp=73, tin=50_000, tout=50_000),
    metrics(12, tp=67, fp=13, tin=50_000, tout=50_000),
    metrics(17, tp=100, fp=11, tin=500_000, tout=500_000),
    metrics(18, tp=101, fp=9, tin=1_500_000, tout=1_500_000),
]
TOKEN_PRICE = Decimal("0.000002")


def finalist_params(c_hr):
    return CostParams(c_hr=Decimal(c_hr), c_api_in=TOKEN_PRICE, c_api_out=TOKEN_PRICE)


def test_prompt12_best_at_20_cents():
    assert select_prompt(FINALISTS, finalist_params("0.2")) == 12


# --- corpus sizing -----------------------------------------------------------------

def test_required_corpus_size_human_only():
    assert required_corpus_size(504, 133, 1000) == 3789


def test_required_corpus_size_prompt17():
    assert required_corpus_size(504, 100, 1000) == 5040


def test_required_corpus_size_perfect_detector():
    assert required_corpus_size(100, 100, 50) == 50


def test_required_corpus_size_zero_tp():
    with pytest.raises(YieldError):
        required_corpus_size(504, 0, 1000)


def test_required_corpus_size_back_check():
    # round(N * tp / size) recovers the requirement within 1.
    for size, tp, req in [(504, 95, 1000), (504, 67, 1000), (504, 101, 1000)]:
        n = required_corpus_size(size, tp, req)
        assert abs(round(n * tp / size) - req) <= 1


def test_expected_human_workload_rows():
    assert expected_human_workload(1000, Decimal("0.9009")) == 1110
    assert expected_human_workload(1000, Decimal("0.8375")) == 1194
    assert expected_human_workload(1000, Decimal("1.0")) == 1000


def test_expected_human_workload_zero_precision():
    with pytest.raises(YieldError):
        expected_human_workload(1000, Decimal("0"))


def test_human_only_baseline():
    m = human_only_metrics(504, 133)
    assert m.precision == Fraction(133, 504)
    # Per-TP cost at c_hr=1 is 504/133, i.e. the naive sift ratio.
    assert cost_per_tp(m, params(c_hr="1")) == Fraction(504, 133)


# --- curves ------------------------------------------------------------------------

def test_single_prompt_envelope():
    cs = cost_curve([metrics(1, tp=50, fp=10)], ("0.1", "1"), ("0", "0"))
    assert cs.crossovers == ()
    assert [seg.prompt_id for seg in cs.envelope] == [1]


def test_hand_crossover():
    # J1 = 0.1 + 2x, J2 = 0.5 + 1.5x -> crossover at x = 0.8
    a = metrics(1, tp=100, fp=100, tin=10_000_000)  # slope 2, intercept 0.1
    b = metrics(2, tp=100, fp=50, tin=50_000_000)   # slope 1.5, intercept 0.5
    cs = cost_curve([a, b], ("0.01", "2"), ("0.000001", "0.000001"))
    assert len(cs.crossovers) == 1
    assert cs.crossovers[0].c_hr == Fraction(4, 5)
    assert cs.envelope_prompt("0.5") == 1
    assert cs.envelope_prompt("1.0") == 2


def test_envelope_switches_12_to_17():
    cs = cost_curve(
        [FINALISTS[1], FINALISTS[2]], ("0.2", "1"), (TOKEN_PRICE, TOKEN_PRICE)
    )
    order = cs.envelope_order()
    assert order == [12, 17]
    (x,) = [c.c_hr for c in cs.crossovers]
    assert Fraction(2, 10) < x < 1


def test_envelope_matches_select(subtests=None):
    import random

    rng = random.Random(11)
    cs = cost_curve(FINALISTS, ("0.001", "2"), (TOKEN_PRICE, TOKEN_PRICE))
    for _ in range(300):
        c_hr = Decimal(rng.randint(1, 2000)) / 1000
        c = finalist_params(c_hr)
        assert select_prompt(FINALISTS, c) == cs.envelope_prompt(c_hr)


def test_degenerate_range_rejected():
    with pytest.raises(ContractError):
        cost_curve(FINALISTS, ("1", "1"), ("0", "0"))


def test_curve_csv_shape():
    cs = cost_curve(FINALISTS, ("0.1", "1"), (TOKEN_PRICE, TOKEN_PRICE))
    csv = curve_csv(cs, points=5)
    lines = csv.strip().splitlines()
    assert lines[0] == "c_hr,prompt_5,prompt_12,prompt_17,prompt_18"
    assert len(lines) == 6


def test_comparison_table_mentions_sizing():
    table = comparison_table(FINALISTS, finalist_params("0.2"), tp_required=1000)
    assert "7522" in table and "1194" in table


# --- properties -------------------------------------------------------------------

money = st.decimals(
    min_value=Decimal("0.000001"), max_value=Decimal("10"), places=6
)


@given(
    tp=st.integers(1, 500),
    fp=st.integers(0, 500),
    tin=st.integers(0, 10**6),
    tout=st.integers(0, 10**6),
    c_hr=money,
    c_in=money,
    c_out=money,
    k=st.decimals(min_value=Decimal("0.01"), max_value=Decimal("100"), places=2),
)
def test_homogeneity_property(tp, fp, tin, tout, c_hr, c_in, c_out, k):
    m = PromptMetrics(
        prompt_id=1, tp=tp, fp=fp, fn=0, tn=0,
        input_tokens=tin, output_tokens=tout,
        devset_size=tp + fp, devset_positives=tp,
    )
    c = CostParams(c_hr=c_hr, c_api_in=c_in, c_api_out=c_out)
    factor = Fraction(k)
    assert cost_per_tp(m, c.scaled(k)) == factor * cost_per_tp(m, c)


@given(
    tp=st.integers(1, 500),
    fp=st.integers(0, 500),
    tin=st.integers(0, 10**6),
    c_hr=money,
)
def test_fp_monotonicity_property(tp, fp, tin, c_hr):
    c = CostParams(c_hr=c_hr, c_api_in=Decimal("0.000002"), c_api_out=Decimal("0.000002"))
    base = PromptMetrics(
        prompt_id=1, tp=tp, fp=fp, fn=0, tn=0, input_tokens=tin,
        devset_size=tp + fp, devset_positives=tp,
    )
    more_fp = PromptMetrics(
        prompt_id=1, tp=tp, fp=fp + 1, fn=0, tn=0, input_tokens=tin,
        devset_size=tp + fp + 1, devset_positives=tp,
    )
    assert cost_per_tp(more_fp, c) > cost_per_tp(base, c)


@given(
    tp=st.integers(1, 499),
    fp=st.integers(1, 500),
    tin=st.integers(1, 10**6),
    c_hr=money,
)
def test_tp_monotonicity_property(tp, fp, tin, c_hr):
    c = CostParams(c_hr=c_hr, c_api_in=Decimal("0.000002"), c_api_out=Decimal("0.000002"))
    base = PromptMetrics(
        prompt_id=1, tp=tp, fp=fp, fn=1, tn=0, input_tokens=tin,
        devset_size=tp + fp + 1, devset_positives=tp + 1,
    )
    more_tp = PromptMetrics(
        prompt_id=1, tp=tp + 1, fp=fp, fn=0, tn=0, input_tokens=tin,
        devset_size=tp + fp + 1, devset_positives=tp + 1,
    )
    assert cost_per_tp(more_tp, c) < cost_per_tp(base, c)
