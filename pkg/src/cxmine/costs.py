"""Cost-per-true-positive accounting, prompt selection, and corpus sizing.

The central quantity is the cost of obtaining one confirmed positive
through the pipeline::

    J(c_hr, c_api, prompt) = (api_cost + c_hr * (TP + FP)) / TP

where api_cost = c_api_in * input_tokens + c_api_out * output_tokens and
TP/FP come from running the prompt over an annotated development set.
Setting both token prices equal recovers a single per-token API price.

Money enters as exact decimals and all derived quantities are exact
rationals (fractions of decimals), so comparisons, argmins, and curve
crossovers are reproducible bit for bit; floats never appear.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .backends import Usage
from .errors import ContractError, YieldError
from .gateway import LabeledResult

MoneyLike = Decimal | Fraction | int | str


def as_money(value: MoneyLike) -> Fraction:
    """Exact rational from a decimal-denoting value; floats are rejected."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise ContractError(
            f"money must be Decimal/str/int, not binary float ({value!r})"
        )
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(Decimal(value))


def money_str(value: Fraction, places: int = 6) -> str:
    """Fixed-point decimal rendering (round half up) for display and CSV."""
    q = 10**places
    scaled = value * q
    units = (2 * scaled.numerator + scaled.denominator) // (2 * scaled.denominator)
    sign = "-" if units < 0 else ""
    units = abs(units)
    whole, frac = divmod(units, q)
    return f"{sign}{whole}.{frac:0{places}d}"


def round_half_up(value: Fraction) -> int:
    if value < 0:
        raise ContractError("sizing quantities are non-negative")
    return (2 * value.numerator + value.denominator) // (2 * value.denominator)


@dataclass(frozen=True)
class CostParams:
    """Per-sentence human cost and per-token API prices."""

    c_hr: Fraction
    c_api_in: Fraction
    c_api_out: Fraction

    def __post_init__(self):
        for name in ("c_hr", "c_api_in", "c_api_out"):
            raw = getattr(self, name)
            value = as_money(raw)
            if value < 0:
                raise ContractError(f"{name} must be non-negative")
            object.__setattr__(self, name, value)

    def scaled(self, k: MoneyLike) -> "CostParams":
        factor = as_money(k)
        return CostParams(
            c_hr=self.c_hr * factor,
            c_api_in=self.c_api_in * factor,
            c_api_out=self.c_api_out * factor,
        )


@dataclass(frozen=True)
class PromptMetrics:
    """Confusion counts and token usage of one prompt over the dev set."""

    prompt_id: int
    tp: int
    fp: int
    fn: int
    tn: int
    input_tokens: int = 0
    output_tokens: int = 0
    devset_size: int = 0
    devset_positives: int = 0

    def __post_init__(self):
        counts = (self.tp, self.fp, self.fn, self.tn)
        if any(c < 0 for c in counts):
            raise ContractError("confusion counts must be non-negative")
        if self.tp + self.fp + self.fn + self.tn != self.devset_size:
            raise ContractError(
                f"tp+fp+fn+tn = {sum(counts)} != devset_size {self.devset_size}"
            )
        if self.tp + self.fn != self.devset_positives:
            raise ContractError(
                f"tp+fn = {self.tp + self.fn} != devset_positives {self.devset_positives}"
            )

    @property
    def precision_defined(self) -> bool:
        return self.tp + self.fp > 0

    @property
    def precision(self) -> Fraction:
        if not self.precision_defined:
            return Fraction(0)
        return Fraction(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> Fraction:
        if self.devset_positives == 0:
            return Fraction(0)
        return Fraction(self.tp, self.devset_positives)

    @property
    def f1(self) -> Fraction:
        p, r = self.precision, self.recall
        if p + r == 0:
            return Fraction(0)
        return 2 * p * r / (p + r)

    def to_dict(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "devset_size": self.devset_size,
            "devset_positives": self.devset_positives,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PromptMetrics":
        return cls(**{k: int(d[k]) for k in (
            "prompt_id", "tp", "fp", "fn", "tn",
            "input_tokens", "output_tokens", "devset_size", "devset_positives",
        )})


@dataclass(frozen=True)
class DevSet:
    """Gold labels keyed by candidate id."""

    labels: dict[str, bool]

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def positives(self) -> int:
        return sum(1 for v in self.labels.values() if v)

    @property
    def negatives(self) -> int:
        return self.size - self.positives

    @classmethod
    def from_jsonl(cls, lines: Iterable[str]) -> "DevSet":
        labels = {}
        for line in lines:
            if not line.strip():
                continue
            d = json.loads(line)
            labels[str(d["candidate_id"])] = bool(d["label"])
        return cls(labels=labels)


class CoverageWarning(UserWarning):
    """Some gold ids had no prediction and were counted as negatives."""


def devset_metrics(
    gold: DevSet,
    predicted: Sequence[LabeledResult],
    usage: Usage,
    prompt_id: int = 0,
) -> PromptMetrics:
    """Confusion counts of predictions against the gold dev set.

    Gold ids with no prediction count as predicted-negative, with a
    warning; a prediction outside the gold set is a contract error.
    """
    pred_labels: dict[str, bool] = {}
    for r in predicted:
        if r.candidate_id not in gold.labels:
            raise ContractError(
                f"prediction for id {r.candidate_id!r} outside the gold set"
            )
        pred_labels[r.candidate_id] = r.label
    uncovered = sorted(set(gold.labels) - set(pred_labels))
    if uncovered:
        warnings.warn(
            f"{len(uncovered)} gold id(s) unpredicted; counted as negative",
            CoverageWarning,
            stacklevel=2,
        )
    tp = fp = fn = tn = 0
    for cid, truth in gold.labels.items():
        pred = pred_labels.get(cid, False)
        if pred and truth:
            tp += 1
        elif pred and not truth:
            fp += 1
        elif not pred and truth:
            fn += 1
        else:
            tn += 1
    return PromptMetrics(
        prompt_id=prompt_id,
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        input_tokens=usage.input_tokens,
        output_tokens=usage.output_tokens,
        devset_size=gold.size,
        devset_positives=gold.positives,
    )


def api_cost(m: PromptMetrics, c: CostParams) -> Fraction:
    return c.c_api_in * m.input_tokens + c.c_api_out * m.output_tokens


def cost_per_tp(m: PromptMetrics, c: CostParams) -> Fraction:
    """Money spent per confirmed positive: (api + c_hr*(tp+fp)) / tp."""
    if m.tp == 0:
        raise YieldError(f"prompt {m.prompt_id} finds nothing; cost per TP undefined")
    return (api_cost(m, c) + c.c_hr * (m.tp + m.fp)) / m.tp


def select_prompt(ms: Sequence[PromptMetrics], c: CostParams) -> int:
    """Prompt id with the lowest per-TP cost; ties go to the lowest id."""
    if not ms:
        raise ContractError("no prompt metrics supplied")
    best_id = None
    best_cost = None
    for m in sorted(ms, key=lambda m: m.prompt_id):
        if m.tp == 0:
            continue
        j = cost_per_tp(m, c)
        if best_cost is None or j < best_cost:
            best_id, best_cost = m.prompt_id, j
    if best_id is None:
        raise YieldError("every prompt has tp=0; nothing to select")
    return best_id


def required_corpus_size(devset_size: int, tp_on_devset: int, tp_required: int) -> int:
    """Input corpus size expected to yield tp_required confirmed positives."""
    if tp_on_devset <= 0:
        raise YieldError("prompt finds nothing on the dev set; cannot size a corpus")
    return round_half_up(Fraction(devset_size * tp_required, tp_on_devset))


def expected_human_workload(tp_required: int, precision: MoneyLike) -> int:
    """Model-positive sentences a human must review to net tp_required."""
    p = as_money(precision)
    if p <= 0:
        raise YieldError("precision is zero; human workload unbounded")
    return round_half_up(Fraction(tp_required) / p)


def human_only_metrics(devset_size: int, devset_positives: int) -> PromptMetrics:
    """Degenerate baseline: mark everything positive, burn zero tokens."""
    return PromptMetrics(
        prompt_id=0,
        tp=devset_positives,
        fp=devset_size - devset_positives,
        fn=0,
        tn=0,
        devset_size=devset_size,
        devset_positives=devset_positives,
    )


@dataclass(frozen=True)
class Curve:
    """Per-TP cost as an affine function of c_hr."""

    prompt_id: int
    intercept: Fraction  # api_cost / tp
    slope: Fraction      # (tp + fp) / tp

    def at(self, c_hr: MoneyLike) -> Fraction:
        return self.intercept + self.slope * as_money(c_hr)


@dataclass(frozen=True)
class Crossover:
    prompt_a: int
    prompt_b: int
    c_hr: Fraction


@dataclass(frozen=True)
class Segment:
    start: Fraction
    end: Fraction
    prompt_id: int


@dataclass(frozen=True)
class CurveSet:
    curves: tuple[Curve, ...]
    crossovers: tuple[Crossover, ...]
    envelope: tuple[Segment, ...]
    skipped_prompts: tuple[int, ...] = ()

    def envelope_prompt(self, c_hr: MoneyLike) -> int:
        x = as_money(c_hr)
        for seg in self.envelope:
            if seg.start <= x <= seg.end:
                return seg.prompt_id
        raise ContractError(f"c_hr {x} outside the curve range")

    def envelope_order(self) -> list[int]:
        return [seg.prompt_id for seg in self.envelope]


def cost_curve(
    ms: Sequence[PromptMetrics],
    c_hr_range: tuple[MoneyLike, MoneyLike],
    c_api: tuple[MoneyLike, MoneyLike],
) -> CurveSet:
    """Affine per-TP cost curves over a c_hr interval.

    Returns each prompt's curve, every pairwise crossover inside the
    range (exact rational intersections), and the lower envelope as the
    optimal-prompt schedule.  Prompts with tp=0 are skipped.
    """
    lo, hi = as_money(c_hr_range[0]), as_money(c_hr_range[1])
    if not lo < hi:
        raise ContractError("c_hr range must be non-degenerate (lo < hi)")
    c_in, c_out = as_money(c_api[0]), as_money(c_api[1])
    curves: list[Curve] = []
    skipped: list[int] = []
    for m in sorted(ms, key=lambda m: m.prompt_id):
        if m.tp == 0:
            skipped.append(m.prompt_id)
            continue
        intercept = (c_in * m.input_tokens + c_out * m.output_tokens) / m.tp
        curves.append(
            Curve(prompt_id=m.prompt_id, intercept=intercept, slope=Fraction(m.tp + m.fp, m.tp))
        )
    if not curves:
        raise YieldError("every prompt has tp=0; no curves to draw")

    crossovers: list[Crossover] = []
    for i, a in enumerate(curves):
        for b in curves[i + 1 :]:
            if a.slope == b.slope:
                continue
            x = (b.intercept - a.intercept) / (a.slope - b.slope)
            if lo <= x <= hi:
                crossovers.append(Crossover(prompt_a=a.prompt_id, prompt_b=b.prompt_id, c_hr=x))
    crossovers.sort(key=lambda c: (c.c_hr, c.prompt_a, c.prompt_b))

    breakpoints = sorted({lo, hi, *(c.c_hr for c in crossovers)})
    segments: list[Segment] = []
    for start, end in zip(breakpoints, breakpoints[1:]):
        mid = (start + end) / 2
        winner = min(curves, key=lambda cv: (cv.at(mid), cv.prompt_id))
        if segments and segments[-1].prompt_id == winner.prompt_id:
            segments[-1] = Segment(segments[-1].start, end, winner.prompt_id)
        else:
            segments.append(Segment(start, end, winner.prompt_id))
    return CurveSet(
        curves=tuple(curves),
        crossovers=tuple(crossovers),
        envelope=tuple(segments),
        skipped_prompts=tuple(skipped),
    )


def curve_csv(curve_set: CurveSet, points: int = 101, places: int = 6) -> str:
    """Sampled curves as CSV: c_hr plus one column per prompt."""
    if points < 2:
        raise ContractError("need at least two sample points")
    lo = curve_set.envelope[0].start
    hi = curve_set.envelope[-1].end
    header = ["c_hr"] + [f"prompt_{cv.prompt_id}" for cv in curve_set.curves]
    rows = [",".join(header)]
    step = (hi - lo) / (points - 1)
    for i in range(points):
        x = lo + step * i
        cells = [money_str(x, places)] + [
            money_str(cv.at(x), places) for cv in curve_set.curves
        ]
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


def comparison_table(
    ms: Sequence[PromptMetrics],
    c: CostParams,
    tp_required: int = 1000,
    extra_c_hr: Sequence[MoneyLike] = (),
) -> str:
    """Aligned-text comparison: sizing columns plus per-TP cost at chosen rates."""
    rates = [c.c_hr] + [as_money(x) for x in extra_c_hr]
    header = ["prompt", "prec", "rec", "llm_sents", "human_sents"] + [
        f"J@{money_str(r, 3)}" for r in rates
    ]
    lines = ["  ".join(f"{h:>12}" for h in header)]
    for m in sorted(ms, key=lambda m: m.prompt_id):
        if m.tp == 0:
            row = [str(m.prompt_id), "-", "-", "-", "-"] + ["-"] * len(rates)
        else:
            llm = required_corpus_size(m.devset_size, m.tp, tp_required)
            human = expected_human_workload(tp_required, m.precision)
            row = [
                str(m.prompt_id),
                money_str(m.precision, 4),
                money_str(m.recall, 4),
                str(llm),
                str(human),
            ]
            for r in rates:
                params = CostParams(c_hr=r, c_api_in=c.c_api_in, c_api_out=c.c_api_out)
                row.append(money_str(cost_per_tp(m, params), 4))
        lines.append("  ".join(f"{cell:>12}" for cell in row))
    return "\n".join(lines)
