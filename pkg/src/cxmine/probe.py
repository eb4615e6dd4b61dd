"""Verb-substitution probe: does the model know the direct object moves?

For each confirmed instance we ask whether the direct object is moving,
swap the verb for an inflection-matched "throw", and ask again.  The two
answers land in one of three buckets: affirmative both times (YY),
affirmative only after the swap (NY), or non-affirmative even with
"throw" (XN) - the last treated as failure to follow the instruction
rather than a reading of the construction.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_UP
from typing import IO, Iterable, Mapping, Sequence

from .backends import Backend
from .conllu import Sentence, detokenize, replace_token
from .errors import ContractError
from .patterns import phrase_token_indices, render_phrase
from .store import Candidate

YES = "yes"
NO = "no"
UNPARSED = "unparsed"

OUTCOMES = ("YY", "NY", "XN")

# Inflection table for "throw", keyed by the original verb's Penn tag.
_THROW_FORMS = {
    "VB": "throw",
    "VBP": "throw",
    "VBZ": "throws",
    "VBD": "threw",
    "VBG": "throwing",
    "VBN": "thrown",
}


def inflect_throw(verb_xpos: str) -> tuple[str, bool]:
    """Form of "throw" matching a Penn verb tag; (form, fallback_flag)."""
    form = _THROW_FORMS.get(verb_xpos)
    if form is None:
        return "throw", True
    return form, False


@dataclass(frozen=True)
class ProbeInstance:
    candidate_id: str
    sentence: Sentence
    verb_index: int
    verb_lemma: str
    verb_xpos: str
    dobj_index: int

    @classmethod
    def from_candidate(cls, cand: Candidate, sentence: Sentence) -> "ProbeInstance":
        positions = cand.positions
        if "verb" not in positions or "dobj" not in positions:
            raise ContractError(
                f"candidate {cand.candidate_id} lacks verb/dobj positions"
            )
        verb_index = positions["verb"][0]
        return cls(
            candidate_id=cand.candidate_id,
            sentence=sentence,
            verb_index=verb_index,
            verb_lemma=cand.verb,
            verb_xpos=cand.verb_xpos or sentence.token(verb_index).xpos,
            dobj_index=positions["dobj"][0],
        )


def build_questions(instance: ProbeInstance) -> tuple[str, str]:
    """The two probe questions: original sentence, then verb swapped to "throw"."""
    s = instance.sentence
    phrase = render_phrase(s, phrase_token_indices(s, instance.dobj_index))
    throw_form, _ = inflect_throw(instance.verb_xpos)
    swapped = replace_token(s, instance.verb_index, throw_form)
    q1 = f'In the sentence "{detokenize(s)}", is {phrase} moving, yes or no?'
    q2 = f'In the sentence "{detokenize(swapped)}", is {phrase} moving, yes or no?'
    return q1, q2


_ANSWER_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


@dataclass(frozen=True)
class Answer:
    value: str  # yes | no | unparsed
    raw: str


def parse_answer(text: str) -> Answer:
    """First word-boundary occurrence of yes/no decides; neither = unparsed."""
    m = _ANSWER_RE.search(text)
    if not m:
        return Answer(value=UNPARSED, raw=text)
    return Answer(value=m.group(1).lower(), raw=text)


@dataclass(frozen=True)
class Outcome:
    kind: str  # YY | NY | XN
    leg1_unparsed: bool = False
    leg2_unparsed: bool = False


def classify_outcome(a1: Answer, a2: Answer) -> Outcome:
    """Map the two answers onto the YY / NY / XN taxonomy.

    An unparsed first leg followed by "yes" counts as NY (motion only
    recognized with "throw"); an unparsed second leg counts as XN. Both
    extensions carry flags so reports can show how often they fired.
    """
    if a2.value == YES:
        if a1.value == YES:
            return Outcome("YY")
        return Outcome("NY", leg1_unparsed=a1.value == UNPARSED)
    return Outcome(
        "XN",
        leg1_unparsed=a1.value == UNPARSED,
        leg2_unparsed=a2.value == UNPARSED,
    )


@dataclass
class ProbeReport:
    model_id: str
    counts: dict[str, int] = field(default_factory=lambda: {k: 0 for k in OUTCOMES})
    unresolved: int = 0
    unparsed_leg1: int = 0
    unparsed_leg2: int = 0
    fallback_inflections: int = 0
    per_verb: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def resolved(self) -> int:
        return sum(self.counts.values())

    def percentages(self) -> dict[str, Decimal]:
        total = self.resolved
        if total == 0:
            return {k: Decimal("0.00") for k in OUTCOMES}
        return {
            k: (Decimal(v) * 100 / Decimal(total)).quantize(
                Decimal("0.01"), rounding=ROUND_HALF_UP
            )
            for k, v in self.counts.items()
        }

    def top_verbs(self, outcome: str, k: int = 5) -> list[tuple[str, int]]:
        ranked = sorted(
            ((verb, dist.get(outcome, 0)) for verb, dist in self.per_verb.items()),
            key=lambda item: (-item[1], item[0]),
        )
        return [(v, n) for v, n in ranked[:k] if n > 0]

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "counts": dict(self.counts),
            "percentages": {k: str(v) for k, v in self.percentages().items()},
            "resolved": self.resolved,
            "unresolved": self.unresolved,
            "unparsed_leg1": self.unparsed_leg1,
            "unparsed_leg2": self.unparsed_leg2,
            "fallback_inflections": self.fallback_inflections,
            "per_verb": {v: dict(d) for v, d in sorted(self.per_verb.items())},
            "top_verbs": {k: self.top_verbs(k_) for k, k_ in (("YY", 5), ("NY", 5))},
        }


def run_probe(
    backend: Backend,
    instances: Sequence[ProbeInstance],
    transcript_sink: IO[str] | None = None,
) -> ProbeReport:
    """Issue both questions per instance as independent stateless calls.

    Backend failure on either leg marks the instance unresolved and keeps
    it out of the percentages.  Transcripts, when sinked, let a replay
    backend re-score the run byte-identically offline.
    """
    report = ProbeReport(model_id=backend.model_id)
    for inst in instances:
        _, fallback = inflect_throw(inst.verb_xpos)
        if fallback:
            report.fallback_inflections += 1
        q1, q2 = build_questions(inst)
        try:
            reply1 = backend.complete(None, q1)
            reply2 = backend.complete(None, q2)
        except Exception:
            report.unresolved += 1
            continue
        if transcript_sink is not None:
            for leg, q, reply in ((1, q1, reply1), (2, q2, reply2)):
                transcript_sink.write(
                    json.dumps(
                        {
                            "candidate_id": inst.candidate_id,
                            "leg": leg,
                            "system": None,
                            "user": q,
                            "reply": reply.text,
                            "model_id": backend.model_id,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        a1, a2 = parse_answer(reply1.text), parse_answer(reply2.text)
        outcome = classify_outcome(a1, a2)
        report.counts[outcome.kind] += 1
        report.unparsed_leg1 += outcome.leg1_unparsed
        report.unparsed_leg2 += outcome.leg2_unparsed
        verb_dist = report.per_verb.setdefault(
            inst.verb_lemma, {k: 0 for k in OUTCOMES}
        )
        verb_dist[outcome.kind] += 1
    return report


def report_table(reports: Sequence[ProbeReport], family_of: Mapping[str, str] | None = None) -> str:
    """Aligned text table: Family / Model / YY / NY / XN percentages."""
    family_of = family_of or {}
    header = f"{'Family':<12}{'Model':<24}{'YY':>8}{'NY':>8}{'XN':>8}"
    lines = [header, "-" * len(header)]
    for r in reports:
        pct = r.percentages()
        family = family_of.get(r.model_id, "-")
        lines.append(
            f"{family:<12}{r.model_id:<24}"
            f"{str(pct['YY']):>8}{str(pct['NY']):>8}{str(pct['XN']):>8}"
        )
    return "\n".join(lines)


def motion_list_backend(
    motion_forms: Iterable[str] = (
        "throw", "throws", "threw", "throwing", "thrown",
        "fling", "flings", "flung", "flinging",
        "chuck", "chucks", "chucked", "chucking",
        "pull", "pulls", "pulled", "pulling",
        "slam", "slams", "slammed", "slamming",
        "toss", "tosses", "tossed", "tossing",
        "kick", "kicks", "kicked", "kicking",
        "push", "pushes", "pushed", "pushing",
        "hurl", "hurls", "hurled", "hurling",
        "shove", "shoves", "shoved", "shoving",
    ),
):
    """Scripted mock: affirms motion iff the quoted sentence contains a
    form from the motion list; otherwise denies it."""
    from .backends import ScriptedBackend

    forms = {f.lower() for f in motion_forms}

    def reply(system: str | None, user: str) -> str:
        m = re.search(r'"([^"]*)"', user)
        sentence = m.group(1) if m else user
        words = re.findall(r"[\w'-]+", sentence.lower())
        if any(w in forms for w in words):
            return "Yes, it is moving."
        return "No, it is not moving."

    return ScriptedBackend(reply, model_id="mock:motion-list")
