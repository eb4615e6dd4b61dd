"""Prompt rendering, reply parsing, batched classification, and voting.

The 18 preset prompt variants and the 10 bundled few-shot examples live
in data files, not code.  Rendering is deterministic: equal inputs give
byte-identical payloads, which the replay backend relies on.
"""

from __future__ import annotations

import json
import logging
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .backends import Backend, BackendReply, Usage, estimate_tokens
from .errors import BackendError, ContractError, ReplyParseError

log = logging.getLogger(__name__)

INPUT_FORMATS = (
    "csv",
    "jsonl",
    "jsonl+explanations",
    "tuple-only",
    "substring",
    "sentence+tuple",
    "sentence+substring",
)

# Object keys per input format, in render order; "label" is appended to shots.
_FORMAT_FIELDS: dict[str, tuple[str, ...]] = {
    "jsonl": ("id", "sentence"),
    "jsonl+explanations": ("id", "sentence", "explanation"),
    "tuple-only": ("id", "verb", "direct object", "preposition", "prepositional object"),
    "substring": ("id", "string"),
    "sentence+tuple": (
        "id",
        "sentence",
        "verb",
        "direct object",
        "preposition",
        "prepositional object",
    ),
    "sentence+substring": ("id", "sentence", "string"),
}


class GatewayWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PromptSpec:
    id: int
    instruction: str
    input_format: str
    system_prompt: str | None = None
    shots_per_class: int = 5
    batch_size: int = 10
    model_id: str = "gpt-3.5-turbo-1106"
    vote_k: int = 1
    alternate_shots: bool = True
    note: str | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ContractError("batch_size must be >= 1")
        if self.shots_per_class < 0:
            raise ContractError("shots_per_class must be >= 0")
        if self.vote_k % 2 != 1:
            raise ContractError("vote_k must be odd")
        if self.input_format not in INPUT_FORMATS:
            raise ContractError(f"unknown input_format {self.input_format!r}")

    @property
    def wants_explanations(self) -> bool:
        return self.input_format == "jsonl+explanations"


@dataclass(frozen=True)
class FewShot:
    sentence: str
    verb: str
    dobj: str
    prep: str
    pobj: str
    label: bool
    explanation: str = ""


@dataclass(frozen=True)
class LabeledResult:
    candidate_id: str
    label: bool
    explanation: str | None = None
    raw: str = ""


@dataclass(frozen=True)
class Payload:
    system: str | None
    user: str


def load_prompt_presets() -> dict[int, PromptSpec]:
    text = resources.files("cxmine.data").joinpath("prompts.json").read_text("utf-8")
    specs = {}
    for d in json.loads(text):
        spec = PromptSpec(
            id=d["id"],
            instruction=d["instruction"],
            input_format=d["input_format"],
            system_prompt=d.get("system_prompt"),
            shots_per_class=d["shots_per_class"],
            batch_size=d["batch_size"],
            model_id=d["model_id"],
            vote_k=d["vote_k"],
            alternate_shots=d["alternate_shots"],
            note=d.get("note"),
        )
        specs[spec.id] = spec
    return specs


def load_fewshots() -> list[FewShot]:
    text = resources.files("cxmine.data").joinpath("fewshots.json").read_text("utf-8")
    return [
        FewShot(
            sentence=d["sentence"],
            verb=d["verb"],
            dobj=d["dobj"],
            prep=d["prep"],
            pobj=d["pobj"],
            label=bool(d["label"]),
            explanation=d.get("explanation", ""),
        )
        for d in json.loads(text)
    ]


def _item_fields(item: Mapping[str, object]) -> dict[str, object]:
    sentence = item.get("text") or item.get("sentence") or ""
    tuple_fields = {
        "verb": item.get("verb", ""),
        "direct object": item.get("dobj", ""),
        "preposition": item.get("prep", ""),
        "prepositional object": item.get("pobj", ""),
    }
    string = item.get("span") or " ".join(
        str(tuple_fields[k])
        for k in ("verb", "direct object", "preposition", "prepositional object")
    )
    values: dict[str, object] = {"id": item["id"], "sentence": sentence, "string": string}
    values.update(tuple_fields)
    return values


def _render_line(fmt: str, values: Mapping[str, object], label: bool | None,
                 explanation: str | None = None) -> str:
    if fmt == "csv":
        cells = [str(values["id"]), str(values["sentence"])]
        if label is not None:
            cells.append("True" if label else "False")
        return ", ".join(cells)
    fields = _FORMAT_FIELDS[fmt]
    obj: dict[str, object] = {}
    for key in fields:
        if key == "explanation":
            obj[key] = explanation if explanation is not None else values.get(key, "")
        else:
            obj[key] = values[key]
    if label is not None:
        obj["label"] = label
    elif fmt == "jsonl+explanations":
        obj.pop("explanation", None)  # the model supplies it
    return json.dumps(obj, ensure_ascii=False)


def _shot_values(shot: FewShot) -> dict[str, object]:
    string = " ".join([shot.verb, shot.dobj, shot.prep, shot.pobj])
    return {
        "sentence": shot.sentence,
        "verb": shot.verb,
        "direct object": shot.dobj,
        "preposition": shot.prep,
        "prepositional object": shot.pobj,
        "string": string,
    }


def _output_format(spec: PromptSpec, count: int) -> str:
    if spec.input_format == "csv":
        return (
            "Reply with a csv codeblock (wrapped in three backticks), with the "
            "headers 'id' and 'label'. label should be either True or False. "
            f"Label all {count} sentences."
        )
    fields = _FORMAT_FIELDS[spec.input_format]
    quoted = ", ".join(f'"{f}"' for f in fields)
    return (
        "Respond with a jsonl codeblock (wrapped in three backticks). Each object "
        f'should include {quoted}, and finally a "label" field with either "true" '
        f'or "false". Label all {count} sentences.'
    )


def render_prompt(
    spec: PromptSpec,
    shots: Sequence[FewShot],
    batch: Sequence[Mapping[str, object]],
) -> Payload:
    """Build the (system, user) payload for one batch.

    Batch items are candidate records carrying at least ``id`` plus the
    fields the spec's input format needs (text/verb/dobj/prep/pobj/span).
    """
    if not batch:
        raise ContractError("empty batch")
    if len(batch) > spec.batch_size:
        raise ContractError(
            f"batch of {len(batch)} exceeds the spec's batch_size {spec.batch_size}"
        )
    if spec.wants_explanations:
        missing = [s.sentence for s in shots if not s.explanation]
        if missing:
            raise ContractError(
                f"prompt {spec.id} requires shot explanations; missing for {len(missing)} shot(s)"
            )
    positives = [s for s in shots if s.label]
    negatives = [s for s in shots if not s.label]
    if len(positives) != spec.shots_per_class or len(negatives) != spec.shots_per_class:
        raise ContractError(
            f"prompt {spec.id} needs {spec.shots_per_class} shots per class, "
            f"got {len(positives)} positive / {len(negatives)} negative"
        )
    lines: list[str] = [spec.instruction, ""]

    def shot_lines(ordered: list[FewShot], start: int = 1) -> list[str]:
        return [
            _render_line(
                spec.input_format,
                _shot_values(s) | {"id": f"shot-{n:02d}"},
                s.label,
                explanation=s.explanation,
            )
            for n, s in enumerate(ordered, start=start)
        ]

    if spec.alternate_shots:
        interleaved = [s for pair in zip(positives, negatives) for s in pair]
        if interleaved:
            noun = (
                "examples with explanations and ground truth labels"
                if spec.wants_explanations
                else "examples with ground truth labels"
            )
            lines.append(f"Here are {len(interleaved)} {noun}:")
            lines.extend(shot_lines(interleaved))
            lines.append("")
    else:
        if positives:
            lines.append(f"Here are {len(positives)} positive examples:")
            lines.extend(shot_lines(positives))
            lines.append("")
        if negatives:
            lines.append(f"Here are {len(negatives)} negative examples:")
            lines.extend(shot_lines(negatives, start=len(positives) + 1))
            lines.append("")

    lines.append("Classify the following sentences:")
    for item in batch:
        lines.append(_render_line(spec.input_format, _item_fields(item), None))
    lines.append("")
    lines.append(_output_format(spec, len(batch)))
    return Payload(system=spec.system_prompt, user="\n".join(lines))


@dataclass
class ParsedReply:
    results: list[LabeledResult]
    missing_ids: set[str]
    foreign_ids: set[str] = field(default_factory=set)
    bad_lines: list[str] = field(default_factory=list)


_FENCE_RE = re.compile(r"```[^\n`]*\n?(.*?)```", re.DOTALL)
_TRUTHY = {"true": True, "false": False}


def parse_response(text: str, expected_ids: Iterable[str], fmt: str = "jsonl") -> ParsedReply:
    """Parse a backend reply into labeled results.

    Takes the first triple-backtick block (or the whole text when there is
    none), one object per line; tolerates surrounding prose, out-of-order
    ids, and stray lines.  Foreign ids are dropped with a warning; if no
    line parses at all, raises ReplyParseError so the caller can retry.
    """
    expected = set(expected_ids)
    match = _FENCE_RE.search(text)
    body = match.group(1) if match else text
    results: list[LabeledResult] = []
    seen: set[str] = set()
    foreign: set[str] = set()
    bad: list[str] = []
    for raw_line in body.splitlines():
        line = raw_line.strip().removesuffix(",")
        if not line:
            continue
        parsed = _parse_line(line, fmt)
        if parsed is None:
            bad.append(raw_line)
            continue
        cid, label, explanation = parsed
        if cid not in expected:
            if (cid, label) != ("id", None) and cid != "id":  # csv header
                foreign.add(cid)
            continue
        if cid in seen:
            bad.append(raw_line)
            continue
        seen.add(cid)
        results.append(
            LabeledResult(candidate_id=cid, label=label, explanation=explanation, raw=line)
        )
    if not results and expected:
        if not bad and not foreign:
            bad.append(body.strip() or text.strip())
        raise ReplyParseError(
            f"no parseable result lines in reply ({len(bad)} bad line(s))"
        )
    if foreign:
        warnings.warn(
            f"reply contained ids outside the issued batch: {sorted(foreign)}",
            GatewayWarning,
            stacklevel=2,
        )
    return ParsedReply(
        results=results,
        missing_ids=expected - seen,
        foreign_ids=foreign,
        bad_lines=bad,
    )


def _parse_line(line: str, fmt: str) -> tuple[str, bool, str | None] | None:
    if fmt == "csv":
        cells = [c.strip() for c in line.split(",")]
        if len(cells) < 2:
            return None
        label = _TRUTHY.get(cells[-1].lower())
        if label is None:
            return None
        return cells[0], label, None
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict) or "id" not in obj or "label" not in obj:
        return None
    raw_label = obj["label"]
    if isinstance(raw_label, bool):
        label = raw_label
    elif isinstance(raw_label, str) and raw_label.lower() in _TRUTHY:
        label = _TRUTHY[raw_label.lower()]
    else:
        return None
    explanation = obj.get("explanation")
    if explanation is not None:
        explanation = str(explanation)
    return str(obj["id"]), label, explanation


@dataclass
class ClassifyResult:
    results: list[LabeledResult]
    usage: Usage
    unresolved: dict[str, str] = field(default_factory=dict)


def _call_usage(payload: Payload, reply: BackendReply) -> Usage:
    if reply.usage is not None:
        u = reply.usage
        return Usage(u.input_tokens, u.output_tokens, calls=1, estimated=u.estimated)
    prompt_text = (payload.system or "") + "\n" + payload.user
    return Usage(
        input_tokens=estimate_tokens(prompt_text),
        output_tokens=estimate_tokens(reply.text),
        calls=1,
        estimated=True,
    )


def classify(
    backend: Backend,
    spec: PromptSpec,
    shots: Sequence[FewShot],
    candidates: Sequence[Mapping[str, object]],
    max_missing_retries: int = 2,
    max_workers: int = 1,
) -> ClassifyResult:
    """Classify candidates in batches, retrying missing ids, voting if asked.

    Never silently drops a candidate: anything unresolved after bounded
    retries is reported in ``unresolved``.  Usage accumulates across all
    calls, including retries and extra vote rounds.
    """
    if spec.vote_k > 1:
        rounds = []
        usage = Usage()
        unresolved: dict[str, str] = {}
        for _ in range(spec.vote_k):
            out = _classify_once(backend, spec, shots, candidates, max_missing_retries, max_workers)
            rounds.append(out.results)
            usage = usage + out.usage
            unresolved.update(out.unresolved)
        if unresolved:
            voteable = [
                [r for r in rnd if r.candidate_id not in unresolved] for rnd in rounds
            ]
        else:
            voteable = rounds
        results = majority_vote(voteable)
        return ClassifyResult(results=results, usage=usage, unresolved=unresolved)
    return _classify_once(backend, spec, shots, candidates, max_missing_retries, max_workers)


def _classify_once(
    backend: Backend,
    spec: PromptSpec,
    shots: Sequence[FewShot],
    candidates: Sequence[Mapping[str, object]],
    max_missing_retries: int,
    max_workers: int,
) -> ClassifyResult:
    batches = [
        list(candidates[i : i + spec.batch_size])
        for i in range(0, len(candidates), spec.batch_size)
    ]
    by_id: dict[str, LabeledResult] = {}
    usage = Usage()
    unresolved: dict[str, str] = {}

    def run_batch(batch: list[Mapping[str, object]]) -> tuple[dict[str, LabeledResult], Usage, dict[str, str]]:
        got: dict[str, LabeledResult] = {}
        local_usage = Usage()
        local_unresolved: dict[str, str] = {}
        pending = batch
        for attempt in range(max_missing_retries + 1):
            payload = render_prompt(spec, shots, pending)
            try:
                reply = backend.complete(payload.system, payload.user)
            except BackendError as exc:
                for item in pending:
                    local_unresolved[str(item["id"])] = f"backend failure: {exc}"
                return got, local_usage, local_unresolved
            local_usage = local_usage + _call_usage(payload, reply)
            fmt = "csv" if spec.input_format == "csv" else "jsonl"
            try:
                parsed = parse_response(
                    reply.text, [str(i["id"]) for i in pending], fmt=fmt
                )
            except ReplyParseError as exc:
                if attempt < max_missing_retries:
                    continue
                for item in pending:
                    local_unresolved[str(item["id"])] = f"unparseable reply: {exc}"
                return got, local_usage, local_unresolved
            for r in parsed.results:
                got[r.candidate_id] = r
            if not parsed.missing_ids:
                return got, local_usage, local_unresolved
            pending = [i for i in pending if str(i["id"]) in parsed.missing_ids]
        for item in pending:
            local_unresolved[str(item["id"])] = "missing from replies after retries"
        return got, local_usage, local_unresolved

    if max_workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(run_batch, batches))
    else:
        outcomes = [run_batch(b) for b in batches]
    for got, u, bad in outcomes:
        by_id.update(got)
        usage = usage + u
        unresolved.update(bad)
    ordered = [
        by_id[str(c["id"])] for c in candidates if str(c["id"]) in by_id
    ]
    return ClassifyResult(results=ordered, usage=usage, unresolved=unresolved)


def majority_vote(rounds: Sequence[Sequence[LabeledResult]]) -> list[LabeledResult]:
    """Per-candidate majority over k rounds covering one candidate set."""
    if len(rounds) % 2 != 1:
        raise ContractError("number of vote rounds must be odd")
    if len(rounds) == 1:
        return list(rounds[0])
    id_sets = [frozenset(r.candidate_id for r in rnd) for rnd in rounds]
    if any(s != id_sets[0] for s in id_sets[1:]):
        raise ContractError("vote rounds cover different candidate sets")
    by_round = [{r.candidate_id: r for r in rnd} for rnd in rounds]
    merged: list[LabeledResult] = []
    for r0 in rounds[0]:
        cid = r0.candidate_id
        votes = [m[cid].label for m in by_round]
        label = votes.count(True) > votes.count(False)
        winner = next(m[cid] for m in by_round if m[cid].label == label)
        merged.append(
            LabeledResult(
                candidate_id=cid,
                label=label,
                explanation=winner.explanation,
                raw=winner.raw,
            )
        )
    return merged
