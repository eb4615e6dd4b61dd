"""Event-sourced annotation store, diversity sampler, and 4-tuple extrapolation.

State is an append-only JSON-lines event log over an immutable candidate
set; replaying the log reconstructs the store exactly.  The sampler walks
verbs in frequency order, capping labels per (verb, class) and refusing
to offer a candidate whose preposition is exhausted in both classes, so
human effort spreads across diverse contexts.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .errors import ContractError, NotFoundError

log = logging.getLogger(__name__)

SOURCES = ("human", "llm", "extrapolated")
DEFAULT_PER_CLASS_CAP = 5


@dataclass(frozen=True)
class Candidate:
    """A matched instance as stored; mirrors the candidate JSONL schema."""

    candidate_id: str
    sentence_id: str
    text: str
    verb: str
    dobj: str
    prep: str
    pobj: str
    positions: dict[str, list[int]] = field(default_factory=dict)
    span: str = ""
    verb_xpos: str = ""
    char_spans: dict[str, list[int]] = field(default_factory=dict)

    @property
    def quad(self) -> tuple[str, str, str, str]:
        return (
            self.verb.lower(),
            self.dobj.lower(),
            self.prep.lower(),
            self.pobj.lower(),
        )

    @classmethod
    def from_dict(cls, d: Mapping) -> "Candidate":
        return cls(
            candidate_id=str(d["candidate_id"]),
            sentence_id=str(d["sentence_id"]),
            text=d.get("text", ""),
            verb=str(d["verb"]),
            dobj=str(d["dobj"]),
            prep=str(d["prep"]),
            pobj=str(d["pobj"]),
            positions={k: list(v) for k, v in d.get("positions", {}).items()},
            span=d.get("span", ""),
            verb_xpos=d.get("verb_xpos", ""),
            char_spans={k: list(v) for k, v in d.get("char_spans", {}).items()},
        )

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "sentence_id": self.sentence_id,
            "text": self.text,
            "verb": self.verb,
            "dobj": self.dobj,
            "prep": self.prep,
            "pobj": self.pobj,
            "positions": self.positions,
            "span": self.span,
            "verb_xpos": self.verb_xpos,
            "char_spans": self.char_spans,
        }


@dataclass(frozen=True)
class AnnotationRecord:
    candidate_id: str
    label: bool
    annotator: str
    timestamp: str
    source: str
    seq: int

    def to_dict(self) -> dict:
        return {
            "type": "label",
            "seq": self.seq,
            "candidate_id": self.candidate_id,
            "label": self.label,
            "annotator": self.annotator,
            "timestamp": self.timestamp,
            "source": self.source,
        }


@dataclass
class VerbState:
    """Sampler bookkeeping for one verb group.

    The selection maps preposition -> candidate per class, so the cap and
    the one-preposition-per-class rule hold by construction, and a
    superseding label withdraws its candidate's old selection first.
    """

    closed: bool = False
    selected_positive: dict[str, str] = field(default_factory=dict)
    selected_negative: dict[str, str] = field(default_factory=dict)

    @property
    def positive(self) -> int:
        return len(self.selected_positive)

    @property
    def negative(self) -> int:
        return len(self.selected_negative)

    @property
    def preps_positive(self) -> set[str]:
        return set(self.selected_positive)

    @property
    def preps_negative(self) -> set[str]:
        return set(self.selected_negative)


@dataclass(frozen=True)
class QuadConflict:
    quad: tuple[str, str, str, str]
    positive_ids: tuple[str, ...]
    negative_ids: tuple[str, ...]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class AnnotationStore:
    """Candidates plus an append-only label event log.

    A single logical writer mutates the store; readers see consistent
    in-memory indexes rebuilt deterministically from the log.
    """

    def __init__(
        self,
        candidates: Iterable[Candidate | Mapping],
        event_log: Path | str | None = None,
        per_class_cap: int = DEFAULT_PER_CLASS_CAP,
    ):
        self.per_class_cap = per_class_cap
        self.candidates: dict[str, Candidate] = {}
        for c in candidates:
            cand = c if isinstance(c, Candidate) else Candidate.from_dict(c)
            self.candidates[cand.candidate_id] = cand
        self.events: list[AnnotationRecord] = []
        self.history: dict[str, list[AnnotationRecord]] = {}
        self.verb_states: dict[str, VerbState] = {}
        self._verb_order = self._compute_verb_order()
        self._log_path = Path(event_log) if event_log else None
        if self._log_path and self._log_path.exists():
            with open(self._log_path, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        self._apply(json.loads(line))

    # --- event plumbing ---------------------------------------------------

    def _compute_verb_order(self) -> list[str]:
        freq: dict[str, int] = {}
        for c in self.candidates.values():
            freq[c.verb] = freq.get(c.verb, 0) + 1
        return sorted(freq, key=lambda v: (-freq[v], v))

    def _apply(self, event: Mapping) -> AnnotationRecord:
        if event.get("type") != "label":
            raise ContractError(f"unknown event type {event.get('type')!r}")
        record = AnnotationRecord(
            candidate_id=str(event["candidate_id"]),
            label=bool(event["label"]),
            annotator=str(event.get("annotator", "")),
            timestamp=str(event.get("timestamp", "")),
            source=str(event.get("source", "human")),
            seq=int(event["seq"]),
        )
        if record.source not in SOURCES:
            raise ContractError(f"unknown label source {record.source!r}")
        if record.candidate_id not in self.candidates:
            raise NotFoundError(f"unknown candidate {record.candidate_id!r}")
        self.events.append(record)
        self.history.setdefault(record.candidate_id, []).append(record)
        if record.source == "human":
            self._update_sampler(record)
        return record

    def _update_sampler(self, record: AnnotationRecord) -> None:
        cand = self.candidates[record.candidate_id]
        state = self.verb_states.setdefault(cand.verb, VerbState())
        prep = cand.prep.lower()
        # A superseding label withdraws the candidate's earlier selection.
        for selected in (state.selected_positive, state.selected_negative):
            stale = [p for p, cid in selected.items() if cid == record.candidate_id]
            for p in stale:
                del selected[p]
        selected = state.selected_positive if record.label else state.selected_negative
        if prep in selected:
            return  # duplicate context: annotation kept, selection unchanged
        if len(selected) >= self.per_class_cap:
            state.closed = True  # overflow label kept, verb retired
            return
        selected[prep] = record.candidate_id

    def _append(self, event: dict) -> AnnotationRecord:
        record = self._apply(event)
        if self._log_path:
            with open(self._log_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(event, ensure_ascii=False) + "\n")
        return record

    # --- labels -------------------------------------------------------------

    def submit_label(
        self,
        candidate_id: str,
        label: bool,
        annotator: str,
        source: str = "human",
    ) -> AnnotationRecord:
        if candidate_id not in self.candidates:
            raise NotFoundError(f"unknown candidate {candidate_id!r}")
        event = {
            "type": "label",
            "seq": len(self.events) + 1,
            "candidate_id": candidate_id,
            "label": bool(label),
            "annotator": annotator,
            "timestamp": _now(),
            "source": source,
        }
        return self._append(event)

    def active_record(self, candidate_id: str) -> AnnotationRecord | None:
        """Latest human record wins; else extrapolated; else llm."""
        records = self.history.get(candidate_id, [])
        for source in ("human", "extrapolated", "llm"):
            chosen = [r for r in records if r.source == source]
            if chosen:
                return chosen[-1]
        return None

    def human_record(self, candidate_id: str) -> AnnotationRecord | None:
        records = [r for r in self.history.get(candidate_id, []) if r.source == "human"]
        return records[-1] if records else None

    # --- sampler ----------------------------------------------------------------

    def _verb_state(self, verb: str) -> VerbState:
        return self.verb_states.get(verb, VerbState())

    def _verb_open(self, verb: str) -> bool:
        s = self._verb_state(verb)
        if s.closed:
            return False
        return s.positive < self.per_class_cap or s.negative < self.per_class_cap

    def _eligible(self, cand: Candidate, exclude: frozenset[str]) -> bool:
        if cand.candidate_id in exclude:
            return False
        if self.human_record(cand.candidate_id) is not None:
            return False
        s = self._verb_state(cand.verb)
        prep = cand.prep.lower()
        if prep in s.preps_positive and prep in s.preps_negative:
            return False
        return True

    def sample_next(self, exclude: Iterable[str] = ()) -> Candidate | None:
        """Next candidate to annotate, or None when the queue is exhausted.

        Deterministic given the store state: verbs in frequency order,
        candidates within a verb in (sentence_id, candidate_id) order.
        """
        excluded = frozenset(exclude)
        by_verb: dict[str, list[Candidate]] = {}
        for c in self.candidates.values():
            by_verb.setdefault(c.verb, []).append(c)
        for verb in self._verb_order:
            if not self._verb_open(verb):
                continue
            members = sorted(
                by_verb.get(verb, ()), key=lambda c: (c.sentence_id, c.candidate_id)
            )
            for cand in members:
                if self._eligible(cand, excluded):
                    return cand
        return None

    def progress(self) -> dict:
        labeled = [cid for cid in self.candidates if self.human_record(cid)]
        positives = sum(1 for cid in labeled if self.human_record(cid).label)
        verbs = []
        for verb in self._verb_order:
            s = self._verb_state(verb)
            verbs.append(
                {
                    "verb": verb,
                    "positive": s.positive,
                    "negative": s.negative,
                    "cap": self.per_class_cap,
                    "closed": s.closed or not self._verb_open(verb),
                    "prepositions": {
                        "positive": sorted(s.preps_positive),
                        "negative": sorted(s.preps_negative),
                    },
                }
            )
        return {
            "candidates": len(self.candidates),
            "labeled": len(labeled),
            "positives": positives,
            "negatives": len(labeled) - positives,
            "verbs": verbs,
        }

    # --- extrapolation ---------------------------------------------------------

    def quad_index(self) -> dict[tuple[str, str, str, str], dict]:
        index: dict[tuple, dict] = {}
        for cid, cand in self.candidates.items():
            entry = index.setdefault(
                cand.quad, {"candidate_ids": [], "positive": [], "negative": []}
            )
            entry["candidate_ids"].append(cid)
            rec = self.human_record(cid)
            if rec is not None:
                entry["positive" if rec.label else "negative"].append(cid)
        return index

    def conflicts(self) -> list[QuadConflict]:
        out = []
        for quad, entry in sorted(self.quad_index().items()):
            if entry["positive"] and entry["negative"]:
                out.append(
                    QuadConflict(
                        quad=quad,
                        positive_ids=tuple(sorted(entry["positive"])),
                        negative_ids=tuple(sorted(entry["negative"])),
                    )
                )
        return out

    def extrapolate(self) -> tuple[list[AnnotationRecord], list[QuadConflict]]:
        """Propagate human labels across equal 4-tuples.

        Only quads whose human labels are single-class propagate; the
        conflicted ones are reported instead.  Idempotent, and never
        touches human records.
        """
        new_records: list[AnnotationRecord] = []
        conflicts: list[QuadConflict] = []
        for quad, entry in sorted(self.quad_index().items()):
            pos, neg = entry["positive"], entry["negative"]
            if pos and neg:
                conflicts.append(
                    QuadConflict(
                        quad=quad,
                        positive_ids=tuple(sorted(pos)),
                        negative_ids=tuple(sorted(neg)),
                    )
                )
                continue
            if not pos and not neg:
                continue
            label = bool(pos)
            for cid in sorted(entry["candidate_ids"]):
                if self.human_record(cid) is not None:
                    continue
                if any(
                    r.source == "extrapolated" for r in self.history.get(cid, [])
                ):
                    continue
                new_records.append(
                    self.submit_label(cid, label, annotator="extrapolation", source="extrapolated")
                )
        return new_records, conflicts

    # --- export ------------------------------------------------------------------

    def export(
        self,
        labels: Iterable[bool] | None = None,
        sources: Iterable[str] | None = None,
    ) -> tuple[list[dict], dict[str, int]]:
        """Dataset lines for candidates whose active record matches the filter."""
        wanted_labels = set(labels) if labels is not None else {True, False}
        wanted_sources = set(sources) if sources is not None else set(SOURCES)
        lines: list[dict] = []
        counts: dict[str, int] = {}
        for cid in sorted(self.candidates):
            rec = self.active_record(cid)
            if rec is None:
                continue
            if rec.label not in wanted_labels or rec.source not in wanted_sources:
                continue
            c = self.candidates[cid]
            lines.append(
                {
                    "candidate_id": cid,
                    "sentence_id": c.sentence_id,
                    "text": c.text,
                    "verb": c.verb,
                    "dobj": c.dobj,
                    "prep": c.prep,
                    "pobj": c.pobj,
                    "positions": c.positions,
                    "label": rec.label,
                    "source": rec.source,
                }
            )
            key = f"{'positive' if rec.label else 'negative'}/{rec.source}"
            counts[key] = counts.get(key, 0) + 1
        return lines, counts


def read_candidates(stream: IO[str] | Iterable[str]) -> list[Candidate]:
    return [Candidate.from_dict(json.loads(line)) for line in stream if line.strip()]


def write_jsonl(records: Sequence[Mapping], stream: IO[str]) -> int:
    for r in records:
        stream.write(json.dumps(r, ensure_ascii=False) + "\n")
    return len(records)
