"""Declarative dependency-subtree patterns with named captures.

A pattern is a small tree of node constraints joined by labeled edges,
optionally with string-adjacency requirements between nodes.  Matching
enumerates *every* satisfying assignment of pattern nodes to tokens
(recall-first filtering), so one sentence can yield several candidates.

The bundled caused-motion preset encodes: a verb with a nominal or
pronominal direct object, an adposition attached to the verb carrying a
nominal or pronominal object, and the direct object string-adjacent to
the adposition ("... sneezed [the foam] [off] [her cappuccino]").
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .conllu import Sentence, Token, detokenize_with_offsets
from .errors import ContractError, FormatError, PatternValidationError

CMC_CAPTURES = ("verb", "dobj", "prep", "pobj")

# Relations that glue a multiword adposition together ("out of", "off of").
DEFAULT_FIXED_RELATIONS = frozenset({"fixed", "mwe"})

# Relations forming the small nominal phrase shown to humans ("the foam").
DEFAULT_PHRASE_RELATIONS = frozenset({"det", "poss", "nmod:poss"})


class UnknownLabelWarning(UserWarning):
    """A pattern references a relation label outside the configured inventory."""


@dataclass(frozen=True)
class NodeSpec:
    """Constraints one pattern node places on a token; empty tuple = anything."""

    name: str
    upos: tuple[str, ...] = ()
    lemma: tuple[str, ...] = ()
    deprel: tuple[str, ...] = ()

    def admits(self, token: Token) -> bool:
        if self.upos and token.upos not in self.upos:
            return False
        if self.lemma and token.lemma.lower() not in self.lemma:
            return False
        if self.deprel and token.deprel not in self.deprel:
            return False
        return True


@dataclass(frozen=True)
class EdgeSpec:
    parent: str
    child: str
    deprel: str


@dataclass(frozen=True)
class PatternSpec:
    nodes: tuple[NodeSpec, ...]
    edges: tuple[EdgeSpec, ...]
    adjacency: tuple[tuple[str, str], ...] = ()
    captures: tuple[str, ...] = ()


@dataclass(frozen=True)
class Capture:
    index: int
    form: str
    lemma: str


@dataclass(frozen=True)
class CandidateInstance:
    """One satisfying assignment, reported through its captured nodes.

    ``units`` extends each capture to its contiguous multiword unit
    (the token plus fixed-expression dependents), so "out of" survives
    as one preposition.
    """

    sentence_id: str
    captures: dict[str, Capture]
    units: dict[str, tuple[Capture, ...]] = field(default_factory=dict)

    @property
    def candidate_id(self) -> str:
        return candidate_id(self.sentence_id, {k: v.index for k, v in self.captures.items()})

    def capture_key(self) -> tuple[tuple[str, int], ...]:
        return tuple(sorted((name, cap.index) for name, cap in self.captures.items()))


def candidate_id(sentence_id: str, indices: Mapping[str, int]) -> str:
    """Deterministic id from the sentence id and captured token positions."""
    basis = sentence_id + "|" + ",".join(
        f"{name}={indices[name]}" for name in sorted(indices)
    )
    return hashlib.sha1(basis.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class QuadKey:
    """Case-folded (verb, direct object, preposition, prepositional object)."""

    verb: str
    dobj: str
    prep: str
    pobj: str

    def __post_init__(self):
        for fname in ("verb", "dobj", "prep", "pobj"):
            if not getattr(self, fname):
                raise ContractError(f"quad key field {fname!r} is empty")

    def as_tuple(self) -> tuple[str, str, str, str]:
        return (self.verb, self.dobj, self.prep, self.pobj)


def _load_label_inventory() -> dict[str, list[str]]:
    text = resources.files("cxmine.data").joinpath("deprels.json").read_text("utf-8")
    return json.loads(text)


def known_labels(inventory: Iterable[str] | None = None) -> frozenset[str]:
    if inventory is not None:
        return frozenset(inventory)
    labels: set[str] = set()
    for values in _load_label_inventory().get("inventories", {}).values():
        labels.update(values)
    return frozenset(labels)


class Pattern:
    """A compiled, immutable pattern ready for matching."""

    def __init__(
        self,
        spec: PatternSpec,
        fixed_relations: frozenset[str] = DEFAULT_FIXED_RELATIONS,
    ):
        self.spec = spec
        self.fixed_relations = fixed_relations
        self._nodes = {n.name: n for n in spec.nodes}
        self._plan = _match_plan(spec)

    @property
    def captures(self) -> tuple[str, ...]:
        return self.spec.captures

    def find_matches(self, sentence: Sentence) -> list[CandidateInstance]:
        return find_matches(self, sentence)


def compile(
    spec: PatternSpec,
    label_inventory: Iterable[str] | None = None,
    fixed_relations: frozenset[str] = DEFAULT_FIXED_RELATIONS,
) -> Pattern:
    """Validate a PatternSpec and produce a matchable Pattern.

    Structural violations raise; relation labels outside the inventory
    only warn, so patterns keep working across parser label drift.
    """
    if not spec.nodes:
        raise PatternValidationError("pattern has zero nodes")
    names = [n.name for n in spec.nodes]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise PatternValidationError(f"duplicate node names: {sorted(dupes)}")
    declared = set(names)
    for e in spec.edges:
        for endpoint in (e.parent, e.child):
            if endpoint not in declared:
                raise PatternValidationError(
                    f"edge references undeclared node {endpoint!r}"
                )
        if e.parent == e.child:
            raise PatternValidationError(f"self-edge on node {e.parent!r}")
    for left, right in spec.adjacency:
        for endpoint in (left, right):
            if endpoint not in declared:
                raise PatternValidationError(
                    f"adjacency references undeclared node {endpoint!r}"
                )
    for c in spec.captures:
        if c not in declared:
            raise PatternValidationError(f"capture references undeclared node {c!r}")
    _match_plan(spec)  # raises on disconnected / multi-parent edge sets

    inventory = (
        frozenset(label_inventory) if label_inventory is not None else known_labels()
    )
    used = {e.deprel for e in spec.edges}
    for n in spec.nodes:
        used.update(n.deprel)
    unknown = sorted(u for u in used if u not in inventory)
    if unknown:
        warnings.warn(
            f"pattern uses relation labels outside the inventory: {unknown}",
            UnknownLabelWarning,
            stacklevel=2,
        )
    return Pattern(spec, fixed_relations=fixed_relations)


def _match_plan(spec: PatternSpec) -> list[tuple[str, EdgeSpec | None]]:
    """Order nodes root-first along tree edges; validate the tree shape."""
    parents: dict[str, EdgeSpec] = {}
    for e in spec.edges:
        if e.child in parents:
            raise PatternValidationError(f"node {e.child!r} has two parents")
        parents[e.child] = e
    roots = [n.name for n in spec.nodes if n.name not in parents]
    if len(roots) != 1:
        raise PatternValidationError(
            f"edge set must form a single tree, found {len(roots)} roots"
        )
    children: dict[str, list[EdgeSpec]] = {}
    for e in spec.edges:
        children.setdefault(e.parent, []).append(e)
    plan: list[tuple[str, EdgeSpec | None]] = [(roots[0], None)]
    queue = [roots[0]]
    while queue:
        cur = queue.pop(0)
        for e in children.get(cur, ()):
            plan.append((e.child, e))
            queue.append(e.child)
    if len(plan) != len(spec.nodes):
        missing = {n.name for n in spec.nodes} - {name for name, _ in plan}
        raise PatternValidationError(
            f"edge set is disconnected; unreachable nodes: {sorted(missing)}"
        )
    return plan


def find_matches(pattern: Pattern, sentence: Sentence) -> list[CandidateInstance]:
    """Enumerate every satisfying assignment, deduplicated by capture map.

    Assignments are injective over tokens and must satisfy all node
    constraints, all (head, deprel) edge constraints, and all adjacency
    pairs (consecutive token indices).  Output order is deterministic:
    sorted by the captured indices.
    """
    spec = pattern.spec
    nodes = pattern._nodes
    plan = pattern._plan
    tokens = sentence.tokens
    results: dict[tuple, CandidateInstance] = {}

    adjacency = spec.adjacency

    def adjacency_ok(bound: dict[str, int]) -> bool:
        for left, right in adjacency:
            if left in bound and right in bound:
                if bound[left] + 1 != bound[right]:
                    return False
        return True

    def assign(step: int, bound: dict[str, int]) -> None:
        if step == len(plan):
            captures = {
                name: _capture(tokens[bound[name] - 1])
                for name in (spec.captures or tuple(nodes))
            }
            key = tuple(sorted((n, c.index) for n, c in captures.items()))
            if key not in results:
                units = {
                    name: _unit(sentence, cap.index, pattern.fixed_relations)
                    for name, cap in captures.items()
                }
                results[key] = CandidateInstance(
                    sentence_id=sentence.id, captures=captures, units=units
                )
            return
        name, via = plan[step]
        node = nodes[name]
        if via is None:
            candidates = [t for t in tokens if node.admits(t)]
        else:
            head_index = bound[via.parent]
            candidates = [
                t
                for t in tokens
                if t.head == head_index and t.deprel == via.deprel and node.admits(t)
            ]
        used = set(bound.values())
        for t in candidates:
            if t.index in used:
                continue
            bound[name] = t.index
            if adjacency_ok(bound):
                assign(step + 1, bound)
            del bound[name]

    assign(0, {})
    return [results[k] for k in sorted(results)]


def _capture(token: Token) -> Capture:
    return Capture(index=token.index, form=token.form, lemma=token.lemma)


def _unit(
    sentence: Sentence, index: int, fixed_relations: frozenset[str]
) -> tuple[Capture, ...]:
    """The token plus its fixed-expression dependents, kept only if contiguous."""
    indices = [index]
    for child in sentence.children(index):
        if child.deprel in fixed_relations:
            indices.append(child.index)
    indices.sort()
    run = [index]
    for i in indices:
        if i == run[-1] + 1:
            run.append(i)
    return tuple(_capture(sentence.token(i)) for i in run)


def brute_force_matches(pattern: Pattern, sentence: Sentence) -> list[CandidateInstance]:
    """Independent oracle: test all injective token-to-node assignments.

    Exponential; only for verifying find_matches on small inputs.
    """
    from itertools import permutations

    spec = pattern.spec
    names = [n.name for n in spec.nodes]
    nodes = pattern._nodes
    tokens = sentence.tokens
    results: dict[tuple, CandidateInstance] = {}
    for combo in permutations(range(1, len(tokens) + 1), len(names)):
        bound = dict(zip(names, combo))
        ok = all(nodes[name].admits(tokens[idx - 1]) for name, idx in bound.items())
        if ok:
            for e in spec.edges:
                child = tokens[bound[e.child] - 1]
                if child.head != bound[e.parent] or child.deprel != e.deprel:
                    ok = False
                    break
        if ok:
            for left, right in spec.adjacency:
                if bound[left] + 1 != bound[right]:
                    ok = False
                    break
        if ok:
            captures = {
                name: _capture(tokens[bound[name] - 1])
                for name in (spec.captures or tuple(names))
            }
            key = tuple(sorted((n, c.index) for n, c in captures.items()))
            if key not in results:
                units = {
                    name: _unit(sentence, cap.index, pattern.fixed_relations)
                    for name, cap in captures.items()
                }
                results[key] = CandidateInstance(
                    sentence_id=sentence.id, captures=captures, units=units
                )
    return [results[k] for k in sorted(results)]


def check_instance(pattern: Pattern, sentence: Sentence, inst: CandidateInstance) -> bool:
    """Re-verify every constraint on a returned instance (soundness probe)."""
    spec = pattern.spec
    bound = {name: cap.index for name, cap in inst.captures.items()}
    if len(set(bound.values())) != len(bound):
        return False
    for name, idx in bound.items():
        if not 1 <= idx <= len(sentence.tokens):
            return False
        if not pattern._nodes[name].admits(sentence.token(idx)):
            return False
    for e in spec.edges:
        if e.parent in bound and e.child in bound:
            child = sentence.token(bound[e.child])
            if child.head != bound[e.parent] or child.deprel != e.deprel:
                return False
    for left, right in spec.adjacency:
        if left in bound and right in bound and bound[left] + 1 != bound[right]:
            return False
    return True


# --- caused-motion preset ------------------------------------------------------

NOMINAL_UPOS = ("NOUN", "PROPN", "PRON")


def cmc_pattern(labels: Mapping[str, str] | str = "spacy") -> PatternSpec:
    """The caused-motion prefilter subtree.

    A verb governs a nominal/pronominal direct object and an adposition;
    the adposition governs its own nominal object; the direct object and
    the adposition must be string-adjacent.  Relation names come from a
    label-set mapping so the preset ports across parser conventions.
    """
    if isinstance(labels, str):
        inventory = _load_label_inventory()
        labelsets = inventory.get("labelsets", {})
        if labels not in labelsets:
            raise ContractError(
                f"unknown labelset {labels!r}; available: {sorted(labelsets)}"
            )
        labels = labelsets[labels]
    return PatternSpec(
        nodes=(
            NodeSpec(name="verb", upos=("VERB",)),
            NodeSpec(name="dobj", upos=NOMINAL_UPOS),
            NodeSpec(name="prep", upos=("ADP",)),
            NodeSpec(name="pobj", upos=NOMINAL_UPOS),
        ),
        edges=(
            EdgeSpec(parent="verb", child="dobj", deprel=labels["dobj"]),
            EdgeSpec(parent="verb", child="prep", deprel=labels["prep"]),
            EdgeSpec(parent="prep", child="pobj", deprel=labels["pobj"]),
        ),
        adjacency=(("dobj", "prep"),),
        captures=CMC_CAPTURES,
    )


def quad_key(inst: CandidateInstance) -> QuadKey:
    """Case-folded 4-tuple used for label extrapolation."""
    missing = [name for name in CMC_CAPTURES if name not in inst.captures]
    if missing:
        raise ContractError(f"instance missing captures: {missing}")
    prep_unit = inst.units.get("prep") or (inst.captures["prep"],)
    return QuadKey(
        verb=inst.captures["verb"].lemma.lower(),
        dobj=inst.captures["dobj"].lemma.lower(),
        prep=" ".join(c.form for c in prep_unit).lower(),
        pobj=inst.captures["pobj"].lemma.lower(),
    )


def phrase_token_indices(
    sentence: Sentence,
    head_index: int,
    relations: frozenset[str] = DEFAULT_PHRASE_RELATIONS,
) -> list[int]:
    """Head plus determiner/possessive dependents, as a contiguous run."""
    indices = {head_index}
    for child in sentence.children(head_index):
        if child.deprel in relations:
            indices.add(child.index)
    ordered = sorted(indices)
    # Keep only the contiguous run containing the head.
    runs: list[list[int]] = [[ordered[0]]]
    for i in ordered[1:]:
        if i == runs[-1][-1] + 1:
            runs[-1].append(i)
        else:
            runs.append([i])
    for run in runs:
        if head_index in run:
            return run
    return [head_index]


def render_phrase(sentence: Sentence, indices: Sequence[int]) -> str:
    """Surface rendering of a token run, honoring space_after."""
    parts = []
    for pos, i in enumerate(indices):
        t = sentence.token(i)
        parts.append(t.form)
        if pos != len(indices) - 1 and t.space_after:
            parts.append(" ")
    return "".join(parts)


# --- candidate emission ----------------------------------------------------------

def candidate_record(sentence: Sentence, inst: CandidateInstance) -> dict:
    """The JSON-lines record downstream stages consume.

    Core fields follow the pipeline interchange schema; extras (span,
    verb_xpos, char_spans) let later stages render prompts, inflect the
    verb, and highlight spans without re-reading the parse.
    """
    text, offsets = detokenize_with_offsets(sentence)
    quad = quad_key(inst)
    positions = {
        name: [c.index for c in inst.units.get(name) or (inst.captures[name],)]
        for name in CMC_CAPTURES
    }
    lo = min(inst.captures[n].index for n in CMC_CAPTURES)
    hi = max(
        max(c.index for c in inst.units.get(n) or (inst.captures[n],))
        for n in CMC_CAPTURES
    )
    span = render_phrase(sentence, list(range(lo, hi + 1)))

    def char_span(indices: list[int]) -> list[int]:
        return [offsets[indices[0] - 1][0], offsets[indices[-1] - 1][1]]

    phrase_positions = {
        "verb": positions["verb"],
        "dobj": phrase_token_indices(sentence, inst.captures["dobj"].index),
        "prep": positions["prep"],
        "pobj": phrase_token_indices(sentence, inst.captures["pobj"].index),
    }
    return {
        "candidate_id": inst.candidate_id,
        "sentence_id": sentence.id,
        "text": text,
        "verb": quad.verb,
        "dobj": quad.dobj,
        "prep": quad.prep,
        "pobj": quad.pobj,
        "positions": positions,
        "span": span,
        "verb_xpos": sentence.token(inst.captures["verb"].index).xpos,
        "char_spans": {name: char_span(idx) for name, idx in phrase_positions.items()},
    }


# --- pattern file format ---------------------------------------------------------

def parse_pattern_file(text: str) -> PatternSpec:
    """Read the sectioned pattern format::

        [nodes]
        verb  upos=VERB
        dobj  upos=NOUN|PROPN|PRON
        [edges]
        verb -dobj-> dobj
        [adjacency]
        dobj prep
        [captures]
        verb dobj
    """
    section = None
    nodes: list[NodeSpec] = []
    edges: list[EdgeSpec] = []
    adjacency: list[tuple[str, str]] = []
    captures: list[str] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in {"nodes", "edges", "adjacency", "captures"}:
                raise FormatError(f"unknown section {section!r}", line_no=line_no)
            continue
        if section == "nodes":
            parts = line.split()
            name = parts[0]
            kwargs: dict[str, tuple[str, ...]] = {}
            for part in parts[1:]:
                if "=" not in part:
                    raise FormatError(
                        f"node constraint must be key=value, got {part!r}", line_no=line_no
                    )
                key, _, value = part.partition("=")
                if key not in {"upos", "lemma", "deprel"}:
                    raise FormatError(f"unknown constraint key {key!r}", line_no=line_no)
                values = tuple(v for v in value.split("|") if v)
                kwargs[key] = (
                    tuple(v.lower() for v in values) if key == "lemma" else values
                )
            nodes.append(NodeSpec(name=name, **kwargs))
        elif section == "edges":
            parts = line.split()
            if len(parts) != 3 or not (
                parts[1].startswith("-") and parts[1].endswith("->")
            ):
                raise FormatError(
                    f"edge must be 'parent -rel-> child', got {line!r}", line_no=line_no
                )
            edges.append(
                EdgeSpec(parent=parts[0], child=parts[2], deprel=parts[1][1:-2])
            )
        elif section == "adjacency":
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(
                    f"adjacency line needs two node names, got {line!r}", line_no=line_no
                )
            adjacency.append((parts[0], parts[1]))
        elif section == "captures":
            captures.extend(line.split())
        else:
            raise FormatError("content before any [section] header", line_no=line_no)
    return PatternSpec(
        nodes=tuple(nodes),
        edges=tuple(edges),
        adjacency=tuple(adjacency),
        captures=tuple(captures),
    )


def dump_pattern_file(spec: PatternSpec) -> str:
    lines = ["[nodes]"]
    for n in spec.nodes:
        constraints = []
        for key in ("upos", "lemma", "deprel"):
            values = getattr(n, key)
            if values:
                constraints.append(f"{key}={'|'.join(values)}")
        lines.append("  ".join([n.name] + constraints))
    lines.append("")
    lines.append("[edges]")
    for e in spec.edges:
        lines.append(f"{e.parent} -{e.deprel}-> {e.child}")
    lines.append("")
    lines.append("[adjacency]")
    for left, right in spec.adjacency:
        lines.append(f"{left} {right}")
    lines.append("")
    lines.append("[captures]")
    lines.append(" ".join(spec.captures))
    return "\n".join(lines) + "\n"
