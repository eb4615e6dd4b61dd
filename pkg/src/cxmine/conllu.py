"""CoNLL-U ingestion and the sentence/token data model.

Input is always pre-parsed CoNLL-U; this module never invokes a parser.
Multiword-token range lines (``1-2``) and empty nodes (``1.1``) are
skipped so real treebanks pass through unchanged.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from typing import IO, Iterable, Iterator

from .errors import ContractError, FormatError, TreeStructureError

log = logging.getLogger(__name__)

N_COLUMNS = 10


@dataclass(frozen=True)
class Token:
    """One token of a dependency-parsed sentence.

    ``head`` is the 1-based index of the governor, 0 for the root.
    ``xpos`` keeps the language-specific tag (e.g. Penn verb tags) used
    downstream for inflection; ``upos`` the universal tag used by patterns.
    """

    index: int
    form: str
    lemma: str
    upos: str
    xpos: str
    head: int
    deprel: str
    space_after: bool = True

    def __post_init__(self):
        if self.index < 1:
            raise ContractError(f"token index must be >= 1, got {self.index}")
        if self.head < 0:
            raise ContractError(f"token head must be >= 0, got {self.head}")
        if self.head == self.index:
            raise ContractError(f"token {self.index} is its own head")
        if not self.form:
            raise ContractError(f"token {self.index} has an empty form")


@dataclass(frozen=True)
class Sentence:
    """A dependency-parsed sentence with a validated single-rooted tree."""

    id: str
    tokens: tuple[Token, ...]
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        validate_tree(self)

    def __len__(self):
        return len(self.tokens)

    def token(self, index: int) -> Token:
        if not 1 <= index <= len(self.tokens):
            raise ContractError(f"token index {index} out of range 1..{len(self.tokens)}")
        return self.tokens[index - 1]

    def children(self, index: int) -> tuple[Token, ...]:
        return tuple(t for t in self.tokens if t.head == index)


def validate_tree(s: Sentence) -> None:
    """Check contiguous 1..n indices and a single-rooted acyclic head structure."""
    n = len(s.tokens)
    for pos, tok in enumerate(s.tokens, start=1):
        if tok.index != pos:
            raise TreeStructureError(
                f"token indices not contiguous: expected {pos}, got {tok.index}",
                sentence_id=s.id,
            )
        if tok.head > n:
            raise TreeStructureError(
                f"token {tok.index} head {tok.head} points outside the sentence",
                sentence_id=s.id,
            )
    roots = [t.index for t in s.tokens if t.head == 0]
    if n and len(roots) != 1:
        raise TreeStructureError(
            f"expected exactly one root, found {len(roots)}", sentence_id=s.id
        )
    # Every token must reach the root in <= n hops; a cycle never does.
    for tok in s.tokens:
        seen = 0
        cur = tok.head
        while cur != 0:
            seen += 1
            if seen > n:
                raise TreeStructureError(
                    f"cycle in head pointers involving token {tok.index}",
                    sentence_id=s.id,
                )
            cur = s.tokens[cur - 1].head


def _parse_token_line(line: str, line_no: int) -> Token | None:
    cols = line.split("\t")
    if len(cols) != N_COLUMNS:
        raise FormatError(
            f"expected {N_COLUMNS} tab-separated columns, got {len(cols)}", line_no=line_no
        )
    tok_id = cols[0]
    if "-" in tok_id or "." in tok_id:
        return None  # multiword range or empty node
    try:
        index = int(tok_id)
    except ValueError:
        raise FormatError(f"non-integer token id {tok_id!r}", line_no=line_no) from None
    try:
        head = int(cols[6])
    except ValueError:
        raise FormatError(f"non-integer head {cols[6]!r}", line_no=line_no) from None
    misc = cols[9]
    space_after = "SpaceAfter=No" not in misc.split("|")
    lemma = cols[2] if cols[2] != "_" else cols[1]
    return Token(
        index=index,
        form=cols[1],
        lemma=lemma,
        upos=cols[3] if cols[3] != "_" else "",
        xpos=cols[4] if cols[4] != "_" else "",
        head=head,
        deprel=cols[7] if cols[7] != "_" else "",
        space_after=space_after,
    )


def iter_conllu(
    stream: IO[str] | Iterable[str], source: str = "", strict: bool = True
) -> Iterator[Sentence]:
    """Yield one Sentence per CoNLL-U block.

    ``strict=True`` raises on malformed blocks; otherwise they are logged
    and skipped (recall-preserving bulk mode).
    """
    block: list[tuple[int, str]] = []
    comments: dict[str, str] = {}
    ordinal = 0

    def flush() -> Sentence | None:
        nonlocal ordinal
        if not block:
            return None
        ordinal += 1
        sent_id = comments.get("sent_id", f"s{ordinal}")
        tokens = []
        for line_no, line in block:
            tok = _parse_token_line(line, line_no)
            if tok is not None:
                tokens.append(tok)
        return Sentence(id=sent_id, tokens=tuple(tokens), source=source)

    line_no = 0
    for raw in stream:
        line_no += 1
        line = raw.rstrip("\n")
        if not line.strip():
            try:
                sent = flush()
            except (FormatError, TreeStructureError) as exc:
                if strict:
                    raise
                log.warning("skipping malformed sentence: %s", exc)
                sent = None
            block.clear()
            comments.clear()
            if sent is not None:
                yield sent
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                key, _, value = body.partition("=")
                comments[key.strip()] = value.strip()
            continue
        block.append((line_no, line))
    try:
        sent = flush()
    except (FormatError, TreeStructureError) as exc:
        if strict:
            raise
        log.warning("skipping malformed sentence: %s", exc)
        sent = None
    if sent is not None:
        yield sent


def parse_conllu(
    stream: IO[str] | Iterable[str], source: str = "", strict: bool = True
) -> list[Sentence]:
    """Read a whole CoNLL-U stream into a list of sentences."""
    return list(iter_conllu(stream, source=source, strict=strict))


def to_conllu(s: Sentence) -> str:
    """Serialize a sentence back to a CoNLL-U block (comment line + tokens)."""
    lines = [f"# sent_id = {s.id}"]
    for t in s.tokens:
        misc = "_" if t.space_after else "SpaceAfter=No"
        lines.append(
            "\t".join(
                [
                    str(t.index),
                    t.form,
                    t.lemma or "_",
                    t.upos or "_",
                    t.xpos or "_",
                    "_",
                    str(t.head),
                    t.deprel or "_",
                    "_",
                    misc,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def detokenize(s: Sentence) -> str:
    """Render surface text: single spaces except where space_after is false."""
    parts = []
    last = len(s.tokens)
    for pos, t in enumerate(s.tokens, start=1):
        parts.append(t.form)
        if pos != last and t.space_after:
            parts.append(" ")
    return "".join(parts)


def detokenize_with_offsets(s: Sentence) -> tuple[str, list[tuple[int, int]]]:
    """Like detokenize, also returning each token's (start, end) char span."""
    parts: list[str] = []
    spans: list[tuple[int, int]] = []
    cursor = 0
    last = len(s.tokens)
    for pos, t in enumerate(s.tokens, start=1):
        start = cursor
        parts.append(t.form)
        cursor += len(t.form)
        spans.append((start, cursor))
        if pos != last and t.space_after:
            parts.append(" ")
            cursor += 1
    return "".join(parts), spans


def replace_token(s: Sentence, index: int, new_form: str) -> Sentence:
    """Return a copy with only the surface form at ``index`` changed."""
    if not 1 <= index <= len(s.tokens):
        raise ContractError(f"token index {index} out of range 1..{len(s.tokens)}")
    tokens = tuple(
        replace(t, form=new_form) if t.index == index else t for t in s.tokens
    )
    return Sentence(id=s.id, tokens=tokens, source=s.source)


# --- JSON-lines sentence store -------------------------------------------------

def sentence_to_dict(s: Sentence) -> dict:
    return {
        "id": s.id,
        "source": s.source,
        "tokens": [
            {
                "index": t.index,
                "form": t.form,
                "lemma": t.lemma,
                "upos": t.upos,
                "xpos": t.xpos,
                "head": t.head,
                "deprel": t.deprel,
                "space_after": t.space_after,
            }
            for t in s.tokens
        ],
    }


def sentence_from_dict(d: dict) -> Sentence:
    return Sentence(
        id=d["id"],
        source=d.get("source", ""),
        tokens=tuple(
            Token(
                index=t["index"],
                form=t["form"],
                lemma=t["lemma"],
                upos=t.get("upos", ""),
                xpos=t.get("xpos", ""),
                head=t["head"],
                deprel=t.get("deprel", ""),
                space_after=t.get("space_after", True),
            )
            for t in d["tokens"]
        ),
    )


def write_sentences(sentences: Iterable[Sentence], stream: IO[str]) -> int:
    n = 0
    for s in sentences:
        stream.write(json.dumps(sentence_to_dict(s), ensure_ascii=False) + "\n")
        n += 1
    return n


def read_sentences(stream: IO[str] | Iterable[str]) -> list[Sentence]:
    return [sentence_from_dict(json.loads(line)) for line in stream if line.strip()]
