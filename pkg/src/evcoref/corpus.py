"""Document, mention, and chain data model plus the JSONL corpus format.

A corpus is a UTF-8 JSON-lines file, one document per line:

    {"doc_id": str, "tokens": [str],
     "mentions": [{"token_index": int, "type": str, "chain_id": str}]}

Mentions are single tokens. Event type names resolve against a
:class:`TypeInventory`; chain ids are free-form strings scoped to one
document. Documents are immutable after parsing and safe to share across
workers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

# Bundled KBP-style inventory: the 18 event categories used for scoring.
DEFAULT_TYPE_NAMES: tuple[str, ...] = (
    "Attack",
    "Demonstrate",
    "Broadcast",
    "Contact",
    "Correspondence",
    "Meet",
    "ArrestJail",
    "Die",
    "Injure",
    "ManufactureArtifact",
    "TransportArtifact",
    "TransportPerson",
    "Elect",
    "EndPosition",
    "StartPosition",
    "TransferMoney",
    "TransferOwnership",
    "DeclareBankruptcy",
)


class CorpusError(ValueError):
    """Malformed corpus content: schema, spans, types, or chain consistency."""


@dataclass(frozen=True)
class TypeInventory:
    """Ordered event-type names; position in the tuple is the ordinal."""

    types: tuple[str, ...]

    def __post_init__(self):
        if not self.types:
            raise CorpusError("type inventory is empty")
        seen = set()
        for name in self.types:
            if not name:
                raise CorpusError("type inventory contains an empty name")
            if name in seen:
                raise CorpusError(f"duplicate type name {name!r} in inventory")
            seen.add(name)
        object.__setattr__(self, "_by_name", {n: i for i, n in enumerate(self.types)})

    @classmethod
    def default(cls) -> "TypeInventory":
        return cls(DEFAULT_TYPE_NAMES)

    @classmethod
    def from_file(cls, path) -> "TypeInventory":
        """One type name per line; order defines ordinals. Blank lines skipped."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(tuple(line.strip() for line in lines if line.strip()))

    def ordinal(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise CorpusError(f"unknown event type {name!r}") from None

    def name(self, ordinal: int) -> str:
        return self.types[ordinal]

    def __len__(self) -> int:
        return len(self.types)

    def __iter__(self):
        return iter(self.types)


@dataclass(frozen=True)
class Mention:
    token_index: int
    event_type: int  # ordinal into the inventory
    chain_id: str


@dataclass(frozen=True)
class Document:
    doc_id: str
    tokens: tuple[str, ...]
    mentions: tuple[Mention, ...]

    def mention_tokens(self) -> frozenset[int]:
        return frozenset(m.token_index for m in self.mentions)

    def typed_mentions(self) -> tuple[tuple[int, int], ...]:
        """Sorted (token_index, event_type) pairs."""
        return tuple(sorted((m.token_index, m.event_type) for m in self.mentions))


@dataclass(frozen=True)
class Chain:
    event_type: int
    tokens: tuple[int, ...]  # sorted token indices


@dataclass(frozen=True)
class ChainSet:
    """Chains ordered by first-mention position; members sorted within."""

    chains: tuple[Chain, ...]

    def mention_tokens(self) -> frozenset[int]:
        return frozenset(t for c in self.chains for t in c.tokens)

    def typed_mentions(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted((t, c.event_type) for c in self.chains for t in c.tokens))

    def __len__(self) -> int:
        return len(self.chains)


def validate_document(doc: Document) -> Document:
    """Check every document invariant; raises :class:`CorpusError`."""
    if not doc.tokens:
        raise CorpusError(f"document {doc.doc_id!r} has no tokens")
    n = len(doc.tokens)
    seen_tokens: set[int] = set()
    chain_types: dict[str, int] = {}
    for m in doc.mentions:
        if not 0 <= m.token_index < n:
            raise CorpusError(
                f"document {doc.doc_id!r}: mention span {m.token_index} outside "
                f"[0, {n})"
            )
        if m.token_index in seen_tokens:
            raise CorpusError(
                f"document {doc.doc_id!r}: two mentions share token index "
                f"{m.token_index}"
            )
        seen_tokens.add(m.token_index)
        prior = chain_types.setdefault(m.chain_id, m.event_type)
        if prior != m.event_type:
            raise CorpusError(
                f"document {doc.doc_id!r}: chain {m.chain_id!r} mixes event "
                f"types {prior} and {m.event_type}"
            )
    return doc


def truncate_document(doc: Document, max_tokens: int) -> Document:
    """Drop tokens past ``max_tokens`` along with any mentions on them."""
    if len(doc.tokens) <= max_tokens:
        return doc
    kept = tuple(m for m in doc.mentions if m.token_index < max_tokens)
    return Document(doc.doc_id, doc.tokens[:max_tokens], kept)


def _document_from_record(record, inventory: TypeInventory, where: str) -> Document:
    if not isinstance(record, dict):
        raise CorpusError(f"{where}: record is not a JSON object")
    doc_id = record.get("doc_id")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(f"{where}: missing or invalid 'doc_id'")
    tokens = record.get("tokens")
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise CorpusError(f"{where}: 'tokens' must be a list of strings")
    raw_mentions = record.get("mentions", [])
    if not isinstance(raw_mentions, list):
        raise CorpusError(f"{where}: 'mentions' must be a list")
    mentions = []
    for k, rm in enumerate(raw_mentions):
        if not isinstance(rm, dict):
            raise CorpusError(f"{where}: mention {k} is not an object")
        idx = rm.get("token_index")
        if not isinstance(idx, int) or isinstance(idx, bool):
            raise CorpusError(f"{where}: mention {k} has invalid 'token_index'")
        type_name = rm.get("type")
        if not isinstance(type_name, str):
            raise CorpusError(f"{where}: mention {k} has invalid 'type'")
        chain_id = rm.get("chain_id")
        if not isinstance(chain_id, str) or not chain_id:
            raise CorpusError(f"{where}: mention {k} has invalid 'chain_id'")
        mentions.append(Mention(idx, inventory.ordinal(type_name), chain_id))
    try:
        return validate_document(Document(doc_id, tuple(tokens), tuple(mentions)))
    except CorpusError as err:
        raise CorpusError(f"{where}: {err}") from None


def parse_corpus(path, inventory: TypeInventory, max_tokens: int | None = None) -> list[Document]:
    """Parse and validate a JSONL corpus.

    ``max_tokens`` truncates long documents at load time (training mode);
    omit it to keep documents whole for prediction and scoring.
    """
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusError(f"{path}:{lineno}: malformed record: {err}") from None
            doc = _document_from_record(record, inventory, where=f"{path}:{lineno}")
            if max_tokens is not None:
                doc = truncate_document(doc, max_tokens)
            docs.append(doc)
    return docs


def gold_chains(doc: Document) -> ChainSet:
    """Group gold mentions by chain id; singleton chains are preserved."""
    members: dict[str, list[int]] = {}
    types: dict[str, int] = {}
    for m in doc.mentions:
        members.setdefault(m.chain_id, []).append(m.token_index)
        types[m.chain_id] = m.event_type
    chains = [
        Chain(types[cid], tuple(sorted(toks)))
        for cid, toks in members.items()
    ]
    chains.sort(key=lambda c: c.tokens[0])
    return ChainSet(tuple(chains))


def write_predictions(docs: Sequence[Document], predictions: Sequence[ChainSet],
                      path, inventory: TypeInventory) -> None:
    """Emit the corpus JSONL schema with synthesized chain ids p0, p1, ...

    Chain ids are assigned in first-mention order; output round-trips
    through :func:`parse_corpus`.
    """
    if len(docs) != len(predictions):
        raise ValueError("one ChainSet per document is required")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc, chainset in zip(docs, predictions):
            ordered = sorted(chainset.chains, key=lambda c: c.tokens[0])
            mentions = []
            for k, chain in enumerate(ordered):
                for tok in chain.tokens:
                    mentions.append(
                        {"token_index": tok, "type": inventory.name(chain.event_type),
                         "chain_id": f"p{k}"}
                    )
            mentions.sort(key=lambda rm: rm["token_index"])
            record = {"doc_id": doc.doc_id, "tokens": list(doc.tokens),
                      "mentions": mentions}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
