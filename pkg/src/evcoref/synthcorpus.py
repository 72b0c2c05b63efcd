"""Synthetic corpora for desk-scale experiments.

Documents carry a few typed chains whose mentions sit close together,
with wide gaps between chains. A controllable fraction of documents
duplicates one event type across two far-apart chains, which is exactly
the case a same-type-merging heuristic gets wrong and distance-aware
scoring can get right.
"""
from __future__ import annotations

import numpy as np

from .corpus import Document, Mention, TypeInventory

_FILLER = ("the", "a", "company", "market", "report", "after", "before",
           "again", "they", "it", "during", "while", "press", "quarter",
           "city", "group", "board", "which", "plan", "deal")


def generate_document(rng: np.random.Generator, doc_id: str,
                      inventory: TypeInventory,
                      min_chains: int = 2, max_chains: int = 3,
                      min_chain_len: int = 1, max_chain_len: int = 3,
                      duplicate_type: bool = False) -> Document:
    n_chains = int(rng.integers(min_chains, max_chains + 1))
    type_ids = rng.choice(len(inventory), size=n_chains, replace=False)
    if duplicate_type and n_chains >= 2:
        type_ids[-1] = type_ids[0]
    lengths = rng.integers(min_chain_len, max_chain_len + 1, size=n_chains)
    lengths[0] = max(lengths[0], 2)  # keep at least one non-singleton chain

    mentions: list[Mention] = []
    cursor = int(rng.integers(2, 5))
    for c in range(n_chains):
        for _ in range(int(lengths[c])):
            mentions.append(Mention(cursor, int(type_ids[c]), f"g{c}"))
            cursor += int(rng.integers(2, 5))
        cursor += int(rng.integers(12, 17))  # gap between chains, wider than
        # the attention window so far-apart chains share no context
    # Top-10% pruning must be able to reach every mention; keep documents
    # tight so the retained list is not dominated by non-mentions.
    n_tokens = max(cursor - int(rng.integers(6, 10)),
                   10 * len(mentions) + int(rng.integers(0, 4)))
    mention_tokens = {m.token_index: m for m in mentions}
    tokens = []
    for i in range(n_tokens):
        if i in mention_tokens:
            tokens.append(inventory.name(mention_tokens[i].event_type).lower())
        else:
            tokens.append(_FILLER[int(rng.integers(0, len(_FILLER)))])
    return Document(doc_id, tuple(tokens), tuple(mentions))


def generate_corpus(num_docs: int, seed: int, inventory: TypeInventory,
                    duplicate_type_fraction: float = 0.5,
                    prefix: str = "synth", **kwargs) -> list[Document]:
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    docs = []
    for k in range(num_docs):
        duplicate = bool(rng.random() < duplicate_type_fraction)
        docs.append(generate_document(rng, f"{prefix}{k:03d}", inventory,
                                      duplicate_type=duplicate, **kwargs))
    return docs
