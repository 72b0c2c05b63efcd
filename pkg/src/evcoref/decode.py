"""Chain construction from a refined score table.

Spans are processed in document order. A span whose available antecedent
scores and type scores are all <= 0 is a non-mention: it is dropped and
(by default) excluded from later antecedent candidacy. Otherwise the span
either joins its best antecedent's chain, when that score strictly beats
the span's best type score, or starts a new chain under its best type.

The naive variant ignores the type comparison and links on any positive
antecedent score; the type-rule variant simply merges all mentions of the
same predicted type.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .corpus import Chain, ChainSet
from .model import ScoreTable


def classify_non_mention(table: ScoreTable, i: int) -> bool:
    """True iff every available antecedent score and type score is <= 0."""
    return bool(np.all(table.pair_scores[i] <= 0.0)) and bool(
        np.all(table.type_scores[i] <= 0.0))


def best_antecedent(table: ScoreTable, i: int,
                    eligible: set[int]) -> tuple[int, float] | None:
    """Highest-scoring eligible candidate; ties go to the nearer span."""
    best: tuple[int, float] | None = None
    for k, q in enumerate(table.candidates[i]):
        if q not in eligible:
            continue
        score = float(table.pair_scores[i][k])
        if best is None or score >= best[1]:  # candidates come nearest-last
            best = (q, score)
    return best


def best_type(table: ScoreTable, i: int) -> tuple[int, float]:
    t = int(np.argmax(table.type_scores[i]))
    return t, float(table.type_scores[i][t])


class _ChainBuilder:
    def __init__(self, spans: Sequence[int]):
        self.spans = spans
        self.types: list[int] = []
        self.members: list[list[int]] = []
        self.chain_of: dict[int, int] = {}

    def start(self, position: int, event_type: int) -> None:
        self.chain_of[position] = len(self.members)
        self.types.append(event_type)
        self.members.append([position])

    def append(self, position: int, antecedent: int) -> None:
        chain = self.chain_of[antecedent]
        self.chain_of[position] = chain
        self.members[chain].append(position)

    def build(self) -> ChainSet:
        chains = [
            Chain(t, tuple(sorted(self.spans[p] for p in ms)))
            for t, ms in zip(self.types, self.members)
        ]
        chains.sort(key=lambda c: c.tokens[0])
        return ChainSet(tuple(chains))


def decode(table: ScoreTable, keep_filtered_candidates: bool = False) -> ChainSet:
    """Type-guided decoding.

    With ``keep_filtered_candidates`` (study mode), spans classified as
    non-mentions stay eligible as antecedents; one that wins an argmax and
    beats the type score is resurrected into a fresh chain at that point.
    """
    builder = _ChainBuilder(table.spans)
    eligible: set[int] = set()
    filtered: set[int] = set()
    for i in range(len(table)):
        if classify_non_mention(table, i):
            filtered.add(i)
            if keep_filtered_candidates:
                eligible.add(i)
            continue
        t_i, t_score = best_type(table, i)
        best = best_antecedent(table, i, eligible)
        if best is not None and best[1] > t_score:
            antecedent = best[0]
            if antecedent in filtered:  # only reachable in study mode
                a_type, _ = best_type(table, antecedent)
                builder.start(antecedent, a_type)
                filtered.discard(antecedent)
            builder.append(i, antecedent)
        else:
            builder.start(i, t_i)
        eligible.add(i)
    return builder.build()


def naive_decode(table: ScoreTable) -> ChainSet:
    """Best-antecedent decoding: link whenever the best score is positive."""
    builder = _ChainBuilder(table.spans)
    eligible: set[int] = set()
    for i in range(len(table)):
        if classify_non_mention(table, i):
            continue
        best = best_antecedent(table, i, eligible)
        if best is not None and best[1] > 0.0:
            builder.append(i, best[0])
        else:
            builder.start(i, best_type(table, i)[0])
        eligible.add(i)
    return builder.build()


def type_rule_decode(typed_mentions: Iterable[tuple[int, int]]) -> ChainSet:
    """One chain per event type present among the given (token, type) pairs."""
    by_type: dict[int, list[int]] = {}
    for token, event_type in typed_mentions:
        by_type.setdefault(event_type, []).append(token)
    chains = [Chain(t, tuple(sorted(toks))) for t, toks in by_type.items()]
    chains.sort(key=lambda c: c.tokens[0])
    return ChainSet(tuple(chains))


def predicted_typed_mentions(table: ScoreTable) -> list[tuple[int, int]]:
    """Detected mentions with their argmax types (type-rule input)."""
    out = []
    for i in range(len(table)):
        if classify_non_mention(table, i):
            continue
        out.append((table.spans[i], best_type(table, i)[0]))
    return out
