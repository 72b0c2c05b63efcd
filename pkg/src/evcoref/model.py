"""Two-pass span-ranking scorer with type scores and gated refinement.

Pass 1 mixes and contextualizes the frozen embeddings, scores every
single-token span, keeps the top 10% as candidates, and scores candidate
pairs plus candidate/type pairs with shared feed-forward networks. The
type score distribution then refines each candidate representation
through a learned gate, and pass 2 rescores pairs and types from the
refined representations. Mention scores are computed once, in pass 1.

The score for the null antecedent is fixed at exactly 0 in both passes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autograd import (
    Parameter, Tensor, add, concat, gather_rows, matmul, mul, narrow,
    record_discrete, reshape, sigmoid, softmax, sub, transpose,
)
from .corpus import Document, TypeInventory
from .embeddings import LayeredEmbeddings
from .encoder import DEFAULT_WINDOW, mask_attention, scalar_mix
from .nn import FeedForward, FFNNConfig, apply_dropout, glorot

DUMMY_ANTECEDENT_SCORE = 0.0
NUM_DISTANCE_BUCKETS = 10


class ModelConfigError(ValueError):
    """Architecture settings that cannot be realized."""


class EmbeddingMismatchError(ValueError):
    """Document and embeddings (or model and embeddings) disagree on shape."""


@dataclass(frozen=True)
class ModelConfig:
    dim: int                      # embedding width d
    layers: int                   # encoder layer count L
    num_types: int
    window: int = DEFAULT_WINDOW
    top_span_ratio: float = 0.1
    max_antecedents: int = 50
    ffnn_hidden_layers: int = 2
    ffnn_hidden_units: int = 150
    ffnn_dropout: float = 0.2
    word_dropout: float = 0.5
    distance_dim: int = 20
    distance_kind: str = "ordinal"  # or "token"
    refine: bool = True

    def validate(self) -> "ModelConfig":
        if self.dim < 2 or self.dim % 2 != 0:
            raise ModelConfigError(
                f"embedding width must be even and >= 2 (type embeddings are "
                f"two d/2 halves); got {self.dim}"
            )
        if self.layers < 1:
            raise ModelConfigError("layer count must be >= 1")
        if self.num_types < 1:
            raise ModelConfigError("need at least one event type")
        if self.window < 1:
            raise ModelConfigError("attention window must be >= 1")
        if self.distance_kind not in ("ordinal", "token"):
            raise ModelConfigError(f"unknown distance kind {self.distance_kind!r}")
        if not 0.0 < self.top_span_ratio <= 1.0:
            raise ModelConfigError("top_span_ratio must be in (0, 1]")
        return self


def distance_bucket(dist: int) -> int:
    """Bucket a non-negative distance: {0,1,2,3,4,5-7,8-15,16-31,32-63,64+}."""
    if dist < 0:
        raise ValueError("distance must be non-negative")
    if dist <= 4:
        return dist
    if dist <= 7:
        return 5
    if dist <= 15:
        return 6
    if dist <= 31:
        return 7
    if dist <= 63:
        return 8
    return 9


_distance_bucket_vec = np.vectorize(distance_bucket, otypes=[np.intp])


def select_top_l(mention_scores: np.ndarray, n: int, ratio: float = 0.1) -> np.ndarray:
    """Indices of the l = max(1, floor(ratio*n)) best spans, in document order.

    Ties at the cutoff keep the earlier span.
    """
    keep = max(1, math.floor(ratio * n + 1e-9))
    order = np.argsort(-mention_scores, kind="stable")[:keep]
    retained = np.sort(order)
    record_discrete(retained)
    return retained


def type_distribution(type_scores: Tensor) -> Tensor:
    """Softmax over the event types plus the null option (score 0, last column)."""
    rows = type_scores.shape[0]
    null_col = Tensor(np.full((rows, 1), DUMMY_ANTECEDENT_SCORE))
    return softmax(concat([type_scores, null_col], axis=1), axis=1)


def refine_representations(reps: Tensor, q: Tensor, type_emb: Tensor,
                           gate_matrix: Parameter) -> tuple[Tensor, Tensor, Tensor]:
    """Expected-type mixing plus a sigmoid gate.

    Returns (expected, gate, refined) where expected = q_types @ type_emb
    + q_null * reps, gate = sigmoid([reps, expected] @ W^T) and refined =
    gate*reps + (1-gate)*expected.
    """
    num_types = type_emb.shape[0]
    q_types = narrow(q, 1, 0, num_types)
    q_null = narrow(q, 1, num_types, num_types + 1)
    expected = add(matmul(q_types, type_emb), mul(q_null, reps))
    gate = sigmoid(matmul(concat([reps, expected], axis=1), transpose(gate_matrix)))
    refined = add(mul(gate, reps), mul(sub(Tensor(1.0), gate), expected))
    return expected, gate, refined


@dataclass
class PassTensors:
    """One scoring pass over the retained spans (graph nodes, not values)."""

    pair_similarity: Tensor        # (P,)  pair FFNN outputs
    pair_scores: Tensor            # (P,)  full antecedent scores
    pair_span: np.ndarray          # (P,)  retained position of the later span
    pair_antecedent: np.ndarray    # (P,)  retained position of the candidate
    span_slices: list[tuple[int, int]]  # per retained span: [start, stop) into P
    type_similarity: Tensor        # (l, T)
    type_scores: Tensor            # (l, T)


@dataclass
class ScoreTable:
    """Plain-array view of one pass, as consumed by decoding and tests."""

    spans: tuple[int, ...]                    # token indices, document order
    mention_scores: np.ndarray                # (l,)
    candidates: tuple[tuple[int, ...], ...]   # per span: retained positions
    pair_scores: tuple[np.ndarray, ...]
    pair_similarity: tuple[np.ndarray, ...]
    type_scores: np.ndarray                   # (l, T)
    type_similarity: np.ndarray               # (l, T)
    type_mention_scores: np.ndarray           # (T,)
    dummy_score: float = DUMMY_ANTECEDENT_SCORE

    def __len__(self) -> int:
        return len(self.spans)


@dataclass
class ForwardResult:
    doc: Document
    retained: np.ndarray               # token indices of retained spans
    mention_scores: Tensor             # (n,) over all token spans
    retained_mention_scores: Tensor    # (l,)
    type_mention_scores: Tensor        # (T,)
    first: PassTensors
    refined: PassTensors
    reps: Tensor                       # (l, d) pass-1 representations
    refined_reps: Tensor | None        # (l, d) or None in no-refine mode
    q: Tensor | None                   # (l, T+1) type distribution
    gate: Tensor | None                # (l, d)
    expected_type_rep: Tensor | None   # (l, d)

    def _table(self, p: PassTensors) -> ScoreTable:
        cands, scores, sims = [], [], []
        for start, stop in p.span_slices:
            cands.append(tuple(int(x) for x in p.pair_antecedent[start:stop]))
            scores.append(p.pair_scores.data[start:stop].copy())
            sims.append(p.pair_similarity.data[start:stop].copy())
        return ScoreTable(
            spans=tuple(int(t) for t in self.retained),
            mention_scores=self.retained_mention_scores.data.copy(),
            candidates=tuple(cands),
            pair_scores=tuple(scores),
            pair_similarity=tuple(sims),
            type_scores=p.type_scores.data.copy(),
            type_similarity=p.type_similarity.data.copy(),
            type_mention_scores=self.type_mention_scores.data.copy(),
        )

    def tables(self) -> tuple[ScoreTable, ScoreTable]:
        first = self._table(self.first)
        refined = first if self.refined is self.first else self._table(self.refined)
        return first, refined


class CorefModel:
    """All trainable tensors plus the two-pass forward computation."""

    def __init__(self, config: ModelConfig, inventory: TypeInventory,
                 seed: int = 0, init: str = "glorot"):
        config.validate()
        if config.num_types != len(inventory):
            raise ModelConfigError(
                f"config says {config.num_types} types, inventory has {len(inventory)}"
            )
        self.config = config
        self.inventory = inventory
        d = config.dim
        half = d // 2
        rng = np.random.default_rng(np.random.SeedSequence(seed)) if init == "glorot" else None
        if init not in ("glorot", "zeros"):
            raise ModelConfigError(f"unknown init {init!r}")

        def table(name, rows, cols):
            data = glorot(rng, rows, cols) if rng is not None else np.zeros((rows, cols))
            return Parameter(name, data)

        # Mix starts neutral regardless of init: uniform layer weights, gamma 1.
        self.mix_logits = Parameter("mix.logits", np.zeros(config.layers))
        self.mix_gamma = Parameter("mix.gamma", np.asarray(1.0))
        ffnn = dict(hidden_layers=config.ffnn_hidden_layers,
                    hidden_units=config.ffnn_hidden_units,
                    dropout=config.ffnn_dropout)
        self.mention_ffnn = FeedForward("mention_ffnn", FFNNConfig(d, **ffnn), rng)
        pair_width = 3 * d + config.distance_dim
        self.pair_ffnn = FeedForward("pair_ffnn", FFNNConfig(pair_width, **ffnn), rng)
        self.type_shared = Parameter(
            "type.shared",
            glorot(rng, 1, half, shape=(half,)) if rng is not None else np.zeros(half))
        self.type_table = table("type.table", config.num_types, half)
        self.type_proj = table("type.proj", d, d)
        self.gate_matrix = table("gate.matrix", d, 2 * d)
        self.distance_table = table("distance.table", NUM_DISTANCE_BUCKETS, config.distance_dim)

    def parameters(self) -> list[Parameter]:
        params = [self.mix_logits, self.mix_gamma]
        params += self.mention_ffnn.parameters()
        params += self.pair_ffnn.parameters()
        params += [self.type_shared, self.type_table, self.type_proj,
                   self.gate_matrix, self.distance_table]
        return params

    def param(self, name: str) -> Parameter:
        for p in self.parameters():
            if p.name == name:
                return p
        raise KeyError(name)

    def type_embeddings(self) -> Tensor:
        """One width-d vector per event type; the shared half is common to all."""
        num_types = self.config.num_types
        shared = gather_rows(reshape(self.type_shared, (1, -1)),
                             np.zeros(num_types, dtype=np.intp))
        stacked = concat([shared, self.type_table], axis=1)       # (T, d)
        return matmul(stacked, transpose(self.type_proj))         # (T, d)

    def mention_scores(self, reps: Tensor, training: bool = False,
                       rng: np.random.Generator | None = None) -> Tensor:
        return self.mention_ffnn(reps, training=training, rng=rng)

    def _candidate_windows(self, num_spans: int) -> list[range]:
        cap = self.config.max_antecedents
        return [range(max(0, p - cap), p) for p in range(num_spans)]

    def _score_pass(self, reps: Tensor, retained_mention: Tensor,
                    type_mention: Tensor, type_emb: Tensor,
                    retained_tokens: np.ndarray, windows: list[range],
                    training: bool, rng) -> PassTensors:
        num_spans = reps.shape[0]
        num_types = self.config.num_types
        span_idx: list[int] = []
        ante_idx: list[int] = []
        slices: list[tuple[int, int]] = []
        for p, window in enumerate(windows):
            start = len(span_idx)
            span_idx.extend([p] * len(window))
            ante_idx.extend(window)
            slices.append((start, len(span_idx)))
        span_arr = np.asarray(span_idx, dtype=np.intp)
        ante_arr = np.asarray(ante_idx, dtype=np.intp)
        if self.config.distance_kind == "ordinal":
            dist = span_arr - ante_arr
        else:
            dist = retained_tokens[span_arr] - retained_tokens[ante_arr]
        buckets = _distance_bucket_vec(dist) if dist.size else dist.astype(np.intp)

        later = gather_rows(reps, span_arr)
        earlier = gather_rows(reps, ante_arr)
        pair_features = concat(
            [later, earlier, mul(later, earlier),
             gather_rows(self.distance_table, buckets)], axis=1)
        pair_similarity = self.pair_ffnn(pair_features, training=training, rng=rng)
        pair_scores = add(
            add(gather_rows(retained_mention, span_arr),
                gather_rows(retained_mention, ante_arr)),
            pair_similarity)

        span_rep_idx = np.repeat(np.arange(num_spans, dtype=np.intp), num_types)
        type_rep_idx = np.tile(np.arange(num_types, dtype=np.intp), num_spans)
        span_reps = gather_rows(reps, span_rep_idx)
        type_reps = gather_rows(type_emb, type_rep_idx)
        zero_bucket = np.zeros(num_spans * num_types, dtype=np.intp)
        type_features = concat(
            [span_reps, type_reps, mul(span_reps, type_reps),
             gather_rows(self.distance_table, zero_bucket)], axis=1)
        type_similarity_flat = self.pair_ffnn(type_features, training=training, rng=rng)
        type_scores_flat = add(
            add(gather_rows(retained_mention, span_rep_idx),
                gather_rows(type_mention, type_rep_idx)),
            type_similarity_flat)
        return PassTensors(
            pair_similarity=pair_similarity,
            pair_scores=pair_scores,
            pair_span=span_arr,
            pair_antecedent=ante_arr,
            span_slices=slices,
            type_similarity=reshape(type_similarity_flat, (num_spans, num_types)),
            type_scores=reshape(type_scores_flat, (num_spans, num_types)),
        )

    def forward(self, doc: Document, emb: LayeredEmbeddings,
                training: bool = False, rng: np.random.Generator | None = None,
                mode: str | None = None) -> ForwardResult:
        """Run both passes. ``mode`` is "full" or "no-refine"; None follows
        the model config."""
        if emb.n != len(doc.tokens):
            raise EmbeddingMismatchError(
                f"document {doc.doc_id!r} has {len(doc.tokens)} tokens but "
                f"embeddings cover {emb.n}")
        if emb.layers != self.config.layers or emb.dim != self.config.dim:
            raise EmbeddingMismatchError(
                f"model expects {self.config.layers} layers x {self.config.dim} dims, "
                f"embeddings are {emb.layers} x {emb.dim}")
        if mode is None:
            mode = "full" if self.config.refine else "no-refine"
        if mode not in ("full", "no-refine"):
            raise ValueError(f"unknown forward mode {mode!r}")

        mixed = scalar_mix(emb, self.mix_logits, self.mix_gamma)
        if training and self.config.word_dropout > 0.0 and rng is not None:
            mixed = apply_dropout(mixed, self.config.word_dropout, rng)
        contextual = mask_attention(mixed, self.config.window)

        mention_all = self.mention_scores(contextual, training=training, rng=rng)
        retained = select_top_l(mention_all.data, len(doc.tokens),
                                self.config.top_span_ratio)
        reps = gather_rows(contextual, retained)
        retained_mention = gather_rows(mention_all, retained)
        type_emb = self.type_embeddings()
        type_mention = self.mention_scores(type_emb, training=training, rng=rng)
        windows = self._candidate_windows(len(retained))

        first = self._score_pass(reps, retained_mention, type_mention, type_emb,
                                 retained, windows, training, rng)
        if mode == "no-refine":
            return ForwardResult(
                doc=doc, retained=retained, mention_scores=mention_all,
                retained_mention_scores=retained_mention,
                type_mention_scores=type_mention, first=first, refined=first,
                reps=reps, refined_reps=None, q=None, gate=None,
                expected_type_rep=None)

        q = type_distribution(first.type_scores)
        expected, gate, refined_reps = refine_representations(
            reps, q, type_emb, self.gate_matrix)
        refined = self._score_pass(refined_reps, retained_mention, type_mention,
                                   type_emb, retained, windows, training, rng)
        return ForwardResult(
            doc=doc, retained=retained, mention_scores=mention_all,
            retained_mention_scores=retained_mention,
            type_mention_scores=type_mention, first=first, refined=refined,
            reps=reps, refined_reps=refined_reps, q=q, gate=gate,
            expected_type_rep=expected)

    def full_forward(self, doc: Document, emb: LayeredEmbeddings,
                     mode: str | None = None) -> tuple[ScoreTable, ScoreTable]:
        """Inference-mode scoring; returns (first-pass, refined) tables."""
        return self.forward(doc, emb, training=False, mode=mode).tables()
