"""Gold antecedent sets, the two training losses, and the training loop.

The objective is antecedent marginal log-likelihood plus a weighted
binary cross-entropy over mention scores, maximized with Adamax by
descending on its negation. The learning rate halves after
``anneal_patience`` epochs without dev improvement and training stops
after ``early_stop_patience`` of them; model selection is by dev AVG-F.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .autograd import NumericError, Tensor, add, concat, gather_rows, log, mul, narrow, reduce_sum, reshape, sigmoid, sub
from .autograd import clip as tensor_clip
from .autograd import logsumexp
from .corpus import ChainSet, Document, TypeInventory, gold_chains, truncate_document
from .decode import decode, naive_decode, predicted_typed_mentions, type_rule_decode
from .embeddings import LayeredEmbeddings
from .metrics import MetricReport, evaluate_pairs
from .model import CorefModel, ForwardResult, ModelConfig, PassTensors
from .nn import Adamax

SIGMOID_CLAMP = 1e-7

GOLD_EPS = "eps"
GOLD_TYPE = "type"
GOLD_SPANS = "spans"


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; defaults follow the published recipe."""

    proposal_weight: float = 1.0       # loss-mixing coefficient
    learning_rate: float = 0.001
    anneal_factor: float = 0.5
    anneal_patience: int = 5
    early_stop_patience: int = 10
    max_epochs: int = 150
    batch_size: int = 1
    max_doc_tokens: int = 1024
    seed: int = 0
    supervise_first_pass: bool = False


@dataclass(frozen=True)
class GoldSpec:
    """Gold assignment for one retained span: eps, a type, or span positions."""

    kind: str
    type_id: int = -1
    antecedents: tuple[int, ...] = ()


def gold_antecedent_sets(doc: Document, spans: Sequence[int],
                         candidates: Sequence[Sequence[int]]) -> list[GoldSpec]:
    """Gold assignments for the retained spans.

    A retained gold mention takes all its retained coreferential
    antecedents inside its candidate window; if there are none (chain
    start, pruned, or out of window) it takes its event type. Retained
    non-mentions take the null antecedent.
    """
    mention_at = {m.token_index: m for m in doc.mentions}
    chain_tokens: dict[str, list[int]] = {}
    for m in doc.mentions:
        chain_tokens.setdefault(m.chain_id, []).append(m.token_index)
    position_of = {tok: p for p, tok in enumerate(spans)}
    specs: list[GoldSpec] = []
    for p, tok in enumerate(spans):
        mention = mention_at.get(tok)
        if mention is None:
            specs.append(GoldSpec(GOLD_EPS))
            continue
        window = set(candidates[p])
        positions = sorted(
            position_of[t]
            for t in chain_tokens[mention.chain_id]
            if t < tok and t in position_of and position_of[t] in window
        )
        if positions:
            specs.append(GoldSpec(GOLD_SPANS, antecedents=tuple(positions)))
        else:
            specs.append(GoldSpec(GOLD_TYPE, type_id=mention.event_type))
    return specs


def antecedent_loss(scores: PassTensors, gold: Sequence[GoldSpec],
                    num_types: int) -> Tensor:
    """Sum over spans of log P(gold outcomes), with P a softmax over the
    span's candidates, the event types, and the null score 0."""
    terms = []
    for p, spec in enumerate(gold):
        start, stop = scores.span_slices[p]
        n_cands = stop - start
        span_scores = concat([
            narrow(scores.pair_scores, 0, start, stop),
            reshape(gather_rows(scores.type_scores, np.asarray([p])), (num_types,)),
            Tensor(np.zeros(1)),
        ])
        if spec.kind == GOLD_EPS:
            gold_idx = np.asarray([n_cands + num_types])
        elif spec.kind == GOLD_TYPE:
            gold_idx = np.asarray([n_cands + spec.type_id])
        elif spec.kind == GOLD_SPANS:
            first_candidate = int(scores.pair_antecedent[start]) if n_cands else 0
            gold_idx = np.asarray([a - first_candidate for a in spec.antecedents])
            if gold_idx.size == 0 or gold_idx.min() < 0 or gold_idx.max() >= n_cands:
                raise ValueError(f"gold antecedents outside candidate window at span {p}")
        else:
            raise ValueError(f"unknown gold kind {spec.kind!r}")
        term = sub(logsumexp(gather_rows(span_scores, gold_idx)),
                   logsumexp(span_scores))
        terms.append(reshape(term, (1,)))
    return reduce_sum(concat(terms))


def proposal_loss(mention_scores: Tensor, labels: np.ndarray) -> Tensor:
    """Binary cross-entropy over all spans, as a quantity to maximize.

    Sigmoid outputs are clamped to [1e-7, 1 - 1e-7] before the log.
    """
    labels = np.asarray(labels, dtype=np.float64)
    prob = sigmoid(mention_scores)
    pos = mul(Tensor(labels), log(tensor_clip(prob, SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)))
    neg = mul(Tensor(1.0 - labels),
              log(tensor_clip(sub(Tensor(1.0), prob), SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)))
    return reduce_sum(add(pos, neg))


def total_objective(antecedent: Tensor, proposal: Tensor, weight: float) -> Tensor:
    return add(antecedent, mul(proposal, Tensor(float(weight))))


def document_objective(model: CorefModel, doc: Document, emb: LayeredEmbeddings,
                       config: TrainConfig, training: bool = True,
                       rng: np.random.Generator | None = None,
                       forward: ForwardResult | None = None) -> Tensor:
    """Full per-document objective (both losses) on the model's output pass."""
    fwd = forward if forward is not None else model.forward(
        doc, emb, training=training, rng=rng)
    candidates = [fwd.refined.pair_antecedent[start:stop]
                  for start, stop in fwd.refined.span_slices]
    gold = gold_antecedent_sets(doc, [int(t) for t in fwd.retained], candidates)
    num_types = model.config.num_types
    ante = antecedent_loss(fwd.refined, gold, num_types)
    if config.supervise_first_pass and fwd.refined is not fwd.first:
        ante = add(ante, antecedent_loss(fwd.first, gold, num_types))
    labels = np.zeros(len(doc.tokens))
    for m in doc.mentions:
        labels[m.token_index] = 1.0
    prop = proposal_loss(fwd.mention_scores, labels)
    return total_objective(ante, prop, config.proposal_weight)


class PlateauSchedule:
    """Halves the lr on dev-score stagnation and stops on a longer one.

    An epoch "improves" when its dev score beats the previous epoch's;
    a run of ``anneal_patience`` non-improving epochs multiplies the lr
    by ``factor``, and a run of ``stop_patience`` of them sets
    ``should_stop``. Best-epoch bookkeeping (for checkpoint selection)
    is separate and tracks the best score overall.
    """

    def __init__(self, lr: float, factor: float, anneal_patience: int,
                 stop_patience: int):
        self.lr = lr
        self.factor = factor
        self.anneal_patience = anneal_patience
        self.stop_patience = stop_patience
        self.best = -math.inf
        self.previous = -math.inf
        self.stagnant = 0
        self.should_stop = False

    def update(self, score: float) -> bool:
        """Record an epoch's dev score; returns True on a new overall best.

        Ties with the current best count as records, so checkpoint
        selection prefers the most-trained model among equals.
        """
        record = score >= self.best
        if record:
            self.best = score
        if score > self.previous:
            self.stagnant = 0
        else:
            self.stagnant += 1
            if self.stagnant >= self.stop_patience:
                self.should_stop = True
            elif self.stagnant % self.anneal_patience == 0:
                self.lr *= self.factor
        self.previous = score
        return record


@dataclass
class EpochStats:
    epoch: int
    objective: float
    lr: float
    report: MetricReport


@dataclass
class TrainResult:
    model: CorefModel
    optimizer: Adamax
    config: TrainConfig
    history: list[EpochStats]
    best_epoch: int
    best_avg_f: float
    best_report: MetricReport
    log_lines: list[str]


def _log_line(stats: EpochStats) -> str:
    r = stats.report
    return ("epoch={epoch}\tobjective={objective!r}\tlr={lr!r}\t"
            "muc={muc!r}\tb3={b3!r}\tceafe={ceafe!r}\tblanc={blanc!r}\t"
            "avg_f={avg_f!r}\ttype_f1={type_f1!r}").format(
        epoch=stats.epoch, objective=stats.objective, lr=stats.lr,
        muc=r.muc.f1, b3=r.b_cubed.f1, ceafe=r.ceaf_e.f1, blanc=r.blanc.f1,
        avg_f=r.avg_f, type_f1=r.types.f1)


def predict_chains(docs: Sequence[Document], source, model: CorefModel,
                   decode_mode: str = "type-guided", mode: str | None = None,
                   workers: int = 1) -> list[ChainSet]:
    """Decode every document; deterministic, dropout off, documents whole."""

    def one(doc: Document) -> ChainSet:
        _, refined = model.full_forward(doc, source.get(doc), mode=mode)
        if decode_mode == "type-guided":
            return decode(refined)
        if decode_mode == "naive":
            return naive_decode(refined)
        if decode_mode == "type-rule":
            return type_rule_decode(predicted_typed_mentions(refined))
        raise ValueError(f"unknown decode mode {decode_mode!r}")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, docs))
    return [one(doc) for doc in docs]


def evaluate_model(docs: Sequence[Document], source, model: CorefModel,
                   decode_mode: str = "type-guided", mode: str | None = None,
                   workers: int = 1) -> MetricReport:
    predictions = predict_chains(docs, source, model, decode_mode=decode_mode,
                                 mode=mode, workers=workers)
    return evaluate_pairs([(gold_chains(doc), pred)
                           for doc, pred in zip(docs, predictions)])


def run_training(train_docs: Sequence[Document], dev_docs: Sequence[Document] | None,
                 source, inventory: TypeInventory, model_config: ModelConfig,
                 config: TrainConfig = TrainConfig(),
                 log: Callable[[str], None] | None = None) -> TrainResult:
    """Train from scratch, evaluating dev AVG-F each epoch.

    Long training documents are truncated (with their embeddings) to
    ``config.max_doc_tokens``; dev documents are used whole. Returns the
    model restored to its best-dev state.
    """
    if not train_docs:
        raise ValueError("empty training corpus")
    dev_docs = list(dev_docs) if dev_docs else list(train_docs)

    pairs: list[tuple[Document, LayeredEmbeddings]] = []
    for doc in train_docs:
        emb = source.get(doc)
        short = truncate_document(doc, config.max_doc_tokens)
        pairs.append((short, emb.truncated(config.max_doc_tokens)))

    model = CorefModel(model_config, inventory, seed=config.seed)
    optimizer = Adamax(model.parameters(), lr=config.learning_rate)
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(seeds[0])
    dropout_rng = np.random.default_rng(seeds[1])
    schedule = PlateauSchedule(config.learning_rate, config.anneal_factor,
                               config.anneal_patience, config.early_stop_patience)

    history: list[EpochStats] = []
    log_lines: list[str] = []
    best_epoch = 0
    best_avg_f = -math.inf
    best_report: MetricReport | None = None
    best_params: dict[str, np.ndarray] = {}
    best_opt_state: dict | None = None

    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(pairs))
        epoch_objective = 0.0
        for di in order:
            doc, emb = pairs[di]
            objective = document_objective(model, doc, emb, config,
                                           training=True, rng=dropout_rng)
            value = float(objective.data)
            if not math.isfinite(value):
                raise NumericError(
                    f"non-finite objective on document {doc.doc_id!r} "
                    f"at epoch {epoch}")
            optimizer.zero_grad()
            (-objective).backward()
            optimizer.step()
            epoch_objective += value

        report = evaluate_model(dev_docs, source, model)
        stats = EpochStats(epoch, epoch_objective, optimizer.lr, report)
        history.append(stats)
        line = _log_line(stats)
        log_lines.append(line)
        if log is not None:
            log(line)

        if schedule.update(report.avg_f):
            best_epoch = epoch
            best_avg_f = report.avg_f
            best_report = report
            best_params = {p.name: p.data.copy() for p in model.parameters()}
            best_opt_state = optimizer.state_dict()
        optimizer.lr = schedule.lr
        if schedule.should_stop:
            break

    if best_params:
        for p in model.parameters():
            p.data[...] = best_params[p.name]
        optimizer.load_state_dict(best_opt_state)
    assert best_report is not None
    return TrainResult(model=model, optimizer=optimizer, config=config,
                       history=history, best_epoch=best_epoch,
                       best_avg_f=best_avg_f, best_report=best_report,
                       log_lines=log_lines)
