"""Acceptance suite: one test per release criterion.

Each test prints a [PASS]/[FAIL] line, so `pytest -s tests/test_acceptance.py`
doubles as the acceptance report. Budgets are wall-clock seconds on a
desktop CPU.
"""
import statistics
import subprocess
import sys
import time

import numpy as np
import pytest

from evcoref.corpus import TypeInventory, gold_chains, write_predictions
from evcoref.decode import best_type, classify_non_mention, decode
from evcoref.embeddings import SynthEmbeddings, synth_embeddings
from evcoref.metrics import brute_force_ceaf, b_cubed, ceaf_e, evaluate_pairs, muc
from evcoref.model import CorefModel, ModelConfig
from evcoref.nn import finite_difference_check
from evcoref.synthcorpus import generate_corpus
from evcoref.training import TrainConfig, document_objective, evaluate_model, run_training

from conftest import make_doc
from test_decode import random_table

GRADIENT_BUDGET_S = 30.0
METRIC_BUDGET_S = 60.0
OVERFIT_BUDGET_S = 600.0


def report(name: str, ok: bool, detail: str = "") -> None:
    marker = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{marker}] {name}{suffix}")


def test_gradient_fidelity(inventory):
    started = time.monotonic()
    doc = make_doc("grad", 10, mentions=[(1, 2, "a"), (4, 2, "a"), (7, 5, "b")])
    emb = synth_embeddings(doc, seed=3, layers=2, dim=8, type_signal=2.0)
    config = ModelConfig(dim=8, layers=2, num_types=18, top_span_ratio=0.5)
    model = CorefModel(config, inventory, seed=0)
    objective = lambda: document_objective(
        model, doc, emb, TrainConfig(), training=False)
    error = finite_difference_check(objective, model.parameters(),
                                    max_coords=200, seed=0)
    elapsed = time.monotonic() - started
    ok = error < 1e-3 and elapsed < GRADIENT_BUDGET_S
    report("gradient fidelity", ok,
           f"max rel err {error:.2e}, {elapsed:.1f}s")
    assert error < 1e-3
    assert elapsed < GRADIENT_BUDGET_S


def _random_partition(rng, items, max_chains):
    labels = rng.integers(0, max_chains, size=len(items))
    chains = {}
    for item, label in zip(items, labels):
        chains.setdefault(int(label), set()).add(item)
    return list(chains.values())


def test_metric_oracle_equivalence():
    started = time.monotonic()
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(1000):
        universe = [f"m{i}" for i in range(int(rng.integers(1, 13)))]
        gold = _random_partition(rng, universe, 5)
        sys_items = universe[:int(rng.integers(1, len(universe) + 1))]
        sys = _random_partition(rng, sys_items, 5)
        if ceaf_e(gold, sys) != brute_force_ceaf(gold, sys):
            mismatches += 1

    got_muc = muc([{"a", "b", "c", "d"}], [{"a", "b"}, {"c", "d"}])
    muc_ok = (abs(got_muc.r - 2 / 3) < 1e-9 and abs(got_muc.p - 1.0) < 1e-9
              and abs(got_muc.f1 - 0.8) < 1e-9)
    got_b3 = b_cubed([{"a", "b", "c"}, {"d"}], [{"a", "b"}, {"c", "d"}])
    b3_ok = (abs(got_b3.p - 0.75) < 1e-9 and abs(got_b3.r - 2 / 3) < 1e-9
             and abs(got_b3.f1 - 12 / 17) < 1e-9)
    elapsed = time.monotonic() - started
    ok = mismatches == 0 and muc_ok and b3_ok and elapsed < METRIC_BUDGET_S
    report("metric oracle equivalence", ok,
           f"{mismatches} mismatches/1000, {elapsed:.1f}s")
    assert mismatches == 0
    assert muc_ok and b3_ok
    assert elapsed < METRIC_BUDGET_S


def test_perfect_score_sanity(inventory):
    docs = generate_corpus(10, seed=77, inventory=inventory)
    assert any(len(c.tokens) > 1 for d in docs for c in gold_chains(d).chains)
    pairs = [(gold_chains(d), gold_chains(d)) for d in docs]
    got = evaluate_pairs(pairs)
    values = (got.muc.f1, got.b_cubed.f1, got.ceaf_e.f1, got.blanc.f1,
              got.types.f1, got.avg_f)
    ok = all(v == 1.0 for v in values)
    report("perfect-score sanity", ok, f"scores {values}")
    assert all(v == 1.0 for v in values)


OVERFIT_EMBEDDING = dict(layers=6, dim=64, type_signal=12.0)


def _overfit_corpus(inventory, seed=11, num_docs=20):
    return generate_corpus(num_docs, seed=seed, inventory=inventory,
                           min_chains=4, max_chains=5,
                           min_chain_len=2, max_chain_len=3)


def test_overfit_reproduction(inventory):
    started = time.monotonic()
    docs = _overfit_corpus(inventory)
    source = SynthEmbeddings(seed=11, **OVERFIT_EMBEDDING)
    model_config = ModelConfig(dim=OVERFIT_EMBEDDING["dim"],
                               layers=OVERFIT_EMBEDDING["layers"],
                               num_types=len(inventory))
    outcomes = []
    for seed in (0, 1):
        result = run_training(docs, docs, source, inventory, model_config,
                              TrainConfig(seed=seed))
        outcomes.append((result.best_avg_f, result.best_report.types.f1,
                         result.best_epoch))
    elapsed = time.monotonic() - started
    ok = all(a >= 0.95 and t >= 0.95 for a, t, _ in outcomes)
    ok = ok and elapsed < OVERFIT_BUDGET_S
    report("overfit reproduction", ok,
           "; ".join(f"seed avg_f={a:.3f} type_f1={t:.3f} @epoch {e}"
                     for a, t, e in outcomes) + f"; {elapsed:.0f}s")
    for avg, typed, _ in outcomes:
        assert avg >= 0.95
        assert typed >= 0.95
    assert elapsed < OVERFIT_BUDGET_S


def test_ablation_directionality(inventory):
    full_scores, naive_scores, norefine_scores, typerule_scores = [], [], [], []
    model_config = ModelConfig(dim=OVERFIT_EMBEDDING["dim"],
                               layers=OVERFIT_EMBEDDING["layers"],
                               num_types=len(inventory))
    for seed in range(5):
        docs = generate_corpus(26, seed=100 + seed, inventory=inventory,
                               min_chains=4, max_chains=5,
                               min_chain_len=2, max_chain_len=3,
                               duplicate_type_fraction=0.3)
        train, heldout = docs[:16], docs[16:]
        source = SynthEmbeddings(seed=100 + seed, **OVERFIT_EMBEDDING)
        result = run_training(train, train, source, inventory, model_config,
                              TrainConfig(seed=seed))
        model = result.model
        full_scores.append(evaluate_model(heldout, source, model).avg_f)
        naive_scores.append(
            evaluate_model(heldout, source, model, decode_mode="naive").avg_f)
        norefine_scores.append(
            evaluate_model(heldout, source, model, mode="no-refine").avg_f)
        typerule_scores.append(
            evaluate_model(heldout, source, model, decode_mode="type-rule").avg_f)
    med = statistics.median
    full, naive = med(full_scores), med(naive_scores)
    norefine, typerule = med(norefine_scores), med(typerule_scores)
    ok = full >= naive and full >= norefine and full > typerule
    report("ablation directionality", ok,
           f"median avg_f: full={full:.3f} naive={naive:.3f} "
           f"no-refine={norefine:.3f} type-rule={typerule:.3f}")
    assert full >= naive
    assert full >= norefine
    assert full > typerule


def test_decoding_invariants_bulk():
    rng = np.random.default_rng(9)
    violations = 0
    trials = 100_000
    for _ in range(trials):
        table = random_table(rng, max_spans=6, n_types=3)
        chains = decode(table)
        positions = {t: p for p, t in enumerate(table.spans)}
        unfiltered = {p for p in range(len(table))
                      if not classify_non_mention(table, p)}
        covered = []
        for chain in chains.chains:
            members = [positions[t] for t in chain.tokens]
            covered.extend(members)
            if members != sorted(members):
                violations += 1  # a link pointed forward
            if chain.event_type != best_type(table, members[0])[0]:
                violations += 1  # type not fixed at creation
        if sorted(covered) != sorted(unfiltered):
            violations += 1  # not a partition of the unfiltered spans
    ok = violations == 0
    report("decoding invariants", ok, f"{violations} violations/{trials}")
    assert violations == 0


def _run_cli(*args):
    return subprocess.run([sys.executable, "-m", "evcoref", *map(str, args)],
                          capture_output=True, text=True)


def test_determinism(tmp_path, inventory):
    docs = generate_corpus(3, seed=5, inventory=inventory, min_chains=2,
                           max_chains=2, min_chain_len=1, max_chain_len=2)
    corpus = tmp_path / "corpus.jsonl"
    write_predictions(docs, [gold_chains(d) for d in docs], corpus, inventory)

    def synth_to(target):
        out = _run_cli("synth", "--corpus", corpus, "--out", target,
                       "--layers", "2", "--dim", "8", "--type-signal", "4",
                       "--seed", "9")
        assert out.returncode == 0, out.stderr
        return {p.name: p.read_bytes() for p in sorted(target.glob("*.e3ce"))}

    emb_a = synth_to(tmp_path / "emb_a")
    emb_b = synth_to(tmp_path / "emb_b")
    synth_ok = emb_a == emb_b

    def train_to(target):
        out = _run_cli("train", "--corpus", corpus,
                       "--embeddings", tmp_path / "emb_a", "--out", target,
                       "--max-epochs", "2", "--seed", "4")
        assert out.returncode == 0, out.stderr
        return (target / "train.log").read_bytes()

    log_a = train_to(tmp_path / "run_a")
    log_b = train_to(tmp_path / "run_b")
    train_ok = log_a == log_b

    def predict_to(target):
        out = _run_cli("predict", "--corpus", corpus,
                       "--embeddings", tmp_path / "emb_a",
                       "--checkpoint", tmp_path / "run_a" / "model.ckpt",
                       "--out", target)
        assert out.returncode == 0, out.stderr
        return target.read_bytes()

    pred_ok = predict_to(tmp_path / "p1.jsonl") == predict_to(tmp_path / "p2.jsonl")
    ok = synth_ok and train_ok and pred_ok
    report("determinism", ok,
           f"synth={synth_ok} train-log={train_ok} predictions={pred_ok}")
    assert synth_ok and train_ok and pred_ok
