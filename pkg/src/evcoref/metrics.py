"""Coreference evaluation: MUC, B-cubed, CEAF-e, BLANC, typed mention F1.

Chains are compared on bare mention identity (token index); event types
enter only the typed mention F1. Corpus scores are micro-aggregated: the
per-document link/mention/alignment counts are summed before the final
ratios. CEAF-e alignment sums are kept as exact fractions so the optimal
assignment equals the brute-force enumeration bit for bit.

Zero-denominator conventions: every ratio with a zero denominator is 0,
except BLANC components whose link sets are empty on both sides, which
are dropped from the average (and a document with no components at all
scores 1, the trivially-correct case).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import ChainSet


@dataclass(frozen=True)
class PRF:
    p: float
    r: float
    f1: float


@dataclass(frozen=True)
class MetricReport:
    muc: PRF
    b_cubed: PRF
    ceaf_e: PRF
    blanc: PRF
    avg_f: float
    types: PRF


def f1_score(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def _ratio(num, den) -> float:
    return float(num) / float(den) if den > 0 else 0.0


def _prf(p_num, p_den, r_num, r_den) -> PRF:
    p = _ratio(p_num, p_den)
    r = _ratio(r_num, r_den)
    return PRF(p, r, f1_score(p, r))


def as_chain_list(chains) -> list[frozenset]:
    """Accept a ChainSet or any iterable of mention collections."""
    if isinstance(chains, ChainSet):
        return [frozenset(c.tokens) for c in chains.chains]
    return [frozenset(c) for c in chains]


# ---------------------------------------------------------------- MUC

def _muc_half(a: list[frozenset], b: list[frozenset]) -> tuple[int, int]:
    owner = {m: k for k, chain in enumerate(b) for m in chain}
    num = den = 0
    for chain in a:
        partitions = {owner[m] for m in chain if m in owner}
        missing = sum(1 for m in chain if m not in owner)
        num += len(chain) - len(partitions) - missing
        den += len(chain) - 1
    return num, den


def muc_counts(gold, sys) -> tuple[int, int, int, int]:
    gold, sys = as_chain_list(gold), as_chain_list(sys)
    r_num, r_den = _muc_half(gold, sys)
    p_num, p_den = _muc_half(sys, gold)
    return p_num, p_den, r_num, r_den


def muc(gold, sys) -> PRF:
    return _prf(*muc_counts(gold, sys))


# ---------------------------------------------------------------- B-cubed

def _b3_half(a: list[frozenset], b: list[frozenset]) -> tuple[float, int]:
    owner = {m: chain for chain in b for m in chain}
    num = 0.0
    count = 0
    for chain in a:
        for m in chain:
            other = owner.get(m, frozenset())
            num += len(chain & other) / len(chain)
            count += 1
    return num, count


def b_cubed_counts(gold, sys) -> tuple[float, int, float, int]:
    gold, sys = as_chain_list(gold), as_chain_list(sys)
    p_num, p_den = _b3_half(sys, gold)
    r_num, r_den = _b3_half(gold, sys)
    return p_num, p_den, r_num, r_den


def b_cubed(gold, sys) -> PRF:
    return _prf(*b_cubed_counts(gold, sys))


# ---------------------------------------------------------------- CEAF-e

def _phi4(a: frozenset, b: frozenset) -> Fraction:
    return Fraction(2 * len(a & b), len(a) + len(b))


def ceaf_e_counts(gold, sys) -> tuple[Fraction, int, int]:
    """(optimal phi4 alignment sum, #sys chains, #gold chains)."""
    gold, sys = as_chain_list(gold), as_chain_list(sys)
    if not gold or not sys:
        return Fraction(0), len(sys), len(gold)
    matrix = np.array([[float(_phi4(g, s)) for s in sys] for g in gold])
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    total = sum((_phi4(gold[i], sys[j]) for i, j in zip(rows, cols)), Fraction(0))
    return total, len(sys), len(gold)


def ceaf_e(gold, sys) -> PRF:
    total, n_sys, n_gold = ceaf_e_counts(gold, sys)
    return _prf(total, n_sys, total, n_gold)


def brute_force_ceaf(gold, sys, max_chains: int = 8) -> PRF:
    """Exhaustive alignment oracle; must match :func:`ceaf_e` exactly."""
    gold, sys = as_chain_list(gold), as_chain_list(sys)
    if len(gold) > max_chains or len(sys) > max_chains:
        raise ValueError(f"brute-force guard: more than {max_chains} chains per side")
    if not gold or not sys:
        return _prf(Fraction(0), len(sys), Fraction(0), len(gold))
    small, large = (gold, sys) if len(gold) <= len(sys) else (sys, gold)
    best = Fraction(0)
    for assignment in permutations(range(len(large)), len(small)):
        total = sum((_phi4(small[i], large[j]) for i, j in enumerate(assignment)),
                    Fraction(0))
        if total > best:
            best = total
    return _prf(best, len(sys), best, len(gold))


# ---------------------------------------------------------------- BLANC

@dataclass(frozen=True)
class BlancCounts:
    coref_common: int
    coref_sys: int
    coref_gold: int
    non_common: int
    non_sys: int
    non_gold: int

    def __add__(self, other: "BlancCounts") -> "BlancCounts":
        return BlancCounts(
            self.coref_common + other.coref_common,
            self.coref_sys + other.coref_sys,
            self.coref_gold + other.coref_gold,
            self.non_common + other.non_common,
            self.non_sys + other.non_sys,
            self.non_gold + other.non_gold,
        )


_BLANC_ZERO = BlancCounts(0, 0, 0, 0, 0, 0)


def _coref_links(chains: list[frozenset]) -> set[frozenset]:
    links = set()
    for chain in chains:
        for a, b in combinations(sorted(chain, key=repr), 2):
            links.add(frozenset((a, b)))
    return links


def blanc_counts(gold, sys) -> BlancCounts:
    gold, sys = as_chain_list(gold), as_chain_list(sys)
    gold_links = _coref_links(gold)
    sys_links = _coref_links(sys)
    gold_owner = {m: k for k, c in enumerate(gold) for m in c}
    sys_owner = {m: k for k, c in enumerate(sys) for m in c}
    common = sorted(set(gold_owner) & set(sys_owner), key=repr)
    non_common = 0
    for a, b in combinations(common, 2):
        if gold_owner[a] != gold_owner[b] and sys_owner[a] != sys_owner[b]:
            non_common += 1

    def triangle(n: int) -> int:
        return n * (n - 1) // 2

    non_gold = triangle(len(gold_owner)) - len(gold_links)
    non_sys = triangle(len(sys_owner)) - len(sys_links)
    return BlancCounts(
        coref_common=len(gold_links & sys_links),
        coref_sys=len(sys_links),
        coref_gold=len(gold_links),
        non_common=non_common,
        non_sys=non_sys,
        non_gold=non_gold,
    )


def blanc_from_counts(counts: BlancCounts) -> PRF:
    components = []
    if counts.coref_gold or counts.coref_sys:
        p = _ratio(counts.coref_common, counts.coref_sys)
        r = _ratio(counts.coref_common, counts.coref_gold)
        components.append((p, r, f1_score(p, r)))
    if counts.non_gold or counts.non_sys:
        p = _ratio(counts.non_common, counts.non_sys)
        r = _ratio(counts.non_common, counts.non_gold)
        components.append((p, r, f1_score(p, r)))
    if not components:
        return PRF(1.0, 1.0, 1.0)
    p = sum(c[0] for c in components) / len(components)
    r = sum(c[1] for c in components) / len(components)
    f = sum(c[2] for c in components) / len(components)
    return PRF(p, r, f)


def blanc(gold, sys) -> PRF:
    return blanc_from_counts(blanc_counts(gold, sys))


# ---------------------------------------------------------------- typed F1

def type_f1_counts(gold_mentions: Iterable[tuple[int, int]],
                   predicted_mentions: Iterable[tuple[int, int]]) -> tuple[int, int, int]:
    gold = set(gold_mentions)
    pred = set(predicted_mentions)
    return len(gold & pred), len(pred), len(gold)


def type_f1(gold_mentions, predicted_mentions) -> PRF:
    tp, n_pred, n_gold = type_f1_counts(gold_mentions, predicted_mentions)
    return _prf(tp, n_pred, tp, n_gold)


# ---------------------------------------------------------------- aggregate

def avg_f(report: MetricReport) -> float:
    return (report.muc.f1 + report.b_cubed.f1 + report.ceaf_e.f1 + report.blanc.f1) / 4.0


def evaluate_pairs(pairs: Sequence[tuple[ChainSet, ChainSet]]) -> MetricReport:
    """Micro-aggregated report over (gold, system) chain-set pairs."""
    muc_totals = np.zeros(4)
    b3_totals = np.zeros(4)
    ceaf_num = Fraction(0)
    ceaf_sys = ceaf_gold = 0
    blanc_total = _BLANC_ZERO
    type_tp = type_pred = type_gold = 0
    for gold, sys in pairs:
        muc_totals += muc_counts(gold, sys)
        b3_totals += b_cubed_counts(gold, sys)
        num, n_sys, n_gold = ceaf_e_counts(gold, sys)
        ceaf_num += num
        ceaf_sys += n_sys
        ceaf_gold += n_gold
        blanc_total = blanc_total + blanc_counts(gold, sys)
        tp, n_pred, n_g = type_f1_counts(gold.typed_mentions(), sys.typed_mentions())
        type_tp += tp
        type_pred += n_pred
        type_gold += n_g
    muc_prf = _prf(*muc_totals)
    b3_prf = _prf(*b3_totals)
    ceaf_prf = _prf(ceaf_num, ceaf_sys, ceaf_num, ceaf_gold)
    blanc_prf = blanc_from_counts(blanc_total)
    types = _prf(type_tp, type_pred, type_tp, type_gold)
    report = MetricReport(
        muc=muc_prf, b_cubed=b3_prf, ceaf_e=ceaf_prf, blanc=blanc_prf,
        avg_f=0.0, types=types)
    return MetricReport(muc=muc_prf, b_cubed=b3_prf, ceaf_e=ceaf_prf,
                        blanc=blanc_prf, avg_f=avg_f(report), types=types)


def format_report(report: MetricReport) -> str:
    lines = [f"{'metric':<10} {'P':>8} {'R':>8} {'F1':>8}"]
    for name, prf in (("muc", report.muc), ("b_cubed", report.b_cubed),
                      ("ceaf_e", report.ceaf_e), ("blanc", report.blanc),
                      ("type_f1", report.types)):
        lines.append(f"{name:<10} {prf.p:>8.4f} {prf.r:>8.4f} {prf.f1:>8.4f}")
    lines.append(f"{'avg_f':<10} {'':>8} {'':>8} {report.avg_f:>8.4f}")
    return "\n".join(lines)


def machine_lines(report: MetricReport) -> list[str]:
    out = []
    for name, prf in (("muc", report.muc), ("b_cubed", report.b_cubed),
                      ("ceaf_e", report.ceaf_e), ("blanc", report.blanc),
                      ("type_f1", report.types)):
        out.append(f"{name}_p={prf.p!r}")
        out.append(f"{name}_r={prf.r!r}")
        out.append(f"{name}_f={prf.f1!r}")
    out.append(f"avg_f={report.avg_f!r}")
    return out
