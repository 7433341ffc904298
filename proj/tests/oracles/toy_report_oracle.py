#!/usr/bin/env python3
"""Expected report cells for the toy dry run.

Reads the generation records and cleaned corpus of a toy run and recomputes
every metric from the formulas: lexical scores via lexical_oracle, cosine and
BERTScore from the hashed stub vectors, NAR from hand labels and LLM Eval from
the mock judge rule (the longer answer wins, the golden answer is rephrased
verbatim). The result is frozen in tests/data/toy_expected_report.json.

usage: toy_report_oracle.py <run output dir> <expected json>
"""
import json
import math
import sys
from pathlib import Path

import lexical_oracle as lex

MASK = (1 << 64) - 1
DIM = 64

STRATEGIES = [
    ("EXPERT_ONLY", "Expert"),
    ("LLM_ONLY", "LLM"),
    ("LLM_BM25", "+BM25"),
    ("LLM_EXPERT", "+Expert"),
    ("LLM_BM25_EXPERT", "+BM25 & Expert"),
]
METRICS = ["bleu", "rouge1", "rouge2", "rougeL", "cosine_sim",
           "bertscore_p", "bertscore_r", "bertscore_f1", "nar", "llm_eval"]
REFUSAL_OPENING = "I'm sorry, but I'm not sure what you mean"


def fnv1a(data):
    h = 0xcbf29ce484222325
    for byte in data.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001b3) & MASK
    return h


def splitmix(x):
    x = (x + 0x9e3779b97f4a7c15) & MASK
    x = ((x ^ (x >> 30)) * 0xbf58476d1ce4e5b9) & MASK
    x = ((x ^ (x >> 27)) * 0x94d049bb133111eb) & MASK
    return x ^ (x >> 31)


def term_vec(term):
    seed = fnv1a(term)
    return [(splitmix((seed + d) & MASK) >> 11) / 2.0 ** 53 * 2.0 - 1.0 for d in range(DIM)]


def cos(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def clamp(x):
    return min(1.0, max(0.0, x))


def cosine_sim(cand, ref):
    def sentence(text):
        out = [0.0] * DIM
        for t in lex.terms(text):
            out = [o + v for o, v in zip(out, term_vec(t))]
        return out
    return clamp(cos(sentence(cand), sentence(ref)))


def bertscore(cand, ref):
    c = [term_vec(t) for t in lex.terms(cand)]
    r = [term_vec(t) for t in lex.terms(ref)]
    if not c or not r:
        return 0.0, 0.0, 0.0
    sim = [[cos(x, y) for y in r] for x in c]
    p = clamp(sum(max(row) for row in sim) / len(c))
    rr = clamp(sum(max(sim[i][j] for i in range(len(c))) for j in range(len(r))) / len(r))
    f = 2 * p * rr / (p + rr) if p + rr > 0 else 0.0
    return p, rr, f


def score(cand, ref):
    p, r, f = bertscore(cand, ref)
    return {
        "bleu": float(lex.bleu(cand, ref)),
        "rouge1": float(lex.rouge_n(cand, ref, 1)),
        "rouge2": float(lex.rouge_n(cand, ref, 2)),
        "rougeL": float(lex.rouge_l(cand, ref)),
        "cosine_sim": cosine_sim(cand, ref),
        "bertscore_p": p,
        "bertscore_r": r,
        "bertscore_f1": f,
        "nar": 1.0 if cand.startswith(REFUSAL_OPENING) else 0.0,
        "llm_eval": 1.0 if len(cand.encode("utf-8")) > len(ref.encode("utf-8")) else 0.0,
    }


def cell(metric, v):
    return "%.2f%%" % (v * 100) if metric in ("nar", "llm_eval") else "%.4f" % v


def main():
    run, target = Path(sys.argv[1]), Path(sys.argv[2])
    golden = {}
    with open(run / "clean" / "corpus.jsonl", encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            golden[rec["id"]] = rec["answer"]
    test_ids = json.loads((run / "split.json").read_text())["test"]

    values = {}
    for name, label in STRATEGIES:
        with open(run / "records" / (name + ".jsonl"), encoding="utf-8") as f:
            records = [json.loads(line) for line in f]
        assert sorted(r["question_id"] for r in records) == sorted(test_ids)
        per = [score(r["response"], golden[r["question_id"]]) for r in records]
        values[label] = {m: sum(s[m] for s in per) / len(per) for m in METRICS}

    cells, best = {}, {}
    for m in METRICS:
        # compared as displayed, so equal-looking cells tie
        shown = {label: round(values[label][m] * 1e4) for _, label in STRATEGIES}
        target_value = min(shown.values()) if m == "nar" else max(shown.values())
        best[m] = [label for _, label in STRATEGIES if shown[label] == target_value]
        cells[m] = {label: cell(m, values[label][m]) for _, label in STRATEGIES}

    out = {"test_ids": test_ids, "values": values, "cells": cells, "best": best}
    target.write_text(json.dumps(out, indent=2, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
