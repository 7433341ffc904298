#!/usr/bin/env python3
"""Reference BLEU-4 / ROUGE-1/2/L values for the fixture pairs.

Written straight from the formulas, sharing no code with the C++ build.
Run once; the output is frozen in tests/data/lexical_expected.json.
"""
import json
import math
import re
import sys
from collections import Counter
from fractions import Fraction

WORD = re.compile(rb"[A-Za-z0-9_\x80-\xff]+")

PAIRS = [
    ("the cat sat", "the cat sat down"),
    ("a b c", "a x c"),
    ("The Storage account key was rotated.", "Rotate the storage account key, then restart the app."),
    ("the the the the", "the cat is on the mat"),
    ("Use az vm list --output table to list VMs", "Run `az vm list -o table` to list all virtual machines"),
    ("yes", "Yes, this is the expected behavior."),
    ("completely unrelated words here", "nothing overlaps with that sentence"),
    ("Go to Azure Portal > Subscriptions > Usage + quotas and request an increase for the region",
     "Open the portal, pick Usage + quotas under Subscriptions, select the region and request a quota increase"),
    ("You need the Contributor role on the resource group. You need the role.",
     "Assign the Contributor role at resource group scope"),
    ("Ähnlich: café résumé naïve café", "café naïve résumé"),
]


def terms(text):
    # bytes.lower() folds ASCII only, matching the documented term rule
    return [t.lower().decode("utf-8", "surrogateescape") for t in WORD.findall(text.encode("utf-8"))]


def ngrams(seq, n):
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def overlap(c, r):
    return sum(min(k, r[g]) for g, k in c.items())


def bleu(cand, ref):
    c, r = terms(cand), terms(ref)
    if not c:
        return 0.0
    logs = []
    for n in range(1, 5):
        m = overlap(ngrams(c, n), ngrams(r, n))
        total = max(len(c) - n + 1, 0)
        if n == 1:
            if m == 0:
                return 0.0
            logs.append(math.log(Fraction(m, total)))
        else:
            logs.append(math.log(Fraction(m + 1, total + 1)))
    bp = math.exp(1 - len(r) / len(c)) if len(c) < len(r) else 1.0
    return bp * math.exp(sum(logs) / 4)


def f1(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def rouge_n(cand, ref, n):
    c, r = terms(cand), terms(ref)
    if not c or not r:
        return 0.0
    if c == r:
        return 1.0
    m = overlap(ngrams(c, n), ngrams(r, n))
    if m == 0:
        return 0.0
    return float(f1(Fraction(m, len(c) - n + 1), Fraction(m, len(r) - n + 1)))


def lcs(a, b):
    # brute recursion with memo, independent of the DP table used in C++
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def rouge_l(cand, ref):
    c, r = terms(cand), terms(ref)
    if not c or not r:
        return 0.0
    k = lcs(tuple(c), tuple(r))
    if k == 0:
        return 0.0
    return float(f1(Fraction(k, len(c)), Fraction(k, len(r))))


def main():
    out = []
    for cand, ref in PAIRS:
        out.append({
            "candidate": cand,
            "reference": ref,
            "bleu": bleu(cand, ref),
            "rouge1": rouge_n(cand, ref, 1),
            "rouge2": rouge_n(cand, ref, 2),
            "rougeL": rouge_l(cand, ref),
        })
    json.dump(out, sys.stdout, indent=2, ensure_ascii=False)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
