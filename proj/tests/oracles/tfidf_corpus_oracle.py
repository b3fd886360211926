"""Synthetic 20-document corpus and its brute-force df / idf / tf table.

Writes tests/fixtures/tfidf_corpus.txt (one document per line, stems
separated by spaces) and tests/fixtures/tfidf_golden.tsv:
  df <term> <count> <idf>      for every vocabulary term and one unseen term
  tf <doc> <term> <tf>         for every (document, vocabulary term) pair
Floats are written with repr() so they round-trip exactly."""
import math
import random
from pathlib import Path

fx = Path(__file__).resolve().parent.parent / "fixtures"
rng = random.Random(20)
vocab = ["armi", "battl", "british", "coloni", "congress", "constitut", "declar", "delawar", "feder",
         "franc", "freedom", "govern", "independ", "king", "liberti", "loyalist", "militia", "parliament",
         "patriot", "revolut", "soldier", "tax", "trade", "treati", "trenton", "victori", "war",
         "washington", "winter", "yorktown"]
docs = []
for _ in range(20):
    n = rng.randint(1, 40)
    docs.append([rng.choice(vocab) for _ in range(n)])

(fx / "tfidf_corpus.txt").write_text("".join(" ".join(d) + "\n" for d in docs))

N = len(docs)
lines = []
for term in sorted(vocab) + ["unseen"]:
    df = 0
    for d in docs:
        for t in d:
            if t == term:
                df += 1
                break
    lines.append(f"df\t{term}\t{df}\t{math.log((1 + N) / (1 + df)) + 1!r}")
for i, d in enumerate(docs):
    for term in sorted(vocab):
        c = sum(1 for t in d if t == term)
        lines.append(f"tf\t{i}\t{term}\t{c / len(d)!r}")
(fx / "tfidf_golden.tsv").write_text("\n".join(lines) + "\n")
