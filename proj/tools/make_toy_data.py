#!/usr/bin/env python3
"""Regenerates the bundled toy corpus in data/toy (seeded, committed as static files)."""
import random
from pathlib import Path

SEED = 20240611
OUT = Path(__file__).resolve().parent.parent / "data" / "toy"

L1_WORDS = [
    "miro", "tavi", "suno", "kelo", "brin", "dala", "fenu", "gorim",
    "haleth", "ipon", "jara", "komu", "lirun", "maseth", "noru", "pelin",
    "quano", "rilem", "sovat", "tumeri", "ulno", "varin", "weslo", "xilam",
    "yorun", "zemal", "abrin", "colveth", "drimo", "elvun",
]
# one CJK character per L1 word, BMP unified ideographs
L2_CHARS = [chr(0x4E00 + 17 * k + 3) for k in range(len(L1_WORDS))]
TRANS = dict(zip(L1_WORDS, L2_CHARS))


def make_pair(rng):
    n = rng.randint(3, 8)
    words = [rng.choice(L1_WORDS) for _ in range(n)]
    l2 = [TRANS[w] for w in words]
    # occasional local reorder on the L2 side so not every span is switchable
    if n >= 4 and rng.random() < 0.4:
        i = rng.randrange(n - 1)
        l2[i], l2[i + 1] = l2[i + 1], l2[i]
    return words, l2


def make_cs(rng, l1, l2):
    out = list(l1)
    k = rng.randint(1, max(1, len(l1) // 3))
    for i in rng.sample(range(len(l1)), k):
        out[i] = TRANS[l1[i]]
    return out


def main():
    rng = random.Random(SEED)
    OUT.mkdir(parents=True, exist_ok=True)
    pairs = [make_pair(rng) for _ in range(200)]
    with open(OUT / "parallel.tsv", "w") as f:
        for l1, l2 in pairs:
            f.write(" ".join(l1) + "\t" + " ".join(l2) + "\n")
    cs = [make_cs(rng, l1, l2) for l1, l2 in pairs for _ in range(2)]
    rng.shuffle(cs)
    splits = {"cs.train.txt": cs[:300], "cs.valid.txt": cs[300:350], "cs.test.txt": cs[350:400]}
    for name, rows in splits.items():
        with open(OUT / name, "w") as f:
            for row in rows:
                f.write(" ".join(row) + "\n")
    with open(OUT / "mono.txt", "w") as f:
        for l1, _ in pairs[:50]:
            f.write(" ".join(l1) + "\n")


if __name__ == "__main__":
    main()
