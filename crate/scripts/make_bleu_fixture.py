"""Regenerates crates/core/tests/data/bleu_reference.jsonl using NLTK's sentence_bleu."""
import json
import random
import warnings

from nltk.translate.bleu_score import sentence_bleu

warnings.filterwarnings("ignore")

VOCAB = (
    "what is the largest state in m0 which states border how many rivers run through "
    "where are cities longest river highest point population of capital lowest elevation "
    "name all count that flows a with greatest smallest area density"
).split()

BASE = [
    "what is the largest state in m0",
    "which states border m0",
    "how many rivers run through m0",
    "what is the longest river that flows through a state that borders m0",
    "where is m0",
    "what are the states that border the state with the greatest population",
    "what is the highest point in the state with the smallest population",
    "how many states are in the m0",
    "name all the rivers in m0",
    "what is the capital of m0",
]


def perturb(rng, tokens):
    tokens = list(tokens)
    for _ in range(rng.randint(1, 2)):
        op = rng.choice(["drop", "swap", "insert", "sub"])
        if op == "drop" and len(tokens) > 1:
            tokens.pop(rng.randrange(len(tokens)))
        elif op == "swap" and len(tokens) > 1:
            i, j = rng.randrange(len(tokens)), rng.randrange(len(tokens))
            tokens[i], tokens[j] = tokens[j], tokens[i]
        elif op == "insert":
            tokens.insert(rng.randrange(len(tokens) + 1), rng.choice(VOCAB))
        elif op == "sub":
            tokens[rng.randrange(len(tokens))] = rng.choice(VOCAB)
    return tokens


def main():
    rng = random.Random(20231016)
    rows = []
    while len(rows) < 100:
        ref = rng.choice(BASE).split()
        kind = len(rows) % 10
        if kind == 0:
            cand = list(ref)
        elif kind == 1:
            cand = ["alpha", "beta", "gamma"][: rng.randint(1, 3)]
        elif kind == 2:
            cand = ref[: rng.randint(1, 3)]
        else:
            cand = perturb(rng, ref)
        if not cand:
            continue
        score = sentence_bleu([ref], cand)
        rows.append({"candidate": " ".join(cand), "reference": " ".join(ref), "bleu": float(score)})
    with open("crates/core/tests/data/bleu_reference.jsonl", "w") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")


if __name__ == "__main__":
    main()
