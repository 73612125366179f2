#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes the scripted mock replies and human labels for the e2e run.

Usage: make_e2e_fixture.py <corpus.jsonl> <out_dir> [--m 3]

The replies are consumed in FIFO order: the baseline classifier prompts
(one per test user), then generation prompts (variant-major, users in corpus
order), then one judge prompt per parsed candidate, plus one re-ask.
"""
import argparse
import json
import random
from pathlib import Path

VARIANTS = ["use_predicted", "use_ground_truth", "use_all", "use_none"]

BASELINE = {
    "INS": "The customer wants to schedule an installation.",
    "AVL": "The customer asks whether the item is in stock.",
    "PRI": "The customer wants a price match.",
    "WTY": "The customer needs a warranty repair.",
    "RET": "The customer wants to return an item for a refund.",
}

FILLER = [
    "Do you deliver on weekends?",
    "Can I pay with a gift card?",
    "What are your store hours today?",
    "Is there a bulk discount for contractors?",
    "Can I change the delivery address on my order?",
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("corpus")
    ap.add_argument("out_dir")
    ap.add_argument("--m", type=int, default=3)
    args = ap.parse_args()
    rng = random.Random(7)

    users = []
    for line in open(args.corpus):
        r = json.loads(line)
        if r["split"] == "test":
            users.append(r)

    entries = []
    codes = list(BASELINE)
    for i, u in enumerate(users):
        if i == 3:
            reply = "The customer is browsing."
        elif i % 4 == 1:
            reply = BASELINE[codes[(codes.index(u["class"]) + 1) % 5]]
        else:
            reply = BASELINE[u["class"]]
        entries.append({"match": None, "reply": reply, "status": 200})

    # (variant, user, rank) -> candidate text, in judge order
    judged = []
    for vi, variant in enumerate(VARIANTS):
        for ui, u in enumerate(users):
            cands = rng.sample(FILLER, args.m)
            hit = (vi + ui) % 3
            if variant == "use_none" and ui % 2 == 0:
                hit = None
            if hit is not None and hit < args.m:
                cands[hit] = u["intent"]
            if vi == 2 and ui == 5:
                cands = cands[:2]
            if vi == 3 and ui == 6:
                entries.append({"match": None, "reply": "Sorry, I cannot help with that.", "status": 200})
                continue
            reply = "\n".join(f"{k + 1}. {c}" for k, c in enumerate(cands))
            entries.append({"match": None, "reply": reply, "status": 200})
            for k, c in enumerate(cands):
                judged.append((variant, u, k + 1, c))

    labels = []
    for n, (variant, u, rank, cand) in enumerate(judged):
        same = cand == u["intent"]
        if n == 4:
            entries.append({"match": None, "reply": "Maybe", "status": 200})
            entries.append({"match": None, "reply": "no.", "status": 200})
            verdict = 0
        else:
            entries.append({"match": None, "reply": "Yes, same request." if same else "No", "status": 200})
            verdict = int(same)
        if variant == "use_ground_truth":
            human = verdict if rank != 2 or u["user_id"] != users[1]["user_id"] else 1 - verdict
            labels.append((f"{variant}:{u['user_id']}:{rank}", human))

    out = Path(args.out_dir)
    with open(out / "fixture.jsonl", "w") as f:
        for e in entries:
            f.write(json.dumps(e) + "\n")
    with open(out / "human_labels.csv", "w") as f:
        f.write("pair_id,human_label\n")
        for pid, h in labels:
            f.write(f"{pid},{h}\n")


if __name__ == "__main__":
    main()
