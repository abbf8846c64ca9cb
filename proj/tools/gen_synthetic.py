#!/usr/bin/env python3
"""Regenerate data/fixtures/synthetic20/sessions.tsv.

Twenty task sessions over eight users with relevance and usefulness labels.
Usefulness loosely tracks dwell time; relevance loosely tracks usefulness, with
deliberate disagreements so every divergence bucket is populated.
"""

import argparse
import random

TOPICS = [
    ("Choose a laptop for video editing", ["laptop for video editing", "best gpu laptop 2024", "macbook vs xps editing"]),
    ("Learn to bake sourdough bread", ["sourdough starter guide", "sourdough hydration ratio", "sourdough oven temperature"]),
    ("Plan a budget trip to Lisbon", ["lisbon budget hotels", "lisbon tram 28 tips", "lisbon day trips"]),
    ("Understand how vaccines work", ["how do mrna vaccines work", "vaccine immune memory", "vaccine side effects explained"]),
    ("Fix a leaking kitchen faucet", ["kitchen faucet leaking base", "replace faucet cartridge", "faucet o ring size"]),
    ("Compare electric car ranges", ["electric car range comparison", "ev range cold weather", "cheapest long range ev"]),
    ("Prepare for a job interview in data science", ["data science interview questions", "sql interview practice", "ml case study interview"]),
    ("Start a small vegetable garden", ["easy vegetables for beginners", "raised bed soil mix", "tomato planting distance"]),
    ("Write a cover letter for a nursing job", ["nursing cover letter example", "new grad nurse cover letter", "cover letter length"]),
    ("Pick a beginner telescope", ["beginner telescope reviews", "dobsonian vs refractor", "telescope eyepiece guide"]),
]

HEADER = [
    "user_id", "session_id", "task_id", "task_description", "event", "timestamp",
    "query_id", "query_text", "serp_size", "query_satisfaction", "doc_id", "url",
    "title", "summary", "rank", "usefulness", "relevance", "session_satisfaction",
]


def usefulness_for(dwell, rng):
    base = 0 if dwell < 5 else 1 if dwell < 30 else 2 if dwell < 60 else 3
    return max(0, min(3, base + rng.choice([-1, 0, 0, 0, 1])))


def relevance_for(useful, rng):
    # Mostly aligned, sometimes far apart (relevant but useless, or the reverse).
    roll = rng.random()
    if roll < 0.15:
        return 3 - useful
    return max(0, min(3, useful + rng.choice([-1, 0, 0, 1])))


def row(**fields):
    return "\t".join(str(fields.get(k, "")) for k in HEADER)


def generate(seed):
    rng = random.Random(seed)
    lines = ["\t".join(HEADER)]
    epoch = 1_700_000_000
    for s in range(20):
        user = f"u{s % 8 + 1:02d}"
        topic, queries = TOPICS[s % len(TOPICS)]
        sid = f"s{s + 1:02d}"
        tid = f"t{s % len(TOPICS) + 1:02d}"
        t = epoch + s * 10_000
        n_queries = rng.randint(1, 3)
        sat = rng.randint(1, 5)
        first = True
        for qi in range(n_queries):
            qid = f"q{qi + 1}"
            lines.append(row(user_id=user, session_id=sid, task_id=tid,
                             task_description=topic if first else "", event="QUERY",
                             timestamp=t, query_id=qid, query_text=queries[qi],
                             serp_size=10, query_satisfaction=rng.randint(1, 5),
                             session_satisfaction=sat if first else ""))
            first = False
            t += rng.randint(2, 8)
            ranks = sorted(rng.sample(range(1, 11), rng.randint(0 if qi else 1, 3)))
            for rank in ranks:
                dwell = rng.choice([rng.randint(1, 4), rng.randint(6, 29), rng.randint(31, 59), rng.randint(61, 180)])
                useful = usefulness_for(dwell, rng)
                doc = f"d{s + 1:02d}{qi + 1}{rank:02d}"
                lines.append(row(user_id=user, session_id=sid, task_id=tid, event="CLICK", timestamp=t,
                                 query_id=qid, doc_id=doc,
                                 url=f"https://example.org/{tid}/{doc}",
                                 title=f"{queries[qi].title()} ({rank})",
                                 summary=f"Result {rank} for {queries[qi]}.",
                                 rank=rank, usefulness=useful, relevance=relevance_for(useful, rng)))
                if rng.random() < 0.3:
                    lines.append(row(user_id=user, session_id=sid, task_id=tid, event="SCROLL",
                                     timestamp=t + dwell // 2))
                t += dwell
            t += rng.randint(3, 15)
        lines.append(row(user_id=user, session_id=sid, task_id=tid, event="SESSION_END", timestamp=t))
    return "\n".join(lines) + "\n"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20)
    ap.add_argument("--out", default="data/fixtures/synthetic20/sessions.tsv")
    args = ap.parse_args()
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(generate(args.seed))


if __name__ == "__main__":
    main()
