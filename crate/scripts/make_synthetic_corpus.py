#!/usr/bin/env python3
"""Regenerates assets/synthetic_cot_200.jsonl.

Produces 200 deterministic chain-of-thought records shaped like curator
input: a problem, an untagged multi-paragraph reasoning trace, and a gold
answer. Easy paragraphs open with droppable hedging sentences; hard
paragraphs open with a reflection keyword (Wait / However / Alternatively).
Thirty records additionally carry a (token, entropy) trace aligned to the
text, with keyword paragraphs in a high-entropy band and the rest in a low
band, so percentile-threshold labeling agrees with keyword labeling.
"""

import json
import random
import re
from pathlib import Path

SEED = 20260814
RECORDS = 200
TRACED = 30
OUT = Path(__file__).resolve().parent.parent / "assets" / "synthetic_cot_200.jsonl"

HEDGES = [
    "Let me think about this.",
    "Okay, first pass.",
    "Hmm, slow down a moment.",
    "Let's see what we have.",
    "I think the setup is routine.",
    "Well, nothing fancy needed.",
]

WAIT_CHECKS = [
    "Wait, double-check that step: {check}.",
    "Wait, is the sign right? Recompute: {check}.",
    "Wait, that assumed nothing was dropped, so verify {check}.",
]

HOWEVER_CHECKS = [
    "However, the edge case matters: {check}.",
    "However, confirm the divisor is not zero before trusting {check}.",
]

ALT_CHECKS = [
    "Alternatively, redo it the other way: {check}.",
    "Alternatively, plug the value back in: {check}.",
]


def linear_problem(rng):
    a = rng.randint(2, 9)
    x = rng.randint(2, 30)
    b = rng.randint(1, 40)
    c = a * x + b
    problem = f"Solve for x: {a}x + {b} = {c}."
    easy1 = [
        f"The equation is {a}x + {b} = {c}.",
        f"Subtract {b} from both sides to get {a}x = {c - b}.",
    ]
    check1 = f"{c} - {b} = {c - b}"
    easy2 = [
        f"Divide by {a} to get x = {x}.",
        f"The answer is \\boxed{{{x}}}.",
    ]
    check2 = f"{a} * {x} + {b} = {c}"
    return problem, str(x), easy1, check1, easy2, check2


def sum_problem(rng):
    n = rng.randint(10, 60)
    total = n * (n + 1) // 2
    problem = f"What is the sum of the integers from 1 to {n}?"
    easy1 = [
        f"Pair the ends: 1 + {n}, 2 + {n - 1}, and so on.",
        f"Each pair sums to {n + 1} and there are {n} terms overall.",
    ]
    check1 = f"{n} * {n + 1} = {n * (n + 1)}"
    easy2 = [
        f"So the total is {n} * {n + 1} / 2 = {total}.",
        f"The answer is \\boxed{{{total}}}.",
    ]
    check2 = f"{n * (n + 1)} / 2 = {total}"
    return problem, str(total), easy1, check1, easy2, check2


def area_problem(rng):
    w = rng.randint(3, 25)
    h = rng.randint(3, 25)
    area = w * h
    problem = f"A rectangle has width {w} and height {h}. What is its area?"
    easy1 = [
        f"Area of a rectangle is width times height.",
        f"Here that is {w} * {h}.",
    ]
    check1 = f"{w} * {h} = {area}"
    easy2 = [
        f"Multiplying gives {area}.",
        f"The answer is \\boxed{{{area}}}.",
    ]
    check2 = f"{area} / {w} = {h}"
    return problem, str(area), easy1, check1, easy2, check2


def fraction_problem(rng):
    import math

    g = rng.randint(2, 9)
    p0 = rng.randint(2, 12)
    q0 = rng.randint(p0 + 1, p0 + 13)
    while math.gcd(p0, q0) != 1:
        q0 += 1
    p, q = p0 * g, q0 * g
    problem = f"Reduce the fraction {p}/{q} to lowest terms."
    easy1 = [
        f"Both {p} and {q} are divisible by {g}.",
        f"Dividing top and bottom by {g} gives {p0}/{q0}.",
    ]
    check1 = f"gcd({p}, {q}) = {g}"
    easy2 = [
        f"No common factor remains in {p0}/{q0}.",
        f"The answer is \\boxed{{{p0}/{q0}}}.",
    ]
    check2 = f"{p0} * {g} = {p}"
    return problem, f"{p0}/{q0}", easy1, check1, easy2, check2


FAMILIES = [linear_problem, sum_problem, area_problem, fraction_problem]


def hard_paragraph(rng, check):
    template = rng.choice(rng.choice([WAIT_CHECKS, HOWEVER_CHECKS, ALT_CHECKS]))
    follow = rng.choice(
        ["That holds.", "It matches.", "Good, consistent.", "Same value, moving on."]
    )
    return template.format(check=check) + " " + follow


def easy_paragraph(rng, sentences):
    return rng.choice(HEDGES) + " " + " ".join(sentences)


def build_record(rng, index, traced):
    family = FAMILIES[index % len(FAMILIES)]
    problem, answer, easy1, check1, easy2, check2 = family(rng)

    paragraphs = [
        (easy_paragraph(rng, easy1), "easy"),
        (hard_paragraph(rng, check1), "hard"),
        (easy_paragraph(rng, easy2), "easy"),
        (hard_paragraph(rng, check2), "hard"),
    ]

    if not traced and rng.random() < 0.2:
        # Fold the first check into the opening paragraph so the keyword
        # sentence starts mid-paragraph and exercises sentence splitting.
        merged = paragraphs[0][0] + " " + paragraphs[1][0]
        paragraphs = [(merged, "mixed")] + paragraphs[2:]

    cot = "\n\n".join(text for text, _ in paragraphs)
    record = {"id": f"syn-{index:04d}", "problem": problem, "cot": cot, "answer": answer}

    if traced:
        spans = []
        offset = 0
        for text, kind in paragraphs:
            spans.append((offset, offset + len(text), kind))
            offset += len(text) + 2
        trace = []
        for match in re.finditer(r"\S+\s*", cot):
            start = match.start()
            kind = next(k for s, e, k in spans if s <= start < e)
            low, high = (0.85, 1.25) if kind == "hard" else (0.05, 0.35)
            trace.append([match.group(0), round(rng.uniform(low, high), 4)])
        assert "".join(t for t, _ in trace) == cot
        record["entropy_trace"] = trace

    return record


def main():
    rng = random.Random(SEED)
    traced_ids = set(rng.sample(range(RECORDS), TRACED))
    lines = []
    for i in range(RECORDS):
        record = build_record(rng, i, i in traced_ids)
        for tag in ("<think>", "</think>", "<easy>", "</easy>", "<hard>", "</hard>"):
            assert tag not in record["cot"]
        lines.append(json.dumps(record, ensure_ascii=False))
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} records to {OUT}")


if __name__ == "__main__":
    main()
