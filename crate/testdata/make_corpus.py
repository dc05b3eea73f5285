"""Writes the synthetic corpus under testdata/corpus.

The layout mirrors the one the loader expects for the released dataset:
assessments.jsonl, documents/<doc_id>.json and vectors.json. Stored domain
judgments come from walking the rule JSON directly; one record carries a
deliberately wrong domain 3 judgment so the consistency report has work.

Run from the workspace root: python3 testdata/make_corpus.py
"""
import hashlib
import json
import math
import pathlib
import random

ROOT = pathlib.Path(__file__).parent
OUT = ROOT / "corpus"
DATA = ROOT.parent / "crates" / "core" / "data"
RESPONSES = ["yes", "probably_yes", "probably_no", "no", "no_information"]

TOPICS = {
    "1": [
        "The allocation sequence was generated with computer random numbers in blocks of {n}.",
        "Allocation was concealed in sequentially numbered opaque sealed envelopes.",
        "Baseline characteristics were balanced between the {arm} groups.",
    ],
    "2": [
        "Participants and carers were blinded to the assigned {arm} intervention.",
        "There were no deviations from the intended {arm} intervention because of the trial context.",
        "Analysis followed the intention to treat principle with all randomized participants.",
    ],
    "3": [
        "Outcome data were available for {n} percent of randomized participants.",
        "Sensitivity analyses showed missing outcome data did not bias the result.",
    ],
    "4": [
        "The outcome was measured with a validated instrument in both {arm} groups.",
        "Outcome assessors were unaware of the assigned intervention.",
    ],
    "5": [
        "The statistical analysis plan was registered before unblinding.",
        "Only the prespecified primary outcome measurement was reported.",
    ],
}
FILLER = [
    "The study was approved by the ethics committee of the {arm} hospital.",
    "Funding came from a national research council.",
]
DOCS = ["trial-a", "trial-b", "trial-c", "trial-d", "trial-e", "trial-f"]
DIM = 32
MODEL = "fixture-ref-32"


def embed(text):
    v = [0.0] * DIM
    for tok in "".join(c.lower() if c.isalnum() else " " for c in text).split():
        h = hashlib.md5(tok.encode()).digest()
        v[h[0] % DIM] += 1.0 if h[1] % 2 == 0 else -1.0
    n = math.sqrt(sum(x * x for x in v)) or 1.0
    return [round(x / n, 6) for x in v]


def gate_ok(gate, answers):
    if gate is None:
        return True
    hits = [answers[a["qid"]] in a["allowed"] for a in gate["antecedents"]]
    return any(hits) if gate["combinator"] == "any" else all(hits)


def walk(node, answers):
    while "risk" not in node:
        d = node["node"]
        node = next(b["next"] for b in d["branches"] if answers[d["qid"]] in b["classes"])
    return node["risk"]


def main():
    rng = random.Random(7)
    questions = json.loads((DATA / "questionnaire.json").read_text())["questions"]
    rules = {d: json.loads((DATA / "rules" / f"domain{d}.json").read_text())["tree"] for d in range(1, 6)}
    OUT.mkdir(exist_ok=True)
    (OUT / "documents").mkdir(exist_ok=True)

    documents = {}
    vectors = {"model_id": MODEL, "paragraphs": [], "queries": []}
    for doc_id in DOCS:
        paras = []
        for d in "12345":
            for t in TOPICS[d]:
                paras.append((d, t.format(n=rng.randint(3, 99), arm=rng.choice(["zinc", "placebo", "vitamin"]))))
        paras.append(("0", FILLER[0].format(arm=rng.choice(["city", "district"]))))
        paras.append(("0", FILLER[1]))
        rng.shuffle(paras)
        documents[doc_id] = paras
        body = [{"text": t, "section": "Methods" if d != "0" else "Declarations"} for d, t in paras]
        doc = {"paper_id": doc_id, "title": f"Trial {doc_id[-1].upper()}", "authors": ["A Author"], "body_text": body}
        (OUT / "documents" / f"{doc_id}.json").write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n")
        for i, (_, t) in enumerate(paras):
            vectors["paragraphs"].append({"doc_id": doc_id, "paragraph_index": i, "vector": embed(t)})
    for q in questions:
        vectors["queries"].append({"qid": q["qid"], "vector": embed(q["text"])})
    (OUT / "vectors.json").write_text(json.dumps(vectors) + "\n")

    plan = [
        ("trial-a", "manual", "ann-1"),
        ("trial-a", "manual", "ann-2"),
        ("trial-b", "manual", "ann-1"),
        ("trial-b", "manual", "ann-2"),
        ("trial-c", "assisted", "ann-1"),
        ("trial-d", "assisted", "ann-2"),
        ("trial-e", "assisted", "ann-1"),
        ("trial-f", "assisted", "ann-2"),
    ]
    lines = []
    for n, (doc_id, prov, ann) in enumerate(plan):
        paras = documents[doc_id]
        answers, record_q = {}, {}
        for q in questions:
            qid = q["qid"]
            if not gate_ok(q.get("gate"), answers):
                answers[qid] = "not_applicable"
                record_q[qid] = {"answer": "NA"}
                continue
            a = rng.choice(RESPONSES)
            answers[qid] = a
            entry = {"answer": a, "rationale": f"{ann} on {qid}"}
            topical = [i for i, (d, _) in enumerate(paras) if d == qid[0]]
            if rng.random() < 0.7:
                text = paras[rng.choice(topical)][1]
                if rng.random() < 0.3:
                    text = "  " + text.upper().replace(" ", "  ")
                entry["evidence"] = text
            if prov == "assisted":
                model = a if rng.random() < 0.75 else rng.choice(RESPONSES)
                entry["model_answer"] = model
                entry["model_rationale"] = f"model on {qid}"
                retrieved = rng.sample(range(len(paras)), 3)
                entry["retrieved"] = retrieved
                entry["upvotes"] = [p for p in retrieved[:2] if rng.random() < 0.5]
                entry["downvotes"] = [p for p in retrieved[2:] if rng.random() < 0.4]
                rest = [p for p in range(len(paras)) if p not in retrieved]
                if rng.random() < 0.2:
                    entry["added_paragraphs"] = [rng.choice(rest)]
                if rng.random() < 0.2:
                    entry["rationale_source"] = "expert"
                else:
                    entry["rationale_source"] = "model"
                    entry["rationale"] = entry["model_rationale"]
            record_q[qid] = entry
        domains = [walk(rules[d], answers) for d in range(1, 6)]
        order = ["low", "some_concerns", "high"]
        overall = max(domains, key=order.index)
        if n == 6:
            domains[2] = "high" if domains[2] != "high" else "low"
        rec = {
            "doc_id": doc_id,
            "provenance": prov,
            "annotator_id": ann,
            "questions": record_q,
            "domain_judgments": domains,
            "overall": overall,
        }
        if prov == "assisted":
            rec["model_id"] = "reference-llm"
        lines.append(json.dumps(rec, ensure_ascii=False))
    (OUT / "assessments.jsonl").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
