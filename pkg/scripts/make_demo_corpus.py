#!/usr/bin/env python3
"""Regenerate the bundled demo corpus, descriptors, and question set.

Builds 12 synthetic abstracts (6 endorsed, 6 controversial) around three
planted discourse dimensions, runs the analysis stages on them, and then
calibrates the bundled descriptor and question files against the realized
factor structure (which factor ended up representing which planted theme,
and with which sign). Everything is seeded; committed outputs only change
if the generator or the analysis code changes.

Each pole's vocabulary is organized in three topical clusters and every
document treats them in separate sections. Document-level counts therefore
stay uniform across a pole (clean factor structure), while retrieval-sized
chunks are topically narrow. Questions target one cluster each, so retrieved
passages cover only a slice of the pole lexicon the reference text spans;
the descriptor vocabulary lists the whole of it.

Usage:
  python scripts/make_demo_corpus.py [--data-dir src/lexalign/data]
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
from pathlib import Path

import numpy as np

from lexalign import corpus as corpus_mod
from lexalign import factors, lexstats
from lexalign.corpus import Subset
from lexalign.factors import Pole
from lexalign.textprep import prepare_corpus

SEED = 20240601

# planted pole vocabulary, three topical clusters of four lemmas per pole;
# every word maps to itself under the bundled annotator so descriptor
# vocabularies match mined lemmas exactly
CLUSTERS = {
    (1, Pole.POSITIVE): [
        ["hydroxychloroquine", "chloroquine", "dosage", "mortality"],
        ["azithromycin", "zinc", "regimen", "remission"],
        ["ivermectin", "prophylaxis", "antiviral", "efficacy"],
    ],
    (1, Pole.NEGATIVE): [
        ["anxiety", "depression", "lockdown", "stress"],
        ["welfare", "resilience", "insomnia", "burnout"],
        ["psychological", "isolation", "loneliness", "distress"],
    ],
    (2, Pole.POSITIVE): [
        ["consent", "disclosure", "anonymity", "liability"],
        ["publication", "retraction", "integrity", "translation"],
        ["transparency", "accountability", "oversight", "governance"],
    ],
    (2, Pole.NEGATIVE): [
        ["comparison", "cohort", "comparator", "superiority"],
        ["remdesivir", "favipiravir", "combination", "endpoint"],
        ["crossover", "subgroup", "dropout", "tolerability"],
    ],
    (3, Pole.POSITIVE): [
        ["regression", "covariate", "baseline", "adjustment"],
        ["confidence", "interval", "significance", "estimator"],
        ["multivariate", "propensity", "stratification", "hazard"],
    ],
    (3, Pole.NEGATIVE): [
        ["repository", "preprint", "archive", "openness"],
        ["dissemination", "presentation", "seminar", "symposium"],
        ["outreach", "dataset", "webinar", "slideshow"],
    ],
}

POOLS = {key: [w for cluster in clusters for w in cluster] for key, clusters in CLUSTERS.items()}

FILLER = [
    "patient", "covid", "treatment", "hospital", "clinical", "disease",
    "infection", "virus", "pandemic", "health", "care", "result",
    "evidence", "outcome", "research", "medicine", "therapy", "doctor",
    "protocol", "symptom", "recovery", "sample", "report", "finding",
]

# document -> pole per planted dimension; docs 0-5 endorsed, 6-11 controversial.
# Each positive pole covers 4 endorsed + 2 controversial documents so its
# vocabulary is an endorsed keyword set (and symmetrically for negatives).
MEMBERSHIP = {
    1: {0, 1, 2, 3, 6, 7},
    2: {0, 1, 4, 5, 6, 8},
    3: {0, 2, 4, 5, 7, 9},
}

POLE_WORD_SHARE = 0.55  # pole lemmas vs filler within a sentence
LOCAL_CLUSTER_SHARE = 0.9  # within pole lemmas: the current section's cluster
BLOCKS_PER_SECTION = 12  # sentence blocks (one sentence per dimension) per section

LABELS = {
    (1, Pole.POSITIVE): (
        "Disputed Treatments",
        "Texts endorse hydroxychloroquine and similar contested medications "
        "as antiviral regimens with high efficacy, framing dosage and "
        "prophylaxis choices as decisive for mortality and remission.",
    ),
    (1, Pole.NEGATIVE): (
        "Broad Focus",
        "Texts examine psychological distress arising from the pandemic, "
        "covering anxiety, depression, lockdown isolation, resilience, and "
        "the welfare of patients.",
    ),
    (2, Pole.POSITIVE): (
        "Research Ethics",
        "Texts adhere to research ethics standards, stressing consent, "
        "disclosure, publication integrity, transparency, liability, "
        "translation, and governance of data.",
    ),
    (2, Pole.NEGATIVE): (
        "Comparative Treatment Analysis",
        "Texts run comparisons of treatment cohorts and antiviral "
        "combinations, using endpoints, subgroups, and crossover designs to "
        "argue the superiority of questionable drugs.",
    ),
    (3, Pole.POSITIVE): (
        "Statistical Rigor",
        "Texts lean on regression models, covariates, confidence intervals, "
        "and propensity adjustment to present an impression of statistical "
        "significance for treatment effects.",
    ),
    (3, Pole.NEGATIVE): (
        "Dissemination of Science",
        "Texts encourage dissemination of findings through repositories, "
        "preprints, seminars, and open datasets, promoting presentation and "
        "discussion of results.",
    ),
}

# three topics per pole, two questions each; all topics probe the first
# vocabulary cluster, so retrieved passages cover only a slice of the pole
# lexicon and the descriptor vocabulary carries material retrieval misses
QUESTION_TOPICS = {
    (1, Pole.POSITIVE): [
        ("hydroxychloroquine dosing", [
            "Does hydroxychloroquine reduce mortality in covid patients?",
            "What dosage of hydroxychloroquine is reported to work?",
        ]),
        ("chloroquine mortality", [
            "Does chloroquine lower mortality for hospital patients?",
            "How does chloroquine dosage relate to mortality?",
        ]),
        ("dosage safety", [
            "Is a high dosage of chloroquine safe for patients?",
            "What mortality risk comes with hydroxychloroquine dosage?",
        ]),
    ],
    (1, Pole.NEGATIVE): [
        ("pandemic anxiety", [
            "How did lockdown affect anxiety and depression?",
            "What stress did patients report during lockdown?",
        ]),
        ("depression burden", [
            "How common was depression during the pandemic?",
            "What anxiety and stress levels did lockdown bring?",
        ]),
        ("lockdown stress", [
            "What made lockdown stressful for patients?",
            "How are anxiety and stress connected under lockdown?",
        ]),
    ],
    (2, Pole.POSITIVE): [
        ("consent and liability", [
            "Why are consent and disclosure central to ethical research?",
            "How should anonymity and liability be handled in studies?",
        ]),
        ("informed consent", [
            "What does informed consent require from researchers?",
            "How is participant anonymity protected by disclosure rules?",
        ]),
        ("disclosure duties", [
            "What disclosure duties do investigators carry?",
            "When does liability follow from missing consent?",
        ]),
    ],
    (2, Pole.NEGATIVE): [
        ("treatment comparison", [
            "How do cohort comparisons rank covid treatments?",
            "Which comparator shows superiority in the cohort data?",
        ]),
        ("cohort outcomes", [
            "What does the cohort comparison say about patient outcomes?",
            "Which treatment shows superiority against its comparator?",
        ]),
        ("comparator choice", [
            "How should a comparator be chosen for a cohort?",
            "When does a comparison support claims of superiority?",
        ]),
    ],
    (3, Pole.POSITIVE): [
        ("regression modelling", [
            "Which covariates belong in a mortality regression?",
            "How should baseline covariates be adjusted in models?",
        ]),
        ("baseline adjustment", [
            "Why does baseline adjustment matter in regression?",
            "Which covariate effects survive the adjustment?",
        ]),
        ("covariate selection", [
            "How are covariates selected for a regression model?",
            "What happens to estimates without baseline adjustment?",
        ]),
    ],
    (3, Pole.NEGATIVE): [
        ("open repositories", [
            "Why should findings be shared in open repositories?",
            "How do preprints and archive openness speed science?",
        ]),
        ("preprint archives", [
            "What role do preprint repositories play in openness?",
            "How should an archive organize preprints for reuse?",
        ]),
        ("repository openness", [
            "What makes a repository genuinely open?",
            "Why do researchers post preprints to archives?",
        ]),
    ],
}


def doc_pole(doc: int, dim: int) -> Pole:
    return Pole.POSITIVE if doc in MEMBERSHIP[dim] else Pole.NEGATIVE


def make_documents(rng: np.random.Generator) -> list[tuple[str, Subset, str]]:
    """Returns (doc_id, subset, body) triples.

    A document runs through three sections, one topical cluster per section,
    with sentences cycling the three dimensions inside each section. Every
    pole document thus contains every cluster in equal amounts.
    """
    docs = []
    for doc in range(12):
        subset = Subset.ENDORSED if doc < 6 else Subset.CONTROVERSIAL
        doc_id = f"{'end' if doc < 6 else 'con'}{doc % 6 + 1:02d}"
        sentences = []
        for section in range(3):
            for block in range(BLOCKS_PER_SECTION):
                for dim in (1, 2, 3):
                    pole = doc_pole(doc, dim)
                    pool = POOLS[(dim, pole)]
                    local = CLUSTERS[(dim, pole)][section]
                    length = int(rng.integers(8, 13))
                    words = []
                    for _ in range(length):
                        if rng.random() < POLE_WORD_SHARE:
                            if rng.random() < LOCAL_CLUSTER_SHARE:
                                words.append(local[int(rng.integers(len(local)))])
                            else:
                                words.append(pool[int(rng.integers(len(pool)))])
                        else:
                            words.append(FILLER[int(rng.integers(len(FILLER)))])
                    sentences.append(" ".join(words).capitalize() + ".")
        docs.append((doc_id, subset, "\n".join(sentences) + "\n"))
    return docs


def write_corpus(data_dir: Path, docs: list[tuple[str, Subset, str]]) -> Path:
    corpus_dir = data_dir / "demo_corpus"
    if corpus_dir.exists():
        shutil.rmtree(corpus_dir)
    (corpus_dir / "texts").mkdir(parents=True)
    manifest = corpus_dir / "manifest.csv"
    with open(manifest, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "subset", "title", "year", "path"])
        for i, (doc_id, subset, body) in enumerate(docs):
            (corpus_dir / "texts" / f"{doc_id}.txt").write_text(body, encoding="utf-8")
            writer.writerow(
                [
                    doc_id,
                    subset.value,
                    f"Synthetic abstract {doc_id}",
                    2020 + i % 3,
                    f"texts/{doc_id}.txt",
                ]
            )
    return manifest


def analyze(corpus_root: Path, manifest: Path):
    """Run ingest..scoring on the fresh corpus; return realized structure."""
    corpus = corpus_mod.load_corpus(corpus_root, manifest)
    streams = prepare_corpus(corpus)
    subset_of = {d.id: d.subset for d in corpus}
    grouped = {Subset.ENDORSED: [], Subset.CONTROVERSIAL: []}
    for stream in streams:
        grouped[subset_of[stream.doc_id]].append(stream)

    pairs = []
    for s in (Subset.ENDORSED, Subset.CONTROVERSIAL):
        other = Subset.CONTROVERSIAL if s is Subset.ENDORSED else Subset.ENDORSED
        keywords = lexstats.keyness(grouped[s], grouped[other])
        mined = lexstats.collocations(grouped[s], [e.lemma for e in keywords], subset=s)
        print(f"{s.value}: {len(keywords)} keywords, {len(mined)} pairs")
        if len(mined) < 500:
            raise SystemExit("top-500 cap not reached; retune generator")
        pairs.extend(mined)

    matrix = lexstats.build_matrix(streams, pairs)
    z, active = matrix.active()
    model = factors.fit_factors(z, n=3)
    scores = factors.score_documents(z, model, matrix.doc_ids)
    return matrix, active, model, scores


def realized_mapping(active, model) -> dict[int, tuple[int, int]]:
    """factor column -> (planted dim, orientation sign).

    Orientation +1 means the factor's positive loadings carry the planted
    positive-pole vocabulary.
    """
    lemma_home = {}
    for (dim, pole), pool in POOLS.items():
        for lemma in pool:
            lemma_home[lemma] = (dim, pole)
    mapping = {}
    for f in range(model.n_factors):
        weight: dict[tuple[int, Pole], float] = {}
        for col, (factor, sign) in model.assignment.items():
            if factor != f:
                continue
            pair = active[col]
            for lemma in (pair.node, pair.collocate):
                home = lemma_home.get(lemma)
                if home:
                    weight[home] = weight.get(home, 0.0) + sign * abs(
                        model.loadings[col, f]
                    )
        best = max(weight, key=lambda k: abs(weight[k]))
        dim = best[0]
        orientation = 1 if (best[1] is Pole.POSITIVE) == (weight[best] > 0) else -1
        mapping[f] = (dim, orientation)
        print(f"factor {f}: planted dim {dim}, orientation {orientation:+d}")
    dims = [d for d, _ in mapping.values()]
    if sorted(dims) != [1, 2, 3]:
        raise SystemExit(f"factors did not separate planted dimensions: {mapping}")
    return mapping


def write_descriptors(data_dir: Path, mapping: dict[int, tuple[int, int]]) -> None:
    dimensions = []
    for f in sorted(mapping):
        planted, orientation = mapping[f]
        pos_key, neg_key = (Pole.POSITIVE, Pole.NEGATIVE)
        if orientation < 0:
            pos_key, neg_key = neg_key, pos_key
        pos_label, pos_desc = LABELS[(planted, pos_key)]
        neg_label, neg_desc = LABELS[(planted, neg_key)]
        dimensions.append(
            {
                "dim": f + 1,
                "short_label_pos": pos_label,
                "short_label_neg": neg_label,
                "long_label_pos": pos_desc,
                "long_label_neg": neg_desc,
                "vocabulary_pos": POOLS[(planted, pos_key)],
                "vocabulary_neg": POOLS[(planted, neg_key)],
            }
        )
    payload = {
        "note": (
            "Demo descriptor set calibrated to the bundled demo corpus. "
            "Labels and vocabularies are analyst input, not computed output; "
            "replace this file when analyzing your own corpus."
        ),
        "dimensions": dimensions,
    }
    (data_dir / "descriptors.json").write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def write_questions(data_dir: Path, mapping: dict[int, tuple[int, int]]) -> None:
    questions = []
    topic_no = 0
    for f in sorted(mapping):
        planted, orientation = mapping[f]
        for pole in (Pole.POSITIVE, Pole.NEGATIVE):
            planted_pole = pole if orientation > 0 else (
                Pole.NEGATIVE if pole is Pole.POSITIVE else Pole.POSITIVE
            )
            for topic_name, texts in QUESTION_TOPICS[(planted, planted_pole)]:
                topic_no += 1
                topic_id = f"t{topic_no:02d}"
                for q_no, text in enumerate(texts, start=1):
                    questions.append(
                        {
                            "topic_id": topic_id,
                            "question_id": f"{topic_id}-q{q_no}",
                            "dim": f + 1,
                            "pole": pole.value,
                            "topic": topic_name,
                            "text": text,
                        }
                    )
    payload = {
        "note": (
            "Stand-in question set for the bundled demo corpus: 18 topics, "
            "two questions each, six questions per dimension pole. Replace "
            "with your own questions for real experiments."
        ),
        "questions": questions,
    }
    (data_dir / "questions.json").write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", default="src/lexalign/data")
    args = parser.parse_args()
    data_dir = Path(args.data_dir)

    rng = np.random.default_rng(SEED)
    docs = make_documents(rng)
    manifest = write_corpus(data_dir, docs)
    print(f"wrote {len(docs)} documents under {data_dir / 'demo_corpus'}")

    matrix, active, model, scores = analyze(data_dir / "demo_corpus", manifest)
    mapping = realized_mapping(active, model)

    # sanity: each pole must hold at least 5 documents for top-5 exemplars
    per_pole = {}
    for s in scores:
        per_pole.setdefault((s.factor, s.pole), []).append(s.doc_id)
    for key, ids in sorted(per_pole.items()):
        print(f"factor {key[0]} pole {key[1].value}: {len(ids)} docs {sorted(ids)}")
        if len(ids) < 5:
            raise SystemExit("a pole has fewer than 5 documents; retune generator")

    write_descriptors(data_dir, mapping)
    write_questions(data_dir, mapping)
    print("wrote descriptors.json and questions.json")


if __name__ == "__main__":
    main()
