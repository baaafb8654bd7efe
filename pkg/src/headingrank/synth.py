"""Deterministic synthetic outline corpora for tests and demos.

Pages imitate the shape of encyclopedia articles: a unique title, a
handful of sections drawn from a shared pool of heading concepts, the
occasional subsection, and one or two paragraphs per section. Each
concept owns a hidden vocabulary that its paragraphs sample from, so
same-heading sections on different pages genuinely share topical terms
while every page also carries page-local markers. That structure gives
lexical scorers a real but imperfect signal, gives heading-support
expansion something to find, and keeps everything reproducible from
one seed.

The generator also emits a matching embedding file (topically
clustered word and entity vectors in one table) and a gazetteer whose
surfaces are the concept words and page markers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, Page, Paragraph, Section, write_corpus
from .textproc import tokenize
from .utils import derive_seed

_HEADING_POOL = (
    "history", "geography", "economy", "culture", "climate", "demographics",
    "education", "politics", "transport", "architecture", "wildlife",
    "industry", "tourism", "religion", "media", "sport", "health", "energy",
    "agriculture", "military", "language", "cuisine", "festivals",
    "infrastructure",
)


@dataclass(frozen=True)
class SynthSpec:
    pages: int = 200
    sections_per_page: tuple[int, int] = (8, 12)
    child_prob: float = 0.15
    paragraphs_per_section: tuple[int, int] = (1, 2)
    concepts: int = 24
    vocab_per_concept: int = 12
    page_vocab: int = 6
    noise_vocab: int = 40
    concept_word_prob: float = 0.6
    embedding_dim: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.pages < 2:
            raise ValueError("need at least 2 pages")
        if self.concepts < 2:
            raise ValueError("need at least 2 concepts")
        lo, hi = self.sections_per_page
        if not 1 <= lo <= hi:
            raise ValueError("bad sections_per_page range")
        if self.sections_per_page[1] > self.concepts:
            raise ValueError("more sections per page than distinct concepts")


@dataclass(frozen=True)
class SynthArtifacts:
    corpus: Corpus
    embedding_lines: list[str]
    gazetteer_lines: list[str]


def _concept_names(n: int) -> list[str]:
    names = list(_HEADING_POOL[:n])
    while len(names) < n:
        names.append(f"domain{len(names)}x")
    return names


def generate(spec: SynthSpec = SynthSpec()) -> SynthArtifacts:
    rng = random.Random(spec.seed)
    concepts = _concept_names(spec.concepts)
    concept_vocab = {
        c: [f"{c}{j}x" for j in range(spec.vocab_per_concept)] for c in concepts
    }
    noise = [f"filler{j}x" for j in range(spec.noise_vocab)]

    paragraphs: dict[str, Paragraph] = {}
    counter = 0

    def make_paragraph(page_no: int, concept: str, page_extras: list[str]) -> str:
        nonlocal counter
        tokens = [f"pg{page_no}x"]
        vocab = concept_vocab[concept]
        tokens += rng.sample(vocab, min(rng.randint(3, 5), len(vocab)))
        if page_extras:
            tokens += rng.sample(page_extras, min(rng.randint(1, 2), len(page_extras)))
        if noise:
            tokens += rng.sample(noise, min(rng.randint(1, 2), len(noise)))
        if rng.random() < spec.concept_word_prob:
            tokens.append(concept)
        rng.shuffle(tokens)
        pid = f"p{counter:06d}"
        counter += 1
        paragraphs[pid] = Paragraph(id=pid, text="the " + " ".join(tokens))
        return pid

    def make_section(page_no: int, concept: str, path: tuple[str, ...],
                     page_extras: list[str], allow_child: bool) -> Section:
        n_paras = rng.randint(*spec.paragraphs_per_section)
        pids = tuple(make_paragraph(page_no, concept, page_extras)
                     for _ in range(n_paras))
        heading = concept.capitalize()
        children: tuple[Section, ...] = ()
        if allow_child and rng.random() < spec.child_prob:
            child_concept = rng.choice([c for c in concepts if c != concept])
            children = (make_section(page_no, child_concept,
                                     path + (heading,), page_extras, False),)
        return Section(heading=heading, path=path, paragraphs=pids,
                       children=children)

    pages: list[Page] = []
    for n in range(spec.pages):
        title = f"Pg{n}x Guide"
        page_extras = [f"pg{n}e{j}x" for j in range(spec.page_vocab)]
        n_sections = rng.randint(*spec.sections_per_page)
        chosen = rng.sample(concepts, n_sections)
        sections = tuple(
            make_section(n, concept, (), page_extras, True) for concept in chosen)
        pages.append(Page(id=f"page{n}", title=title, sections=sections))

    corpus = Corpus(pages=tuple(pages), paragraphs=paragraphs)
    embedding_lines = _embedding_lines(spec, concepts, concept_vocab, noise)
    gazetteer_lines = _gazetteer_lines(spec, concepts)
    return SynthArtifacts(corpus=corpus, embedding_lines=embedding_lines,
                          gazetteer_lines=gazetteer_lines)


def _embedding_lines(spec: SynthSpec, concepts: list[str],
                     concept_vocab: dict[str, list[str]],
                     noise: list[str]) -> list[str]:
    """Clustered vectors: a concept's words and entity sit together,
    page markers sit near their page centroid, noise floats free.

    Word keys are the processed (stemmed) token forms, since that is
    what text vectorization looks up; entity ids share the same table
    under their `ent_` prefix.
    """
    nrng = np.random.default_rng(derive_seed(spec.seed, "embeddings"))
    dim = spec.embedding_dim
    lines: list[str] = []
    seen: set[str] = set()

    def emit(key: str, vec: np.ndarray) -> None:
        if key in seen:
            return
        seen.add(key)
        lines.append(key + " " + " ".join(f"{x:.6f}" for x in vec))

    for c in concepts:
        centroid = nrng.normal(0.0, 1.0, dim)
        stems = tokenize(c)
        for stem in stems:
            emit(stem, centroid + nrng.normal(0.0, 0.15, dim))
        for token in concept_vocab[c]:
            emit(token, centroid + nrng.normal(0.0, 0.15, dim))
        emit(f"ent_{c}", centroid + nrng.normal(0.0, 0.1, dim))
    for n in range(spec.pages):
        centroid = nrng.normal(0.0, 1.0, dim)
        emit(f"pg{n}x", centroid + nrng.normal(0.0, 0.1, dim))
        for j in range(spec.page_vocab):
            emit(f"pg{n}e{j}x", centroid + nrng.normal(0.0, 0.15, dim))
        emit(f"ent_pg{n}", centroid + nrng.normal(0.0, 0.1, dim))
    for token in noise:
        emit(token, nrng.normal(0.0, 1.0, dim))
    for stem in tokenize("guide"):
        emit(stem, nrng.normal(0.0, 1.0, dim))
    return lines


def _gazetteer_lines(spec: SynthSpec, concepts: list[str]) -> list[str]:
    lines = [f"{c}\tent_{c}" for c in concepts]
    lines += [f"pg{n}x\tent_pg{n}" for n in range(spec.pages)]
    return lines


def write_fixture(spec: SynthSpec, out_dir: str) -> dict[str, str]:
    """Write corpus.jsonl, embeddings.txt, and gazetteer.tsv under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = generate(spec)
    paths = {
        "corpus": str(out / "corpus.jsonl"),
        "embeddings": str(out / "embeddings.txt"),
        "gazetteer": str(out / "gazetteer.tsv"),
    }
    write_corpus(artifacts.corpus, paths["corpus"])
    with open(paths["embeddings"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(artifacts.embedding_lines) + "\n")
    with open(paths["gazetteer"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(artifacts.gazetteer_lines) + "\n")
    return paths
