"""Shared fixtures: tiny hand-built corpora and a plain token pipeline.

Most unit tests want scorer arithmetic isolated from stemming and
stopword removal, so they index with PLAIN_CFG (no stopwords, no
stemming). Anything exercising the real pipeline uses the defaults.
"""

import json

import pytest

from headingrank.corpus import Corpus, parse_corpus
from headingrank.index import Index, build_index
from headingrank.textproc import TokenPipelineConfig

PLAIN_CFG = TokenPipelineConfig(stopwords=frozenset(), stem=False)


def corpus_from_pages(pages: list[dict]) -> Corpus:
    """Build a corpus through the real parser from page dicts."""
    return parse_corpus(json.dumps(p) for p in pages)


def page(page_id: str, title: str, sections: list[dict]) -> dict:
    return {"id": page_id, "title": title, "sections": sections}


def section(heading: str, paragraphs=None, children=None) -> dict:
    out: dict = {"heading": heading}
    if paragraphs:
        out["paragraphs"] = [
            {"id": pid, "text": text} if text is not None else pid
            for pid, text in paragraphs
        ]
    if children:
        out["children"] = children
    return out


def plain_index(paragraphs: dict[str, str]) -> Index:
    return build_index(paragraphs, PLAIN_CFG)


@pytest.fixture
def two_page_corpus() -> Corpus:
    """Two small pages sharing vocabulary; used across modules.

    Page A "Rivers" has a nested section; page B "Lakes" is flat.
    """
    return corpus_from_pages([
        page("a", "Rivers", [
            section("Flow", [("p1", "water flows downhill fast"),
                             ("p2", "the river flow rate varies")]),
            section("Delta", [("p3", "sediment settles in the delta")],
                    children=[section("Birds", [("p4", "herons hunt in the delta marsh")])]),
        ]),
        page("b", "Lakes", [
            section("Depth", [("p5", "lake depth varies with season")]),
            section("Flow", [("p6", "lakes drain through outlet rivers")]),
        ]),
    ])
