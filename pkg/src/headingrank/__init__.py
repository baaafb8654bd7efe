"""Passage retrieval for outline-structured corpora.

Heading queries are built from article outlines; paragraphs are ranked
by lexical, vector-space, and entity scorers, optionally expanded with
pseudo-relevance feedback, and fused with a MAP-trained linear model.
"""

__version__ = "0.1.0"
