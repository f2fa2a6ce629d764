"""Desk-scale toolkit for cross-lingual dense retrieval experiments.

Covers parallel-corpus curation by English pivoting, WordPiece vocabulary
extension, masked/translation language-modeling data generation, a small
verifiable dual encoder, exact top-k retrieval, and an answer-level
evaluation protocol with paired significance testing.
"""

__version__ = "0.1.0"
