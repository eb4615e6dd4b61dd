"""cxmine: mining rare grammatical constructions from parsed corpora.

Pipeline stages: CoNLL-U ingestion, dependency-subtree prefiltering,
cost-optimized LLM classification, human annotation with diversity
sampling, 4-tuple label extrapolation, and a verb-substitution probe of
LLM understanding.
"""

__version__ = "0.1.0"
