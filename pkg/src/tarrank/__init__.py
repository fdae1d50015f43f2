"""tar-rank: ranking engine for technology-assisted review screening.

Builds BM25+RM3 baselines over per-topic candidate subsets, fuses them with
sentence-level similarity scores, evaluates runs with CLEF-TAR metrics and
compares models with ANOVA / t-test / Bonferroni statistics.
"""

__version__ = "0.1.0"
