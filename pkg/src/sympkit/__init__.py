"""Symptom identification and symptom-assisted disease detection toolkit.

The package is organized around a small pipeline: a bipartite
disease-symptom knowledge graph (``kg``), embedding-based candidate
retrieval with deduplication (``embed``, ``retrieval``), post ingestion
and dataset assembly (``corpus``), multi-annotator label merging and
quality scoring (``annotations``), multi-label relevance and status
models trained under missing labels (``classifier``), per-user disease
detection on reweighted symptom features (``mdd``), and graph-grounded
explanation and label-audit reports (``explain``).
"""

__version__ = "0.1.0"
