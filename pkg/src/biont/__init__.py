"""Ontology-aware biomedical relation extraction.

Candidate entity pairs in a sentence are represented by the shortest
dependency path between their head tokens, the path's WordNet supersense
classes, and the entities' ontology ancestor chains; a multichannel
bidirectional LSTM classifies each pair as related or not.
"""

__version__ = "0.1.0"
