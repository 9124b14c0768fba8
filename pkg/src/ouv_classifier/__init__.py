"""Sentence-level classification of World Heritage OUV selection criteria.

The package builds a sentence dataset from the UNESCO syndication export,
derives criterion co-occurrence priors, generates soft training labels,
trains from-scratch n-gram and bag-of-embeddings classifiers, and evaluates
them with multi-class and multi-label metrics.
"""

__version__ = "0.1.0"

NUM_CRITERIA = 10
NUM_CLASSES = 11  # ten selection criteria plus the synthetic "Others" class
OTHERS_CLASS = 11
OTHERS_NOISE = 0.2
