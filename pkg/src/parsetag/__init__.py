"""Constituent and dependency parsing as sequence labeling, with a
single linear-softmax probe over word vectors."""

__version__ = "0.1.0"
