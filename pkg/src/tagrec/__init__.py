"""Codec and evaluation toolkit for entity-tagged transcriptions of marriage records."""

__version__ = "0.1.0"
