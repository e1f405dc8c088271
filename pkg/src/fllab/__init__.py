"""Desk-scale lab for DP federated fine-tuning of tiny next-word LMs on synthesized corpora."""

__version__ = "0.1.0"
