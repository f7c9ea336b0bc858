"""Decentralized federated learning testbed with adaptive local-update and topology control."""

__version__ = "0.1.0"
