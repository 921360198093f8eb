"""Sentence embeddings in curvature-parameterized balls, composed with
gyrovector addition over parse trees and trained with Riemannian SGD for
textual entailment."""

from .backend import BACKEND, backend_name

__version__ = "0.1.0"

__all__ = ["BACKEND", "backend_name", "__version__"]
