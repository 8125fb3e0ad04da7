"""Question answering over personal event timelines.

A plan DSL, an operator-tree execution engine with retrieval and extraction
operators, a synthetic data generator with an exhaustive answer oracle, an
evaluation harness, and an HTTP service for interactive answer tracing.
"""

__version__ = "0.1.0"
