"""balcor: balanced training and verdict-based label correction for
imbalanced social-media text classification.

Pipeline: prepare -> balance -> train -> predict -> verify -> correct ->
evaluate, with projection diagnostics, an analytic correction simulator,
and a human-review HTTP service. See the README for a walkthrough.
"""

__version__ = "0.1.0"

from .corpus import Dataset, LabeledExample, Post, TaskSpec  # noqa: F401
