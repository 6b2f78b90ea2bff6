"""classlink: class-aware link prediction toolkit.

Structural link-prediction heuristics, class-conditioned edge priors, and a
small message-passing backbone with hand-derived gradients, plus the seeded
pipeline (ingest -> split -> priors/pseudo-labels -> train -> evaluate) that
ties them together.
"""

__version__ = "0.1.0"
