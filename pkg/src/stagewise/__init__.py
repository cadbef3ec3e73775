"""Coarse-to-fine staged training for long-tailed, mixed-granularity labels.

The package builds a label hierarchy by greedy embedding clustering, splits a
dataset into per-layer stages, and trains a small classifier stage by stage
under class-balanced cross-entropy plus two knowledge-consolidation terms:
an output-distillation penalty against the previous stage's frozen model and
a quadratic parameter anchor weighted by accumulated Fisher information and
per-parameter importance scores.
"""

__version__ = "0.1.0"
