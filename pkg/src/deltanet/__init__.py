"""Measurement pipeline for persuasion dynamics in threaded online debates.

Submodules: corpus ingestion and Δ-award pairing (corpus), language features
(textfeat), reply-graph centralities (network), classifiers and evaluation
(learners), before/after panel estimation (did), synthetic ground-truth data
(synth), and the staged CLI pipeline (pipeline, config, cli).
"""

__version__ = "0.1.0"
