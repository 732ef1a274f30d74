"""Teammate performance networks from match logs, and link-weight prediction on them.

Modules:
    ingest: match-log parsing, validation and per-player histories.
    rating: two-team Gaussian skill ratings and rating timelines.
    perfnet: short- and long-term performance networks, components, Kendall tau.
    models: average baseline, graph factorization and two autoencoders.
    evaluate: hidden-link splits, random-walk sampling and ranking metrics.
    synth: synthetic match logs and planted networks with known ground truth.
    cli: the staged command-line pipeline.
"""

__version__ = "0.1.0"
