"""alforge: a desk-scale simulator for consistency-based semi-supervised
active learning on small synthetic benchmarks."""

__version__ = "0.1.0"
