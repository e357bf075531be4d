"""Framelet denoising lab.

Building blocks for multi-band image denoising (tight framelets, shrinkage
estimators, low-rank approximation), reconstruction analysis of
encoder-decoder CNNs, and a small numpy-only training stack used by the
bundled experiments.

Submodules are imported explicitly (``from fdl import framelets``); this
top-level module stays import-light so the CLI can configure the process
before numpy loads.
"""

__version__ = "0.1.0"
