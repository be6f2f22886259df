"""Robust link prediction under bilateral edge noise.

Library layout:

- ``autodiff``: dense reverse-mode differentiation engine
- ``_kernels``: compiled scatter core with a pure-numpy fallback
- ``graphs`` / ``noise`` / ``augment``: data, noise injection, stochastic views
- ``encoders``: GCN / GAT / SAGE and the dot-product readout
- ``objectives``: supervised, contrastive, and selection-based losses
- ``training`` / ``metrics`` / ``cli``: optimization loop, diagnostics, harness
"""

from ._kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
