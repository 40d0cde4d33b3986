"""Gaussian-splat scene memory with language codebooks for goal navigation.

A synthetic indoor simulator feeds an online isotropic-gaussian memory;
per-gaussian semantic features are quantized into a two-level codebook and
associated with instance-level embeddings, which a navigator queries to
localize and verify multi-modal goals.
"""

from .accel import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
