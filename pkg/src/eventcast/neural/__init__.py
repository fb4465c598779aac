"""Seq2Seq numerical core: GRU encoder, attention decoder, manual gradients.

Two interchangeable backends compute the hot loops: a compiled extension
(`eventcast.neural._core`, built from Cython) and a pure-NumPy fallback.
`backend.ACTIVE` names the one selected at import time.
"""

from .params import HyperParams, ModelState, init_model, load_checkpoint, save_checkpoint
from . import reference
from . import backend

__all__ = [
    "HyperParams", "ModelState", "init_model",
    "save_checkpoint", "load_checkpoint",
    "reference", "backend",
]
