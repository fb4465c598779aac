"""Backend selection: compiled kernels when available, NumPy otherwise.

Both backends expose the same four entry points over a flat parameter
vector; `EVENTCAST_BACKEND=python|compiled` forces a choice (the benchmark
uses this), otherwise the compiled extension wins when importable.

  train_pair(model, x, y, lr, masks) -> loss   (in-place SGD update)
  loss_and_grads(model, x, y, masks) -> (loss, flat gradient vector)
  eval_loss(model, x, y) -> loss               (no dropout)
  generate(model, x, q_eots, max_tokens) -> token list
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ConfigError
from . import reference
from .params import ModelState, layout_offsets

try:
    from . import _core
except ImportError:
    _core = None

_forced = os.environ.get("EVENTCAST_BACKEND", "").strip().lower()
if _forced == "python":
    _core = None
elif _forced == "compiled" and _core is None:
    raise ConfigError(
        "EVENTCAST_BACKEND=compiled but the extension is not built; "
        "reinstall with a C compiler available"
    )
elif _forced not in ("", "python", "compiled"):
    raise ConfigError(f"unknown EVENTCAST_BACKEND value {_forced!r}")

ACTIVE = "compiled" if _core is not None else "python"


def _ids(seq) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(seq, dtype=np.int64))


def _masks(model: ModelState, ty: int, masks) -> np.ndarray:
    if masks is None:
        return np.ones((ty, model.hidden))
    masks = np.ascontiguousarray(np.asarray(masks, dtype=np.float64))
    if masks.shape != (ty, model.hidden):
        raise ConfigError(f"dropout masks shape {masks.shape} != ({ty}, {model.hidden})")
    return masks


if _core is not None:

    def _offs(model: ModelState) -> np.ndarray:
        return layout_offsets(model.vocab_size, model.hidden)

    def train_pair(model, x, y, lr, masks=None) -> float:
        x, y = _ids(x), _ids(y)
        return _core.train_pair(model.theta, _offs(model), model.vocab_size,
                                model.hidden, x, y,
                                _masks(model, len(y), masks), float(lr))

    def loss_and_grads(model, x, y, masks=None):
        x, y = _ids(x), _ids(y)
        grads = np.zeros_like(model.theta)
        loss = _core.loss_and_grads(model.theta, grads, _offs(model),
                                    model.vocab_size, model.hidden, x, y,
                                    _masks(model, len(y), masks))
        return loss, grads

    def eval_loss(model, x, y) -> float:
        x, y = _ids(x), _ids(y)
        return _core.eval_loss(model.theta, _offs(model), model.vocab_size,
                               model.hidden, x, y)

    def generate(model, x, q_eots, max_tokens):
        x = _ids(x)
        if len(x) == 0:
            raise ConfigError("generation requires a non-empty input window")
        out = _core.generate(model.theta, _offs(model), model.vocab_size,
                             model.hidden, x, int(q_eots), int(max_tokens))
        return [int(t) for t in out]

else:

    def train_pair(model, x, y, lr, masks=None) -> float:
        return reference.train_pair(model, _ids(x), _ids(y), lr,
                                    _masks(model, len(y), masks))

    def loss_and_grads(model, x, y, masks=None):
        return reference.loss_and_grads(model, _ids(x), _ids(y),
                                        _masks(model, len(y), masks))

    def eval_loss(model, x, y) -> float:
        return reference.eval_loss(model, _ids(x), _ids(y))

    def generate(model, x, q_eots, max_tokens):
        return reference.generate_greedy(model, _ids(x), int(q_eots),
                                         int(max_tokens))
