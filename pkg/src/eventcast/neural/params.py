"""Model parameters, initialization, and the checkpoint file format.

All learnable parameters live in one flat float64 vector; named views are
materialized on demand from a deterministic layout derived from
(vocab size, hidden size). Gate blocks are stacked in z|r|n order.

Checkpoint format: one UTF-8 JSON header line (shapes, hyper-parameters,
vocabulary hash, seed) followed by the raw little-endian float64 parameter
vector in layout order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..errors import ConfigError
from ..preprocess import WindowSpec

CKPT_FORMAT = "eventcast-checkpoint"
CKPT_VERSION = 1

# Bias vectors are zero-initialized; everything else is uniform(-1/sqrt(d), 1/sqrt(d)).
_BIAS_NAMES = frozenset({"enc_b", "att_b", "dec_b", "out_b"})

# Paper-reported hyper-parameter search bounds; enforced where a search or a
# production CLI run is configured, not on every experimental model.
LR_BOUNDS = (0.001, 0.3)
HIDDEN_BOUNDS = (16, 1024)
DROPOUT_BOUNDS = (0.001, 0.3)


def layout(vocab_size: int, hidden: int) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) table for the flat parameter vector."""
    v, d = vocab_size, hidden
    return [
        ("emb", (v, d)),
        ("enc_wx", (3 * d, d)),
        ("enc_wh", (3 * d, d)),
        ("enc_b", (3 * d,)),
        ("att_w", (d, d)),
        ("att_u", (d, d)),
        ("att_b", (d,)),
        ("att_v", (d,)),
        ("dec_wx", (3 * d, 2 * d)),
        ("dec_wh", (3 * d, d)),
        ("dec_b", (3 * d,)),
        ("out_w", (v, 2 * d)),
        ("out_b", (v,)),
    ]


def layout_size(vocab_size: int, hidden: int) -> int:
    return sum(int(np.prod(shape)) for _, shape in layout(vocab_size, hidden))


def layout_offsets(vocab_size: int, hidden: int) -> np.ndarray:
    """Start offsets of each named block, plus the total length appended."""
    offs = [0]
    for _, shape in layout(vocab_size, hidden):
        offs.append(offs[-1] + int(np.prod(shape)))
    return np.asarray(offs, dtype=np.int64)


@dataclass(frozen=True)
class HyperParams:
    """Training knobs; the optimizer (per-pair SGD) and loss are fixed."""

    learning_rate: float = 0.05
    hidden_size: int = 64
    dropout: float = 0.001
    window: Optional[WindowSpec] = None
    max_tokens: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.hidden_size < 1:
            raise ConfigError(f"hidden size must be >= 1, got {self.hidden_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")

    def validate_bounds(self) -> "HyperParams":
        """Enforce the documented search-space ranges (used by search/CLI)."""
        checks = [
            ("learning rate", self.learning_rate, LR_BOUNDS),
            ("hidden size", self.hidden_size, HIDDEN_BOUNDS),
            ("dropout", self.dropout, DROPOUT_BOUNDS),
        ]
        for name, value, (lo, hi) in checks:
            if not lo <= value <= hi:
                raise ConfigError(
                    f"{name} {value} outside the searchable range [{lo}, {hi}]"
                )
        return self


@dataclass
class ModelState:
    """Flat parameter vector plus the metadata needed to interpret it."""

    vocab_size: int
    hyper: HyperParams
    theta: np.ndarray = field(repr=False)  # float64, 1-D, layout order
    vocab_sha256: Optional[str] = None

    def __post_init__(self):
        expected = layout_size(self.vocab_size, self.hyper.hidden_size)
        if self.theta.shape != (expected,):
            raise ConfigError(
                f"parameter vector has shape {self.theta.shape}, expected ({expected},)"
            )
        if self.theta.dtype != np.float64:
            raise ConfigError("parameter vector must be float64")

    @property
    def hidden(self) -> int:
        return self.hyper.hidden_size

    def views(self, vector: Optional[np.ndarray] = None) -> dict[str, np.ndarray]:
        """Named, reshaped views into `vector` (defaults to the parameters)."""
        vec = self.theta if vector is None else vector
        out = {}
        off = 0
        for name, shape in layout(self.vocab_size, self.hidden):
            size = int(np.prod(shape))
            out[name] = vec[off:off + size].reshape(shape)
            off += size
        return out

    def copy(self) -> "ModelState":
        return replace(self, theta=self.theta.copy())

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.theta).all())


def init_model(vocab_size: int, hyper: HyperParams,
               vocab_sha256: Optional[str] = None) -> ModelState:
    """Seeded initialization: zero biases, uniform(-1/sqrt(d), 1/sqrt(d)) weights.

    Hidden states are zeros at runtime; fully reproducible from the seed.
    """
    if vocab_size < 2:
        raise ConfigError(f"vocab size must be >= 2 (sentinels), got {vocab_size}")
    d = hyper.hidden_size
    rng = np.random.default_rng(hyper.seed)
    bound = 1.0 / np.sqrt(d)
    chunks = []
    for name, shape in layout(vocab_size, d):
        size = int(np.prod(shape))
        if name in _BIAS_NAMES:
            chunks.append(np.zeros(size))
        else:
            chunks.append(rng.uniform(-bound, bound, size=size))
    theta = np.concatenate(chunks)
    return ModelState(vocab_size, hyper, theta, vocab_sha256)


def save_checkpoint(model: ModelState, path, extra_meta: Optional[dict] = None) -> None:
    header = {
        "format": CKPT_FORMAT,
        "version": CKPT_VERSION,
        "vocab_size": model.vocab_size,
        "hidden_size": model.hidden,
        "dropout": model.hyper.dropout,
        "learning_rate": model.hyper.learning_rate,
        "seed": model.hyper.seed,
        "window": (None if model.hyper.window is None
                   else {"p": model.hyper.window.p, "q": model.hyper.window.q}),
        "max_tokens": model.hyper.max_tokens,
        "vocab_sha256": model.vocab_sha256,
        "dtype": "<f8",
        "arrays": [{"name": n, "shape": list(s)}
                   for n, s in layout(model.vocab_size, model.hidden)],
        "meta": extra_meta or {},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(model.theta, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelState:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != CKPT_FORMAT or header.get("version") != CKPT_VERSION:
        raise ConfigError(f"{path} is not a supported checkpoint file")
    window = header.get("window")
    hyper = HyperParams(
        learning_rate=header["learning_rate"],
        hidden_size=header["hidden_size"],
        dropout=header["dropout"],
        window=None if window is None else WindowSpec(window["p"], window["q"]),
        max_tokens=header.get("max_tokens"),
        seed=header["seed"],
    )
    expected = layout_size(header["vocab_size"], header["hidden_size"])
    theta = np.frombuffer(blob, dtype="<f8")
    if theta.shape != (expected,):
        raise ConfigError(
            f"checkpoint payload has {theta.size} values, expected {expected}"
        )
    declared = [(a["name"], tuple(a["shape"])) for a in header["arrays"]]
    if declared != layout(header["vocab_size"], header["hidden_size"]):
        raise ConfigError("checkpoint array table does not match this version's layout")
    return ModelState(header["vocab_size"], hyper,
                      theta.astype(np.float64, copy=True),
                      header.get("vocab_sha256"))
