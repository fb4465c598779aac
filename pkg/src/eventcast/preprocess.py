"""Label sanitization, vocabulary encoding, and sliding-window training pairs.

A training pair covers p consecutive traces as input and the q traces that
immediately follow as expected output; consecutive pairs advance by one
trace. Every trace inside a pair is terminated by the end-of-trace sentinel.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .errors import ConfigError, InputDataError
from .eventlog import EventLog, parse_csv

SOS_TOKEN = "<SOS>"
EOT_TOKEN = "<EOT>"
VOCAB_FORMAT_VERSION = 1
PAIRS_FORMAT_VERSION = 1


def sanitize(activity: str) -> str:
    """Strip every character that is not an ASCII letter or digit.

    Raises InputDataError when nothing remains (the label would vanish).
    """
    cleaned = "".join(ch for ch in activity if ch.isascii() and ch.isalnum())
    if not cleaned:
        raise InputDataError(
            f"activity {activity!r} is empty after removing special characters"
        )
    return cleaned


def ingest_csv(path, case_col="case_id", time_col="timestamp",
               act_col="activity", time_format=None) -> EventLog:
    """parse_csv with sanitization applied before the ordering rules."""
    return parse_csv(path, case_col=case_col, time_col=time_col,
                     act_col=act_col, time_format=time_format,
                     transform=sanitize)


def select_head(log: EventLog, n: int) -> EventLog:
    """First min(n, len(log)) traces of an already-ordered log."""
    if n < 0:
        raise ConfigError(f"head count must be >= 0, got {n}")
    return EventLog.from_traces(log.traces[:n])


def split(log: EventLog, train_fraction: float) -> tuple[EventLog, EventLog]:
    """Size-based split: first floor(fraction * T) traces train, rest test."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(
            f"train fraction must be in (0, 1), got {train_fraction}"
        )
    cut = int(len(log) * train_fraction)
    if cut == 0 and len(log) > 0:
        warnings.warn(
            f"degenerate split: {len(log)} trace(s) at fraction "
            f"{train_fraction} leaves an empty training log"
        )
    train = EventLog.from_traces(log.traces[:cut])
    test = EventLog.from_traces(log.traces[cut:])
    return train, test


class Vocabulary:
    """Dense token <-> id bijection with reserved start/end sentinels.

    Id 0 is the decoder start sentinel, id 1 the end-of-trace marker;
    activity ids follow in first-appearance order over the training log.
    """

    SOS_ID = 0
    EOT_ID = 1

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tokens[:2] != [SOS_TOKEN, EOT_TOKEN]:
            raise ConfigError(
                f"vocabulary must start with {SOS_TOKEN!r}, {EOT_TOKEN!r}"
            )
        if len(set(tokens)) != len(tokens):
            raise ConfigError("vocabulary tokens must be unique")
        self._tokens = tokens
        self._ids = {tok: i for i, tok in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self._tokens)

    def encode(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise InputDataError(
                f"activity {token!r} is not in the training vocabulary"
            ) from None

    def decode(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._tokens):
            raise InputDataError(f"token id {token_id} out of range")
        return self._tokens[token_id]

    def encode_trace(self, activities: Sequence[str]) -> list[int]:
        """Encode one trace and terminate it with the end-of-trace id."""
        return [self.encode(a) for a in activities] + [self.EOT_ID]

    def sha256(self) -> str:
        payload = json.dumps(self._tokens, separators=(",", ":")).encode()
        return hashlib.sha256(payload).hexdigest()

    def save(self, path) -> None:
        doc = {"version": VOCAB_FORMAT_VERSION, "tokens": self._tokens}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("version") != VOCAB_FORMAT_VERSION:
            raise ConfigError(
                f"unsupported vocabulary version {doc.get('version')!r} in {path}"
            )
        return cls(doc["tokens"])


def build_vocab(train: Union[EventLog, Iterable[Sequence[str]]]) -> Vocabulary:
    """Vocabulary over the training traces only, first-appearance order."""
    sequences = train.sequences if isinstance(train, EventLog) else train
    tokens = [SOS_TOKEN, EOT_TOKEN]
    seen = set(tokens)
    empty = True
    for seq in sequences:
        empty = False
        for act in seq:
            if act not in seen:
                seen.add(act)
                tokens.append(act)
    if empty:
        raise ConfigError("cannot build a vocabulary from an empty log")
    return Vocabulary(tokens)


@dataclass(frozen=True)
class WindowSpec:
    """Trace counts for the sliding window: p input traces, q output traces."""

    p: int
    q: int

    def __post_init__(self):
        for name, value in (("p", self.p), ("q", self.q)):
            if not 1 <= value <= 50:
                raise ConfigError(
                    f"window {name} must be in [1, 50], got {value}"
                )


@dataclass(frozen=True)
class TrainingPair:
    """Token-encoded (input, expected output) window starting at trace `index`."""

    x: tuple[int, ...]
    y: tuple[int, ...]
    index: int


def make_pairs(
    log: Union[EventLog, Sequence[Sequence[str]]],
    spec: WindowSpec,
    vocab: Vocabulary,
) -> list[TrainingPair]:
    """All stride-1 windows: pair k covers traces [k, k+p) -> [k+p, k+p+q)."""
    sequences = log.sequences if isinstance(log, EventLog) else list(log)
    t = len(sequences)
    need = spec.p + spec.q
    if t < need:
        raise ConfigError(
            f"log has {t} traces but p+q={need} are required for one pair"
        )
    encoded = [vocab.encode_trace(seq) for seq in sequences]
    pairs = []
    for k in range(t - need + 1):
        x = [tok for seq in encoded[k:k + spec.p] for tok in seq]
        y = [tok for seq in encoded[k + spec.p:k + need] for tok in seq]
        pairs.append(TrainingPair(tuple(x), tuple(y), k))
    return pairs


def decode_stream(tokens: Sequence[int], vocab: Vocabulary) -> list[tuple[str, ...]]:
    """Split a token stream on the end-of-trace id back into traces.

    Tokens after the last end-of-trace marker (an incomplete tail) are
    dropped; empty segments produce empty tuples, callers decide their fate.
    """
    traces: list[tuple[str, ...]] = []
    current: list[str] = []
    for tok in tokens:
        if tok == Vocabulary.EOT_ID:
            traces.append(tuple(current))
            current = []
        else:
            current.append(vocab.decode(tok))
    return traces


def save_pairs(path, pairs: Sequence[TrainingPair], spec: WindowSpec,
               vocab: Vocabulary, meta: Optional[dict] = None) -> None:
    doc = {
        "version": PAIRS_FORMAT_VERSION,
        "p": spec.p,
        "q": spec.q,
        "vocab_sha256": vocab.sha256(),
        "meta": meta or {},
        "pairs": [{"x": list(pr.x), "y": list(pr.y), "index": pr.index}
                  for pr in pairs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_pairs(path, vocab: Optional[Vocabulary] = None
               ) -> tuple[list[TrainingPair], WindowSpec]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != PAIRS_FORMAT_VERSION:
        raise ConfigError(
            f"unsupported pairs version {doc.get('version')!r} in {path}"
        )
    if vocab is not None and doc["vocab_sha256"] != vocab.sha256():
        raise ConfigError(
            "pairs file was built against a different vocabulary"
        )
    spec = WindowSpec(doc["p"], doc["q"])
    pairs = [TrainingPair(tuple(d["x"]), tuple(d["y"]), d["index"])
             for d in doc["pairs"]]
    return pairs, spec
