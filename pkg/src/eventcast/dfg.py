"""Directly-follows matrices and the RMSE/MAE distance between two logs.

A directly-follows matrix counts, over all traces, how often activity i is
immediately followed by activity j. Rows and columns share one alphabetically
sorted activity universe; artificial start/end nodes are not represented.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, InputDataError
from .eventlog import EventLog


@dataclass(frozen=True)
class DfMatrix:
    """Weighted adjacency matrix of directly-follows frequencies."""

    universe: tuple[str, ...]
    counts: np.ndarray  # (n, n) int64, counts[i, j] = #(universe[i] -> universe[j])

    def __post_init__(self):
        n = len(self.universe)
        if self.counts.shape != (n, n):
            raise ConfigError(
                f"counts shape {self.counts.shape} does not match universe size {n}"
            )
        if list(self.universe) != sorted(self.universe):
            raise ConfigError("activity universe must be sorted alphabetically")
        self.counts.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.universe)

    def get(self, src: str, dst: str) -> int:
        i = self.universe.index(src)
        j = self.universe.index(dst)
        return int(self.counts[i, j])


def _sequences(log: Union[EventLog, Iterable[Sequence[str]]]):
    return log.sequences if isinstance(log, EventLog) else [tuple(s) for s in log]


def df_matrix(
    log: Union[EventLog, Iterable[Sequence[str]]],
    universe: Optional[Sequence[str]] = None,
) -> DfMatrix:
    """Count adjacent activity pairs across all traces of a log.

    When `universe` is supplied, every activity in the log must belong to it;
    the matrix is indexed over the sorted universe either way.
    """
    seqs = _sequences(log)
    observed = {a for seq in seqs for a in seq}
    if universe is None:
        uni = tuple(sorted(observed))
    else:
        uni = tuple(sorted(set(universe)))
        missing = observed - set(uni)
        if missing:
            raise InputDataError(
                f"activities {sorted(missing)} not in the supplied universe"
            )
    index = {a: i for i, a in enumerate(uni)}
    counts = np.zeros((len(uni), len(uni)), dtype=np.int64)
    for seq in seqs:
        for a, b in zip(seq, seq[1:]):
            counts[index[a], index[b]] += 1
    return DfMatrix(uni, counts)


def align(m1: DfMatrix, m2: DfMatrix) -> tuple[DfMatrix, DfMatrix]:
    """Re-index both matrices over the sorted union universe, zero-filling."""
    if m1.universe == m2.universe:
        return m1, m2
    union = tuple(sorted(set(m1.universe) | set(m2.universe)))
    out = []
    for m in (m1, m2):
        counts = np.zeros((len(union), len(union)), dtype=np.int64)
        pos = [union.index(a) for a in m.universe]
        for i, pi in enumerate(pos):
            for j, pj in enumerate(pos):
                counts[pi, pj] = m.counts[i, j]
        out.append(DfMatrix(union, counts))
    return out[0], out[1]


def _check_aligned(x: DfMatrix, y: DfMatrix):
    if x.universe != y.universe:
        raise ConfigError(
            "matrices have different universes; call align() first"
        )


def rmse(x: DfMatrix, y: DfMatrix) -> float:
    """sqrt of the mean squared entry difference over all n^2 cells."""
    _check_aligned(x, y)
    diff = x.counts.astype(np.float64) - y.counts.astype(np.float64)
    return math.sqrt(float(np.mean(diff * diff)))


def mae(x: DfMatrix, y: DfMatrix) -> float:
    """Mean absolute entry difference over all n^2 cells."""
    _check_aligned(x, y)
    diff = x.counts.astype(np.float64) - y.counts.astype(np.float64)
    return float(np.mean(np.abs(diff)))


def write_matrix_csv(m: DfMatrix, path) -> None:
    """Export with a label header row/column (heat maps are plotted externally)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + list(m.universe))
        for i, a in enumerate(m.universe):
            writer.writerow([a] + [int(v) for v in m.counts[i]])


def read_matrix_csv(path) -> DfMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    universe = tuple(rows[0][1:])
    counts = np.array([[int(v) for v in row[1:]] for row in rows[1:]],
                      dtype=np.int64)
    return DfMatrix(universe, counts)
