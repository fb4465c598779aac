"""eventcast: forecast the future portion of a business-process event log.

Pipeline: CSV ingestion -> deterministic preprocessing -> Seq2Seq
(GRU encoder, attention decoder) training -> autoregressive trace
generation -> directly-follows-matrix evaluation against baselines.
"""

__version__ = "0.1.0"

from .eventlog import Event, EventLog, Trace, build_traces, log_stats, parse_csv, read_text, write_text
from .preprocess import TrainingPair, Vocabulary, WindowSpec, build_vocab, make_pairs, sanitize, select_head, split
from .dfg import DfMatrix, align, df_matrix, mae, rmse

__all__ = [
    "Event", "Trace", "EventLog", "parse_csv", "build_traces",
    "write_text", "read_text", "log_stats",
    "Vocabulary", "TrainingPair", "WindowSpec", "sanitize", "select_head",
    "split", "build_vocab", "make_pairs",
    "DfMatrix", "df_matrix", "align", "rmse", "mae",
    "__version__",
]
