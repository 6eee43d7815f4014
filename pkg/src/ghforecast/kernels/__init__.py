from .backend import HAVE_NUMBA, NUMBA_ENABLED, backend_name
from .recurrent import (
    lstm_backward,
    lstm_forward,
    rnn_backward,
    rnn_forward,
)
from .attention import gat_backward, gat_forward

__all__ = [
    "HAVE_NUMBA",
    "NUMBA_ENABLED",
    "backend_name",
    "rnn_forward",
    "rnn_backward",
    "lstm_forward",
    "lstm_backward",
    "gat_forward",
    "gat_backward",
]
