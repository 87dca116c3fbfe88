"""Sparse-code compressed LSTM language modeling toolkit.

Thin wrapper over the C++ core: vocabulary building, skip-gram pretraining,
sparse coding of rare words over a base dictionary, NCE training of the
compressed LSTM variants, and perplexity / memory evaluation.
"""

from ._core import (  # noqa: F401
    __version__,
    build_vocab,
    code,
    evaluate,
    pretrain,
    report,
    train,
)

__all__ = [
    "build_vocab",
    "pretrain",
    "code",
    "train",
    "evaluate",
    "report",
    "__version__",
]
