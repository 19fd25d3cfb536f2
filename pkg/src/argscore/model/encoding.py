"""Turn a record plus its generated context into padded token-id sequences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from argscore.augment import AugmentationKind, AugmentationSet, KIND_ORDER
from argscore.corpus import ArgumentRecord
from argscore.model.config import ModelConfig
from argscore.model.vocab import CLS_ID, MARKER_IDS, PAD_ID, SEP_ID, Vocabulary


@dataclass
class EncodedExample:
    """Two fixed-length id sequences with 0/1 attention masks.

    ``seq1`` carries [CLS] topic [SEP] argument [SEP]; ``seq2`` carries the
    active context texts, each introduced by its marker token and closed by
    [SEP]. In single mode the context is appended into ``seq1`` instead and
    ``seq2`` stays fully padded. ``truncated_tokens`` counts silently dropped
    ids."""

    seq1: np.ndarray
    mask1: np.ndarray
    seq2: np.ndarray
    mask2: np.ndarray
    truncated_tokens: int = 0


def _pad(ids: list[int], length: int) -> tuple[np.ndarray, np.ndarray]:
    arr = np.full(length, PAD_ID, dtype=np.int64)
    mask = np.zeros(length, dtype=np.float64)
    n = min(len(ids), length)
    arr[:n] = ids[:n]
    mask[:n] = 1.0
    return arr, mask


def encode_input(
    record: ArgumentRecord,
    aug: Optional[AugmentationSet],
    vocab: Vocabulary,
    config: ModelConfig,
    active_kinds: Iterable[AugmentationKind] = (),
) -> EncodedExample:
    length = config.max_seq_len
    active = set(active_kinds)
    ids1 = (
        [CLS_ID]
        + vocab.encode_text(record.topic)
        + [SEP_ID]
        + vocab.encode_text(record.argument)
        + [SEP_ID]
    )
    aug_ids: list[int] = []
    if aug is not None:
        for kind in KIND_ORDER:
            if kind not in active:
                continue
            text = aug.get(kind)
            if text is None:
                continue
            if kind is AugmentationKind.ASSUMPTIONS and aug.empty_assumptions:
                continue  # the bare sentinel carries no content
            aug_ids += [MARKER_IDS[kind]] + vocab.encode_text(text) + [SEP_ID]

    if config.mode == "single":
        ids1 = ids1 + aug_ids
        aug_ids = []

    truncated = max(0, len(ids1) - length) + max(0, len(aug_ids) - length)
    seq1, mask1 = _pad(ids1, length)
    seq2, mask2 = _pad(aug_ids, length)
    return EncodedExample(seq1=seq1, mask1=mask1, seq2=seq2, mask2=mask2,
                          truncated_tokens=truncated)
