"""Prompt rendering for the four context-generation strategies.

Templates are fixed text; rendering only substitutes the topic, argument, and
(for the similar-quality strategy) gold scores plus the bundled ten-exemplar
few-shot pool. Rendering is pure: same inputs, same bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from argscore.corpus import ArgumentRecord


class AugmentationKind(str, Enum):
    FEEDBACK = "feedback"
    ASSUMPTIONS = "assumptions"
    SIMILAR_QUALITY = "similar_quality"
    COUNTER_ARGUMENT = "counter_argument"


# encoding and prompting iterate kinds in this fixed order
KIND_ORDER: tuple[AugmentationKind, ...] = (
    AugmentationKind.FEEDBACK,
    AugmentationKind.ASSUMPTIONS,
    AugmentationKind.SIMILAR_QUALITY,
    AugmentationKind.COUNTER_ARGUMENT,
)

NO_ASSUMPTIONS = "No assumptions"


class MissingLabels(ValueError):
    """Similar-quality prompts need the record's gold scores."""


class MissingExemplars(ValueError):
    """Similar-quality prompts need a non-empty few-shot exemplar pool."""


@dataclass(frozen=True)
class FewShotExemplar:
    cogency: float
    effectiveness: float
    reasonableness: float
    topic: str
    argument: str


FEEDBACK_TEMPLATE = (
    "Give concise writing feedback for the following argument in context with the topic, "
    "preferably in bullet points:\n"
    "Topic: {topic}\n"
    "Argument: {argument}."
)

ASSUMPTIONS_TEMPLATE = (
    'Summarize the assumptions, if any, in the following argument in a bullet format '
    'otherwise return "No assumptions"\n'
    "Topic: {topic}\n"
    "Argument: {argument}."
)

COUNTER_ARGUMENT_TEMPLATE = (
    "Give a counter-argument for the following argument with respect to the Topic: {topic}\n"
    "Argument: {argument}"
)

SCORE_BLOCK_TEMPLATE = (
    "Cogency Score: {cogency}\n"
    "Effectiveness Score: {effectiveness}\n"
    "Reasonableness Score: {reasonableness}\n"
    "Topic: {topic}\n"
    "Argument: {argument}"
)

SIMILAR_QUALITY_INSTRUCTION = (
    "Generate a similar quality argument with respect to the cogency, "
    "effectiveness and reasonableness scores."
)


def format_score(value: float) -> str:
    """Integral scores render as '3.0', fractional ones minimally ('2.5')."""
    if float(value) == int(value):
        return f"{float(value):.1f}"
    return f"{value:g}"


def _score_block(cogency: float, effectiveness: float, reasonableness: float,
                 topic: str, argument: str) -> str:
    return SCORE_BLOCK_TEMPLATE.format(
        cogency=format_score(cogency),
        effectiveness=format_score(effectiveness),
        reasonableness=format_score(reasonableness),
        topic=topic,
        argument=argument,
    )


def render_prompt(
    kind: AugmentationKind,
    record: ArgumentRecord,
    exemplars: Optional[Sequence[FewShotExemplar]] = None,
) -> str:
    if kind is AugmentationKind.SIMILAR_QUALITY:
        if record.labels is None:
            raise MissingLabels(f"record {record.id!r} has no gold scores")
        if not exemplars:
            raise MissingExemplars("similar-quality prompts need exemplars")
        blocks = [
            _score_block(ex.cogency, ex.effectiveness, ex.reasonableness, ex.topic, ex.argument)
            for ex in exemplars
        ]
        blocks.append(
            _score_block(
                record.labels.cogency,
                record.labels.effectiveness,
                record.labels.reasonableness,
                record.topic,
                record.argument,
            )
            + "\n"
            + SIMILAR_QUALITY_INSTRUCTION
        )
        return "\n\n".join(blocks)
    if exemplars is not None:
        raise ValueError(f"exemplars are only used for similar_quality, not {kind.value}")
    if kind is AugmentationKind.FEEDBACK:
        template = FEEDBACK_TEMPLATE
    elif kind is AugmentationKind.ASSUMPTIONS:
        template = ASSUMPTIONS_TEMPLATE
    elif kind is AugmentationKind.COUNTER_ARGUMENT:
        template = COUNTER_ARGUMENT_TEMPLATE
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown kind {kind}")
    return template.format(topic=record.topic, argument=record.argument)


def validate_exemplar_pool(pool: Sequence[FewShotExemplar]) -> None:
    """The pool must hold exactly ten exemplars with each integer level 1-5
    appearing exactly twice on every metric axis."""
    if len(pool) != 10:
        raise ValueError(f"exemplar pool must have exactly 10 entries, got {len(pool)}")
    for axis in ("cogency", "effectiveness", "reasonableness"):
        values = sorted(getattr(ex, axis) for ex in pool)
        expected = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 5.0, 5.0]
        if values != expected:
            raise ValueError(f"exemplar pool {axis} levels {values} != two per integer 1-5")


def load_exemplars(path: str | Path | None = None) -> list[FewShotExemplar]:
    """Load the few-shot exemplar pool (the bundled fixture by default)."""
    if path is None:
        raw = resources.files("argscore.augment").joinpath("exemplars.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    pool = [FewShotExemplar(**obj) for obj in json.loads(raw)]
    validate_exemplar_pool(pool)
    return pool
