"""Byte-stable rendering of the regular and enhanced prompt templates.

Templates live as plain files (bundled defaults under ``data/templates``)
rather than string literals, so the exact wording is auditable and pinned by
golden-file tests. Rendering is a pure function: equal bundles produce
byte-equal prompts, and passages appear in retrieval rank order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Sequence

from lexalign.factors import DimensionDescriptor, Pole


class PromptError(Exception):
    pass


class PromptMode(str, Enum):
    REGULAR_NOCONTEXT = "regular-nocontext"
    REGULAR_RAG = "regular-rag"
    ENHANCED_NOCONTEXT = "enhanced-nocontext"
    ENHANCED_RAG = "enhanced-rag"

    @property
    def is_rag(self) -> bool:
        return self.value.endswith("-rag")

    @property
    def is_enhanced(self) -> bool:
        return self.value.startswith("enhanced")

    @property
    def condition(self) -> str:
        """Experimental condition: answers grounded in retrieved context or not."""
        return "RAG" if self.is_rag else "LLM"

    @property
    def prompt_type(self) -> str:
        return "Enhanced" if self.is_enhanced else "Regular"

    @property
    def template_file(self) -> str:
        return self.value.replace("-", "_") + ".txt"


@dataclass(frozen=True)
class PromptBundle:
    question: str
    mode: PromptMode
    passages: tuple[str, ...] = ()
    descriptor: DimensionDescriptor | None = None
    pole: Pole | None = None

    def __post_init__(self):
        if self.mode.is_rag and not self.passages:
            raise PromptError(f"mode {self.mode.value} requires at least one passage")
        if not self.mode.is_rag and self.passages:
            raise PromptError(f"mode {self.mode.value} must not carry passages")
        if self.mode.is_enhanced and (self.descriptor is None or self.pole is None):
            raise PromptError(
                f"mode {self.mode.value} requires a dimension descriptor and pole"
            )


def default_templates_dir() -> Path:
    with resources.as_file(resources.files("lexalign") / "data" / "templates") as path:
        return Path(path)


_PLACEHOLDER_RE = re.compile(r"\{(question|passages|label|description|vocabulary)\}")


def _numbered(passages: Sequence[str]) -> str:
    return "\n".join(f"[{i}] {text}" for i, text in enumerate(passages, start=1))


def _fill(template: str, values: dict[str, str]) -> str:
    # single left-to-right pass: substituted values are never re-scanned
    return _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], template)


def render(bundle: PromptBundle, templates_dir: str | Path | None = None) -> str:
    """Render the bundle's template to the final prompt text."""
    if not bundle.question.strip():
        raise PromptError("question is empty")
    directory = Path(templates_dir) if templates_dir else default_templates_dir()
    template = (directory / bundle.mode.template_file).read_text(encoding="utf-8")

    values = {"question": bundle.question, "passages": _numbered(bundle.passages)}
    if bundle.mode.is_enhanced:
        descriptor = bundle.descriptor
        pole = bundle.pole
        assert descriptor is not None and pole is not None
        label = descriptor.label(pole)
        description = descriptor.description(pole)
        vocabulary = descriptor.vocabulary(pole)
        if not label:
            raise PromptError(f"descriptor dim {descriptor.dim_index}: label missing")
        if not description:
            raise PromptError(
                f"descriptor dim {descriptor.dim_index}: description missing"
            )
        if not vocabulary:
            raise PromptError(
                f"descriptor dim {descriptor.dim_index}: typical vocabulary missing"
            )
        values["label"] = label
        values["description"] = description
        values["vocabulary"] = ", ".join(vocabulary)
    return _fill(template, values)


def render_regular(bundle: PromptBundle, templates_dir: str | Path | None = None) -> str:
    if bundle.mode.is_enhanced:
        raise PromptError(f"render_regular got mode {bundle.mode.value}")
    return render(bundle, templates_dir)


def render_enhanced(bundle: PromptBundle, templates_dir: str | Path | None = None) -> str:
    if not bundle.mode.is_enhanced:
        raise PromptError(f"render_enhanced got mode {bundle.mode.value}")
    return render(bundle, templates_dir)
