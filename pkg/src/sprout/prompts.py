"""Prompt templates: the system preamble, the plan/vote/write scaffolding and
the intervention skeletons.

Templates ship as plain-text assets under ``sprout/templates`` and can be
overridden per file with a user-supplied directory.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .errors import InvalidArgument


class InterventionKind(str, Enum):
    USER_DEFINED_GENERATION = "UserDefinedGeneration"
    SPLIT_MULTI_STEP = "SplitMultiStep"
    GROUP_ONE_PARAGRAPH = "GroupOneParagraph"
    STYLE_REFINE = "StyleRefine"
    DETAIL_REFINE = "DetailRefine"
    FREE_REFINE = "FreeRefine"


_FILES = {
    "system_preamble": "system_preamble.txt",
    "plan": "plan.txt",
    "vote": "vote.txt",
    "write": "write.txt",
    InterventionKind.USER_DEFINED_GENERATION: "user_defined_generation.txt",
    InterventionKind.SPLIT_MULTI_STEP: "split_multi_step.txt",
    InterventionKind.GROUP_ONE_PARAGRAPH: "group_one_paragraph.txt",
    InterventionKind.STYLE_REFINE: "style_refine.txt",
    InterventionKind.DETAIL_REFINE: "detail_refine.txt",
    InterventionKind.FREE_REFINE: "free_refine.txt",
}

DETAIL_DIRECTIONS = ("shorter", "longer")


@dataclass(frozen=True)
class PromptTemplateSet:
    system_preamble: str
    plan: str
    vote: str
    write: str
    interventions: Mapping[InterventionKind, str]

    def __post_init__(self):
        object.__setattr__(self, "interventions", MappingProxyType(dict(self.interventions)))


def _read_template(name: str, override_dir: Path | None) -> str:
    if override_dir is not None:
        candidate = override_dir / name
        if candidate.exists():
            return candidate.read_text(encoding="utf-8")
    return resources.files("sprout").joinpath("templates", name).read_text(encoding="utf-8")


def load_templates(override_dir: str | Path | None = None) -> PromptTemplateSet:
    """Load the packaged templates, with per-file overrides from a directory."""
    override = Path(override_dir) if override_dir is not None else None
    return PromptTemplateSet(
        system_preamble=_read_template(_FILES["system_preamble"], override),
        plan=_read_template(_FILES["plan"], override),
        vote=_read_template(_FILES["vote"], override),
        write=_read_template(_FILES["write"], override),
        interventions={
            kind: _read_template(_FILES[kind], override) for kind in InterventionKind
        },
    )


def _placeholders(template: str) -> set[str]:
    return {
        field for _, field, _, _ in string.Formatter().parse(template) if field is not None
    }


def build_intervention_prompt(
    kind: InterventionKind,
    params: Mapping[str, str],
    templates: PromptTemplateSet | None = None,
) -> str:
    """Render one intervention skeleton; every placeholder must be supplied
    and non-empty."""
    templates = templates or load_templates()
    template = templates.interventions[kind]
    needed = _placeholders(template)
    for name in needed:
        value = params.get(name)
        if not isinstance(value, str) or not value.strip():
            raise InvalidArgument(f"{kind.value} requires parameter {name!r}")
    if kind is InterventionKind.DETAIL_REFINE:
        if params["direction"] not in DETAIL_DIRECTIONS:
            raise InvalidArgument("direction must be 'shorter' or 'longer'")
    return template.format(**{name: params[name] for name in needed}).strip("\n")
