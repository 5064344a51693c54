"""Prompt rendering for every level of the summarization hierarchy.

Each prompt lives in ``prompts/`` as a plain-text template: system text,
a ``---`` separator line, then user text with ``{{placeholder}}`` slots.
Rendering is pure string templating — identical inputs always produce
byte-identical :class:`RenderedPrompt` values, so prompts can be rendered
from any number of concurrent workers and hashed into cache keys.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import List, NamedTuple, Optional, Protocol, Sequence

from ..segmenter import CodeSegment, SegmentKind, SourceFile, parse_file_header

_SLOT_RE = re.compile(r"\{\{(\w+)\}\}")
_SEPARATOR = "---"

#: Judge criteria and their definitions, keyed by the identifier accepted
#: by :func:`render_judge_prompt`.
JUDGE_CRITERIA = {
    "completeness": "the summary should cover all aspects of the code",
    "conciseness": "the summary should be concise",
    "correctness": "the summary should not hallucinate",
    "cohesiveness": "the summary should be cohesive",
    "domain_specificity": "the summary should reflect domain-specific terms and concepts",
}

_CRITERION_TITLES = {
    "completeness": "Completeness",
    "conciseness": "Conciseness",
    "correctness": "Correctness",
    "cohesiveness": "Cohesiveness",
    "domain_specificity": "Domain Specificity",
}


class PromptStyle(str, Enum):
    """Function-prompt variants, from plain to chain-of-thought with one-shot."""

    GENERIC = "generic"
    STRUCTURED = "structured"
    STRUCTURED_ONE_SHOT = "structured_1s"


@dataclass(frozen=True)
class GroundingContext:
    """Optional business-context texts spliced into file-level prompts.

    Grounded mode requires both texts; both empty is the ungrounded
    baseline.  Supplying exactly one is a configuration error.
    """

    domain_description: str = ""
    problem_context_description: str = ""

    def __post_init__(self) -> None:
        if bool(self.domain_description.strip()) != bool(
            self.problem_context_description.strip()
        ):
            raise ValueError(
                "grounding requires both a domain description and a problem "
                "context description; supply both or neither"
            )

    @property
    def grounded(self) -> bool:
        return bool(self.domain_description.strip())

    def digest(self) -> str:
        """Stable digest of the grounding texts, for cache keys."""
        h = hashlib.sha256()
        h.update(self.domain_description.encode("utf-8"))
        h.update(b"\x00")
        h.update(self.problem_context_description.encode("utf-8"))
        return h.hexdigest()


@dataclass(frozen=True)
class RenderedPrompt:
    system_text: str
    user_text: str
    template_id: str
    template_version: str


class SummaryLike(Protocol):
    """What a segment summary must expose to be folded into a description."""

    kind: str
    name: str
    start_line: int
    end_line: int
    text: str


class FileSummaryLike(Protocol):
    path: str
    role: str
    key_functionality: str
    purpose: str


class PackageSummaryLike(Protocol):
    package_name: str
    text: str


@dataclass(frozen=True)
class FileDescription:
    """Textual description of one source file, fed to the file-level prompt.

    ``rendered_text`` lists its sections in a fixed order: package name,
    imports, type name, member fields, constructors, functions.  Interface
    and enum whole-type summaries appear under the type-name section.
    """

    package_name: str
    import_list: List[str]
    type_name: str
    type_kind: str
    member_field_summaries: List[SummaryLike] = field(default_factory=list)
    constructor_summaries: List[SummaryLike] = field(default_factory=list)
    function_summaries: List[SummaryLike] = field(default_factory=list)
    rendered_text: str = ""


class _Template(NamedTuple):
    system: str
    user: str
    version: str


@lru_cache(maxsize=None)
def _load_template(name: str) -> _Template:
    raw = (resources.files(__package__) / f"{name}.txt").read_text(encoding="utf-8")
    version = hashlib.sha256(raw.encode("utf-8")).hexdigest()[:12]
    lines = raw.split("\n")
    try:
        sep = lines.index(_SEPARATOR)
    except ValueError:
        raise ValueError(f"template {name!r} lacks a '---' separator line") from None
    system = "\n".join(lines[:sep]).strip()
    user = "\n".join(lines[sep + 1 :]).strip()
    return _Template(system, user, version)


def _fill(template_text: str, slots: dict) -> str:
    def lookup(match: re.Match) -> str:
        key = match.group(1)
        if key not in slots:
            raise KeyError(f"template slot {{{{{key}}}}} has no value")
        return slots[key]

    return _SLOT_RE.sub(lookup, template_text)


def _render(name: str, template_id: str, slots: dict) -> RenderedPrompt:
    tpl = _load_template(name)
    return RenderedPrompt(
        system_text=tpl.system,
        user_text=_fill(tpl.user, slots),
        template_id=template_id,
        template_version=tpl.version,
    )


_FUNCTION_TEMPLATES = {
    PromptStyle.GENERIC: "function_generic",
    PromptStyle.STRUCTURED: "function_structured",
    PromptStyle.STRUCTURED_ONE_SHOT: "function_structured_1s",
}

_KIND_TEMPLATES = {
    SegmentKind.CONSTRUCTOR: "constructor",
    SegmentKind.VARIABLE: "variable",
    SegmentKind.INTERFACE: "interface",
    SegmentKind.ENUM: "enum",
}


def render_segment_prompt(segment: CodeSegment, style: PromptStyle) -> RenderedPrompt:
    """Render the kind-specific prompt for one segment.

    Only functions vary with *style*; constructors, variables, interfaces
    and enums each have a single fixed prompt.  The segment's code text is
    appended as the final user-message block.
    """
    kind = SegmentKind(segment.kind)
    style = PromptStyle(style)
    if kind is SegmentKind.FUNCTION:
        name = _FUNCTION_TEMPLATES[style]
        template_id = f"function/{style.value}"
    else:
        name = _KIND_TEMPLATES[kind]
        template_id = kind.value
    return _render(name, template_id, {"code": segment.text})


def _grouped(summaries: Sequence[SummaryLike]):
    """Split summaries into (type-level, fields, constructors, functions)."""
    types: List[SummaryLike] = []
    fields: List[SummaryLike] = []
    ctors: List[SummaryLike] = []
    funcs: List[SummaryLike] = []
    for s in sorted(summaries, key=lambda s: (s.start_line, s.end_line, s.name)):
        kind = SegmentKind(s.kind)
        if kind in (SegmentKind.INTERFACE, SegmentKind.ENUM):
            types.append(s)
        elif kind is SegmentKind.VARIABLE:
            fields.append(s)
        elif kind is SegmentKind.CONSTRUCTOR:
            ctors.append(s)
        else:
            funcs.append(s)
    return types, fields, ctors, funcs


def _section(title: str, entries: Sequence[SummaryLike]) -> List[str]:
    if not entries:
        return [f"{title}: (none)"]
    lines = [f"{title}:"]
    lines.extend(f"- {s.name}: {s.text}" for s in entries)
    return lines


def build_file_description(
    file: SourceFile, raw_header: str, summaries: Sequence[SummaryLike]
) -> FileDescription:
    """Convert a file's segment summaries into its textual description.

    *raw_header* is the file's source text; its package, import and
    type-declaration lines are parsed out of it.  Input order of
    *summaries* does not matter — sections are sorted by source span.
    """
    header = parse_file_header(raw_header)
    types, fields, ctors, funcs = _grouped(summaries)

    lines = [f"Package: {header.package_name or '(default)'}"]
    if header.imports:
        lines.append("Imports:")
        lines.extend(f"- {imp}" for imp in header.imports)
    else:
        lines.append("Imports: (none)")
    lines.append(f"Type: {header.type_kind} {header.type_name}".rstrip())
    lines.extend(f"- {s.name}: {s.text}" for s in types)

    if not summaries:
        lines.append("Members: (none)")
    elif fields or ctors or funcs:
        lines.extend(_section("Member fields", fields))
        lines.extend(_section("Constructors", ctors))
        lines.extend(_section("Functions", funcs))
    # else: only whole-type summaries — the type section stands in for members.

    return FileDescription(
        package_name=header.package_name,
        import_list=list(header.imports),
        type_name=header.type_name,
        type_kind=header.type_kind,
        member_field_summaries=fields,
        constructor_summaries=ctors,
        function_summaries=funcs,
        rendered_text="\n".join(lines),
    )


def _grounding_block(grounding: GroundingContext) -> str:
    if not grounding.grounded:
        return ""
    return (
        grounding.domain_description.strip()
        + "\n"
        + grounding.problem_context_description.strip()
        + "\n"
    )


def render_file_prompt(
    description: FileDescription, grounding: GroundingContext
) -> RenderedPrompt:
    """Render the file-level prompt, splicing grounding texts when present."""
    if not description.rendered_text:
        raise ValueError("file description has no rendered text")
    flag = "grounded" if grounding.grounded else "ungrounded"
    return _render(
        "file_level",
        f"file/{flag}",
        {
            "grounding": _grounding_block(grounding),
            "description": description.rendered_text,
        },
    )


def render_package_prompt(
    file_summaries: Sequence[FileSummaryLike],
) -> RenderedPrompt:
    """Render the package-level prompt over file Role/Key functionality/Purpose.

    Only those three file-level texts are included; segment details are
    deliberately omitted.  Files are rendered in path order.
    """
    if not file_summaries:
        raise ValueError("cannot render a package prompt with no file summaries")
    blocks = []
    for fs in sorted(file_summaries, key=lambda fs: fs.path):
        blocks.append(
            f"File: {fs.path}\n"
            f"Role: {fs.role}\n"
            f"Key functionality: {fs.key_functionality}\n"
            f"Purpose: {fs.purpose}"
        )
    return _render("package_level", "package", {"file_summaries": "\n\n".join(blocks)})


def render_repo_prompt(
    package_summaries: Sequence[PackageSummaryLike],
) -> RenderedPrompt:
    """Render the repository-level prompt over package summaries, in name order."""
    if not package_summaries:
        raise ValueError("cannot render a repository prompt with no package summaries")
    blocks = []
    for ps in sorted(package_summaries, key=lambda ps: ps.package_name):
        blocks.append(f"Package: {ps.package_name or '(default)'}\n{ps.text}")
    return _render("repo_level", "repo", {"package_summaries": "\n\n".join(blocks)})


def render_merge_prompt(
    level: str,
    partials: Sequence[str],
    grounding: Optional[GroundingContext] = None,
) -> RenderedPrompt:
    """Render the prompt that merges partial summaries from a budget fold.

    *level* is ``"file"`` or ``"repo"``; file merges carry the same
    grounding as the file prompt they stand in for.
    """
    if not partials:
        raise ValueError("cannot merge zero partial summaries")
    body = "\n\n".join(
        f"Part {i}:\n{text}" for i, text in enumerate(partials, start=1)
    )
    if level == "file":
        grounding = grounding or GroundingContext()
        flag = "grounded" if grounding.grounded else "ungrounded"
        return _render(
            "file_merge",
            f"file_merge/{flag}",
            {"grounding": _grounding_block(grounding), "partials": body},
        )
    if level == "repo":
        return _render("repo_merge", "repo_merge", {"partials": body})
    raise ValueError(f"unknown merge level {level!r}")


def render_judge_prompt(
    summary_text: str, source_text: str, criterion: str
) -> RenderedPrompt:
    """Render a single-criterion judge prompt ending in a ``SCORE: <n>`` ask."""
    if not summary_text or not source_text:
        raise ValueError("judge prompts need both a summary and its source")
    if criterion not in JUDGE_CRITERIA:
        raise ValueError(
            f"unknown criterion {criterion!r}; expected one of "
            + ", ".join(sorted(JUDGE_CRITERIA))
        )
    return _render(
        "judge",
        f"judge/{criterion}",
        {
            "criterion_name": _CRITERION_TITLES[criterion],
            "criterion_definition": JUDGE_CRITERIA[criterion],
            "source": source_text,
            "summary": summary_text,
        },
    )


def load_grounding(domain_file: str, problem_file: str) -> GroundingContext:
    """Build a grounding context from two plain-text files."""
    return GroundingContext(
        domain_description=Path(domain_file).read_text(encoding="utf-8").strip(),
        problem_context_description=Path(problem_file)
        .read_text(encoding="utf-8")
        .strip(),
    )


def default_grounding() -> GroundingContext:
    """The bundled telecommunication/BSS grounding texts."""
    base = resources.files(__package__)
    return GroundingContext(
        domain_description=(base / "grounding_domain.txt")
        .read_text(encoding="utf-8")
        .strip(),
        problem_context_description=(base / "grounding_problem.txt")
        .read_text(encoding="utf-8")
        .strip(),
    )
