"""Bottom-up orchestration: segments -> files -> packages -> repository.

Each hierarchy level is a barrier — no file summary starts before every
segment summary of that file has settled, and likewise upward.  Segment
and file summarization fan out over a bounded worker pool.

Completions are cached content-addressed: the key digests the model id,
template id and version, the grounding texts, and the full prompt.  Cache
records keep the text *and* its original timestamp, so a warm re-run
reproduces the previous output tree byte for byte while issuing zero
backend requests.

Oversized prompts are folded map-reduce style: contiguous batches in
source order, one completion each, then merge completions over the
partial summaries (recursively if the merge prompt itself is too large).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import prompts
from .backend import Backend, BackendError, ChatRequest, HttpBackend, MockBackend
from .config import RunConfig, grounding_context
from .prompts import GroundingContext, RenderedPrompt
from .segmenter import (
    CodeSegment,
    SegmentKind,
    SourceFile,
    build_repo_model,
    load_source,
)

PLACEHOLDER_TEXT = "[summary unavailable]"
SCHEMA_VERSION = "1"
DEFAULT_MAX_PROMPT_CHARS = 96_000
SEGMENT_MAX_TOKENS = 512
LEVEL_MAX_TOKENS = 1024

_UNGROUNDED_DIGEST = GroundingContext().digest()


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# --- summary records -------------------------------------------------------


@dataclass(frozen=True)
class SegmentSummary:
    path: str
    kind: str
    name: str
    start_line: int
    end_line: int
    text: str
    model_id: str
    template_id: str
    template_version: str
    created_at: str
    failed: bool = False


@dataclass(frozen=True)
class FileSummary:
    path: str
    role: str
    key_functionality: str
    purpose: str
    full_text: str
    grounded: bool
    parse_warning: bool
    model_id: str
    template_id: str
    template_version: str
    created_at: str
    failed: bool = False


@dataclass(frozen=True)
class PackageSummary:
    package_name: str
    text: str
    file_paths: Tuple[str, ...]
    model_id: str
    template_id: str
    template_version: str
    created_at: str
    failed: bool = False


@dataclass(frozen=True)
class RepoSummary:
    root: str
    text: str
    package_names: Tuple[str, ...]
    model_id: str
    template_id: str
    template_version: str
    created_at: str
    failed: bool = False


@dataclass
class RunReport:
    root: str
    out_dir: str
    level: str
    counts: Dict[str, int] = field(default_factory=dict)
    failures: List[Dict[str, str]] = field(default_factory=list)
    diagnostics: List[str] = field(default_factory=list)
    completions_issued: int = 0
    embeddings_issued: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cache_hits: int = 0
    started_at: str = ""
    finished_at: str = ""
    wall_time_s: float = 0.0


# --- cache -----------------------------------------------------------------


class SummaryCache:
    """Directory-backed store of completion texts, keyed by content digest.

    ``directory=None`` keeps records in memory only (lifetime of the
    object).  Writes go through a temp file and an atomic rename; the
    first write for a key wins, and within a process concurrent requests
    for one key are serialized so both see the same stored record.
    """

    def __init__(self, directory: Optional[str] = None) -> None:
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self._memory: Dict[str, dict] = {}
        self._guard = threading.Lock()
        self._key_locks: Dict[str, threading.Lock] = {}

    @staticmethod
    def key(
        model_id: str,
        template_id: str,
        template_version: str,
        grounding_digest: str,
        input_text: str,
    ) -> str:
        input_digest = hashlib.sha256(input_text.encode("utf-8")).hexdigest()
        joined = "|".join(
            (model_id, template_id, template_version, grounding_digest, input_digest)
        )
        return hashlib.sha256(joined.encode("utf-8")).hexdigest()

    def lock_for(self, key: str) -> threading.Lock:
        with self._guard:
            return self._key_locks.setdefault(key, threading.Lock())

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> Optional[dict]:
        record: Optional[dict]
        if self.directory is None:
            with self._guard:
                record = self._memory.get(key)
        else:
            try:
                record = json.loads(self._path(key).read_text(encoding="utf-8"))
            except (OSError, ValueError):
                record = None
        if isinstance(record, dict) and "text" in record:
            with self._guard:
                self.hits += 1
            return record
        return None

    def put(self, key: str, record: dict) -> None:
        if self.directory is None:
            with self._guard:
                self._memory.setdefault(key, record)
            return
        path = self._path(key)
        if path.exists():
            return
        fd, tmp_name = tempfile.mkstemp(dir=str(self.directory), suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record, fh)
            os.replace(tmp_name, path)
        except BaseException:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise


# --- completion plumbing ---------------------------------------------------


@dataclass(frozen=True)
class _Completion:
    text: str
    created_at: str
    from_cache: bool


def _model_id(backend: Backend) -> str:
    return getattr(backend, "model_id", "unknown")


def _cached_completion(
    backend: Backend,
    cache: SummaryCache,
    prompt: RenderedPrompt,
    grounding_digest: str,
    max_tokens: int,
) -> _Completion:
    key = SummaryCache.key(
        _model_id(backend),
        prompt.template_id,
        prompt.template_version,
        grounding_digest,
        prompt.system_text + "\x00" + prompt.user_text,
    )
    with cache.lock_for(key):
        stored = cache.get(key)
        if stored is not None:
            return _Completion(
                text=stored["text"],
                created_at=stored.get("created_at", ""),
                from_cache=True,
            )
        response = backend.complete(
            ChatRequest(
                system_text=prompt.system_text,
                user_text=prompt.user_text,
                max_output_tokens=max_tokens,
            )
        )
        record = {"text": response.text, "created_at": _utc_now()}
        cache.put(key, record)
        return _Completion(
            text=record["text"], created_at=record["created_at"], from_cache=False
        )


# --- segment level ---------------------------------------------------------


def summarize_segment(
    segment: CodeSegment,
    style: prompts.PromptStyle,
    backend: Backend,
    cache: SummaryCache,
) -> SegmentSummary:
    """One summary per segment; backend failure yields a placeholder record."""
    prompt = prompts.render_segment_prompt(segment, style)
    base = dict(
        path=segment.file.repo_relative_path,
        kind=SegmentKind(segment.kind).value,
        name=segment.name,
        start_line=segment.span.start_line,
        end_line=segment.span.end_line,
        model_id=_model_id(backend),
        template_id=prompt.template_id,
        template_version=prompt.template_version,
    )
    try:
        result = _cached_completion(
            backend, cache, prompt, _UNGROUNDED_DIGEST, SEGMENT_MAX_TOKENS
        )
    except BackendError:
        return SegmentSummary(
            text=PLACEHOLDER_TEXT, created_at=_utc_now(), failed=True, **base
        )
    return SegmentSummary(text=result.text, created_at=result.created_at, **base)


# --- budget fold -----------------------------------------------------------


def _greedy_batches(
    items: Sequence, render: Callable[[Sequence], RenderedPrompt], budget: int
) -> List[List]:
    """Contiguous batches whose rendered prompts fit the budget.

    A single item that exceeds the budget on its own still forms a batch —
    there is nothing smaller to send.
    """
    batches: List[List] = []
    current: List = []
    for item in items:
        trial = current + [item]
        if current and len(render(trial).user_text) > budget:
            batches.append(current)
            current = [item]
        else:
            current = trial
    if current:
        batches.append(current)
    return batches


def _fold_completion(
    items: Sequence,
    render: Callable[[Sequence], RenderedPrompt],
    merge_level: str,
    grounding: Optional[GroundingContext],
    backend: Backend,
    cache: SummaryCache,
    grounding_digest: str,
    budget: int,
) -> Tuple[str, str, RenderedPrompt]:
    """Complete over *items*, folding into batches when over budget.

    Returns (text, created_at, prompt-of-final-completion); the final
    prompt's template id/version stamp the resulting summary's provenance.
    """

    def run(prompt: RenderedPrompt) -> _Completion:
        return _cached_completion(backend, cache, prompt, grounding_digest, LEVEL_MAX_TOKENS)

    whole = render(items)
    if len(whole.user_text) <= budget or len(items) <= 1:
        done = run(whole)
        return done.text, done.created_at, whole

    partials = []
    for batch in _greedy_batches(items, render, budget):
        partials.append(run(render(batch)).text)

    while True:
        merge_prompt = prompts.render_merge_prompt(merge_level, partials, grounding)
        if len(merge_prompt.user_text) <= budget or len(partials) == 1:
            done = run(merge_prompt)
            return done.text, done.created_at, merge_prompt
        groups = _greedy_batches(
            partials,
            lambda group: prompts.render_merge_prompt(merge_level, group, grounding),
            budget,
        )
        if len(groups) >= len(partials):
            # No batch got smaller (every partial alone busts the budget):
            # force pairwise merging so the fold still terminates.
            groups = [partials[i : i + 2] for i in range(0, len(partials), 2)]
        partials = [
            run(prompts.render_merge_prompt(merge_level, group, grounding)).text
            for group in groups
        ]


# --- file level ------------------------------------------------------------

_SECTION_HEADER = re.compile(
    r"^[\s#*>-]*(?:\*\*)?(role|key functionality|purpose)(?:\*\*)?\s*[:\-]\s*(?:\*\*\s*)?(.*)$",
    re.IGNORECASE,
)


def parse_file_sections(text: str) -> Optional[Dict[str, str]]:
    """Extract Role / Key functionality / Purpose from a model reply.

    Headers are matched case-insensitively at line starts; returns None
    unless all three sections are present with some content.
    """
    sections: Dict[str, List[str]] = {}
    current: Optional[str] = None
    for line in text.splitlines():
        match = _SECTION_HEADER.match(line)
        if match:
            current = match.group(1).lower()
            sections.setdefault(current, [])
            if match.group(2).strip():
                sections[current].append(match.group(2).strip())
        elif current is not None and line.strip():
            sections[current].append(line.strip())
    parsed = {name: "\n".join(body).strip() for name, body in sections.items()}
    if all(parsed.get(name) for name in ("role", "key functionality", "purpose")):
        return {
            "role": parsed["role"],
            "key_functionality": parsed["key functionality"],
            "purpose": parsed["purpose"],
        }
    return None


def summarize_file(
    file: SourceFile,
    raw_text: str,
    segment_summaries: Sequence[SegmentSummary],
    grounding: GroundingContext,
    backend: Backend,
    cache: SummaryCache,
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> FileSummary:
    """Summarize one file from its ordered segment summaries.

    Failed segments participate with their placeholder text, so a file
    summary is produced for every file even under partial failure.
    """
    ordered = sorted(
        segment_summaries, key=lambda s: (s.start_line, s.end_line, s.name)
    )

    def render(batch: Sequence[SegmentSummary]) -> RenderedPrompt:
        description = prompts.build_file_description(file, raw_text, list(batch))
        return prompts.render_file_prompt(description, grounding)

    try:
        text, created_at, final_prompt = _fold_completion(
            ordered,
            render,
            "file",
            grounding,
            backend,
            cache,
            grounding.digest(),
            max_prompt_chars,
        )
    except BackendError:
        now = _utc_now()
        return FileSummary(
            path=file.repo_relative_path,
            role=PLACEHOLDER_TEXT,
            key_functionality=PLACEHOLDER_TEXT,
            purpose=PLACEHOLDER_TEXT,
            full_text=PLACEHOLDER_TEXT,
            grounded=grounding.grounded,
            parse_warning=False,
            model_id=_model_id(backend),
            template_id="file/failed",
            template_version="",
            created_at=now,
            failed=True,
        )
    sections = parse_file_sections(text)
    return FileSummary(
        path=file.repo_relative_path,
        role=sections["role"] if sections else text,
        key_functionality=sections["key_functionality"] if sections else text,
        purpose=sections["purpose"] if sections else text,
        full_text=text,
        grounded=grounding.grounded,
        parse_warning=sections is None,
        model_id=_model_id(backend),
        template_id=final_prompt.template_id,
        template_version=final_prompt.template_version,
        created_at=created_at,
    )


# --- package and repo levels -----------------------------------------------


def summarize_package(
    package_name: str,
    file_summaries: Sequence[FileSummary],
    backend: Backend,
    cache: SummaryCache,
) -> PackageSummary:
    """One completion over the files' Role/Key functionality/Purpose texts."""
    if not file_summaries:
        raise ValueError(f"package {package_name!r} has no file summaries")
    prompt = prompts.render_package_prompt(list(file_summaries))
    paths = tuple(sorted(fs.path for fs in file_summaries))
    base = dict(
        package_name=package_name,
        file_paths=paths,
        model_id=_model_id(backend),
        template_id=prompt.template_id,
        template_version=prompt.template_version,
    )
    try:
        result = _cached_completion(
            backend, cache, prompt, _UNGROUNDED_DIGEST, LEVEL_MAX_TOKENS
        )
    except BackendError:
        return PackageSummary(
            text=PLACEHOLDER_TEXT, created_at=_utc_now(), failed=True, **base
        )
    return PackageSummary(text=result.text, created_at=result.created_at, **base)


def summarize_repo(
    root: str,
    package_summaries: Sequence[PackageSummary],
    backend: Backend,
    cache: SummaryCache,
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> RepoSummary:
    """Combine package summaries into the repository summary, folding if large."""
    if not package_summaries:
        raise ValueError("cannot summarize a repository with no package summaries")
    ordered = sorted(package_summaries, key=lambda ps: ps.package_name)
    names = tuple(ps.package_name for ps in ordered)
    try:
        text, created_at, final_prompt = _fold_completion(
            ordered,
            lambda batch: prompts.render_repo_prompt(list(batch)),
            "repo",
            None,
            backend,
            cache,
            _UNGROUNDED_DIGEST,
            max_prompt_chars,
        )
    except BackendError:
        return RepoSummary(
            root=root,
            text=PLACEHOLDER_TEXT,
            package_names=names,
            model_id=_model_id(backend),
            template_id="repo/failed",
            template_version="",
            created_at=_utc_now(),
            failed=True,
        )
    return RepoSummary(
        root=root,
        text=text,
        package_names=names,
        model_id=_model_id(backend),
        template_id=final_prompt.template_id,
        template_version=final_prompt.template_version,
        created_at=created_at,
    )


# --- output tree -----------------------------------------------------------


def mangle_path(path: str) -> str:
    """Flatten a repo-relative path into one file name: a/b/C.java -> a__b__C.java."""
    return path.replace("/", "__")


def package_file_name(package_name: str) -> str:
    return package_name if package_name else "__default__"


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_markdown(path: Path, title: str, body: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"# {title}\n\n{body}\n", encoding="utf-8")


class OutputTree:
    """Writer for the on-disk layout under ``--out``."""

    def __init__(self, out_dir: str, markdown: bool = False) -> None:
        self.root = Path(out_dir)
        self.markdown = markdown

    def write_segments(self, path: str, summaries: Sequence[SegmentSummary]) -> None:
        name = mangle_path(path)
        payload = {
            "schema_version": SCHEMA_VERSION,
            "path": path,
            "segments": [asdict(s) for s in summaries],
        }
        _write_json(self.root / "segments" / f"{name}.json", payload)
        if self.markdown:
            body = "\n\n".join(
                f"## {s.kind} {s.name} (lines {s.start_line}-{s.end_line})\n\n{s.text}"
                for s in summaries
            )
            _write_markdown(
                self.root / "segments" / f"{name}.md", f"Segments of {path}", body
            )

    def write_file(self, summary: FileSummary) -> None:
        name = mangle_path(summary.path)
        _write_json(
            self.root / "files" / f"{name}.json",
            {"schema_version": SCHEMA_VERSION, **asdict(summary)},
        )
        if self.markdown:
            _write_markdown(
                self.root / "files" / f"{name}.md",
                f"File summary: {summary.path}",
                summary.full_text,
            )

    def write_package(self, summary: PackageSummary) -> None:
        name = package_file_name(summary.package_name)
        payload = {"schema_version": SCHEMA_VERSION, **asdict(summary)}
        payload["file_paths"] = list(summary.file_paths)
        _write_json(self.root / "packages" / f"{name}.json", payload)
        if self.markdown:
            _write_markdown(
                self.root / "packages" / f"{name}.md",
                f"Package summary: {summary.package_name or '(default)'}",
                summary.text,
            )

    def write_repo(self, summary: RepoSummary) -> None:
        payload = {"schema_version": SCHEMA_VERSION, **asdict(summary)}
        payload["package_names"] = list(summary.package_names)
        _write_json(self.root / "repo.json", payload)
        if self.markdown:
            _write_markdown(self.root / "repo.md", "Repository summary", summary.text)

    def write_report(self, report: RunReport) -> None:
        _write_json(
            self.root / "report.json",
            {"schema_version": SCHEMA_VERSION, **asdict(report)},
        )


# --- full run --------------------------------------------------------------

_LEVEL_ORDER = {"segment": 0, "file": 1, "package": 2, "repo": 3}


def make_backend(config: RunConfig) -> Backend:
    """The backend a config describes: mock mode trumps the HTTP settings."""
    if config.mock_mode:
        return MockBackend()
    return HttpBackend(config.backend)


def run_full(
    root: str,
    config: RunConfig,
    backend: Optional[Backend] = None,
    markdown: bool = False,
) -> RunReport:
    """Execute the hierarchy bottom-up and write the output tree.

    Levels above ``config.level`` are skipped.  The report is written
    last, after all levels settle, and is the only file whose bytes vary
    between otherwise identical runs (it carries timings and counters).
    """
    started = time.monotonic()
    backend = backend or make_backend(config)
    cache = SummaryCache(config.cache_dir)
    grounding = grounding_context(config)
    depth = _LEVEL_ORDER[config.level]
    tree = OutputTree(config.out_dir, markdown=markdown)
    report = RunReport(
        root=str(root),
        out_dir=str(config.out_dir),
        level=config.level,
        counts={
            "segments": 0,
            "failed_segments": 0,
            "files": 0,
            "packages": 0,
            "repo_summaries": 0,
        },
        started_at=_utc_now(),
    )

    model = build_repo_model(root)
    report.diagnostics = [f"{d.path}: {d.message}" for d in model.diagnostics]
    files_in_order = sorted(model.files, key=lambda f: f.repo_relative_path)

    segment_summaries: Dict[SourceFile, List[SegmentSummary]] = {}
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        futures = {}
        for file in files_in_order:
            for segment in model.files[file]:
                futures[(file, segment)] = pool.submit(
                    summarize_segment, segment, config.prompt_style, backend, cache
                )
        for (file, segment), future in futures.items():
            segment_summaries.setdefault(file, []).append(future.result())

    for file in files_in_order:
        summaries = sorted(
            segment_summaries.get(file, []),
            key=lambda s: (s.start_line, s.end_line, s.name),
        )
        segment_summaries[file] = summaries
        tree.write_segments(file.repo_relative_path, summaries)
        for summary in summaries:
            if summary.failed:
                report.failures.append(
                    {"level": "segment", "path": summary.path, "kind": summary.kind,
                     "name": summary.name}
                )
    report.counts["segments"] = sum(len(v) for v in segment_summaries.values())
    report.counts["failed_segments"] = sum(
        1 for f in report.failures if f["level"] == "segment"
    )

    file_summaries: Dict[SourceFile, FileSummary] = {}
    if depth >= 1 and files_in_order:
        root_path = Path(root)

        def summarize_one_file(file: SourceFile) -> FileSummary:
            _, raw_text = load_source(root_path, file.repo_relative_path)
            return summarize_file(
                file,
                raw_text,
                segment_summaries[file],
                grounding,
                backend,
                cache,
                config.max_prompt_chars,
            )

        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            ordered_futures = [
                (file, pool.submit(summarize_one_file, file))
                for file in files_in_order
            ]
            for file, future in ordered_futures:
                file_summaries[file] = future.result()
        for file in files_in_order:
            summary = file_summaries[file]
            tree.write_file(summary)
            if summary.failed:
                report.failures.append(
                    {"level": "file", "path": summary.path, "kind": "file",
                     "name": summary.path}
                )
        report.counts["files"] = len(file_summaries)

    package_summaries: List[PackageSummary] = []
    if depth >= 2 and file_summaries:
        package_names = sorted(model.packages)

        def summarize_one_package(name: str) -> Optional[PackageSummary]:
            members = [
                file_summaries[f]
                for f in model.packages[name]
                if f in file_summaries
            ]
            if not members:
                return None
            return summarize_package(name, members, backend, cache)

        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            results = list(pool.map(summarize_one_package, package_names))
        for name, summary in zip(package_names, results):
            if summary is None:
                report.diagnostics.append(f"package {name or '(default)'} skipped: no files")
                continue
            package_summaries.append(summary)
            tree.write_package(summary)
            if summary.failed:
                report.failures.append(
                    {"level": "package", "path": name, "kind": "package", "name": name}
                )
        report.counts["packages"] = len(package_summaries)

    if depth >= 3 and package_summaries:
        repo_summary = summarize_repo(
            str(root), package_summaries, backend, cache, config.max_prompt_chars
        )
        tree.write_repo(repo_summary)
        if repo_summary.failed:
            report.failures.append(
                {"level": "repo", "path": str(root), "kind": "repo", "name": "repo"}
            )
        report.counts["repo_summaries"] = 1

    report.completions_issued = backend.completion_calls
    report.embeddings_issued = backend.embedding_calls
    report.prompt_tokens = backend.total_prompt_tokens
    report.completion_tokens = backend.total_completion_tokens
    report.cache_hits = cache.hits
    report.finished_at = _utc_now()
    report.wall_time_s = round(time.monotonic() - started, 3)
    tree.write_report(report)
    return report
