"""Java repository discovery and syntax-based segmentation.

Walks a repository root for ``.java`` files, parses each one into typed,
line-localized segments (functions, member fields, constructors, enums,
interfaces), and assembles the per-package repository model the
summarization pipeline consumes.

Only direct members of top-level type declarations become segments.
Nested classes and everything inside them stay embedded in the enclosing
text; nested enum/interface declarations are extracted whole, matching
how the summarizer treats them (never decomposed further).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .javalex import KEYWORDS, MODIFIER_WORDS, Comment, Token, tokenize

DEFAULT_EXCLUDED_DIRS = ("target", "build", ".git")

TYPE_KEYWORDS = ("class", "interface", "enum")


class SegmentKind(str, Enum):
    FUNCTION = "function"
    VARIABLE = "variable"
    CONSTRUCTOR = "constructor"
    ENUM = "enum"
    INTERFACE = "interface"


@dataclass(frozen=True)
class SourceFile:
    repo_relative_path: str
    package_name: str
    content_hash: str
    line_count: int


@dataclass(frozen=True)
class SourceSpan:
    start_line: int
    end_line: int


@dataclass(frozen=True)
class CodeSegment:
    kind: SegmentKind
    name: str
    file: SourceFile
    span: SourceSpan
    text: str
    enclosing_type: str
    is_static: bool = False
    modifiers: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str


@dataclass(frozen=True)
class FileHeader:
    package_name: str
    imports: Tuple[str, ...]
    type_name: str
    type_kind: str  # "class" | "enum" | "interface"


@dataclass
class RepoModel:
    root: str
    packages: Dict[str, List[SourceFile]]
    files: Dict[SourceFile, List[CodeSegment]]
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def all_segments(self) -> List[CodeSegment]:
        out: List[CodeSegment] = []
        for segs in self.files.values():
            out.extend(segs)
        return out

    def kind_counts(self) -> Dict[str, int]:
        counts = {kind.value: 0 for kind in SegmentKind}
        for seg in self.all_segments():
            counts[seg.kind.value] += 1
        return counts


def normalize_text(raw: str) -> str:
    """Collapse CRLF / lone CR line endings to LF."""
    return raw.replace("\r\n", "\n").replace("\r", "\n")


def decode_source(data: bytes) -> str:
    return normalize_text(data.decode("utf-8", errors="replace"))


def load_source(root: Path, relpath: str) -> Tuple[SourceFile, str]:
    """Read one file and build its SourceFile record plus decoded text."""
    data = (root / relpath).read_bytes()
    text = decode_source(data)
    header = parse_file_header(text)
    return (
        SourceFile(
            repo_relative_path=relpath,
            package_name=header.package_name,
            content_hash=hashlib.sha256(data).hexdigest(),
            line_count=max(1, len(text.split("\n"))),
        ),
        text,
    )


def _walk_java_files(root: Path, excluded_dirs: Sequence[str]) -> List[str]:
    if not root.is_dir():
        raise NotADirectoryError(f"repository root is not a readable directory: {root}")
    excluded = set(excluded_dirs)
    relpaths = []
    for path in root.rglob("*.java"):
        rel = path.relative_to(root)
        if any(part in excluded for part in rel.parts[:-1]):
            continue
        if not path.is_file():
            continue
        relpaths.append(rel.as_posix())
    relpaths.sort()
    return relpaths


def discover_sources(
    root: Path,
    excluded_dirs: Sequence[str] = DEFAULT_EXCLUDED_DIRS,
    diagnostics: Optional[List[Diagnostic]] = None,
) -> List[SourceFile]:
    """Find every ``.java`` file under ``root``, sorted by relative path.

    Directories whose *name* matches the exclusion list are pruned.
    Unreadable files are skipped with a diagnostic; a missing or unreadable
    root raises ``NotADirectoryError``.
    """
    root = Path(root)
    sources: List[SourceFile] = []
    for rel in _walk_java_files(root, excluded_dirs):
        try:
            sf, _ = load_source(root, rel)
        except OSError as exc:
            if diagnostics is not None:
                diagnostics.append(Diagnostic(rel, f"unreadable, skipped: {exc}"))
            continue
        sources.append(sf)
    return sources


# ---------------------------------------------------------------------------
# Structural parsing
# ---------------------------------------------------------------------------


class _Parser:
    """Tolerant structural walk over the token stream of one file.

    Never raises on malformed input: it collects what it can recognize and
    records a diagnostic for the rest.
    """

    def __init__(self, source: SourceFile, text: str):
        self.source = source
        self.lines = text.split("\n")
        self.tokens, comments = tokenize(text)
        self.n = len(self.tokens)
        self.pos = 0
        self.segments: List[CodeSegment] = []
        self.diagnostics: List[Diagnostic] = []
        self.package_name = ""
        self.imports: List[str] = []
        # (kind, name, is_public) of top-level types, in source order.
        self.types: List[Tuple[str, str, bool]] = []
        token_lines = {t.line for t in self.tokens}
        # end line -> start line, for comments that own their lines entirely
        # (a trailing comment after code must not be absorbed by the next
        # declaration).
        self.comment_spans: Dict[int, int] = {
            c.end_line: c.start_line for c in comments if c.start_line not in token_lines
        }

    # -- token helpers ------------------------------------------------------

    def tok(self, i: int) -> Optional[Token]:
        return self.tokens[i] if 0 <= i < self.n else None

    def text_at(self, i: int) -> str:
        t = self.tok(i)
        return t.text if t else ""

    def is_name(self, i: int) -> bool:
        t = self.tok(i)
        return t is not None and t.kind == "name"

    def skip_to_semicolon(self, i: int) -> int:
        """Index just past the next ';' at bracket depth 0 (or EOF)."""
        depth = 0
        while i < self.n:
            txt = self.tokens[i].text
            if txt in "({[":
                depth += 1
            elif txt in ")}]":
                depth = max(0, depth - 1)
            elif txt == ";" and depth == 0:
                return i + 1
            i += 1
        return self.n

    def match_brace(self, open_idx: int) -> int:
        """Index of the '}' matching the '{' at open_idx (or last token)."""
        depth = 0
        i = open_idx
        while i < self.n:
            txt = self.tokens[i].text
            if txt == "{":
                depth += 1
            elif txt == "}":
                depth -= 1
                if depth == 0:
                    return i
            i += 1
        return self.n - 1

    def match_paren(self, open_idx: int) -> int:
        depth = 0
        i = open_idx
        while i < self.n:
            txt = self.tokens[i].text
            if txt == "(":
                depth += 1
            elif txt == ")":
                depth -= 1
                if depth == 0:
                    return i
            i += 1
        return self.n - 1

    def skip_annotations_and_modifiers(self, i: int) -> Tuple[int, List[str]]:
        """Consume any run of annotations and modifier keywords from i."""
        modifiers: List[str] = []
        while i < self.n:
            t = self.tokens[i]
            if t.text == "@" and self.text_at(i + 1) != "interface":
                i += 1
                # Dotted annotation name.
                while self.is_name(i):
                    i += 1
                    if self.text_at(i) == ".":
                        i += 1
                    else:
                        break
                if self.text_at(i) == "(":
                    i = self.match_paren(i) + 1
                continue
            if t.kind == "name" and t.text in MODIFIER_WORDS:
                modifiers.append(t.text)
                i += 1
                continue
            if t.kind == "name" and t.text == "sealed":
                modifiers.append(t.text)
                i += 1
                continue
            if (
                t.text == "non"
                and self.text_at(i + 1) == "-"
                and self.text_at(i + 2) == "sealed"
            ):
                modifiers.append("non-sealed")
                i += 3
                continue
            break
        return i, modifiers

    # -- span / emission helpers --------------------------------------------

    def attached_start_line(self, decl_line: int) -> int:
        """Walk comment blocks that sit directly above the declaration."""
        start = decl_line
        while (start - 1) in self.comment_spans:
            start = self.comment_spans[start - 1]
        return start

    def emit(
        self,
        kind: SegmentKind,
        name: str,
        first_idx: int,
        last_idx: int,
        enclosing: str,
        modifiers: Sequence[str],
    ) -> None:
        first = self.tok(first_idx)
        last = self.tok(last_idx)
        if first is None or last is None or not name:
            return
        start = self.attached_start_line(first.line)
        end = last.line
        self.segments.append(
            CodeSegment(
                kind=kind,
                name=name,
                file=self.source,
                span=SourceSpan(start, end),
                text="\n".join(self.lines[start - 1 : end]),
                enclosing_type=enclosing,
                is_static="static" in modifiers,
                modifiers=tuple(modifiers),
            )
        )

    def diag(self, message: str, line: int) -> None:
        self.diagnostics.append(
            Diagnostic(self.source.repo_relative_path, f"line {line}: {message}")
        )

    # -- grammar walk -------------------------------------------------------

    def parse(self) -> None:
        while self.pos < self.n:
            t = self.tokens[self.pos]
            if t.text == "package":
                end = self.skip_to_semicolon(self.pos)
                parts = [
                    tk.text
                    for tk in self.tokens[self.pos + 1 : end - 1]
                    if tk.kind == "name"
                ]
                self.package_name = ".".join(parts)
                self.pos = end
            elif t.text == "import":
                end = self.skip_to_semicolon(self.pos)
                stmt = " ".join(tk.text for tk in self.tokens[self.pos : end])
                self.imports.append(stmt.replace(" . ", ".").replace(" ;", ";"))
                self.pos = end
            elif t.text == ";":
                self.pos += 1
            else:
                self.parse_type_declaration()

    def parse_type_declaration(self) -> None:
        decl_start = self.pos
        i, modifiers = self.skip_annotations_and_modifiers(self.pos)
        t = self.tok(i)
        if t is None:
            self.pos = self.n
            return
        # package-info.java puts annotations in front of the package clause.
        if t.text in ("package", "import"):
            self.pos = i
            return

        kind_word, name_idx = self._type_keyword(i)
        if kind_word is None:
            self.diag(f"unrecognized top-level construct near '{t.text}'", t.line)
            self.resync()
            return

        name = self.text_at(name_idx) if self.is_name(name_idx) else ""
        if not name:
            self.diag("type declaration without a name", t.line)
        body_open = self._find_body_open(name_idx + 1)
        if body_open is None:
            self.diag(f"type declaration '{name}' has no body", t.line)
            self.pos = self.skip_to_semicolon(name_idx)
            return
        body_close = self.match_brace(body_open)

        self.types.append((self._header_kind(kind_word), name, "public" in modifiers))
        if kind_word in ("interface", "@interface"):
            self.emit(SegmentKind.INTERFACE, name, decl_start, body_close, name, modifiers)
        elif kind_word == "enum":
            self.emit(SegmentKind.ENUM, name, decl_start, body_close, name, modifiers)
        else:  # class / record
            self.parse_members(body_open + 1, body_close, name)
        self.pos = body_close + 1

    def _type_keyword(self, i: int) -> Tuple[Optional[str], int]:
        """Identify the declaration keyword at i; returns (keyword, name index)."""
        txt = self.text_at(i)
        if txt in TYPE_KEYWORDS:
            return txt, i + 1
        if txt == "@" and self.text_at(i + 1) == "interface":
            return "@interface", i + 2
        if txt == "record" and self.is_name(i + 1) and self.text_at(i + 2) == "(":
            return "record", i + 1
        return None, i

    @staticmethod
    def _header_kind(kind_word: str) -> str:
        if kind_word in ("interface", "@interface"):
            return "interface"
        if kind_word == "enum":
            return "enum"
        return "class"

    def _find_body_open(self, i: int) -> Optional[int]:
        """First '{' at paren depth 0 (skips extends/implements/permits and
        record headers, where parentheses may contain braces via annotations)."""
        depth = 0
        while i < self.n:
            txt = self.tokens[i].text
            if txt == "(":
                depth += 1
            elif txt == ")":
                depth = max(0, depth - 1)
            elif txt == "{" and depth == 0:
                return i
            elif txt == ";" and depth == 0:
                return None
            i += 1
        return None

    def resync(self) -> None:
        """Skip past the next ';' or balanced '{...}' at depth 0."""
        i = self.pos
        while i < self.n:
            txt = self.tokens[i].text
            if txt == ";":
                self.pos = i + 1
                return
            if txt == "{":
                self.pos = self.match_brace(i) + 1
                return
            i += 1
        self.pos = self.n

    def parse_members(self, lo: int, hi: int, enclosing: str) -> None:
        self.pos = lo
        while self.pos < hi:
            if self.text_at(self.pos) == ";":
                self.pos += 1
                continue
            member_start = self.pos
            i, modifiers = self.skip_annotations_and_modifiers(self.pos)
            if i >= hi:
                break
            t = self.tokens[i]

            # Initializer block (instance, or static via the modifier run).
            if t.text == "{":
                self.pos = self.match_brace(i) + 1
                continue

            kind_word, name_idx = self._type_keyword(i)
            if kind_word in ("interface", "@interface", "enum"):
                name = self.text_at(name_idx) if self.is_name(name_idx) else ""
                body_open = self._find_body_open(name_idx + 1)
                if body_open is None:
                    self.diag(f"nested type '{name}' has no body", t.line)
                    self.pos = self.skip_to_semicolon(name_idx)
                    continue
                body_close = self.match_brace(body_open)
                seg_kind = (
                    SegmentKind.ENUM if kind_word == "enum" else SegmentKind.INTERFACE
                )
                self.emit(seg_kind, name, member_start, body_close, enclosing, modifiers)
                self.pos = body_close + 1
                continue
            if kind_word in ("class", "record"):
                # Nested classes are left inside the enclosing text untouched.
                body_open = self._find_body_open(name_idx + 1)
                if body_open is None:
                    self.pos = self.skip_to_semicolon(name_idx)
                else:
                    self.pos = self.match_brace(body_open) + 1
                continue

            if t.text == "<":
                i = self._skip_angles(i)
            elif t.kind != "name":
                # Members always open with a type or name token; anything
                # else is damage to skip past.
                self.diag(f"unrecognized member near '{t.text}'", t.line)
                self.pos = i + 1
                self.resync()
                continue

            shape, j = self._scan_member_shape(i, hi)
            if shape == "callable":
                self._parse_callable(member_start, i, j, hi, enclosing, modifiers)
            elif shape == "field":
                self._parse_field(member_start, i, hi, enclosing, modifiers)
            else:
                self.diag(f"unrecognized member near '{t.text}'", t.line)
                self.pos = member_start
                self.resync()

    def _skip_angles(self, i: int) -> int:
        depth = 0
        while i < self.n:
            txt = self.tokens[i].text
            if txt == "<":
                depth += 1
            elif txt == ">":
                depth -= 1
                if depth == 0:
                    return i + 1
            i += 1
        return self.n

    def _scan_member_shape(self, i: int, hi: int) -> Tuple[str, int]:
        """Decide whether the member starting at i is a callable or a field.

        Returns ("callable", index-of-open-paren), ("field", index-of-first
        '='/';' ), or ("unknown", i). In the region scanned here (return
        type / field type plus declared name) angle brackets only ever come
        from generics, so plain depth counting is safe.
        """
        angle = 0
        square = 0
        j = i
        while j < hi:
            txt = self.tokens[j].text
            if txt == "<":
                angle += 1
            elif txt == ">":
                angle = max(0, angle - 1)
            elif txt == "[":
                square += 1
            elif txt == "]":
                square = max(0, square - 1)
            elif angle == 0 and square == 0:
                if txt == "(":
                    return "callable", j
                if txt in ("=", ";"):
                    return "field", j
                if txt == "{":
                    return "unknown", i
            j += 1
        return "unknown", i

    def _parse_callable(
        self,
        member_start: int,
        type_start: int,
        paren_idx: int,
        hi: int,
        enclosing: str,
        modifiers: Sequence[str],
    ) -> None:
        name = ""
        for k in range(paren_idx - 1, type_start - 1, -1):
            if self.is_name(k):
                name = self.text_at(k)
                break
        # A constructor has no return type: nothing but the bare name
        # between modifiers/type parameters and the parameter list.
        region = self.tokens[type_start:paren_idx]
        is_ctor = len(region) == 1 and region[0].text == enclosing

        close = self.match_paren(paren_idx)
        j = close + 1
        end_idx = None
        while j < self.n:
            txt = self.tokens[j].text
            if txt == "{":
                end_idx = self.match_brace(j)
                break
            if txt == ";":
                end_idx = j
                break
            j += 1
        if end_idx is None:
            self.diag(f"unterminated declaration of '{name}'", self.tokens[paren_idx].line)
            self.pos = self.n
            return
        kind = SegmentKind.CONSTRUCTOR if is_ctor else SegmentKind.FUNCTION
        self.emit(kind, name, member_start, end_idx, enclosing, modifiers)
        self.pos = end_idx + 1

    def _parse_field(
        self,
        member_start: int,
        type_start: int,
        hi: int,
        enclosing: str,
        modifiers: Sequence[str],
    ) -> None:
        end = self.skip_to_semicolon(type_start)
        stmt_last = min(end, self.n) - 1  # the ';' itself (or last token)
        names = self._declarator_names(type_start, stmt_last)
        if not names:
            self.diag("field declaration without a name", self.tokens[type_start].line)
            self.pos = end
            return
        for name in names:
            self.emit(SegmentKind.VARIABLE, name, member_start, stmt_last, enclosing, modifiers)
        self.pos = end

    def _declarator_names(self, lo: int, hi: int) -> List[str]:
        """Declared names of a field statement: one per declarator.

        Walks depth-0 tokens; the name is the last plain identifier before
        '=', ',' or the end. Generic type arguments are skipped by angle
        counting, which holds in type position; inside initializers commas
        are only split at full bracket depth 0, so `new HashMap<K, V>()`
        stays whole while ternary comparisons in multi-declarator
        initializers are knowingly out of scope.
        """
        names: List[str] = []
        pending: Optional[str] = None
        depth = 0
        angle = 0
        in_init = False
        j = lo
        while j < hi:
            t = self.tokens[j]
            txt = t.text
            if txt in "({[":
                depth += 1
            elif txt in ")}]":
                depth = max(0, depth - 1)
            elif depth == 0:
                if txt == "<" and not in_init:
                    angle += 1
                elif txt == ">" and not in_init:
                    angle = max(0, angle - 1)
                elif txt == "<" and in_init and self.is_name(j - 1):
                    angle += 1
                elif txt == ">" and in_init:
                    angle = max(0, angle - 1)
                elif angle == 0:
                    if txt == "=" and not in_init:
                        if pending:
                            names.append(pending)
                            pending = None
                        in_init = True
                    elif txt == ",":
                        if not in_init and pending:
                            names.append(pending)
                        pending = None
                        in_init = False
                    elif t.kind == "name" and txt not in KEYWORDS and not in_init:
                        pending = txt
            j += 1
        if pending and not in_init:
            names.append(pending)
        return names


def parse_and_segment(
    source: SourceFile, raw_text: str
) -> Tuple[List[CodeSegment], List[Diagnostic]]:
    """Extract the typed segments of one file, sorted by span.

    A catastrophic failure in the walk yields the segments recovered so far
    plus a diagnostic; the file still participates at file level via its raw
    text.
    """
    parser = _Parser(source, normalize_text(raw_text))
    try:
        parser.parse()
    except Exception as exc:  # defensive: the walk should not raise
        parser.diag(f"parse aborted: {exc}", 1)
    segments = sorted(parser.segments, key=lambda s: (s.span.start_line, s.span.end_line, s.name))
    return segments, parser.diagnostics


def parse_file_header(raw_text: str) -> FileHeader:
    """Package clause, import statements and primary top-level type of a file."""
    dummy = SourceFile("", "", "", 1)
    parser = _Parser(dummy, normalize_text(raw_text))
    try:
        parser.parse()
    except Exception:
        pass
    if parser.types:
        kind, name, _ = parser.types[0]
        for k, nm, public in parser.types:
            # Prefer the public type when several share the file.
            if public:
                kind, name = k, nm
                break
    else:
        kind, name = "class", ""
    return FileHeader(
        package_name=parser.package_name,
        imports=tuple(parser.imports),
        type_name=name,
        type_kind=kind,
    )


def build_repo_model(
    root: Path, excluded_dirs: Sequence[str] = DEFAULT_EXCLUDED_DIRS
) -> RepoModel:
    """Discover, parse and segment every source file under ``root``."""
    root = Path(root)
    diagnostics: List[Diagnostic] = []

    files: Dict[SourceFile, List[CodeSegment]] = {}
    for rel in _walk_java_files(root, excluded_dirs):
        try:
            sf, text = load_source(root, rel)
        except OSError as exc:
            diagnostics.append(Diagnostic(rel, f"unreadable, skipped: {exc}"))
            continue
        segments, diags = parse_and_segment(sf, text)
        files[sf] = segments
        diagnostics.extend(diags)

    packages: Dict[str, List[SourceFile]] = {}
    for sf in files:
        packages.setdefault(sf.package_name, []).append(sf)
    packages = {name: packages[name] for name in sorted(packages)}

    return RepoModel(
        root=str(root), packages=packages, files=files, diagnostics=diagnostics
    )


def repo_model_to_dump(model: RepoModel, include_text: bool = False) -> dict:
    """JSON-ready segment dump in the CLI `segment` format."""
    files = []
    for sf, segments in model.files.items():
        entries = []
        for seg in segments:
            entry = {
                "kind": seg.kind.value,
                "name": seg.name,
                "start_line": seg.span.start_line,
                "end_line": seg.span.end_line,
                "static": seg.is_static,
                "enclosing_type": seg.enclosing_type,
            }
            if include_text:
                entry["text"] = seg.text
            entries.append(entry)
        files.append(
            {
                "path": sf.repo_relative_path,
                "package": sf.package_name,
                "hash": sf.content_hash,
                "segments": entries,
            }
        )
    files.sort(key=lambda f: f["path"])
    return {"root": model.root, "files": files}
