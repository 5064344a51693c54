"""Lexical scanning of Java source text.

Produces a flat token stream with 1-based line positions, which the
structural parser in :mod:`hiersum.segmenter` walks to locate type
declarations and their members. Comments are collected separately so a
declaration's span can absorb a comment block attached directly above it.

The scanner is deliberately tolerant: unterminated strings and comments
are closed at end of line / end of file instead of raising, so that a
broken file still yields usable tokens for the declarations before the
damage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

# Words that can never be a declared name. Contextual keywords such as
# `record`, `var`, `sealed` and `yield` are legal identifiers in old code
# and are therefore *not* listed here; the parser special-cases them.
KEYWORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package
    private protected public return short static strictfp super switch
    synchronized this throw throws transient try void volatile while
    """.split()
)

MODIFIER_WORDS = frozenset(
    """
    public protected private static final abstract synchronized native
    strictfp transient volatile default
    """.split()
)


@dataclass(frozen=True)
class Token:
    kind: str  # "name" | "number" | "string" | "char" | "punct"
    text: str
    line: int


@dataclass(frozen=True)
class Comment:
    text: str
    start_line: int
    end_line: int


def _is_name_start(ch: str) -> bool:
    return ch.isalpha() or ch in "_$"


def _is_name_part(ch: str) -> bool:
    return ch.isalnum() or ch in "_$"


def tokenize(text: str) -> Tuple[List[Token], List[Comment]]:
    """Split Java source into structural tokens plus a side list of comments.

    String, char and text-block literals become single tokens, so braces or
    quotes inside them cannot confuse downstream brace matching. Operators
    are emitted one character at a time; the parser only ever needs single
    punctuation characters.
    """
    tokens: List[Token] = []
    comments: List[Comment] = []
    i = 0
    line = 1
    n = len(text)

    while i < n:
        ch = text[i]

        if ch == "\n":
            line += 1
            i += 1
            continue
        if ch in " \t\r\f\x0b":
            i += 1
            continue

        # Line comment.
        if ch == "/" and i + 1 < n and text[i + 1] == "/":
            j = text.find("\n", i)
            if j == -1:
                j = n
            comments.append(Comment(text[i:j], line, line))
            i = j
            continue

        # Block comment (includes javadoc).
        if ch == "/" and i + 1 < n and text[i + 1] == "*":
            j = text.find("*/", i + 2)
            if j == -1:
                j = n
                end = j
            else:
                end = j + 2
            body = text[i:end]
            start_line = line
            line += body.count("\n")
            comments.append(Comment(body, start_line, line))
            i = end
            continue

        # Text block (Java 15+): opened by three double quotes.
        if ch == '"' and text.startswith('"""', i):
            j = i + 3
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text.startswith('"""', j):
                    j += 3
                    break
                j += 1
            else:
                j = n
            body = text[i:j]
            tokens.append(Token("string", body, line))
            line += body.count("\n")
            i = j
            continue

        # Ordinary string literal; tolerate a missing closing quote by
        # ending the literal at the line break.
        if ch == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                if text[j] == "\\":
                    j += 1
                j += 1
            if j < n and text[j] == '"':
                j += 1
            tokens.append(Token("string", text[i:j], line))
            i = j
            continue

        # Character literal.
        if ch == "'":
            j = i + 1
            while j < n and text[j] not in "'\n":
                if text[j] == "\\":
                    j += 1
                j += 1
            if j < n and text[j] == "'":
                j += 1
            tokens.append(Token("char", text[i:j], line))
            i = j
            continue

        if _is_name_start(ch):
            j = i + 1
            while j < n and _is_name_part(text[j]):
                j += 1
            tokens.append(Token("name", text[i:j], line))
            i = j
            continue

        if ch.isdigit():
            j = i + 1
            while j < n:
                c = text[j]
                if c.isalnum() or c in "_.":
                    j += 1
                    continue
                # Signed exponent: 1e-5, 0x1p+3.
                if c in "+-" and text[j - 1] in "eEpP":
                    j += 1
                    continue
                break
            tokens.append(Token("number", text[i:j], line))
            i = j
            continue

        tokens.append(Token("punct", ch, line))
        i += 1

    return tokens, comments
