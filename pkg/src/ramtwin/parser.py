"""Parse Onyx-exported OpenMx-style path statements into PathSpec lists.

A hand-written lexer/recursive-descent parser over the call-expression subset
that Onyx actually emits: ``mxPath(...)`` with keyword arguments, ``c(...)``
vector literals, TRUE/FALSE/T/F booleans, and numeric literals.  Comments run
from ``#`` to end of line; commented lines are skipped except that manifest /
latent declarations are recovered from them and data lines produce
diagnostics.  Anything else at the top level is ignored with a diagnostic so a
whole export file parses even when the user has not commented the wrappers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .paths import PathSpec, PathError, paths_from_doc

_DECL_RE = re.compile(r"\b(manifests|latents)\s*(?:<-|=)\s*c\(([^)]*)\)")
_STRING_RE = re.compile(r'"([^"]*)"|\'([^\']*)\'')

KNOWN_KEYWORDS = {"from", "to", "free", "value", "values", "arrows",
                  "label", "labels", "defn"}
PATH_CALLS = {"mxPath", "umxPath"}
DATA_CALLS = {"mxData"}


class OnyxParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class ParsedPathSet:
    paths: list[PathSpec] = field(default_factory=list)
    declared_manifests: list[str] = field(default_factory=list)
    declared_latents: list[str] = field(default_factory=list)
    diagnostics: list[tuple[int, str]] = field(default_factory=list)


# -- lexer --------------------------------------------------------------------

@dataclass(frozen=True)
class _Tok:
    kind: str  # name | number | string | punct
    text: str
    line: int


def _lex(text: str) -> tuple[list[_Tok], list[tuple[int, str]]]:
    """Tokenize R-ish source; returns (tokens, comments) with 1-based lines."""
    toks: list[_Tok] = []
    comments: list[tuple[int, str]] = []
    i, line = 0, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
        elif ch in " \t\r":
            i += 1
        elif ch == "#":
            j = text.find("\n", i)
            j = n if j < 0 else j
            comments.append((line, text[i + 1:j]))
            i = j
        elif ch in "\"'":
            j = i + 1
            while j < n and text[j] != ch:
                if text[j] == "\n":
                    raise OnyxParseError("unterminated string", line)
                j += 1
            if j >= n:
                raise OnyxParseError("unterminated string", line)
            toks.append(_Tok("string", text[i + 1:j], line))
            i = j + 1
        elif ch.isdigit() or (ch in "+-." and i + 1 < n and
                              (text[i + 1].isdigit() or text[i + 1] == ".")):
            m = re.match(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?", text[i:])
            toks.append(_Tok("number", m.group(0), line))
            i += m.end()
        elif ch.isalpha() or ch in "._":
            m = re.match(r"[A-Za-z._][A-Za-z0-9._]*", text[i:])
            toks.append(_Tok("name", m.group(0), line))
            i += m.end()
        else:
            toks.append(_Tok("punct", ch, line))
            i += 1
    return toks, comments


# -- value model --------------------------------------------------------------

def _as_vector(v) -> list:
    return v if isinstance(v, list) else [v]


class _CallParser:
    def __init__(self, toks: list[_Tok], pos: int):
        self.toks = toks
        self.pos = pos

    def peek(self) -> _Tok | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self) -> _Tok:
        t = self.peek()
        if t is None:
            raise OnyxParseError("unexpected end of input (unbalanced parentheses)",
                                 self.toks[-1].line if self.toks else None)
        self.pos += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise OnyxParseError(f"expected {text!r}, found {t.text!r}", t.line)
        return t

    def parse_call_args(self) -> dict:
        """Parse '(' kw=value, ... ')' into a dict; cursor ends after ')'."""
        self.expect("(")
        args: dict[str, object] = {}
        if self.peek() and self.peek().text == ")":
            self.next()
            return args
        while True:
            t = self.next()
            if t.kind != "name":
                raise OnyxParseError(f"expected keyword, found {t.text!r}", t.line)
            kw = t.text
            self.expect("=")
            args[kw] = self.parse_value()
            sep = self.next()
            if sep.text == ")":
                return args
            if sep.text != ",":
                raise OnyxParseError(f"expected ',' or ')', found {sep.text!r}", sep.line)

    def parse_value(self):
        t = self.next()
        if t.kind == "string":
            return t.text
        if t.kind == "number":
            return float(t.text)
        if t.kind == "name":
            if t.text in ("TRUE", "T"):
                return True
            if t.text in ("FALSE", "F"):
                return False
            if t.text == "NA":
                return None
            if t.text == "c":
                self.expect("(")
                items = []
                if self.peek() and self.peek().text == ")":
                    self.next()
                    return items
                while True:
                    items.append(self.parse_value())
                    sep = self.next()
                    if sep.text == ")":
                        return items
                    if sep.text != ",":
                        raise OnyxParseError(
                            f"expected ',' or ')' in c(...), found {sep.text!r}", sep.line)
            raise OnyxParseError(f"unexpected identifier {t.text!r} in argument", t.line)
        raise OnyxParseError(f"unexpected token {t.text!r}", t.line)


def _skip_balanced(toks: list[_Tok], pos: int) -> int:
    """pos points at '('; return position just past the matching ')'."""
    depth = 0
    while pos < len(toks):
        t = toks[pos]
        if t.text == "(":
            depth += 1
        elif t.text == ")":
            depth -= 1
            if depth == 0:
                return pos + 1
        pos += 1
    raise OnyxParseError("unbalanced parentheses", toks[-1].line if toks else None)


# -- statement expansion --------------------------------------------------------

def _expand_mx_path(args: dict, line: int) -> list[PathSpec]:
    unknown = set(args) - KNOWN_KEYWORDS
    if unknown:
        raise OnyxParseError(f"unknown keyword(s) in path call: {sorted(unknown)}", line)

    if "defn" in args:
        cols = [str(c) for c in _as_vector(args["defn"])]
        return [PathSpec(src=c, defn=True, free=False, value=0.0) for c in cols]

    if "from" not in args:
        raise OnyxParseError("path call lacks 'from'", line)
    src_v = _as_vector(args["from"])
    if len(src_v) != 1:
        raise OnyxParseError("vector-valued 'from' is not supported", line)
    src = str(src_v[0])

    to_v = [str(t) for t in _as_vector(args.get("to", [src]))]
    k = max(len(to_v), 1)

    def broadcast(name: str, default):
        if name == "value" and "values" in args:
            raw = args["values"]
        elif name == "label" and "labels" in args:
            raw = args["labels"]
        elif name in args:
            raw = args[name]
        else:
            return [default] * k
        vec = _as_vector(raw)
        if len(vec) == 1:
            return vec * k
        if len(vec) != k:
            raise OnyxParseError(
                f"length of '{name}' ({len(vec)}) does not match targets ({k})", line)
        return vec

    free_v = broadcast("free", True)
    value_v = broadcast("value", None)
    label_v = broadcast("label", None)
    arrows_v = _as_vector(args.get("arrows", 1.0))
    if len(arrows_v) != 1:
        raise OnyxParseError("vector-valued 'arrows' is not supported", line)
    arrows = int(arrows_v[0])
    if arrows not in (1, 2):
        raise OnyxParseError(f"arrows must be 1 or 2, got {arrows_v[0]}", line)

    specs = []
    for dst, free, value, label in zip(to_v, free_v, value_v, label_v):
        try:
            specs.append(PathSpec(
                src=src, dst=dst, arrows=arrows, free=bool(free),
                value=None if value is None else float(value),
                label=None if label is None else str(label)))
        except PathError as e:
            raise OnyxParseError(str(e), line) from None
    return specs


def _recover_declarations(comments: list[tuple[int, str]], text: str,
                          result: ParsedPathSet) -> None:
    # declarations may sit in comments (Onyx default) or live code
    for source in [c for _, c in comments] + [text]:
        for m in _DECL_RE.finditer(source):
            names = [a or b for a, b in _STRING_RE.findall(m.group(2))]
            if m.group(1) == "manifests" and not result.declared_manifests:
                result.declared_manifests = names
            elif m.group(1) == "latents" and not result.declared_latents:
                result.declared_latents = names


def parse_onyx_export(text: str) -> ParsedPathSet:
    """Parse Onyx/OpenMx path syntax; never fails on non-path statements."""
    result = ParsedPathSet()
    toks, comments = _lex(text)
    _recover_declarations(comments, text, result)
    for line_no, comment in comments:
        if "mxData" in comment:
            result.diagnostics.append((line_no, "commented mxData line ignored"))

    pos = 0
    reported: set[int] = set()
    while pos < len(toks):
        t = toks[pos]
        if t.kind == "name" and t.text in PATH_CALLS and \
                pos + 1 < len(toks) and toks[pos + 1].text == "(":
            cp = _CallParser(toks, pos + 1)
            args = cp.parse_call_args()
            result.paths.extend(_expand_mx_path(args, t.line))
            pos = cp.pos
        elif t.kind == "name" and t.text in DATA_CALLS and \
                pos + 1 < len(toks) and toks[pos + 1].text == "(":
            result.diagnostics.append((t.line, "mxData statement ignored; bind data "
                                               "through the model builder instead"))
            pos = _skip_balanced(toks, pos + 1)
        elif t.kind == "name" and pos + 1 < len(toks) and toks[pos + 1].text == "(" \
                and t.text not in ("c",):
            if t.line not in reported:
                result.diagnostics.append((t.line, f"ignored statement {t.text!r}"))
                reported.add(t.line)
            pos = _skip_balanced(toks, pos + 1)
        else:
            pos += 1
    return result


def parse_exchange(doc: dict) -> ParsedPathSet:
    """Parse the canonical exchange-format document into a ParsedPathSet."""
    if not isinstance(doc, dict):
        raise PathError("exchange document must be an object")
    result = ParsedPathSet()
    result.declared_manifests = [str(v) for v in doc.get("manifests", [])]
    result.declared_latents = [str(v) for v in doc.get("latents", [])]
    result.paths = paths_from_doc(doc)
    for col in doc.get("defvars", []):
        if not any(p.defn and p.src == col for p in result.paths):
            result.paths.append(PathSpec(src=str(col), defn=True, free=False, value=0.0))
    return result
