"""The interaction command language: lexer, command ASTs, parser, formatter.

Line-oriented verb-argument syntax, one statement per line:

    load "qcd.ndvf" as qcd
    slice qcd axis=t index=1..8 as s
    iso add view=0 level=0.005
    snapshot "fig1.ppm" size=1920x1200
    # comments run to the end of the line

Arguments are positional words/strings or ``key=value`` pairs; values are
numbers, names, inclusive ranges ``a..b``, tuples ``(a,b[,c[,d]])``, or
size words like ``1920x1200``.  A trailing ``as <name>`` binds the result
to a dataset name.  ``format`` emits a canonical line for every AST and
``parse(format(ast)) == ast`` holds for all constructible ASTs; numbers
keep their int/float identity so the round trip is exact.
"""

from __future__ import annotations

import difflib
import math
import re
from dataclasses import dataclass, fields

__all__ = [
    "Anim",
    "CameraSet",
    "ColorbarShow",
    "CommandAst",
    "CutAdd",
    "Filter",
    "HistShow",
    "IsoAdd",
    "IsoRemove",
    "Layout",
    "Load",
    "Mode",
    "OpacitySet",
    "PaletteSet",
    "ParseError",
    "Project",
    "RangeSet",
    "Slice",
    "Snapshot",
    "Source",
    "Synth",
    "Token",
    "ViewAdd",
    "ViewRemove",
    "format_command",
    "parse",
    "parse_script",
    "tokenize",
]

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
# 1920x1200-style size words; must not run into more word/number text.
_SIZE_WORD = re.compile(r"\d+(?:x\d+)+(?![\w.])")
_NUMBER = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int, offending: str = ""):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.offending = offending


@dataclass(frozen=True)
class Token:
    kind: str  # word | number | string | symbol | newline | end
    text: str
    line: int
    column: int


def tokenize(text: str, first_line: int = 1) -> list[Token]:
    """Longest-match lexing of a whole script; positions are 1-based."""
    tokens: list[Token] = []
    line, col = first_line, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\r":
            # CRLF or a bare CR both count as one newline.
            tokens.append(Token("newline", "\n", line, col))
            i += 2 if text.startswith("\r\n", i) else 1
            line, col = line + 1, 1
            continue
        if c == "\n":
            tokens.append(Token("newline", "\n", line, col))
            i += 1
            line, col = line + 1, 1
            continue
        if c in " \t":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] not in "\r\n":
                i += 1
            continue
        if c == '"':
            start_line, start_col = line, col
            i += 1
            col += 1
            chars: list[str] = []
            while True:
                if i >= n or text[i] in "\r\n":
                    raise ParseError(
                        "unterminated string", start_line, start_col, '"'
                    )
                ch = text[i]
                if ch == "\\":
                    if i + 1 >= n or text[i + 1] in "\r\n":
                        raise ParseError(
                            "unterminated string", start_line, start_col, '"'
                        )
                    chars.append(_ESCAPES.get(text[i + 1], text[i + 1]))
                    i += 2
                    col += 2
                    continue
                if ch == '"':
                    i += 1
                    col += 1
                    break
                chars.append(ch)
                i += 1
                col += 1
            tokens.append(Token("string", "".join(chars), start_line, start_col))
            continue
        if text.startswith("..", i):
            tokens.append(Token("symbol", "..", line, col))
            i += 2
            col += 2
            continue
        if c in "=(),":
            tokens.append(Token("symbol", c, line, col))
            i += 1
            col += 1
            continue
        m = _SIZE_WORD.match(text, i)
        if m is not None:
            tokens.append(Token("word", m.group(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _NUMBER.match(text, i)
        if m is not None and (c.isdigit() or (c == "-" and m.end() > i + 1)):
            tokens.append(Token("number", m.group(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _WORD.match(text, i)
        if m is not None:
            tokens.append(Token("word", m.group(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        raise ParseError(f"unexpected character {c!r}", line, col, c)
    tokens.append(Token("end", "", line, col))
    return tokens


# --- command ASTs ----------------------------------------------------------

Number = int | float
Axis = str | int


def _check_name(value: str, what: str) -> None:
    if not isinstance(value, str) or NAME_RE.match(value) is None:
        raise ValueError(f"{what} must match [A-Za-z_][A-Za-z0-9_]*, got {value!r}")


def _check_finite(value, what: str) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{what} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ValueError(f"{what} must be finite, got {value!r}")


@dataclass(frozen=True)
class Load:
    path: str
    name: str

    def __post_init__(self) -> None:
        _check_name(self.name, "dataset name")


@dataclass(frozen=True)
class Synth:
    generator: str
    params: tuple[tuple[str, object], ...]
    name: str

    def __post_init__(self) -> None:
        _check_name(self.generator, "generator")
        _check_name(self.name, "dataset name")
        for key, value in self.params:
            _check_name(key, "parameter name")
            if isinstance(value, tuple):
                for v in value:
                    _check_finite(v, f"parameter {key}")
            elif isinstance(value, (int, float)) and not isinstance(value, bool):
                _check_finite(value, f"parameter {key}")
            elif not isinstance(value, str):
                raise ValueError(f"parameter {key} has unsupported value {value!r}")


@dataclass(frozen=True)
class Slice:
    source: str
    axis: Axis
    index: int | tuple[int, int]  # single lattice index or inclusive range
    name: str

    def __post_init__(self) -> None:
        _check_name(self.source, "dataset name")
        _check_name(self.name, "dataset name")
        if isinstance(self.index, tuple):
            lo, hi = self.index
            if not (isinstance(lo, int) and isinstance(hi, int)):
                raise ValueError("slice range bounds must be integers")
        elif not isinstance(self.index, int):
            raise ValueError("slice index must be an integer")


@dataclass(frozen=True)
class Project:
    source: str
    axis: Axis
    reducer: str
    name: str

    def __post_init__(self) -> None:
        _check_name(self.source, "dataset name")
        _check_name(self.reducer, "reducer")
        _check_name(self.name, "dataset name")


@dataclass(frozen=True)
class Filter:
    source: str
    lo: Number | None = None
    hi: Number | None = None

    def __post_init__(self) -> None:
        _check_name(self.source, "dataset name")
        if self.lo is None and self.hi is None:
            raise ValueError("filter needs min and/or max")
        for v, what in ((self.lo, "min"), (self.hi, "max")):
            if v is not None:
                _check_finite(v, what)


@dataclass(frozen=True)
class ViewAdd:
    source: str
    cell: tuple[int, int] | None = None  # (row, col)

    def __post_init__(self) -> None:
        _check_name(self.source, "dataset name")


@dataclass(frozen=True)
class ViewRemove:
    view_id: int


@dataclass(frozen=True)
class IsoAdd:
    view_id: int
    level: Number

    def __post_init__(self) -> None:
        _check_finite(self.level, "level")


@dataclass(frozen=True)
class IsoRemove:
    view_id: int
    level: Number | None = None

    def __post_init__(self) -> None:
        if self.level is not None:
            _check_finite(self.level, "level")


@dataclass(frozen=True)
class CutAdd:
    view_id: int
    axis: Axis | None = None
    normal: tuple[Number, Number, Number] | None = None
    offset: Number | str = "center"

    def __post_init__(self) -> None:
        if (self.axis is None) == (self.normal is None):
            raise ValueError("cut plane needs exactly one of axis or normal")
        if isinstance(self.offset, str) and self.offset != "center":
            raise ValueError(f"offset must be a number or 'center', got {self.offset!r}")
        if not isinstance(self.offset, str):
            _check_finite(self.offset, "offset")


@dataclass(frozen=True)
class PaletteSet:
    view_id: int | str  # view index or "all"
    name: str

    def __post_init__(self) -> None:
        _check_name(self.name, "palette name")
        if isinstance(self.view_id, str) and self.view_id != "all":
            raise ValueError("view must be an index or 'all'")


@dataclass(frozen=True)
class OpacitySet:
    view_id: int | str
    points: tuple[tuple[Number, Number], ...]

    def __post_init__(self) -> None:
        if isinstance(self.view_id, str) and self.view_id != "all":
            raise ValueError("view must be an index or 'all'")
        if len(self.points) < 2:
            raise ValueError("opacity needs at least two points")
        for s, a in self.points:
            _check_finite(s, "opacity point scalar")
            _check_finite(a, "opacity point alpha")


@dataclass(frozen=True)
class RangeSet:
    view_id: int
    lo: Number
    hi: Number

    def __post_init__(self) -> None:
        _check_finite(self.lo, "min")
        _check_finite(self.hi, "max")


@dataclass(frozen=True)
class HistShow:
    view_id: int
    bins: int

    def __post_init__(self) -> None:
        if not isinstance(self.bins, int) or self.bins < 1:
            raise ValueError(f"bins must be a positive integer, got {self.bins!r}")


@dataclass(frozen=True)
class ColorbarShow:
    view_id: int


@dataclass(frozen=True)
class Mode:
    mode: str

    def __post_init__(self) -> None:
        if self.mode not in ("camera", "object", "sync"):
            raise ValueError(f"unknown mode: {self.mode}; expected camera|object|sync")


@dataclass(frozen=True)
class CameraSet:
    position: tuple[Number, Number, Number] | None = None
    focal: tuple[Number, Number, Number] | None = None
    up: tuple[Number, Number, Number] | None = None
    fov: Number | None = None

    def __post_init__(self) -> None:
        if self.position is None and self.focal is None and self.up is None and self.fov is None:
            raise ValueError("camera set needs at least one argument")
        for v, what in ((self.position, "position"), (self.focal, "focal"), (self.up, "up")):
            if v is not None:
                for c in v:
                    _check_finite(c, what)
        if self.fov is not None:
            _check_finite(self.fov, "fov")


@dataclass(frozen=True)
class Anim:
    kind: str  # rotate | orbit
    axis: Axis
    degrees: Number
    frames: int

    def __post_init__(self) -> None:
        if self.kind not in ("rotate", "orbit"):
            raise ValueError(f"unknown animation kind: {self.kind}; expected rotate|orbit")
        _check_finite(self.degrees, "degrees")
        if not isinstance(self.frames, int) or self.frames < 1:
            raise ValueError(f"frames must be a positive integer, got {self.frames!r}")


@dataclass(frozen=True)
class Snapshot:
    path: str
    size: tuple[int, int] | None = None


@dataclass(frozen=True)
class Source:
    path: str


@dataclass(frozen=True)
class Layout:
    cols: int
    cell_w: int
    cell_h: int

    def __post_init__(self) -> None:
        if min(self.cols, self.cell_w, self.cell_h) < 1:
            raise ValueError("layout columns and cell size must be positive")


CommandAst = (
    Load | Synth | Slice | Project | Filter | ViewAdd | ViewRemove | IsoAdd
    | IsoRemove | CutAdd | PaletteSet | OpacitySet | RangeSet | HistShow
    | ColorbarShow | Mode | CameraSet | Anim | Snapshot | Source | Layout
)

AST_VARIANTS = (
    Load, Synth, Slice, Project, Filter, ViewAdd, ViewRemove, IsoAdd,
    IsoRemove, CutAdd, PaletteSet, OpacitySet, RangeSet, HistShow,
    ColorbarShow, Mode, CameraSet, Anim, Snapshot, Source, Layout,
)

VERBS = (
    "load", "synth", "slice", "project", "filter", "view add", "view remove",
    "iso add", "iso remove", "cut add", "palette set", "opacity set",
    "range set", "hist show", "colorbar show", "mode", "camera set", "anim",
    "snapshot", "source", "layout",
)

_TWO_WORD_HEADS = {
    "view": ("add", "remove"),
    "iso": ("add", "remove"),
    "cut": ("add",),
    "palette": ("set",),
    "opacity": ("set",),
    "range": ("set",),
    "hist": ("show",),
    "colorbar": ("show",),
    "camera": ("set",),
}


@dataclass(frozen=True)
class _Range:
    lo: Number
    hi: Number


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind not in ("end",):
            self.i += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.column, tok.text)

    def at_line_end(self) -> bool:
        return self.peek().kind in ("newline", "end")


def _number_value(tok: Token) -> Number:
    text = tok.text
    if any(c in text for c in ".eE"):
        return float(text)
    return int(text)


def _parse_value(p: _Parser):
    tok = p.peek()
    if tok.kind == "number":
        p.advance()
        first = _number_value(tok)
        if p.peek().kind == "symbol" and p.peek().text == "..":
            p.advance()
            second_tok = p.peek()
            if second_tok.kind != "number":
                p.fail("expected a number after '..'")
            p.advance()
            return _Range(first, _number_value(second_tok))
        return first
    if tok.kind == "word":
        p.advance()
        return tok.text
    if tok.kind == "symbol" and tok.text == "(":
        p.advance()
        items: list[Number] = []
        while True:
            num = p.peek()
            if num.kind != "number":
                p.fail("expected a number inside a tuple")
            p.advance()
            items.append(_number_value(num))
            sep = p.peek()
            if sep.kind == "symbol" and sep.text == ",":
                p.advance()
                continue
            if sep.kind == "symbol" and sep.text == ")":
                p.advance()
                break
            p.fail("expected ',' or ')' in tuple")
        if not 2 <= len(items) <= 4:
            p.fail(f"tuples take 2 to 4 numbers, got {len(items)}", tok)
        return tuple(items)
    p.fail(f"expected a value, got {tok.text!r}")


@dataclass
class _Args:
    positional: list[tuple[object, Token]]
    keyword: list[tuple[str, object, Token]]
    as_name: str | None


def _collect_args(p: _Parser, verb: str) -> _Args:
    args = _Args([], [], None)
    while not p.at_line_end():
        tok = p.peek()
        if tok.kind == "word" and tok.text == "as":
            p.advance()
            name_tok = p.peek()
            if name_tok.kind != "word":
                p.fail(f"expected a name after 'as'")
            p.advance()
            args.as_name = name_tok.text
            if not p.at_line_end():
                p.fail("'as <name>' must end the command")
            break
        if tok.kind == "string":
            p.advance()
            args.positional.append((tok.text, tok))
            continue
        if tok.kind == "word":
            nxt = p.tokens[p.i + 1] if p.i + 1 < len(p.tokens) else None
            if nxt is not None and nxt.kind == "symbol" and nxt.text == "=":
                p.advance()
                p.advance()
                value = _parse_value(p)
                args.keyword.append((tok.text, value, tok))
                continue
            p.advance()
            args.positional.append((tok.text, tok))
            continue
        p.fail(f"unexpected {tok.text!r} in arguments of '{verb}'")
    return args


class _ArgReader:
    """Pulls typed arguments out of a collected argument list."""

    def __init__(self, p: _Parser, verb: str, verb_tok: Token, args: _Args):
        self.p = p
        self.verb = verb
        self.verb_tok = verb_tok
        self.args = args
        self.used_keys: set[str] = set()

    def fail(self, message: str, tok: Token | None = None):
        self.p.fail(message, tok or self.verb_tok)

    def positional(self, what: str, kind: str = "word"):
        if not self.args.positional:
            self.fail(f"'{self.verb}' needs {what}")
        value, tok = self.args.positional.pop(0)
        if kind == "word" and not isinstance(value, str):
            self.fail(f"{what} must be a name", tok)
        return value, tok

    def positional_string(self, what: str):
        if not self.args.positional:
            self.fail(f"'{self.verb}' needs {what}")
        value, tok = self.args.positional.pop(0)
        return value, tok

    def keyword(self, key: str, required: bool = False):
        found = [(v, t) for k, v, t in self.args.keyword if k == key]
        self.used_keys.add(key)
        if len(found) > 1:
            self.fail(f"duplicate argument {key}=", found[1][1])
        if not found:
            if required:
                self.fail(f"'{self.verb}' needs {key}=")
            return None, None
        return found[0]

    def keyword_all(self, key: str):
        self.used_keys.add(key)
        return [(v, t) for k, v, t in self.args.keyword if k == key]

    def require_name(self) -> str:
        if self.args.as_name is None:
            self.fail(f"'{self.verb}' needs a trailing 'as <name>'")
        return self.args.as_name

    def finish(self, allow_as: bool = False):
        if self.args.positional:
            _, tok = self.args.positional[0]
            self.fail(f"unexpected extra argument {tok.text!r}", tok)
        for key, _, tok in self.args.keyword:
            if key not in self.used_keys:
                self.fail(f"unknown argument {key}= for '{self.verb}'", tok)
        if self.args.as_name is not None and not allow_as:
            self.fail(f"'{self.verb}' does not take 'as <name>'")

    # typed converters ------------------------------------------------------

    def as_int(self, value, tok, what: str) -> int:
        if not isinstance(value, int) or isinstance(value, bool):
            self.fail(f"{what} must be an integer", tok)
        return value

    def as_number(self, value, tok, what: str) -> Number:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"{what} must be a number", tok)
        return value

    def as_axis(self, value, tok) -> Axis:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, str):
            return value
        self.fail("axis must be a label or an index", tok)

    def as_view(self, value, tok, allow_all: bool = False):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if allow_all and value == "all":
            return "all"
        expected = "an index or 'all'" if allow_all else "an index"
        self.fail(f"view must be {expected}", tok)

    def as_tuple(self, value, tok, what: str, arity: int):
        if not isinstance(value, tuple) or len(value) != arity:
            self.fail(f"{what} must be a tuple of {arity} numbers", tok)
        return value

    def as_size(self, value, tok, what: str) -> tuple[int, int]:
        if isinstance(value, str):
            parts = value.split("x")
            if len(parts) == 2 and all(part.isdigit() for part in parts):
                return int(parts[0]), int(parts[1])
        self.fail(f"{what} must look like 640x480", tok)


def _build(p: _Parser, verb_tok: Token, cls, **kwargs):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        p.fail(str(exc), verb_tok)


def _parse_command(p: _Parser) -> CommandAst:
    verb_tok = p.peek()
    if verb_tok.kind != "word":
        p.fail(f"expected a command verb, got {verb_tok.text!r}")
    p.advance()
    verb = verb_tok.text
    if verb in _TWO_WORD_HEADS:
        quals = _TWO_WORD_HEADS[verb]
        qual_tok = p.peek()
        if qual_tok.kind != "word" or qual_tok.text not in quals:
            got = f"{verb} {qual_tok.text}".strip()
            matches = difflib.get_close_matches(got, VERBS, n=2, cutoff=0.4)
            hint = f"; did you mean: {', '.join(matches)}" if matches else ""
            p.fail(f"unknown verb: {got}{hint}", verb_tok)
        p.advance()
        verb = f"{verb} {qual_tok.text}"
    elif verb not in VERBS:
        matches = difflib.get_close_matches(verb, VERBS, n=2, cutoff=0.4)
        hint = f"; did you mean: {', '.join(matches)}" if matches else ""
        p.fail(f"unknown verb: {verb}{hint}", verb_tok)

    if verb == "mode":
        mode_tok = p.peek()
        if mode_tok.kind != "word" or mode_tok.text not in ("camera", "object", "sync"):
            p.fail(
                f"unknown mode: {mode_tok.text}; expected camera|object|sync",
                mode_tok,
            )
        p.advance()
        if not p.at_line_end():
            p.fail("'mode' takes exactly one argument")
        return Mode(mode_tok.text)

    args = _collect_args(p, verb)
    r = _ArgReader(p, verb, verb_tok, args)

    if verb == "load":
        path, _ = r.positional_string("a file path")
        name = r.require_name()
        r.finish(allow_as=True)
        return _build(p, verb_tok, Load, path=path, name=name)

    if verb == "synth":
        generator, gtok = r.positional("a generator name")
        params = tuple((k, v) for k, v, _ in args.keyword)
        for k, v, tok in args.keyword:
            r.used_keys.add(k)
            if isinstance(v, _Range):
                p.fail("ranges are not valid generator parameters", tok)
        name = r.require_name()
        r.finish(allow_as=True)
        return _build(p, verb_tok, Synth, generator=generator, params=params, name=name)

    if verb == "slice":
        source, _ = r.positional("a source dataset")
        axis_v, axis_tok = r.keyword("axis", required=True)
        index_v, index_tok = r.keyword("index", required=True)
        if isinstance(index_v, _Range):
            lo = r.as_int(index_v.lo, index_tok, "index range start")
            hi = r.as_int(index_v.hi, index_tok, "index range end")
            index = (lo, hi)
        else:
            index = r.as_int(index_v, index_tok, "index")
        name = r.require_name()
        r.finish(allow_as=True)
        return _build(
            p, verb_tok, Slice,
            source=source, axis=r.as_axis(axis_v, axis_tok), index=index, name=name,
        )

    if verb == "project":
        source, _ = r.positional("a source dataset")
        axis_v, axis_tok = r.keyword("axis", required=True)
        reducer_v, reducer_tok = r.keyword("reducer", required=True)
        if not isinstance(reducer_v, str):
            p.fail("reducer must be a name", reducer_tok)
        name = r.require_name()
        r.finish(allow_as=True)
        return _build(
            p, verb_tok, Project,
            source=source, axis=r.as_axis(axis_v, axis_tok),
            reducer=reducer_v, name=name,
        )

    if verb == "filter":
        source, _ = r.positional("a source dataset")
        lo_v, lo_tok = r.keyword("min")
        hi_v, hi_tok = r.keyword("max")
        lo = None if lo_v is None else r.as_number(lo_v, lo_tok, "min")
        hi = None if hi_v is None else r.as_number(hi_v, hi_tok, "max")
        r.finish()
        return _build(p, verb_tok, Filter, source=source, lo=lo, hi=hi)

    if verb == "view add":
        source, _ = r.positional("a source dataset")
        cell_v, cell_tok = r.keyword("cell")
        cell = None
        if cell_v is not None:
            cell_t = r.as_tuple(cell_v, cell_tok, "cell", 2)
            cell = (
                r.as_int(cell_t[0], cell_tok, "cell row"),
                r.as_int(cell_t[1], cell_tok, "cell column"),
            )
        r.finish()
        return _build(p, verb_tok, ViewAdd, source=source, cell=cell)

    if verb == "view remove":
        view_v, view_tok = r.keyword("view", required=True)
        r.finish()
        return ViewRemove(r.as_view(view_v, view_tok))

    if verb == "iso add":
        view_v, view_tok = r.keyword("view", required=True)
        level_v, level_tok = r.keyword("level", required=True)
        r.finish()
        return _build(
            p, verb_tok, IsoAdd,
            view_id=r.as_view(view_v, view_tok),
            level=r.as_number(level_v, level_tok, "level"),
        )

    if verb == "iso remove":
        view_v, view_tok = r.keyword("view", required=True)
        level_v, level_tok = r.keyword("level")
        level = None if level_v is None else r.as_number(level_v, level_tok, "level")
        r.finish()
        return _build(
            p, verb_tok, IsoRemove, view_id=r.as_view(view_v, view_tok), level=level
        )

    if verb == "cut add":
        view_v, view_tok = r.keyword("view", required=True)
        axis_v, axis_tok = r.keyword("axis")
        normal_v, normal_tok = r.keyword("normal")
        offset_v, offset_tok = r.keyword("offset")
        axis = None if axis_v is None else r.as_axis(axis_v, axis_tok)
        normal = None
        if normal_v is not None:
            normal = r.as_tuple(normal_v, normal_tok, "normal", 3)
        offset: Number | str = "center"
        if offset_v is not None:
            if offset_v == "center":
                offset = "center"
            else:
                offset = r.as_number(offset_v, offset_tok, "offset")
        r.finish()
        return _build(
            p, verb_tok, CutAdd,
            view_id=r.as_view(view_v, view_tok), axis=axis, normal=normal,
            offset=offset,
        )

    if verb == "palette set":
        view_v, view_tok = r.keyword("view", required=True)
        name_v, name_tok = r.keyword("name", required=True)
        if not isinstance(name_v, str):
            p.fail("palette name must be a name", name_tok)
        r.finish()
        return _build(
            p, verb_tok, PaletteSet,
            view_id=r.as_view(view_v, view_tok, allow_all=True), name=name_v,
        )

    if verb == "opacity set":
        view_v, view_tok = r.keyword("view", required=True)
        point_args = r.keyword_all("point")
        if len(point_args) < 2:
            p.fail("'opacity set' needs at least two point=(scalar,alpha) arguments", verb_tok)
        points = []
        for v, tok in point_args:
            t = r.as_tuple(v, tok, "point", 2)
            points.append(
                (r.as_number(t[0], tok, "point scalar"), r.as_number(t[1], tok, "point alpha"))
            )
        r.finish()
        return _build(
            p, verb_tok, OpacitySet,
            view_id=r.as_view(view_v, view_tok, allow_all=True),
            points=tuple(points),
        )

    if verb == "range set":
        view_v, view_tok = r.keyword("view", required=True)
        lo_v, lo_tok = r.keyword("min", required=True)
        hi_v, hi_tok = r.keyword("max", required=True)
        r.finish()
        return _build(
            p, verb_tok, RangeSet,
            view_id=r.as_view(view_v, view_tok),
            lo=r.as_number(lo_v, lo_tok, "min"),
            hi=r.as_number(hi_v, hi_tok, "max"),
        )

    if verb == "hist show":
        view_v, view_tok = r.keyword("view", required=True)
        bins_v, bins_tok = r.keyword("bins")
        bins = 64 if bins_v is None else r.as_int(bins_v, bins_tok, "bins")
        r.finish()
        return _build(
            p, verb_tok, HistShow, view_id=r.as_view(view_v, view_tok), bins=bins
        )

    if verb == "colorbar show":
        view_v, view_tok = r.keyword("view", required=True)
        r.finish()
        return ColorbarShow(r.as_view(view_v, view_tok))

    if verb == "camera set":
        pos_v, pos_tok = r.keyword("position")
        focal_v, focal_tok = r.keyword("focal")
        up_v, up_tok = r.keyword("up")
        fov_v, fov_tok = r.keyword("fov")
        position = None if pos_v is None else r.as_tuple(pos_v, pos_tok, "position", 3)
        focal = None if focal_v is None else r.as_tuple(focal_v, focal_tok, "focal", 3)
        up = None if up_v is None else r.as_tuple(up_v, up_tok, "up", 3)
        fov = None if fov_v is None else r.as_number(fov_v, fov_tok, "fov")
        r.finish()
        return _build(
            p, verb_tok, CameraSet, position=position, focal=focal, up=up, fov=fov
        )

    if verb == "anim":
        kind, kind_tok = r.positional("an animation kind (rotate|orbit)")
        axis_v, axis_tok = r.keyword("axis", required=True)
        degrees_v, degrees_tok = r.keyword("degrees", required=True)
        frames_v, frames_tok = r.keyword("frames", required=True)
        r.finish()
        return _build(
            p, verb_tok, Anim,
            kind=kind, axis=r.as_axis(axis_v, axis_tok),
            degrees=r.as_number(degrees_v, degrees_tok, "degrees"),
            frames=r.as_int(frames_v, frames_tok, "frames"),
        )

    if verb == "snapshot":
        path, _ = r.positional_string("a file path")
        size_v, size_tok = r.keyword("size")
        size = None if size_v is None else r.as_size(size_v, size_tok, "size")
        r.finish()
        return Snapshot(path=path, size=size)

    if verb == "source":
        path, _ = r.positional_string("a file path")
        r.finish()
        return Source(path=path)

    if verb == "layout":
        cols_v, cols_tok = r.keyword("cols", required=True)
        cell_v, cell_tok = r.keyword("cell", required=True)
        cell = r.as_size(cell_v, cell_tok, "cell")
        r.finish()
        return _build(
            p, verb_tok, Layout,
            cols=r.as_int(cols_v, cols_tok, "cols"), cell_w=cell[0], cell_h=cell[1],
        )

    raise AssertionError(f"unhandled verb {verb}")  # pragma: no cover


def parse(text: str) -> CommandAst:
    """Parse exactly one command; raises ParseError with position info."""
    p = _Parser(tokenize(text))
    while p.peek().kind == "newline":
        p.advance()
    if p.peek().kind == "end":
        p.fail("empty input; expected a command")
    ast = _parse_command(p)
    while p.peek().kind == "newline":
        p.advance()
    if p.peek().kind != "end":
        p.fail(f"unexpected trailing {p.peek().text!r}; one command per line")
    return ast


def parse_script(text: str) -> list[tuple[int, CommandAst | ParseError]]:
    """Parse every line independently: (line number, AST or ParseError).

    Blank and comment-only lines produce nothing; a bad line yields its
    error without stopping the rest of the script.
    """
    results: list[tuple[int, CommandAst | ParseError]] = []
    for offset, line in enumerate(text.splitlines()):
        lineno = offset + 1
        try:
            tokens = tokenize(line, first_line=lineno)
            p = _Parser(tokens)
            if p.at_line_end():
                continue
            ast = _parse_command(p)
            if not p.at_line_end():
                p.fail(f"unexpected trailing {p.peek().text!r}; one command per line")
        except ParseError as err:
            results.append((lineno, err))
            continue
        results.append((lineno, ast))
    return results


# --- canonical formatting --------------------------------------------------


def _fmt_num(value: Number) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(value)


def _fmt_tuple(values) -> str:
    return "(" + ",".join(_fmt_num(v) for v in values) + ")"


def _fmt_string(value: str) -> str:
    out = []
    for ch in value:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def _fmt_value(value) -> str:
    if isinstance(value, tuple):
        return _fmt_tuple(value)
    if isinstance(value, str):
        return value
    return _fmt_num(value)


def _fmt_axis(axis: Axis) -> str:
    return axis if isinstance(axis, str) else str(axis)


def _fmt_view(view_id) -> str:
    return str(view_id)


def format_command(ast: CommandAst) -> str:
    """Canonical single-line source text; parse(format_command(a)) == a."""
    if isinstance(ast, Load):
        return f"load {_fmt_string(ast.path)} as {ast.name}"
    if isinstance(ast, Synth):
        parts = [f"synth {ast.generator}"]
        parts += [f"{k}={_fmt_value(v)}" for k, v in ast.params]
        parts.append(f"as {ast.name}")
        return " ".join(parts)
    if isinstance(ast, Slice):
        if isinstance(ast.index, tuple):
            index = f"{_fmt_num(ast.index[0])}..{_fmt_num(ast.index[1])}"
        else:
            index = _fmt_num(ast.index)
        return (
            f"slice {ast.source} axis={_fmt_axis(ast.axis)} index={index} as {ast.name}"
        )
    if isinstance(ast, Project):
        return (
            f"project {ast.source} axis={_fmt_axis(ast.axis)} "
            f"reducer={ast.reducer} as {ast.name}"
        )
    if isinstance(ast, Filter):
        parts = [f"filter {ast.source}"]
        if ast.lo is not None:
            parts.append(f"min={_fmt_num(ast.lo)}")
        if ast.hi is not None:
            parts.append(f"max={_fmt_num(ast.hi)}")
        return " ".join(parts)
    if isinstance(ast, ViewAdd):
        if ast.cell is None:
            return f"view add {ast.source}"
        return f"view add {ast.source} cell={_fmt_tuple(ast.cell)}"
    if isinstance(ast, ViewRemove):
        return f"view remove view={_fmt_view(ast.view_id)}"
    if isinstance(ast, IsoAdd):
        return f"iso add view={_fmt_view(ast.view_id)} level={_fmt_num(ast.level)}"
    if isinstance(ast, IsoRemove):
        if ast.level is None:
            return f"iso remove view={_fmt_view(ast.view_id)}"
        return f"iso remove view={_fmt_view(ast.view_id)} level={_fmt_num(ast.level)}"
    if isinstance(ast, CutAdd):
        if ast.axis is not None:
            placing = f"axis={_fmt_axis(ast.axis)}"
        else:
            placing = f"normal={_fmt_tuple(ast.normal)}"
        offset = ast.offset if isinstance(ast.offset, str) else _fmt_num(ast.offset)
        return f"cut add view={_fmt_view(ast.view_id)} {placing} offset={offset}"
    if isinstance(ast, PaletteSet):
        return f"palette set view={_fmt_view(ast.view_id)} name={ast.name}"
    if isinstance(ast, OpacitySet):
        points = " ".join(f"point={_fmt_tuple(pt)}" for pt in ast.points)
        return f"opacity set view={_fmt_view(ast.view_id)} {points}"
    if isinstance(ast, RangeSet):
        return (
            f"range set view={_fmt_view(ast.view_id)} "
            f"min={_fmt_num(ast.lo)} max={_fmt_num(ast.hi)}"
        )
    if isinstance(ast, HistShow):
        return f"hist show view={_fmt_view(ast.view_id)} bins={ast.bins}"
    if isinstance(ast, ColorbarShow):
        return f"colorbar show view={_fmt_view(ast.view_id)}"
    if isinstance(ast, Mode):
        return f"mode {ast.mode}"
    if isinstance(ast, CameraSet):
        parts = ["camera set"]
        if ast.position is not None:
            parts.append(f"position={_fmt_tuple(ast.position)}")
        if ast.focal is not None:
            parts.append(f"focal={_fmt_tuple(ast.focal)}")
        if ast.up is not None:
            parts.append(f"up={_fmt_tuple(ast.up)}")
        if ast.fov is not None:
            parts.append(f"fov={_fmt_num(ast.fov)}")
        return " ".join(parts)
    if isinstance(ast, Anim):
        return (
            f"anim {ast.kind} axis={_fmt_axis(ast.axis)} "
            f"degrees={_fmt_num(ast.degrees)} frames={ast.frames}"
        )
    if isinstance(ast, Snapshot):
        if ast.size is None:
            return f"snapshot {_fmt_string(ast.path)}"
        return f"snapshot {_fmt_string(ast.path)} size={ast.size[0]}x{ast.size[1]}"
    if isinstance(ast, Source):
        return f"source {_fmt_string(ast.path)}"
    if isinstance(ast, Layout):
        return f"layout cols={ast.cols} cell={ast.cell_w}x{ast.cell_h}"
    raise TypeError(f"cannot format {type(ast).__name__}")
