"""Textual syntax for PALOMA models.

The concrete grammar, one statement per ``;``:

    model     := statement* EOF
    statement := "param" IDENT "=" NUMBER ";"
               | "location" IDENT "=" "(" NUMBER "," NUMBER ")" ";"
               | "system" IDENT "=" constref ("||" constref)* ";"
               | IDENT "(" IDENT ")" ":=" body ";"            -- equation
    body      := term ("+" term)*
    term      := prefix "." constref | constref
    constref  := IDENT "(" IDENT ")"
    prefix    := "!!" "(" IDENT "," value ")" "@" "Ir" "{" range "}"
               | "??" "(" IDENT "," value ")" "@" "Wt" "{" value "}"
               | "!"  "(" IDENT "," value ")" "@" "Ir" "{" range "}"
               | "?"  "(" IDENT "," value ")" "@" "Prob" "{" value "}"
               | "(" IDENT "," value ")"                      -- spontaneous
    range     := "all" | IDENT ("," IDENT)*
    value     := NUMBER | IDENT                               -- param reference

``//`` starts a line comment. Rates must be positive, probabilities within
[0, 1], weights positive; parameters are plain named numbers, substituted by
value during parsing, and ``all`` expands to the set of declared locations.

Parsing never raises on bad input: every failure is reported as a positioned
Diagnostic and the parser resynchronises at the next ``;``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .model import (
    BroadcastIn,
    BroadcastOut,
    Choice,
    ConstantRef,
    Definitions,
    Location,
    ModelComponent,
    Prefix,
    PrefixGuarded,
    SeqComponent,
    Spontaneous,
    UnicastIn,
    UnicastOut,
    choice_leaves,
    format_number,
    render_seq,
)

__all__ = [
    "Diagnostic",
    "ModelDefinition",
    "ParseResult",
    "parse_model",
    "pretty_print",
    "validate",
]


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.severity}: {self.line}:{self.column}: {self.message}"


@dataclass
class ModelDefinition:
    """A parsed and elaborated model file."""

    params: dict[str, float] = field(default_factory=dict)
    locations: dict[str, Location] = field(default_factory=dict)
    equations: dict[tuple[str, str], SeqComponent] = field(default_factory=dict)
    systems: dict[str, ModelComponent] = field(default_factory=dict)

    def definitions(self) -> Definitions:
        return Definitions(self.locations, self.equations)


@dataclass
class ParseResult:
    definition: ModelDefinition | None
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return self.definition is not None


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|\|\||!!|\?\?|[!?()+{},;.@=])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"param", "location", "system", "all"}


@dataclass(frozen=True)
class _Token:
    kind: str  # "number" | "ident" | "op" | "eof"
    text: str
    line: int
    column: int


class _ParseError(Exception):
    def __init__(self, message: str, token: _Token):
        super().__init__(message)
        self.diagnostic = Diagnostic("error", message, token.line, token.column)


def _tokenize(text: str) -> tuple[list[_Token], list[Diagnostic]]:
    tokens: list[_Token] = []
    diagnostics: list[Diagnostic] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            diagnostics.append(
                Diagnostic("error", f"unexpected character {text[pos]!r}", line, col))
            pos += 1
            col += 1
            continue
        kind = match.lastgroup
        lexeme = match.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = match.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens, diagnostics


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []
        self.definition = ModelDefinition()

    # -- token helpers -------------------------------------------------

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.current
        if token.kind != "eof":
            self.pos += 1
        return token

    def expect(self, kind: str, text: str | None = None) -> _Token:
        token = self.current
        if token.kind != kind or (text is not None and token.text != text):
            wanted = text if text is not None else kind
            raise _ParseError(f"expected {wanted!r}, found {token.text or 'end of input'!r}",
                              token)
        return self.advance()

    def at(self, kind: str, text: str | None = None) -> bool:
        token = self.current
        return token.kind == kind and (text is None or token.text == text)

    def error(self, message: str, token: _Token | None = None) -> None:
        token = token or self.current
        self.diagnostics.append(Diagnostic("error", message, token.line, token.column))

    def synchronize(self) -> None:
        while not self.at("eof"):
            if self.advance().text == ";":
                return

    # -- grammar -------------------------------------------------------

    def parse(self) -> None:
        while not self.at("eof"):
            try:
                self.statement()
            except _ParseError as exc:
                self.diagnostics.append(exc.diagnostic)
                self.synchronize()

    def statement(self) -> None:
        if self.at("ident", "param"):
            self.param_stmt()
        elif self.at("ident", "location"):
            self.location_stmt()
        elif self.at("ident", "system"):
            self.system_stmt()
        elif self.at("ident"):
            self.equation_stmt()
        else:
            token = self.current
            raise _ParseError(f"expected a statement, found {token.text!r}", token)

    def param_stmt(self) -> None:
        self.advance()
        name = self.ident("parameter name")
        self.expect("op", "=")
        token = self.expect("number")
        self.expect("op", ";")
        value = self.number(token)
        if name.text in self.definition.params:
            self.error(f"duplicate parameter {name.text!r}", name)
        elif not value > 0:
            self.error(f"parameter {name.text!r} must be positive", token)
        else:
            self.definition.params[name.text] = value

    def location_stmt(self) -> None:
        self.advance()
        name = self.ident("location name")
        self.expect("op", "=")
        self.expect("op", "(")
        x = self.number(self.expect("number"))
        self.expect("op", ",")
        y = self.number(self.expect("number"))
        self.expect("op", ")")
        self.expect("op", ";")
        if name.text in self.definition.locations:
            self.error(f"duplicate location {name.text!r}", name)
        else:
            self.definition.locations[name.text] = Location(name.text, (x, y))

    def system_stmt(self) -> None:
        self.advance()
        name = self.ident("system name")
        self.expect("op", "=")
        parts = [self.constref()]
        while self.at("op", "||"):
            self.advance()
            parts.append(self.constref())
        self.expect("op", ";")
        if name.text in self.definition.systems:
            self.error(f"duplicate system {name.text!r}", name)
        else:
            self.definition.systems[name.text] = tuple(
                SeqComponent(ref, ref.location) for ref in parts)

    def equation_stmt(self) -> None:
        name = self.ident("constant name")
        self.expect("op", "(")
        loc = self.location_name()
        self.expect("op", ")")
        self.expect("op", ":=")
        body = self.body(loc)
        self.expect("op", ";")
        key = (name.text, loc.name)
        if key in self.definition.equations:
            self.error(f"duplicate equation for {name.text}({loc.name})", name)
        else:
            self.definition.equations[key] = body

    def body(self, location: Location) -> SeqComponent:
        term = self.term(location)
        while self.at("op", "+"):
            self.advance()
            term = SeqComponent(Choice(term, self.term(location)), location)
        return term

    def term(self, location: Location) -> SeqComponent:
        if self.at("ident"):
            ref = self.constref()
            return SeqComponent(ref, ref.location)
        prefix = self.prefix()
        self.expect("op", ".")
        cont = self.constref()
        return SeqComponent(PrefixGuarded(prefix, cont), location)

    def constref(self) -> ConstantRef:
        name = self.ident("constant name")
        self.expect("op", "(")
        loc = self.location_name()
        self.expect("op", ")")
        return ConstantRef(name.text, loc)

    def prefix(self) -> Prefix:
        if self.at("op", "!!"):
            self.advance()
            label, value, vtok = self.label_value()
            influence = self.range_clause("Ir")
            self.check_rate(value, vtok)
            return UnicastOut(label, value, influence)
        if self.at("op", "??"):
            self.advance()
            label, prob, ptok = self.label_value()
            self.expect("op", "@")
            self.keyword_ident("Wt")
            self.expect("op", "{")
            weight, wtok = self.value()
            self.expect("op", "}")
            self.check_prob(prob, ptok)
            self.check_positive(weight, "weight", wtok)
            return UnicastIn(label, prob, weight)
        if self.at("op", "!"):
            self.advance()
            label, value, vtok = self.label_value()
            influence = self.range_clause("Ir")
            self.check_rate(value, vtok)
            return BroadcastOut(label, value, influence)
        if self.at("op", "?"):
            self.advance()
            label, prob, ptok = self.label_value()
            self.expect("op", "@")
            self.keyword_ident("Prob")
            self.expect("op", "{")
            recv, rtok = self.value()
            self.expect("op", "}")
            self.check_prob(prob, ptok)
            self.check_prob(recv, rtok)
            return BroadcastIn(label, prob, recv)
        if self.at("op", "("):
            label, value, vtok = self.label_value()
            self.check_rate(value, vtok)
            return Spontaneous(label, value)
        raise _ParseError(f"expected a prefix, found {self.current.text!r}", self.current)

    def label_value(self) -> tuple[str, float, _Token]:
        self.expect("op", "(")
        label = self.ident("action label")
        self.expect("op", ",")
        value, token = self.value()
        self.expect("op", ")")
        return label.text, value, token

    def range_clause(self, keyword: str) -> frozenset[Location]:
        self.expect("op", "@")
        self.keyword_ident(keyword)
        self.expect("op", "{")
        if self.at("ident", "all"):
            self.advance()
            self.expect("op", "}")
            locations = frozenset(self.definition.locations.values())
            if not locations:
                raise _ParseError("'all' range used but no locations are declared",
                                  self.current)
            return locations
        names = [self.location_name()]
        while self.at("op", ","):
            self.advance()
            names.append(self.location_name())
        self.expect("op", "}")
        return frozenset(names)

    def value(self) -> tuple[float, _Token]:
        if self.at("number"):
            token = self.advance()
            return self.number(token), token
        if self.at("ident"):
            token = self.advance()
            if token.text in self.definition.params:
                return self.definition.params[token.text], token
            raise _ParseError(f"undeclared parameter {token.text!r}", token)
        raise _ParseError(
            f"expected a number or parameter, found {self.current.text!r}", self.current)

    def number(self, token: _Token) -> float:
        value = float(token.text)
        if not math.isfinite(value):
            raise _ParseError(f"number {token.text!r} is not finite", token)
        return value

    def ident(self, what: str) -> _Token:
        token = self.current
        if token.kind != "ident" or token.text in _KEYWORDS:
            raise _ParseError(f"expected {what}, found {token.text or 'end of input'!r}",
                              token)
        return self.advance()

    def keyword_ident(self, expected: str) -> None:
        token = self.current
        if token.kind != "ident" or token.text != expected:
            raise _ParseError(f"expected {expected!r}, found {token.text!r}", token)
        self.advance()

    def location_name(self) -> Location:
        token = self.ident("location name")
        loc = self.definition.locations.get(token.text)
        if loc is None:
            raise _ParseError(f"undeclared location {token.text!r}", token)
        return loc

    def check_rate(self, value: float, token: _Token) -> None:
        if not value > 0:
            raise _ParseError(f"rate must be positive, got {format_number(value)}", token)

    def check_positive(self, value: float, what: str, token: _Token) -> None:
        if not value > 0:
            raise _ParseError(f"{what} must be positive, got {format_number(value)}", token)

    def check_prob(self, value: float, token: _Token) -> None:
        if not 0.0 <= value <= 1.0:
            raise _ParseError(f"probability out of range: {format_number(value)}", token)


def parse_model(text: str) -> ParseResult:
    """Parse model source into an elaborated definition.

    Returns the definition together with any diagnostics; the definition is
    ``None`` whenever an error diagnostic was produced.
    """
    tokens, diagnostics = _tokenize(text)
    parser = _Parser(tokens)
    parser.parse()
    diagnostics.extend(parser.diagnostics)
    if any(d.severity == "error" for d in diagnostics):
        return ParseResult(None, diagnostics)
    return ParseResult(parser.definition, diagnostics)


def validate(definition: ModelDefinition) -> list[Diagnostic]:
    """Cross-equation checks; errors here make the model unusable."""
    out: list[Diagnostic] = []
    defs = definition.definitions()

    def err(message: str) -> None:
        out.append(Diagnostic("error", message, 0, 0))

    def warn(message: str) -> None:
        out.append(Diagnostic("warning", message, 0, 0))

    # Location coordinates must be pairwise distinct so that geometric
    # matching of locations back to names stays unambiguous.
    by_point: dict[tuple[float, float], str] = {}
    for name, loc in definition.locations.items():
        if loc.point in by_point:
            err(f"locations {by_point[loc.point]!r} and {name!r} share coordinates "
                f"{loc.point}")
        else:
            by_point[loc.point] = name

    # An equation's body lives at the equation's own location; in particular
    # an alias may not silently relocate the agent.
    for (name, locname), body in definition.equations.items():
        if body.location.name != locname:
            err(f"{name}({locname}): body is located at {body.location.name}; "
                "location changes need a prefix continuation")

    # Every constant reference must have a defining equation at its target
    # location, both in equation bodies and in system definitions.
    def check_refs(owner: str, comp: SeqComponent) -> None:
        body = comp.body
        if isinstance(body, ConstantRef):
            if (body.name, body.location.name) not in definition.equations:
                err(f"{owner}: reference to undefined {body.name}({body.location.name})")
        elif isinstance(body, Choice):
            if body.left.location != comp.location or body.right.location != comp.location:
                err(f"{owner}: choice operands must stay at {comp.location.name}")
            check_refs(owner, body.left)
            check_refs(owner, body.right)
        else:
            cont = body.continuation
            if (cont.name, cont.location.name) not in definition.equations:
                err(f"{owner}: continuation {cont.name}({cont.location.name}) "
                    "has no defining equation")

    for (name, locname), body in definition.equations.items():
        check_refs(f"{name}({locname})", body)
    for sysname, component in definition.systems.items():
        for part in component:
            check_refs(f"system {sysname}", part)

    if any(d.severity == "error" for d in out):
        return out

    # Constant definitions must be guarded: following aliases and choice
    # operands from any equation must terminate in prefixes.
    for (name, locname), body in definition.equations.items():
        try:
            defs.resolve(body)
        except Exception as exc:  # ModelError carries the offending cycle
            err(f"{name}({locname}): {exc}")
    if any(d.severity == "error" for d in out):
        return out

    # Each agent may carry at most one input prefix per label within one
    # choice tree; receive probabilities have no meaning for repeated inputs.
    for (name, locname), body in definition.equations.items():
        seen: dict[tuple[str, str], int] = {}
        for leaf in choice_leaves(defs, body):
            prefix = leaf.prefix
            if isinstance(prefix, (UnicastIn, BroadcastIn)):
                kind = "??" if isinstance(prefix, UnicastIn) else "?"
                seen[(kind, prefix.label)] = seen.get((kind, prefix.label), 0) + 1
        for (kind, label), count in seen.items():
            if count > 1:
                err(f"{name}({locname}): {count} {kind}{label} input prefixes "
                    "in one choice; at most one is allowed")

    # A unicast output whose range holds no equation with a matching input
    # label can never fire; certain blocking is worth a warning.
    receivers_of: dict[str, set[str]] = {}
    for (eq_name, eq_loc), eq_body in definition.equations.items():
        for eq_leaf in _syntactic_leaves(eq_body):
            if isinstance(eq_leaf.prefix, UnicastIn):
                receivers_of.setdefault(eq_leaf.prefix.label, set()).add(eq_loc)
    for (name, locname), body in definition.equations.items():
        for leaf in _syntactic_leaves(body):
            prefix = leaf.prefix
            if isinstance(prefix, UnicastOut):
                range_names = {loc.name for loc in prefix.influence}
                if not range_names & receivers_of.get(prefix.label, set()):
                    warn(f"{name}({locname}): unicast !!{prefix.label} has no possible "
                         "receiver anywhere in its influence range")
    return out


def _syntactic_leaves(comp: SeqComponent) -> list[PrefixGuarded]:
    body = comp.body
    if isinstance(body, Choice):
        return _syntactic_leaves(body.left) + _syntactic_leaves(body.right)
    if isinstance(body, PrefixGuarded):
        return [body]
    return []


def pretty_print(definition: ModelDefinition) -> str:
    """Render a definition back to source; reparsing yields an identical one."""
    all_locations = frozenset(definition.locations.values())
    lines: list[str] = []
    for name, value in definition.params.items():
        lines.append(f"param {name} = {format_number(value)};")
    if definition.params:
        lines.append("")
    for name, loc in definition.locations.items():
        x, y = loc.point
        lines.append(f"location {name} = ({format_number(x)}, {format_number(y)});")
    if definition.locations:
        lines.append("")
    for (name, locname), body in definition.equations.items():
        lines.append(f"{name}({locname}) := {render_seq(body, all_locations)};")
    if definition.equations:
        lines.append("")
    for name, component in definition.systems.items():
        parts = " || ".join(render_seq(part, all_locations) for part in component)
        lines.append(f"system {name} = {parts};")
    return "\n".join(lines).strip() + "\n"
