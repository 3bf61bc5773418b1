"""Parser and serializer for the model description language.

A model is a newline-separated list of statements. ``#`` starts a comment
that runs to the end of the line, blank lines are skipped, and whitespace
around tokens is not significant. Statement forms:

    dep ~ term + term + ...      regression (dep regressed on the terms)
    lat =~ term + term + ...     loading (lat measured by the terms)
    a ~~ term                    covariance between a and the term
    v1, v2, ... is ordinal       type declaration for the listed variables

A term is a variable name with an optional numeric prefix, ``2.5*name``,
which pins the corresponding parameter to that value instead of leaving
it free. The prefix is accepted on right-hand-side terms only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

from .errors import ParseError

REGRESSION = "~"
LOADING = "=~"
COVARIANCE = "~~"
TYPEDECL = "is"

#: Type tags accepted by the type-declaration statement.
KNOWN_TYPE_TAGS = ("ordinal",)

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_OPERATOR_RE = re.compile(r"=~|~~|~")
_IS_RE = re.compile(r"\bis\b")
# A '+' separates terms unless it sits inside a scientific-notation prefix
# such as 1e+16: preceded by digit-then-e and followed by a digit.
_TERM_SEP_RE = re.compile(r"(?<![0-9.][eE])\+|(?<=[0-9.][eE])\+(?!\d)")


class Term(NamedTuple):
    """Right-hand-side entry: a variable, optionally pinned to a value."""

    name: str
    fixed: float | None = None


@dataclass(frozen=True)
class Statement:
    """One parsed statement.

    kind is one of the module constants REGRESSION, LOADING, COVARIANCE,
    TYPEDECL. lhs holds exactly one name except for TYPEDECL, where it
    lists every declared variable. type_tag is set for TYPEDECL only.
    """

    kind: str
    lhs: tuple[str, ...]
    rhs: tuple[Term, ...] = ()
    type_tag: str | None = None


@dataclass
class ModelDescription:
    """Ordered collection of statements making up one model."""

    statements: list[Statement] = field(default_factory=list)

    def by_kind(self, kind: str) -> Iterator[Statement]:
        return (st for st in self.statements if st.kind == kind)

    @property
    def regressions(self) -> list[Statement]:
        return list(self.by_kind(REGRESSION))

    @property
    def loadings(self) -> list[Statement]:
        return list(self.by_kind(LOADING))

    @property
    def covariances(self) -> list[Statement]:
        return list(self.by_kind(COVARIANCE))

    @property
    def typedecls(self) -> list[Statement]:
        return list(self.by_kind(TYPEDECL))

    def __eq__(self, other):
        if not isinstance(other, ModelDescription):
            return NotImplemented
        return self.statements == other.statements


def _check_name(token: str, lineno: int) -> str:
    token = token.strip()
    if not _NAME_RE.match(token):
        raise ParseError(f"invalid variable name {token!r}", lineno)
    if token == "is":
        raise ParseError("'is' is a reserved word and cannot name a variable", lineno)
    return token


def _parse_term(token: str, lineno: int) -> Term:
    token = token.strip()
    if not token:
        raise ParseError("empty term (dangling '+'?)", lineno)
    if "*" in token:
        head, _, tail = token.partition("*")
        if "*" in tail:
            raise ParseError(f"more than one '*' in term {token!r}", lineno)
        try:
            value = float(head.strip())
        except ValueError:
            raise ParseError(
                f"fixed-value prefix {head.strip()!r} is not numeric", lineno
            ) from None
        return Term(_check_name(tail, lineno), value)
    return Term(_check_name(token, lineno))


def _parse_typedecl(line: str, lineno: int) -> Statement:
    parts = _IS_RE.split(line)
    if len(parts) != 2:
        raise ParseError("malformed type declaration", lineno)
    names_part, tag = parts[0], parts[1].strip()
    if tag not in KNOWN_TYPE_TAGS:
        raise ParseError(f"unknown type tag {tag!r}", lineno)
    names = [_check_name(tok, lineno) for tok in names_part.split(",")]
    if not names:
        raise ParseError("type declaration lists no variables", lineno)
    return Statement(TYPEDECL, tuple(names), type_tag=tag)


def _parse_operator_line(line: str, op: re.Match, lineno: int) -> Statement:
    kind = op.group(0)
    lhs_part, rhs_part = line[: op.start()], line[op.end() :]
    if _OPERATOR_RE.search(rhs_part):
        raise ParseError("more than one operator on a line", lineno)
    lhs = _check_name(lhs_part, lineno)
    terms = tuple(_parse_term(tok, lineno) for tok in _TERM_SEP_RE.split(rhs_part))
    if not terms:
        raise ParseError("empty right-hand side", lineno)
    if kind == COVARIANCE and len(terms) != 1:
        raise ParseError("covariance takes exactly one right-hand-side term", lineno)
    return Statement(kind, (lhs,), terms)


def _duplicate_key(st: Statement):
    # A covariance pair is unordered, so a ~~ b and b ~~ a collide.
    if st.kind == COVARIANCE:
        pair = frozenset((st.lhs[0], st.rhs[0].name))
        return (COVARIANCE, pair)
    if st.kind == TYPEDECL:
        return None
    return (st.kind, st.lhs[0], tuple(t.name for t in st.rhs))


def parse(text: str) -> ModelDescription:
    """Parse model text into a ModelDescription.

    Raises ParseError (with the offending 1-based line number) on malformed
    input. Parsing has no side effects and no hidden state: the same text
    always yields an equal description.
    """
    desc = ModelDescription()
    seen: set = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        op = _OPERATOR_RE.search(line)
        if op is not None:
            st = _parse_operator_line(line, op, lineno)
        elif _IS_RE.search(line):
            st = _parse_typedecl(line, lineno)
        else:
            raise ParseError(f"unrecognised statement {line!r}", lineno)
        key = _duplicate_key(st)
        if key is not None:
            if key in seen:
                raise ParseError(f"duplicate statement {line!r}", lineno)
            seen.add(key)
        desc.statements.append(st)
    return desc


def _format_term(term: Term) -> str:
    if term.fixed is None:
        return term.name
    return f"{term.fixed!r}*{term.name}"


def serialize(desc: ModelDescription) -> str:
    """Render a description back to model text.

    parse(serialize(parse(t))) equals parse(t) for any well-formed t;
    formatting details (whitespace, float rendering) may differ from the
    original source.
    """
    lines = []
    for st in desc.statements:
        if st.kind == TYPEDECL:
            lines.append(f"{', '.join(st.lhs)} is {st.type_tag}")
        else:
            rhs = " + ".join(_format_term(t) for t in st.rhs)
            lines.append(f"{st.lhs[0]} {st.kind} {rhs}")
    return "\n".join(lines) + ("\n" if lines else "")
