"""Propositional-logic core: the bracketed artificial language and its relation oracle.

Sentences are built from six variables (p1..p6) and the connectives not/and/or,
written with a complete binary bracketing.  Every formula denotes a set of
satisfying assignments out of the 64 possible valuations, and any two formulas
stand in exactly one of seven semantic relations, decided by exact enumeration.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

NUM_VARIABLES = 6
NUM_ASSIGNMENTS = 1 << NUM_VARIABLES
FULL_MASK = (1 << NUM_ASSIGNMENTS) - 1

VARIABLES = tuple(f"p{i}" for i in range(1, NUM_VARIABLES + 1))
CONNECTIVES = ("not", "and", "or")
LPAREN = "("
RPAREN = ")"

# Tree models see only words; sequence models additionally see the parentheses.
TREE_VOCABULARY = VARIABLES + CONNECTIVES
SEQUENCE_VOCABULARY = TREE_VOCABULARY + (LPAREN, RPAREN)

_TOKEN_SET = frozenset(SEQUENCE_VOCABULARY)
_VARIABLE_INDEX = {tok: i + 1 for i, tok in enumerate(VARIABLES)}

# Bitmask over assignment indices 0..63 for "variable i is true"; assignment a
# makes p_i true iff bit (i-1) of a is set.
_VAR_MASKS = tuple(
    sum(1 << a for a in range(NUM_ASSIGNMENTS) if (a >> i) & 1)
    for i in range(NUM_VARIABLES)
)


class FormulaSyntaxError(ValueError):
    """Base class for malformed-sentence errors."""


class UnknownTokenError(FormulaSyntaxError):
    def __init__(self, item: str, position: int):
        super().__init__(f"unknown token {item!r} at position {position}")
        self.item = item
        self.position = position


class UnbalancedParensError(FormulaSyntaxError):
    pass


class UnexpectedTokenError(FormulaSyntaxError):
    def __init__(self, token: str, position: int):
        super().__init__(f"unexpected token {token!r} at position {position}")
        self.token = token
        self.position = position


class TrailingInputError(FormulaSyntaxError):
    def __init__(self, position: int):
        super().__init__(f"trailing input starting at position {position}")
        self.position = position


@dataclass(frozen=True)
class Var:
    index: int

    def __post_init__(self):
        if not 1 <= self.index <= NUM_VARIABLES:
            raise ValueError(f"variable index must be in 1..{NUM_VARIABLES}, got {self.index}")


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        if self.op not in ("and", "or"):
            raise ValueError(f"binary op must be 'and' or 'or', got {self.op!r}")


Formula = Union[Var, Not, Bin]


@dataclass(frozen=True)
class TruthSet:
    """Subset of the 64 assignments, as a membership bitmask."""

    mask: int

    def __post_init__(self):
        if not 0 <= self.mask <= FULL_MASK:
            raise ValueError("mask out of range for a 64-assignment universe")

    @classmethod
    def empty(cls) -> "TruthSet":
        return cls(0)

    @classmethod
    def universal(cls) -> "TruthSet":
        return cls(FULL_MASK)

    def complement(self) -> "TruthSet":
        return TruthSet(FULL_MASK & ~self.mask)

    def union(self, other: "TruthSet") -> "TruthSet":
        return TruthSet(self.mask | other.mask)

    def intersection(self, other: "TruthSet") -> "TruthSet":
        return TruthSet(self.mask & other.mask)

    def count(self) -> int:
        return self.mask.bit_count()

    def contains(self, assignment: int) -> bool:
        return bool((self.mask >> assignment) & 1)

    def __or__(self, other: "TruthSet") -> "TruthSet":
        return self.union(other)

    def __and__(self, other: "TruthSet") -> "TruthSet":
        return self.intersection(other)


class Relation(enum.Enum):
    """The seven mutually exclusive semantic relations, in canonical index order."""

    EQUIVALENCE = "="
    FORWARD_ENTAILMENT = "<"
    REVERSE_ENTAILMENT = ">"
    NEGATION = "^"
    ALTERNATION = "|"
    COVER = "v"
    INDEPENDENCE = "#"

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def from_label(cls, label: str) -> "Relation":
        try:
            return cls(label)
        except ValueError:
            raise ValueError(f"unknown relation label {label!r}") from None

    def converse(self) -> "Relation":
        if self is Relation.FORWARD_ENTAILMENT:
            return Relation.REVERSE_ENTAILMENT
        if self is Relation.REVERSE_ENTAILMENT:
            return Relation.FORWARD_ENTAILMENT
        return self


RELATIONS = tuple(Relation)
RELATION_INDEX = {r: i for i, r in enumerate(RELATIONS)}


def tokenize(text: str) -> list[str]:
    """Split a sentence into tokens, validating each against the vocabulary."""
    tokens = text.split()
    for position, item in enumerate(tokens):
        if item not in _TOKEN_SET:
            raise UnknownTokenError(item, position)
    return tokens


def render_tokens(formula: Formula) -> list[str]:
    """Canonical complete binary bracketing of a formula.

    Var(i) -> "pi"; Not(c) -> "( not C )"; Bin(op,l,r) -> "( L ( op R ) )".
    """
    out: list[str] = []
    _render_into(formula, out)
    return out


def _render_into(formula: Formula, out: list[str]) -> None:
    if isinstance(formula, Var):
        out.append(VARIABLES[formula.index - 1])
    elif isinstance(formula, Not):
        out.append(LPAREN)
        out.append("not")
        _render_into(formula.child, out)
        out.append(RPAREN)
    else:
        out.append(LPAREN)
        _render_into(formula.left, out)
        out.append(LPAREN)
        out.append(formula.op)
        _render_into(formula.right, out)
        out.append(RPAREN)
        out.append(RPAREN)


def render(formula: Formula) -> str:
    return " ".join(render_tokens(formula))


def parse(tokens: list[str]) -> Formula:
    """Parse a token sequence in the canonical bracketing back into a formula."""
    formula, position = _parse_formula(tokens, 0)
    if position != len(tokens):
        raise TrailingInputError(position)
    return formula


def parse_sentence(text: str) -> Formula:
    return parse(tokenize(text))


def _parse_formula(tokens: list[str], position: int) -> tuple[Formula, int]:
    if position >= len(tokens):
        raise UnbalancedParensError(f"unexpected end of input at position {position}")
    token = tokens[position]
    if token in _VARIABLE_INDEX:
        return Var(_VARIABLE_INDEX[token]), position + 1
    if token != LPAREN:
        raise UnexpectedTokenError(token, position)
    if position + 1 >= len(tokens):
        raise UnbalancedParensError(f"unexpected end of input at position {position + 1}")
    if tokens[position + 1] == "not":
        child, position = _parse_formula(tokens, position + 2)
        position = _expect(tokens, position, RPAREN)
        return Not(child), position
    left, position = _parse_formula(tokens, position + 1)
    position = _expect(tokens, position, LPAREN)
    if position >= len(tokens):
        raise UnbalancedParensError(f"unexpected end of input at position {position}")
    op = tokens[position]
    if op not in ("and", "or"):
        raise UnexpectedTokenError(op, position)
    right, position = _parse_formula(tokens, position + 1)
    position = _expect(tokens, position, RPAREN)
    position = _expect(tokens, position, RPAREN)
    return Bin(op, left, right), position


def _expect(tokens: list[str], position: int, token: str) -> int:
    if position >= len(tokens):
        raise UnbalancedParensError(f"unexpected end of input at position {position}")
    if tokens[position] != token:
        raise UnexpectedTokenError(tokens[position], position)
    return position + 1


def satisfying_set(formula: Formula) -> TruthSet:
    """Exact semantics: the set of assignments making the formula true."""
    return TruthSet(_satisfying_mask(formula))


def _satisfying_mask(formula: Formula) -> int:
    if isinstance(formula, Var):
        return _VAR_MASKS[formula.index - 1]
    if isinstance(formula, Not):
        return FULL_MASK & ~_satisfying_mask(formula.child)
    left = _satisfying_mask(formula.left)
    right = _satisfying_mask(formula.right)
    return left & right if formula.op == "and" else left | right


def connective_count(formula: Formula) -> int:
    if isinstance(formula, Var):
        return 0
    if isinstance(formula, Not):
        return 1 + connective_count(formula.child)
    return 1 + connective_count(formula.left) + connective_count(formula.right)


def relation(a: TruthSet, b: TruthSet) -> Relation:
    """Seven-way relation between two truth sets, decided in a fixed order.

    The order (=, <, >, ^, |, v, #) makes the oracle total even on the
    degenerate empty/universal sets a random grammar can produce.
    """
    if a.mask == b.mask:
        return Relation.EQUIVALENCE
    if a.mask & ~b.mask == 0:
        return Relation.FORWARD_ENTAILMENT
    if b.mask & ~a.mask == 0:
        return Relation.REVERSE_ENTAILMENT
    disjoint = a.mask & b.mask == 0
    exhaustive = a.mask | b.mask == FULL_MASK
    if disjoint and exhaustive:
        return Relation.NEGATION
    if disjoint:
        return Relation.ALTERNATION
    if exhaustive:
        return Relation.COVER
    return Relation.INDEPENDENCE


def relation_of_pair(premise: Formula, hypothesis: Formula) -> Relation:
    return relation(satisfying_set(premise), satisfying_set(hypothesis))
